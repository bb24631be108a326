"""Command line interface.

``drl-agent train``
    Train a policy against generated instances served by the scheduling
    engine's CLI and write a checkpoint.

``drl-agent infer [instance]``
    Load a checkpoint and schedule.  With an instance argument the
    command spawns its own servers and prints a JSON summary; without
    one it speaks the wire protocol on stdin/stdout until EOF, which is
    the shape benchmark harnesses expect from ``--agent-cmd``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .checkpoint import load_policy
from .config import PolicyConfig
from .errors import ServerError, SnapshotError, TrainingAborted
from .infer import run_client, run_inference
from .train import TrainSettings, train

__all__ = ["main"]

_INT_TUPLES = {"heads", "actor_hidden", "critic_hidden"}
_FLOAT_TUPLES = {"betas"}


def _tuple_arg(kind):
    def parse(text: str):
        try:
            return tuple(kind(part) for part in text.split(","))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(
                f"expected comma-separated {kind.__name__}s, got {text!r}"
            ) from exc
    return parse


def _scale_arg(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected 'auto' or a number, got {text!r}") from exc


def _add_config_overrides(parser: argparse.ArgumentParser) -> list[str]:
    group = parser.add_argument_group(
        "policy overrides", "any omitted flag keeps its default")
    defaults = PolicyConfig()
    names = []
    for field in dataclasses.fields(PolicyConfig):
        default = getattr(defaults, field.name)
        flag = "--" + field.name.replace("_", "-")
        kwargs: dict = {"default": None, "help": f"default: {default}"}
        if field.name in _INT_TUPLES:
            kwargs.update(type=_tuple_arg(int), metavar="N,N,...")
        elif field.name in _FLOAT_TUPLES:
            kwargs.update(type=_tuple_arg(float), metavar="X,X")
        elif field.name == "return_scale":
            kwargs.update(type=_scale_arg, metavar="auto|X")
        elif isinstance(default, bool):
            kwargs = {"default": None,
                      "action": argparse.BooleanOptionalAction,
                      "help": f"default: {default}"}
        elif isinstance(default, int):
            kwargs.update(type=int)
        elif isinstance(default, float):
            kwargs.update(type=float)
        else:
            kwargs.update(type=str)
        group.add_argument(flag, **kwargs)
        names.append(field.name)
    return names


def _config_from_args(args, names: list[str]) -> PolicyConfig:
    data = PolicyConfig().to_dict()
    for name in names:
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return PolicyConfig.from_dict(data)


def _build_parser() -> tuple[argparse.ArgumentParser, list[str]]:
    parser = argparse.ArgumentParser(
        prog="drl-agent",
        description="graph-attention scheduling agent for the ipps engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy and write a checkpoint")
    p.add_argument("--jobs", type=int, default=5,
                   help="jobs per generated training instance (default 5)")
    p.add_argument("--machines", type=int, default=3,
                   help="machines per generated instance (default 3)")
    p.add_argument("--epochs", type=int, default=200,
                   help="update cycles to run (default 200)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gen-config",
                   help="JSON file with generator-config overrides, passed "
                        "through to 'ipps generate --cfg'")
    p.add_argument("--reward", default="est:mean/mean/max",
                   help="server reward shaping for training episodes "
                        "(default est:mean/mean/max)")
    p.add_argument("--val-instances", type=int, default=20,
                   help="held-out instances for validation (default 20)")
    p.add_argument("--val-every", type=int, default=10,
                   help="validate every N epochs (default 10)")
    p.add_argument("--env-batch", type=int, default=3,
                   help="parallel training servers (default 3)")
    p.add_argument("--server-cmd", default="ipps",
                   help="command for the scheduling engine CLI (default ipps)")
    p.add_argument("--workdir",
                   help="directory for generated instance files "
                        "(default: a temporary directory)")
    p.add_argument("--device", default="cpu")
    p.add_argument("-o", "--out", default="checkpoint.pt",
                   help="checkpoint output path (default checkpoint.pt)")
    p.add_argument("--quiet", action="store_true",
                   help="suppress progress lines on stderr")
    config_names = _add_config_overrides(p)

    p = sub.add_parser(
        "infer", help="schedule with a trained checkpoint")
    p.add_argument("instance", nargs="?",
                   help="instance file or bundled name; omit to speak the "
                        "wire protocol on stdin/stdout")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    p.add_argument("--repeats", type=int, default=1,
                   help="sampled episodes per instance (default 1)")
    p.add_argument("--parallel", type=int, default=1,
                   help="parallel servers to split repeats across (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reward", default="naive",
                   help="server reward channel (default naive)")
    p.add_argument("--server-cmd", default="ipps",
                   help="command for the scheduling engine CLI (default ipps)")
    p.add_argument("--final", action="store_true",
                   help="use the last-epoch weights instead of the "
                        "best-validation weights")
    p.add_argument("--device", default="cpu")
    p.add_argument("-o", "--out",
                   help="write the best episode's schedule JSON here")
    return parser, config_names


def _cmd_train(args, config_names: list[str]) -> int:
    gen_config = {}
    if args.gen_config:
        gen_config = json.loads(Path(args.gen_config).read_text())
        if not isinstance(gen_config, dict):
            raise ValueError("--gen-config must hold a JSON object")
    config = _config_from_args(args, config_names)
    settings = TrainSettings(
        jobs=args.jobs, machines=args.machines, epochs=args.epochs,
        seed=args.seed, gen_config=gen_config, reward=args.reward,
        val_instances=args.val_instances, val_every=args.val_every,
        env_batch=args.env_batch, server_cmd=args.server_cmd,
        workdir=args.workdir, device=args.device)
    progress = None if args.quiet else (
        lambda line: print(line, file=sys.stderr, flush=True))
    result = train(settings, config, out=args.out, progress=progress)
    summary = {
        "checkpoint": str(result.checkpoint),
        "epochs": args.epochs,
        "episodes": result.episodes,
        "epoch0_val": result.epoch0_val,
        "best_val": result.best_val,
        "best_epoch": result.best_epoch,
        "final_val": result.final_val,
        "actions": result.stats.actions,
        "wait_actions": result.stats.wait_actions,
        "illegal_actions": result.stats.illegal,
        "error_replies": result.stats.error_replies,
        "seconds": round(result.seconds, 1),
    }
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_infer(args) -> int:
    policy, _, _ = load_policy(args.ckpt, final=args.final)
    policy = policy.to(args.device)
    if args.instance is None:
        # stdout carries the protocol; report on stderr only.
        result = run_client(policy, mode=args.mode, seed=args.seed,
                            device=args.device)
        print(f"client mode: {len(result.makespans)} episode(s), "
              f"mean makespan {result.mean_makespan:.2f}",
              file=sys.stderr)
        return 0
    result = run_inference(
        args.instance, policy, mode=args.mode, repeats=args.repeats,
        parallel=args.parallel, seed=args.seed, reward=args.reward,
        server_cmd=args.server_cmd, keep_schedules=args.out is not None,
        device=args.device)
    if args.out and result.best_schedule is not None:
        Path(args.out).write_text(json.dumps(result.best_schedule, indent=2))
    summary = {
        "instance": result.instance,
        "mode": result.mode,
        "episodes": len(result.makespans),
        "best_makespan": result.best_makespan,
        "mean_makespan": round(result.mean_makespan, 2),
        "makespans": result.makespans,
        "seconds": round(result.seconds, 2),
    }
    if args.out:
        summary["schedule"] = str(args.out)
    print(json.dumps(summary, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser, config_names = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args, config_names)
        return _cmd_infer(args)
    except (ServerError, SnapshotError, TrainingAborted, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
