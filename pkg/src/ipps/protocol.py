"""Wire protocol v1: drive episodes from an external agent process.

Line-delimited JSON over a pair of text streams (stdio by default, or a
single-client TCP socket).  Per episode the server sends::

    {"type": "hello", "schema": 1, "episode": k, "instance": {...}}
    {"type": "state", "seq": 0, ...graph snapshot fields...}

and then alternates: the client answers each state with::

    {"type": "act", "seq": n, "pair": [job, op, machine]}
    {"type": "act", "seq": n, "wait": true}

and the server replies with the next state (``seq`` = n+1, carrying the
transition's reward) until the episode ends with::

    {"type": "terminal", "episode": k, "makespan": ..., "total_reward": ...,
     "schedule": {...}}

A malformed or illegal act yields ``{"type": "error", "code", "message"}``
followed by a re-send of the current state with the *same* seq, so the
client can retry.  Codes: ``bad-message`` (unparseable or wrong shape),
``schema`` (wrong schema/type), ``stale-seq`` (act.seq != state.seq), and
``unknown-pair`` (pair not in the mask, or wait when not allowed).

Instances can rotate across episodes: pass a callable mapping the episode
index to an instance to sample a fresh one at any interval.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass, field
from typing import Callable, IO

from .env import Action, EstimateConfig, RewardSpec, SchedulingEnv, WAIT
from .errors import IllegalActionError, ProtocolError
from .heterograph import GraphSnapshot, encode
from .model import InstanceSpec
from .schedule import Schedule, schedule_to_json

__all__ = [
    "SCHEMA_VERSION",
    "ServeOptions",
    "ServeStats",
    "serve",
    "serve_stdio",
    "serve_tcp",
    "ProtocolClient",
]

SCHEMA_VERSION = 1


@dataclass
class ServeOptions:
    episodes: int | None = 1
    reward: RewardSpec | None = None
    estimate: EstimateConfig | None = None


@dataclass
class ServeStats:
    episodes: int = 0
    steps: int = 0
    errors: int = 0
    makespans: list = field(default_factory=list)
    schedules: list = field(default_factory=list)


def _write_line(out: IO[str], message: dict) -> None:
    out.write(json.dumps(message, separators=(",", ":")) + "\n")
    out.flush()


def _instance_summary(spec: InstanceSpec) -> dict:
    return {
        "name": spec.name,
        "machines": spec.machine_count,
        "jobs": len(spec.jobs),
        "regular_ops": spec.regular_op_count,
    }


def _state_message(seq: int, snap: GraphSnapshot) -> dict:
    return {"type": "state", "seq": seq, **snap.to_json()}


def _parse_act(raw: str, expect_seq: int) -> Action:
    """Decode one act line; raises ProtocolError with a wire code."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError("bad-message", f"invalid JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("bad-message", "message must be an object")
    if msg.get("type") != "act":
        raise ProtocolError("schema", f"expected act, got {msg.get('type')!r}")
    if msg.get("seq") != expect_seq:
        raise ProtocolError(
            "stale-seq", f"act.seq {msg.get('seq')!r} != state.seq {expect_seq}"
        )
    if msg.get("wait") is True:
        return WAIT
    pair = msg.get("pair")
    if (
        not isinstance(pair, list)
        or len(pair) != 3
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
    ):
        raise ProtocolError("bad-message", "act needs pair:[job,op,machine] or wait:true")
    return Action(*pair)


def serve(
    source: InstanceSpec | Callable[[int], InstanceSpec],
    infile: IO[str],
    outfile: IO[str],
    options: ServeOptions | None = None,
) -> ServeStats:
    """Run episodes over a text-stream pair until done or client hangup.

    Hangup on either direction (EOF on reads, broken pipe on writes) ends
    serving with the stats gathered so far.
    """
    options = options or ServeOptions()
    stats = ServeStats()
    try:
        _serve_loop(source, infile, outfile, options, stats)
    except BrokenPipeError:
        pass  # client hung up between our writes
    return stats


def _serve_loop(
    source: InstanceSpec | Callable[[int], InstanceSpec],
    infile: IO[str],
    outfile: IO[str],
    options: ServeOptions,
    stats: ServeStats,
) -> None:
    episode = 0
    while options.episodes is None or episode < options.episodes:
        spec = source(episode) if callable(source) else source
        env = SchedulingEnv(spec, reward=options.reward).reset()
        _write_line(outfile, {
            "type": "hello",
            "schema": SCHEMA_VERSION,
            "episode": episode,
            "instance": _instance_summary(spec),
        })
        seq = 0
        last_reward: float | None = None
        total_reward = 0.0
        while not env.done:
            snap = encode(env, estimate=options.estimate, reward=last_reward)
            _write_line(outfile, _state_message(seq, snap))
            raw = infile.readline()
            if not raw:
                return  # client hung up
            try:
                action = _parse_act(raw, seq)
                result = env.step(action)
            except ProtocolError as exc:
                stats.errors += 1
                _write_line(outfile, {
                    "type": "error", "code": exc.code, "message": str(exc),
                })
                continue
            except IllegalActionError as exc:
                stats.errors += 1
                _write_line(outfile, {
                    "type": "error", "code": "unknown-pair", "message": str(exc),
                })
                continue
            stats.steps += 1
            seq += 1
            last_reward = result.reward
            total_reward += result.reward
        sched_json = schedule_to_json(env.schedule, spec)
        _write_line(outfile, {
            "type": "terminal",
            "episode": episode,
            "makespan": sched_json["makespan"],
            "total_reward": total_reward,
            "schedule": sched_json,
        })
        stats.episodes += 1
        stats.makespans.append(env.makespan)
        stats.schedules.append(sched_json)
        episode += 1


def serve_stdio(
    source: InstanceSpec | Callable[[int], InstanceSpec],
    options: ServeOptions | None = None,
) -> ServeStats:
    return serve(source, sys.stdin, sys.stdout, options)


def serve_tcp(
    source: InstanceSpec | Callable[[int], InstanceSpec],
    port: int,
    options: ServeOptions | None = None,
    host: str = "127.0.0.1",
    ready: Callable[[int], None] | None = None,
) -> ServeStats:
    """Listen, serve exactly one client connection, close.

    ``ready`` (if given) receives the bound port before accepting, which
    also makes port 0 (ephemeral) usable.
    """
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        if ready is not None:
            ready(server.getsockname()[1])
        conn, _addr = server.accept()
        with conn:
            infile = conn.makefile("r", encoding="utf-8", newline="\n")
            outfile = conn.makefile("w", encoding="utf-8", newline="\n")
            try:
                return serve(source, infile, outfile, options)
            finally:
                infile.close()
                outfile.close()


class ProtocolClient:
    """Agent-side line protocol: read states, send actions.

    Drives one or more episodes over text streams; see :func:`connect_tcp`
    for the socket variant.
    """

    def __init__(self, infile: IO[str], outfile: IO[str]):
        self.infile = infile
        self.outfile = outfile

    @classmethod
    def connect_tcp(cls, port: int, host: str = "127.0.0.1") -> "ProtocolClient":
        sock = socket.create_connection((host, port))
        client = cls(
            sock.makefile("r", encoding="utf-8", newline="\n"),
            sock.makefile("w", encoding="utf-8", newline="\n"),
        )
        client._sock = sock  # keep it alive; closed with the streams
        return client

    def read_message(self) -> dict | None:
        raw = self.infile.readline()
        if not raw:
            return None
        msg = json.loads(raw)
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError("bad-message", "server sent a non-message")
        return msg

    def send_act(self, seq: int, action: Action) -> None:
        if action.is_wait:
            _write_line(self.outfile, {"type": "act", "seq": seq, "wait": True})
        else:
            _write_line(self.outfile, {
                "type": "act", "seq": seq,
                "pair": [action.job_id, action.op_id, action.machine],
            })

    def close(self) -> None:
        self.infile.close()
        self.outfile.close()
        sock = getattr(self, "_sock", None)
        if sock is not None:
            sock.close()

    def run_episode(self, policy: Callable[[GraphSnapshot], Action]) -> dict:
        """Play one episode; returns the terminal message.

        ``policy`` maps a snapshot to an action; state messages are decoded
        into :class:`GraphSnapshot` before the call.
        """
        hello = self.read_message()
        if hello is None or hello.get("type") != "hello":
            raise ProtocolError("schema", f"expected hello, got {hello!r}")
        if hello.get("schema") != SCHEMA_VERSION:
            raise ProtocolError("schema", f"unsupported schema {hello.get('schema')!r}")
        while True:
            msg = self.read_message()
            if msg is None:
                raise ProtocolError("bad-message", "server hung up mid-episode")
            if msg["type"] == "terminal":
                return msg
            if msg["type"] == "error":
                raise ProtocolError(msg.get("code", "bad-message"),
                                    msg.get("message", ""))
            if msg["type"] != "state":
                raise ProtocolError("schema", f"unexpected {msg['type']!r}")
            snap = GraphSnapshot.from_json(msg)
            self.send_act(msg["seq"], policy(snap))
