"""Inference: checkpointed policy against scheduling servers.

Two shapes:

* :func:`run_inference` spawns its own server subprocesses for one
  instance, optionally splitting the sampling budget across several
  parallel endpoints, and reports makespans (greedy = one deterministic
  episode; sampling = best of N).
* :func:`run_client` speaks the wire protocol over an existing stream
  pair (by default stdin/stdout) until EOF.  This is the integration
  point for harnesses that spawn the agent as a subprocess and serve
  instances through its pipes.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .driver import ActionStats, EpisodeResult, policy_decider, run_episodes
from .endpoint import Endpoint
from .policy import ActorCritic

__all__ = ["InferenceResult", "run_inference", "run_client"]


@dataclass
class InferenceResult:
    instance: str
    mode: str
    makespans: list[float]
    mean_makespan: float
    best_makespan: float
    best_schedule: dict | None
    stats: ActionStats
    seconds: float


def run_inference(
    instance: str | Path,
    policy: ActorCritic,
    *,
    mode: str = "greedy",
    repeats: int = 1,
    parallel: int = 1,
    seed: int = 0,
    reward: str = "naive",
    server_cmd: str = "ipps",
    keep_schedules: bool = False,
    device: str = "cpu",
) -> InferenceResult:
    """Play ``repeats`` episodes of ``instance`` and collect makespans."""
    if mode not in ("greedy", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    started = time.monotonic()
    rng = np.random.default_rng(seed) if mode == "sample" else None
    decide = policy_decider(policy, mode, rng, device=device)
    stats = ActionStats()

    workers = max(1, min(parallel, repeats))
    budgets = [repeats // workers + (1 if i < repeats % workers else 0)
               for i in range(workers)]
    endpoints = [Endpoint.spawn(instance, server_cmd=server_cmd,
                                reward=reward, episodes=budget)
                 for budget in budgets]
    try:
        results = run_episodes(endpoints, decide,
                               keep_schedules=keep_schedules, stats=stats)
    finally:
        for ep in endpoints:
            ep.close()
    if len(results) != repeats:
        raise RuntimeError(
            f"expected {repeats} episodes, finished {len(results)}")
    return _summarize(str(instance), mode, results, stats,
                      time.monotonic() - started)


def run_client(
    policy: ActorCritic,
    *,
    mode: str = "greedy",
    seed: int = 0,
    infile=None,
    outfile=None,
    device: str = "cpu",
) -> InferenceResult:
    """Act over a served stream until the peer hangs up.

    The transport carries the protocol, so nothing is printed to the
    output stream beyond protocol messages.
    """
    if mode not in ("greedy", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    started = time.monotonic()
    rng = np.random.default_rng(seed) if mode == "sample" else None
    decide = policy_decider(policy, mode, rng, device=device)
    stats = ActionStats()
    endpoint = Endpoint(infile or sys.stdin, outfile or sys.stdout,
                        name="stdio")
    results = run_episodes([endpoint], decide, stats=stats)
    return _summarize("stdio", mode, results, stats,
                      time.monotonic() - started)


def _summarize(instance: str, mode: str, results: list[EpisodeResult],
               stats: ActionStats, seconds: float) -> InferenceResult:
    makespans = [r.makespan for r in results]
    best_idx = int(np.argmin(makespans)) if makespans else -1
    return InferenceResult(
        instance=instance,
        mode=mode,
        makespans=makespans,
        mean_makespan=float(np.mean(makespans)) if makespans else float("nan"),
        best_makespan=float(makespans[best_idx]) if makespans else float("nan"),
        best_schedule=results[best_idx].schedule if makespans else None,
        stats=stats,
        seconds=seconds,
    )
