"""Lockstep episode driver over any number of endpoints.

Episodes across endpoints advance in waves: every endpoint that is
waiting for a decision contributes its current state to one batched
policy call, then all the chosen actions go out together.  The same loop
runs training collection (endless servers, a global episode budget),
validation and inference (servers with a fixed episode count, driven to
EOF), and the pure stdio client mode (one endpoint, no budget).

Rewards ride on the *next* state message, and the server sends no state
for a finished episode, so the last step's reward is recovered from the
terminal message's total.  Every action is checked against the state's
mask before it is sent; mask violations and server error replies are
counted on :class:`ActionStats` (both must stay zero in a sound run).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from .batch import PackedBatch
from .endpoint import Endpoint
from .errors import ServerError
from .policy import ActorCritic
from .snapshot import Hello, Snapshot, decode_state, parse_hello

__all__ = ["ActionStats", "Transition", "EpisodeResult", "Decision",
           "policy_decider", "run_episodes"]

# (local_slot, log_prob, value) per state, from a decide callable
Decision = tuple[int, float, float]
Decide = Callable[[list[Snapshot]], list[Decision]]


@dataclass
class ActionStats:
    """Client-side action accounting across a run."""

    actions: int = 0
    wait_actions: int = 0
    illegal: int = 0
    error_replies: int = 0

    def merge(self, other: "ActionStats") -> None:
        self.actions += other.actions
        self.wait_actions += other.wait_actions
        self.illegal += other.illegal
        self.error_replies += other.error_replies


@dataclass
class Transition:
    snapshot: Snapshot
    local_slot: int
    log_prob: float
    value: float
    reward: float = math.nan


@dataclass
class EpisodeResult:
    instance: str
    episode: int
    endpoint: int
    makespan: float
    total_reward: float
    steps: int
    transitions: list[Transition] | None
    schedule: dict | None


def policy_decider(
    policy: ActorCritic,
    mode: str,
    rng: np.random.Generator | None = None,
    device: torch.device | str = "cpu",
) -> Decide:
    """Wrap a policy as a batched decide callable."""

    def decide(snapshots: list[Snapshot]) -> list[Decision]:
        batch = PackedBatch.build(snapshots, device=device)
        slots, log_probs, values = policy.act(batch, mode, rng)
        return [(slots[i], float(log_probs[i]), float(values[i]))
                for i in range(len(snapshots))]

    return decide


class _EndpointState:
    """Per-endpoint episode progress."""

    def __init__(self, endpoint: Endpoint, index: int):
        self.endpoint = endpoint
        self.index = index
        self.hello: Hello | None = None
        self.snapshot: Snapshot | None = None
        self.transitions: list[Transition] = []
        self.received_reward = 0.0
        self.steps = 0
        self.idle = False      # between episodes, budget exhausted
        self.finished = False  # EOF or closed


def _start_episode(state: _EndpointState, hello: Hello) -> None:
    state.hello = hello
    state.snapshot = None
    state.transitions = []
    state.received_reward = 0.0
    state.steps = 0


def run_episodes(
    endpoints: Sequence[Endpoint],
    decide: Decide,
    *,
    limit: int | None = None,
    record: bool = False,
    keep_schedules: bool = False,
    normalize: bool = True,
    stats: ActionStats | None = None,
) -> list[EpisodeResult]:
    """Play episodes across ``endpoints`` until done.

    ``limit`` caps the number of episodes *started* across all endpoints;
    endpoints are left open (idle before their next hello) once the cap
    is hit, so persistent servers can be reused by later calls.  Without
    a limit the loop runs until every endpoint reaches EOF — the shape
    for servers with a fixed ``--episodes`` budget and for client mode.
    """
    states = [_EndpointState(ep, i) for i, ep in enumerate(endpoints)]
    results: list[EpisodeResult] = []
    started = 0

    def want_more() -> bool:
        return limit is None or started < limit

    def read_phase(st: _EndpointState) -> None:
        nonlocal started
        while not (st.finished or st.idle or st.snapshot is not None):
            if st.hello is None and not want_more():
                st.idle = True
                return
            msg = st.endpoint.read()
            if msg is None:
                if st.hello is not None:
                    raise ServerError(
                        f"{st.endpoint.name or f'endpoint {st.index}'}: "
                        f"EOF mid-episode after {st.steps} steps")
                st.finished = True
                return
            kind = msg.get("type")
            if kind == "hello":
                if st.hello is not None:
                    raise ServerError("hello during an unfinished episode")
                _start_episode(st, parse_hello(msg))
                started += 1
            elif kind == "state":
                if st.hello is None:
                    raise ServerError("state before hello")
                snap = decode_state(msg, normalize=normalize)
                if snap.done:
                    raise ServerError("server sent a done state mid-episode")
                if snap.reward is not None:
                    st.received_reward += snap.reward
                    if record and st.transitions:
                        st.transitions[-1].reward = snap.reward
                st.snapshot = snap
            elif kind == "error":
                if stats is not None:
                    stats.error_replies += 1
                # the server re-sends the same-seq state next; keep reading
            elif kind == "terminal":
                if st.hello is None:
                    raise ServerError("terminal before hello")
                total = float(msg.get("total_reward", 0.0))
                if record and st.transitions:
                    last = st.transitions[-1]
                    if math.isnan(last.reward):
                        last.reward = total - st.received_reward
                results.append(EpisodeResult(
                    instance=st.hello.name,
                    episode=st.hello.episode,
                    endpoint=st.index,
                    makespan=float(msg.get("makespan", math.nan)),
                    total_reward=total,
                    steps=st.steps,
                    transitions=st.transitions if record else None,
                    schedule=msg.get("schedule") if keep_schedules else None,
                ))
                st.hello = None
            else:
                raise ServerError(f"unexpected message type {kind!r}")

    while True:
        for st in states:
            if not (st.finished or st.idle):
                read_phase(st)
        pending = [st for st in states if st.snapshot is not None]
        if not pending:
            # read_phase leaves every endpoint finished, idle, or holding
            # a snapshot, so an empty wave means the run is over
            break
        decisions = decide([st.snapshot for st in pending])
        if len(decisions) != len(pending):
            raise RuntimeError("decide() returned the wrong number of actions")
        for st, (local_slot, log_prob, value) in zip(pending, decisions):
            snap = st.snapshot
            n_pairs = len(snap.mask_pairs)
            legal = (0 <= local_slot < n_pairs
                     or (local_slot == n_pairs and snap.wait_allowed))
            if stats is not None:
                stats.actions += 1
                if not legal:
                    stats.illegal += 1
                elif local_slot == n_pairs:
                    stats.wait_actions += 1
            if not legal:
                raise RuntimeError(
                    f"illegal action: slot {local_slot} with {n_pairs} "
                    f"masked pairs, wait_allowed={snap.wait_allowed}")
            if local_slot < n_pairs:
                act = {"type": "act", "seq": snap.seq,
                       "pair": list(snap.mask_pairs[local_slot])}
            else:
                act = {"type": "act", "seq": snap.seq, "wait": True}
            if record:
                st.transitions.append(Transition(
                    snapshot=snap, local_slot=local_slot,
                    log_prob=log_prob, value=value))
            st.snapshot = None
            st.steps += 1
            if not st.endpoint.send(act):
                raise ServerError(
                    f"{st.endpoint.name or f'endpoint {st.index}'}: "
                    "server hung up on write")
    return results
