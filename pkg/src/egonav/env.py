"""Single-message episode engine.

One message lives on exactly one node at a time. Whoever holds it picks a
neighbor; the move is deterministic, delivery to the target pays +1 and ends
the episode, and episodes are cut off after t_max actions. Revisits are
allowed: the walk is memory-less.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import GraphInputError, IllegalActionError


class Status(str, enum.Enum):
    RUNNING = "running"
    DELIVERED = "delivered"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class EpisodeState:
    holder: int
    target: int
    step: int
    t_max: int
    status: Status


@dataclass(frozen=True)
class Transition:
    from_node: int
    to_node: int
    reward: float
    terminal: bool
    truncated: bool


@dataclass(frozen=True)
class Observation:
    """What the current holder can see: its neighbors' ego graphs, the
    target's ego graph, and the message (the target's attribute vector)."""

    message: np.ndarray
    neighbor_egos: tuple
    target_ego: object


def reset(g, src, tgt, t_max):
    """Place the message on src and aim it at tgt."""
    g.check_node(src)
    g.check_node(tgt)
    if src == tgt:
        raise GraphInputError("source and target must differ")
    if t_max < 1:
        raise GraphInputError("t_max must be >= 1")
    return EpisodeState(holder=src, target=tgt, step=0, t_max=t_max, status=Status.RUNNING)


def observe(g, state):
    """Local observation for the holder; only valid while the episode runs."""
    if state.status is not Status.RUNNING:
        raise RuntimeError("observe() on a finished episode")
    neighbor_egos = tuple(g.ego_graph(int(v)) for v in g.neighbors(state.holder))
    return Observation(message=g.attributes[state.target],
                       neighbor_egos=neighbor_egos,
                       target_ego=g.ego_graph(state.target))


def step(g, state, action):
    """Move the message to `action`; returns (next_state, transition).

    The action must be a neighbor of the holder: illegal moves raise instead
    of being silently masked.
    """
    if state.status is not Status.RUNNING:
        raise RuntimeError("step() on a finished episode")
    action = int(action)
    if not g.has_edge(state.holder, action):
        raise IllegalActionError(
            f"node {action} is not a neighbor of holder {state.holder}")
    t = state.step + 1
    if action == state.target:
        nxt = replace(state, holder=action, step=t, status=Status.DELIVERED)
        return nxt, Transition(state.holder, action, 1.0, True, False)
    if t >= state.t_max:
        nxt = replace(state, holder=action, step=t, status=Status.TRUNCATED)
        return nxt, Transition(state.holder, action, 0.0, False, True)
    nxt = replace(state, holder=action, step=t)
    return nxt, Transition(state.holder, action, 0.0, False, False)


@dataclass(frozen=True)
class EpisodeOutcome:
    length: int
    delivered: bool
    truncated: bool
    transitions: tuple


def run_episode(g, policy, src, tgt, t_max, rng, keep_transitions=False):
    """Roll one episode with `policy` (begin_episode/act interface)."""
    policy.begin_episode(g, tgt)
    state = reset(g, src, tgt, t_max)
    trans = [] if keep_transitions else None
    while state.status is Status.RUNNING:
        choice = policy.act(state.holder, rng)
        state, tr = step(g, state, choice)
        if keep_transitions:
            trans.append(tr)
    return EpisodeOutcome(length=state.step,
                          delivered=state.status is Status.DELIVERED,
                          truncated=state.status is Status.TRUNCATED,
                          transitions=tuple(trans) if keep_transitions else ())


def trace_rows(episode_id, transitions):
    """CSV-ready rows (episode_id, step, from, to, reward, status) for one episode."""
    rows = []
    for i, tr in enumerate(transitions):
        status = (Status.DELIVERED if tr.terminal
                  else Status.TRUNCATED if tr.truncated else Status.RUNNING)
        rows.append((episode_id, i, tr.from_node, tr.to_node, tr.reward, status.value))
    return rows
