"""Action selection: four heuristic walkers plus the learned softmax policy.

Every strategy looks only at the current holder's neighborhood (and the
target's attribute vector carried by the message), so all of them are
executable with 1-hop visibility.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GraphInputError
from .networks import FEATURE_MODES, EgoIndex

__all__ = [
    "FEATURE_MODES", "ActionDistribution",
    "greedy_walker", "distance_walker", "connection_walker", "random_walker",
    "learned_policy", "value_estimate",
    "GreedyWalker", "DistanceWalker", "ConnectionWalker", "RandomWalker", "LearnedWalker",
]


@dataclass(frozen=True)
class ActionDistribution:
    """Probabilities over the holder's neighbors, in neighbor-id order."""

    neighbors: np.ndarray
    probs: np.ndarray

    def validate(self):
        if len(self.neighbors) != len(self.probs):
            raise ValueError("neighbors/probs length mismatch")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        return self


def softmax(logits):
    z = np.exp(logits - logits.max())
    return z / z.sum()


def sample_index(probs, rng):
    """Index drawn from a probability vector via inverse-CDF."""
    c = np.cumsum(probs)
    return min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), len(probs) - 1)


def _require_neighbors(g, holder):
    nb = g.neighbors(holder)
    if len(nb) == 0:
        raise GraphInputError(f"node {holder} has no neighbors (dead end)")
    return nb


def greedy_walker(g, holder, tgt_attrs):
    """Neighbor with the smallest Euclidean attribute distance to the target.

    Ties resolve to the lowest node id (neighbor lists are sorted).
    """
    nb = _require_neighbors(g, holder)
    dist = np.linalg.norm(g.attributes[nb] - tgt_attrs, axis=1)
    return int(nb[int(np.argmin(dist))])


def distance_walker(g, holder, tgt_attrs, tau, rng):
    """Softmax over negative attribute distance to the target, temperature tau."""
    if tau <= 0:
        raise ConfigError("tau must be > 0")
    nb = _require_neighbors(g, holder)
    dist = np.linalg.norm(g.attributes[nb] - tgt_attrs, axis=1)
    probs = softmax(-dist / tau)
    return ActionDistribution(nb, probs), int(nb[sample_index(probs, rng)])


def connection_walker(g, holder, tau, rng):
    """Softmax over neighbor degree, temperature tau."""
    if tau <= 0:
        raise ConfigError("tau must be > 0")
    nb = _require_neighbors(g, holder)
    probs = softmax(g.degrees[nb] / tau)
    return ActionDistribution(nb, probs), int(nb[sample_index(probs, rng)])


def random_walker(g, holder, rng):
    """Uniform choice among neighbors."""
    nb = _require_neighbors(g, holder)
    return int(nb[rng.integers(len(nb))])


def learned_policy(g, holder, features, tgt_feature, policy_mlp):
    """Softmax over per-neighbor logits f([feature(neighbor) || feature(target)])."""
    nb = _require_neighbors(g, holder)
    inputs = np.concatenate(
        [features[nb], np.broadcast_to(tgt_feature, (len(nb), len(tgt_feature)))], axis=1)
    logits = policy_mlp.forward_inference(inputs)[:, 0]
    return ActionDistribution(nb, softmax(logits))


def value_estimate(holder_feature, tgt_feature, value_mlp):
    """Scalar state value f([feature(holder) || feature(target)])."""
    x = np.concatenate([holder_feature, tgt_feature])
    return float(value_mlp.forward_inference(x)[0, 0])


class GreedyWalker:
    name = "greedy"

    def begin_episode(self, g, tgt):
        self._g = g
        self._tgt_attrs = g.attributes[tgt]

    def act(self, holder, rng):
        return greedy_walker(self._g, holder, self._tgt_attrs)


class DistanceWalker:
    def __init__(self, tau):
        if tau <= 0:
            raise ConfigError("tau must be > 0")
        self.tau = tau
        self.name = f"distance@{tau:g}"

    def begin_episode(self, g, tgt):
        self._g = g
        self._tgt_attrs = g.attributes[tgt]

    def act(self, holder, rng):
        _, choice = distance_walker(self._g, holder, self._tgt_attrs, self.tau, rng)
        return choice


class ConnectionWalker:
    def __init__(self, tau):
        if tau <= 0:
            raise ConfigError("tau must be > 0")
        self.tau = tau
        self.name = f"connection@{tau:g}"

    def begin_episode(self, g, tgt):
        self._g = g

    def act(self, holder, rng):
        _, choice = connection_walker(self._g, holder, self.tau, rng)
        return choice


class RandomWalker:
    name = "random"

    def begin_episode(self, g, tgt):
        self._g = g

    def act(self, holder, rng):
        return random_walker(self._g, holder, rng)


class LearnedWalker:
    """Frozen actor-critic model driving episodes.

    precompute='table' caches one logit table per target (fast; every
    neighbor's logit is holder-independent). precompute='none' evaluates the
    policy head per action over the holder's neighbors, which is the honest
    decentralized cost and is what the action-time benchmark measures.
    """

    def __init__(self, model, precompute="table"):
        if precompute not in ("table", "none"):
            raise ConfigError("precompute must be 'table' or 'none'")
        self.model = model
        self.name = model.name
        self.precompute = precompute
        self._g = None
        self._features = None
        self._tables = {}

    def _ensure_features(self, g):
        if self._g is not g:
            self._g = g
            self._tables = {}
            self._index = EgoIndex.build(g) if self.model.mode == "gat" else None
            self._features = self.model.node_features(g, self._index)

    def begin_episode(self, g, tgt):
        self._ensure_features(g)
        self._m = self.model.target_feature(g, self._features, tgt)
        if self.precompute == "table":
            if tgt not in self._tables:
                inputs = np.concatenate(
                    [self._features,
                     np.broadcast_to(self._m, (g.node_count, len(self._m)))], axis=1)
                self._tables[tgt] = self.model.policy.forward_inference(inputs)[:, 0]
            self._logits = self._tables[tgt]

    def act(self, holder, rng):
        if self.precompute == "table":
            nb = _require_neighbors(self._g, holder)
            probs = softmax(self._logits[nb])
            return int(nb[sample_index(probs, rng)])
        dist = learned_policy(self._g, holder, self._features, self._m, self.model.policy)
        return int(dist.neighbors[sample_index(dist.probs, rng)])

    def action_distribution(self, holder):
        return learned_policy(self._g, holder, self._features, self._m, self.model.policy)
