"""Episodic advantage actor-critic training for the message-routing task.

Each episode: sample a fresh source and a target from the training split,
(for 'gat' mode) recompute every node's embedding, roll the stochastic policy
until delivery or cutoff, then take one optimizer step on the summed per-step
loss  L = sum_t [ -A_t * log pi(a_t) - entropy_coef * H(pi_t) + A_t^2 ]
where the advantage A_t = r_t + gamma * stopgrad(v(next)) - v(current) is
treated as a constant inside the policy term and bootstraps zero at delivery.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, TrainingDiverged
from .graphs import distance_matrix
from .networks import ActorCriticModel, AdamOptimizer, EgoIndex, embed_centers
from .policies import ConnectionWalker, DistanceWalker, LearnedWalker, sample_index, softmax

log = logging.getLogger(__name__)

LOGP_FLOOR = -30.0  # numerical guard for log-probabilities of near-zero mass actions

_EPISODE_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 200_000
    eval_every: int = 100
    gamma: float = 0.99
    entropy_coef: float = 1e-3
    t_max: int = 100
    feature_mode: str = "gat"
    learning_rate: float = 3e-4
    seed: int = 0
    patience: int = 50
    hidden: int = 64
    mlp_layers: int = 3
    embed_dim: int = 64
    gat_layers: int = 3

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must be in (0, 1]")
        if self.entropy_coef < 0:
            raise ConfigError("entropy coefficient must be >= 0")
        if self.episodes < 1 or self.eval_every < 1 or self.t_max < 1 or self.patience < 1:
            raise ConfigError("episodes, eval_every, t_max and patience must be >= 1")


@dataclass
class EpisodeBuffer:
    """One rolled-out episode plus everything the loss needs to replay it."""

    holders: np.ndarray            # (L,) message holder per step
    nexts: np.ndarray              # (L,) chosen neighbor per step
    rewards: np.ndarray            # (L,)
    delivered: bool
    truncated: bool
    neighbor_ids: list             # per step, the holder's neighbor array
    chosen_pos: np.ndarray         # (L,) index of nexts[t] inside neighbor_ids[t]
    probs: list                    # per step, the distribution that was sampled
    transitions: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.holders)


def sample_pair(rng, n, targets):
    """Target uniform from `targets`, source uniform from all nodes, src != tgt."""
    tgt = int(targets[rng.integers(len(targets))])
    src = int(rng.integers(n))
    while src == tgt:
        src = int(rng.integers(n))
    return src, tgt


def rollout(g, model, src, tgt, t_max, rng, features, m):
    """Roll the current policy from src toward tgt; returns an EpisodeBuffer.

    Per-neighbor logits depend only on the candidate node (not the holder),
    so one batched head evaluation per episode covers every step. Transition
    mechanics are inlined (moves are neighbors by construction) but match
    env.step exactly; the replay test pins the equivalence.
    """
    if src == tgt:
        raise ConfigError("source and target must differ")
    x = np.concatenate([features, np.broadcast_to(m, (g.node_count, len(m)))], axis=1)
    logits = model.policy.forward_inference(x)[:, 0]
    prob_cache = {}
    holders, nexts, rewards, nb_lists, positions, probs_list = [], [], [], [], [], []
    holder, t = src, 0
    delivered = False
    while True:
        nb = g.neighbors(holder)
        probs = prob_cache.get(holder)
        if probs is None:
            probs = np.ones(1) if len(nb) == 1 else softmax(logits[nb])
            prob_cache[holder] = probs
        pos = 0 if len(nb) == 1 else sample_index(probs, rng)
        nxt = int(nb[pos])
        holders.append(holder)
        nexts.append(nxt)
        nb_lists.append(nb)
        positions.append(pos)
        probs_list.append(probs)
        t += 1
        if nxt == tgt:
            delivered = True
            rewards.append(1.0)
            break
        rewards.append(0.0)
        if t >= t_max:
            break
        holder = nxt
    return EpisodeBuffer(
        holders=np.array(holders, dtype=np.int64),
        nexts=np.array(nexts, dtype=np.int64),
        rewards=np.array(rewards, dtype=np.float64),
        delivered=delivered,
        truncated=not delivered,
        neighbor_ids=nb_lists,
        chosen_pos=np.array(positions, dtype=np.int64),
        probs=probs_list)


def rollout_episode(g, model, cfg, rng, targets, index=None):
    """Sample a pair, refresh embeddings ('gat'), and roll one episode.

    Returns (buffer, features, m, tgt) where features/m are traced tensors in
    'gat' mode and plain arrays otherwise; the same tensors feed the loss so
    embeddings are computed exactly once per episode.
    """
    src, tgt = sample_pair(rng, g.node_count, targets)
    if model.mode == "gat":
        features = embed_centers(model.gat, index, g.attributes)
        feat_data = features.data
        m = ad.gather(features, np.array([tgt]))
        m_data = m.data[0]
    else:
        features = model.static_features(g)
        feat_data = features
        m = g.attributes[tgt]
        m_data = m
    buf = rollout(g, model, src, tgt, cfg.t_max, rng, feat_data, m_data)
    return buf, features, m, tgt


def advantage(reward, v_next, v_curr, terminal, gamma):
    """A = r + gamma * stopgrad(v_next) - v_curr, bootstrapping 0 at terminal.

    Works elementwise on vectors; gradients flow only through v_curr.
    """
    r = np.asarray(reward, dtype=np.float64)
    nxt = v_next.data if isinstance(v_next, Tensor) else np.asarray(v_next, dtype=np.float64)
    boot = np.where(np.asarray(terminal), 0.0, gamma * nxt)
    vc = v_curr if isinstance(v_curr, Tensor) else Tensor(v_curr)
    return ad.sub(Tensor(r + boot), vc)


def losses(buffer, model, cfg, features, m, tgt):
    """Summed episodic loss (policy + entropy bonus + value) as a traced scalar.

    The advantage enters the policy term fully detached; the value term's
    gradient flows through v(current) only. Log-probabilities are floored at
    LOGP_FLOOR and the number of floored steps is reported.
    """
    if len(buffer) == 0:
        raise ConfigError("empty episode buffer")
    length = len(buffer)
    flat_nb = np.concatenate(buffer.neighbor_ids)
    seg = np.repeat(np.arange(length), [len(nb) for nb in buffer.neighbor_ids])
    offsets = np.cumsum([0] + [len(nb) for nb in buffer.neighbor_ids[:-1]])
    chosen_flat = offsets + buffer.chosen_pos

    traced = isinstance(features, Tensor)
    if traced:
        pol_in = ad.concat([ad.gather(features, flat_nb),
                            ad.gather(features, np.full(len(flat_nb), tgt))], axis=1)
    else:
        pol_in = np.concatenate(
            [features[flat_nb], np.broadcast_to(m, (len(flat_nb), len(m)))], axis=1)
    logits = ad.reshape(model.policy.forward(pol_in), (-1,))
    probs, logps = ad.segment_softmax_parts(logits, seg, length)
    chosen_logp = ad.clip_min(ad.gather(logps, chosen_flat), LOGP_FLOOR)
    floored = int((logps.data[chosen_flat] < LOGP_FLOOR).sum())
    entropy = ad.mul(ad.segment_sum(ad.mul(probs, logps), seg, length), -1.0)

    # value of every node along the walk: holders plus the final landing node
    walk = np.append(buffer.holders, buffer.nexts[-1])
    if traced:
        val_in = ad.concat([ad.gather(features, walk),
                            ad.gather(features, np.full(len(walk), tgt))], axis=1)
    else:
        val_in = np.concatenate(
            [features[walk], np.broadcast_to(m, (len(walk), len(m)))], axis=1)
    vals = ad.reshape(model.value.forward(val_in), (-1,))
    v_curr = ad.gather(vals, np.arange(length))
    v_next = vals.data[1:]
    terminal = np.zeros(length, dtype=bool)
    terminal[-1] = buffer.delivered
    adv = advantage(buffer.rewards, v_next, v_curr, terminal, cfg.gamma)

    policy_loss = ad.tsum(ad.mul(Tensor(-adv.data), chosen_logp))
    entropy_bonus = ad.mul(ad.tsum(entropy), cfg.entropy_coef)
    value_loss = ad.tsum(ad.mul(adv, adv))
    loss = ad.add(ad.sub(policy_loss, entropy_bonus), value_loss)
    info = {
        "policy_loss": policy_loss.item(),
        "value_loss": value_loss.item(),
        "entropy_mean": float(entropy.data.mean()),
        "floored_logp_steps": floored,
        "advantage_mean": float(adv.data.mean()),
    }
    return loss, info


def validate_policy(g, model, pairs, seed, t_max, oracle=None):
    """(mean oracle ratio, truncation %) of the frozen policy on stored pairs."""
    from .evaluation import run_pair_episodes
    oracle = distance_matrix(g) if oracle is None else oracle
    res = run_pair_episodes(g, LearnedWalker(model, precompute="table"),
                            pairs, seed, t_max, oracle)
    return float(np.mean(res.lengths / res.oracles)), 100.0 * float(res.truncated.mean())


@dataclass
class TrainResult:
    model: ActorCriticModel
    curve: list
    best_val: float
    best_episode: int
    episodes_run: int
    stopped_early: bool


def train(g, split, val_pairs, cfg, model=None):
    """Run the training loop with periodic validation and early stopping.

    Returns the best-on-validation parameters. Raises TrainingDiverged (with
    the last finite parameter snapshot attached) if the loss or a gradient
    goes non-finite.
    """
    if model is None:
        model = ActorCriticModel(
            mode=cfg.feature_mode, attr_dim=g.attribute_dim, hidden=cfg.hidden,
            mlp_layers=cfg.mlp_layers, embed_dim=cfg.embed_dim,
            gat_layers=cfg.gat_layers, seed=cfg.seed)
    params = model.parameters()
    opt = AdamOptimizer([t for _, t in params], lr=cfg.learning_rate)
    index = EgoIndex.build(g) if model.mode == "gat" else None
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _EPISODE_STREAM]))
    oracle = distance_matrix(g)

    def snapshot():
        return [(name, t.data.copy()) for name, t in params]

    def restore(snap):
        for (_, t), (_, data) in zip(params, snap):
            t.data = data.copy()

    best_snap = snapshot()
    best_val = np.inf
    best_episode = 0
    evals_since_best = 0
    curve = []
    window_rewards, window_entropy = [], []
    episodes_run = 0
    stopped_early = False

    for episode in range(1, cfg.episodes + 1):
        buf, features, m, tgt = rollout_episode(g, model, cfg, rng, split.train, index)
        loss, info = losses(buf, model, cfg, features, m, tgt)
        if not np.isfinite(loss.data):
            raise TrainingDiverged(
                f"non-finite loss at episode {episode}",
                checkpoint={"best": best_snap, "last_finite": snapshot()})
        opt.zero_grad()
        loss.backward()
        try:
            opt.step()
        except TrainingDiverged as exc:
            exc.checkpoint = {"best": best_snap, "last_finite": snapshot()}
            raise
        episodes_run = episode
        window_rewards.append(buf.rewards.sum())
        window_entropy.append(info["entropy_mean"])

        if episode % cfg.eval_every == 0:
            val_ratio, val_trunc = validate_policy(
                g, model, val_pairs, cfg.seed, cfg.t_max, oracle)
            curve.append({
                "episode": episode,
                "train_return": float(np.mean(window_rewards)),
                "val_oracle_ratio": val_ratio,
                "val_trunc_rate": val_trunc,
                "entropy_mean": float(np.mean(window_entropy)),
            })
            window_rewards, window_entropy = [], []
            if val_ratio < best_val:
                best_val = val_ratio
                best_episode = episode
                best_snap = snapshot()
                evals_since_best = 0
            else:
                evals_since_best += 1
                if evals_since_best >= cfg.patience:
                    stopped_early = True
                    break

    restore(best_snap)
    if not curve:  # fewer episodes than one eval window
        val_ratio, val_trunc = validate_policy(g, model, val_pairs, cfg.seed, cfg.t_max, oracle)
        best_val, best_episode = val_ratio, episodes_run
    log.info("training done: %d episodes, best val ratio %.4f at episode %d",
             episodes_run, best_val, best_episode)
    return TrainResult(model=model, curve=curve, best_val=best_val,
                       best_episode=best_episode, episodes_run=episodes_run,
                       stopped_early=stopped_early)


def tune_temperature(g, walker_kind, tau_grid, pairs, seed, t_max=100):
    """Pick the temperature minimizing mean oracle ratio on the stored pairs.

    Returns (best_tau, rows) with one (tau, oracle_ratio, trunc_rate) row per
    grid point; ties go to the smaller temperature.
    """
    if walker_kind not in ("distance", "connection"):
        raise ConfigError("walker_kind must be 'distance' or 'connection'")
    if not len(tau_grid):
        raise ConfigError("tau grid is empty")
    from .evaluation import run_pair_episodes  # local import; evaluation pulls policies only
    oracle = distance_matrix(g)
    rows = []
    for tau in tau_grid:
        walker = DistanceWalker(tau) if walker_kind == "distance" else ConnectionWalker(tau)
        res = run_pair_episodes(g, walker, pairs, seed, t_max, oracle)
        ratio = float(np.mean(res.lengths / res.oracles))
        rows.append({"tau": float(tau), "oracle_ratio": ratio,
                     "trunc_rate": 100.0 * res.truncated.mean()})
    best = min(rows, key=lambda r: (r["oracle_ratio"], r["tau"]))
    return best["tau"], rows
