"""Metrics, serialized pair sets, head-to-head evaluation, sweeps, timing, heatmaps.

Every evaluation is replayable: episode randomness is derived from
(master seed, policy name, pair id, repeat), so reruns reproduce each
per-episode row exactly and adding or reordering policies never perturbs
another policy's episodes.
"""
from __future__ import annotations

import csv
import time
import zlib
from dataclasses import dataclass

import numpy as np

from .env import Status, reset, step
from .errors import ConfigError, ConnectivityError
from .graphs import distance_matrix
from .networks import gat_embed_ego
from .policies import (ConnectionWalker, DistanceWalker, GreedyWalker, LearnedWalker,
                       RandomWalker)

_WIN_STREAM = 3

CI_NOTE = "ci = 95% normal-approximation half-width over pairs"


@dataclass(frozen=True)
class PairSet:
    """Serialized (source, target) pairs; targets come from one split."""

    pairs: tuple
    split: str
    seed: int


def build_pair_set(g, targets, count, seed, split_label):
    """Targets uniform from `targets`, sources uniform from V minus the target."""
    if len(targets) == 0:
        raise ConfigError("target pool is empty")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        tgt = int(targets[rng.integers(len(targets))])
        src = int(rng.integers(g.node_count))
        while src == tgt:
            src = int(rng.integers(g.node_count))
        pairs.append((src, tgt))
    return PairSet(pairs=tuple(pairs), split=split_label, seed=seed)


def save_pair_set(path, pair_set):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"# split={pair_set.split} seed={pair_set.seed}"])
        w.writerow(["pair_id", "src", "tgt"])
        for i, (s, t) in enumerate(pair_set.pairs):
            w.writerow([i, s, t])


def load_pair_set(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    head = rows[0][0]
    if not head.startswith("# split="):
        raise ConfigError(f"{path}: not a pair-set file")
    fields = head[2:].split()
    split = fields[0].split("=", 1)[1]
    seed = int(fields[1].split("=", 1)[1])
    pairs = tuple((int(r[1]), int(r[2])) for r in rows[2:] if r)
    return PairSet(pairs=pairs, split=split, seed=seed)


def episode_rng(seed, policy_name, pair_id, rep=0):
    """The per-episode random stream; documented so oracles can replay it."""
    tag = zlib.crc32(policy_name.encode())
    return np.random.default_rng(np.random.SeedSequence([seed, tag, pair_id, rep]))


@dataclass
class PairRunResult:
    lengths: np.ndarray
    truncated: np.ndarray
    oracles: np.ndarray
    srcs: np.ndarray
    tgts: np.ndarray


def run_pair_episodes(g, policy, pairs, seed, t_max, oracle=None, rep=0):
    """One episode per pair with the policy's own derived random streams."""
    oracle = distance_matrix(g) if oracle is None else oracle
    pairs = pairs.pairs if isinstance(pairs, PairSet) else pairs
    lengths = np.empty(len(pairs), dtype=np.int64)
    trunc = np.zeros(len(pairs), dtype=bool)
    oracles = np.empty(len(pairs), dtype=np.int64)
    srcs = np.empty(len(pairs), dtype=np.int64)
    tgts = np.empty(len(pairs), dtype=np.int64)
    for pair_id, (src, tgt) in enumerate(pairs):
        d = int(oracle[src, tgt])
        if d < 1:
            raise ConnectivityError(f"pair ({src}, {tgt}) is unreachable or degenerate")
        rng = episode_rng(seed, policy.name, pair_id, rep)
        policy.begin_episode(g, tgt)
        state = reset(g, src, tgt, t_max)
        while state.status is Status.RUNNING:
            state, _ = step(g, state, policy.act(state.holder, rng))
        lengths[pair_id] = state.step
        trunc[pair_id] = state.status is Status.TRUNCATED
        oracles[pair_id] = d
        srcs[pair_id] = src
        tgts[pair_id] = tgt
    return PairRunResult(lengths, trunc, oracles, srcs, tgts)


def mean_oracle_ratio(lengths, oracles):
    """(mean of length/oracle over pairs, 95% normal-approximation half-width)."""
    ratios = np.asarray(lengths, dtype=np.float64) / np.asarray(oracles, dtype=np.float64)
    mean = float(ratios.mean())
    ci = 0.0 if len(ratios) < 2 else float(1.96 * ratios.std(ddof=1) / np.sqrt(len(ratios)))
    return mean, ci


def truncation_rate(truncated):
    """Percentage of truncated episodes."""
    t = np.asarray(truncated)
    return 100.0 * float(t.sum()) / len(t)


def win_rate(lengths_by_policy, seed):
    """Percent of pairs each policy wins; ties broken uniformly at random.

    The tie-break stream for pair j is default_rng(SeedSequence([seed, 3, j])).
    Rates sum to 100 across policies.
    """
    lengths = np.asarray(lengths_by_policy, dtype=np.float64)
    n_pol, n_pairs = lengths.shape
    wins = np.zeros(n_pol, dtype=np.int64)
    for j in range(n_pairs):
        col = lengths[:, j]
        tied = np.nonzero(col == col.min())[0]
        if len(tied) == 1:
            wins[tied[0]] += 1
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed, _WIN_STREAM, j]))
            wins[tied[rng.integers(len(tied))]] += 1
    return 100.0 * wins / n_pairs


@dataclass
class MetricsReport:
    policy: str
    oracle_ratio: float
    ci: float
    trunc_rate: float
    win_rate: float


@dataclass
class EvaluationResult:
    reports: list
    episodes: list  # (policy, pair_id, src, tgt, length, oracle, truncated)


def _run_policy_reps(g, policy, pair_set, seed, t_max, episodes_per_pair):
    oracle = distance_matrix(g)
    return [run_pair_episodes(g, policy, pair_set, seed, t_max, oracle, rep)
            for rep in range(episodes_per_pair)]


def evaluate(g, policies, pair_set, seed, t_max=100, episodes_per_pair=1, n_jobs=1):
    """Run every policy over the identical pair set and score all three metrics.

    Episode streams are derived per (policy, pair, repeat), so results do not
    depend on n_jobs; workers only change wall-clock time.
    """
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate policy names: {names}")
    distance_matrix(g)  # warm the cache before any forking
    if n_jobs and n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_policy_reps, g, p, pair_set, seed, t_max,
                                   episodes_per_pair) for p in policies]
            all_reps = [f.result() for f in futures]
    else:
        all_reps = [_run_policy_reps(g, p, pair_set, seed, t_max, episodes_per_pair)
                    for p in policies]
    episode_rows = []
    lengths_mat = []
    per_policy = []
    for policy, reps in zip(policies, all_reps):
        lens, truncs, oracs = [], [], []
        for res in reps:
            lens.append(res.lengths)
            truncs.append(res.truncated)
            oracs.append(res.oracles)
            for k in range(len(res.lengths)):
                episode_rows.append((policy.name, k, int(res.srcs[k]), int(res.tgts[k]),
                                     int(res.lengths[k]), int(res.oracles[k]),
                                     bool(res.truncated[k])))
        per_policy.append((np.concatenate(lens), np.concatenate(truncs), np.concatenate(oracs)))
        lengths_mat.append(np.concatenate(lens))
    wins = win_rate(np.stack(lengths_mat), seed)
    reports = []
    for policy, (lens, truncs, oracs), w in zip(policies, per_policy, wins):
        mean, ci = mean_oracle_ratio(lens, oracs)
        reports.append(MetricsReport(policy=policy.name, oracle_ratio=mean, ci=ci,
                                     trunc_rate=truncation_rate(truncs), win_rate=float(w)))
    return EvaluationResult(reports=reports, episodes=episode_rows)


def default_policy_suite(distance_tau, connection_tau, models=()):
    """The standard head-to-head lineup: four walkers plus any learned models."""
    suite = [GreedyWalker(), DistanceWalker(distance_tau), ConnectionWalker(connection_tau),
             RandomWalker()]
    suite.extend(LearnedWalker(m) for m in models)
    return suite


def sensitivity_sweep(betas, n=200, alpha=30.0, topologies=10, seed=0, d=2,
                      train_cfg=None, feature_modes=("gat",), pairs_per_graph=100,
                      tau_grid=(0.03, 0.1, 0.3, 1.0, 3.0), t_max=100):
    """Per-density head-to-head: regenerate, tune, train, evaluate for each beta.

    Returns rows (beta, policy, metric, value, ci) where value is the mean
    over topologies and ci the 95% half-width across topology means. Uses the
    full protocol at whatever scale train_cfg dictates, so desk-scale runs
    are just small configs.
    """
    from .graphs import split_nodes
    from .synth import SynthConfig, generate_connected
    from .training import TrainConfig, train, tune_temperature

    train_cfg = train_cfg or TrainConfig(episodes=2000, eval_every=100, patience=5)
    rows = []
    for beta in betas:
        by_policy = {}
        for topo in range(topologies):
            topo_seed = int(np.random.SeedSequence([seed, int(1e6 * beta), topo]).generate_state(1)[0])
            draw = generate_connected(SynthConfig(n=n, alpha=alpha, beta=float(beta),
                                                  seed=topo_seed, d=d))
            g = draw.graph
            split = split_nodes(g, rng=np.random.default_rng(topo_seed))
            val_pairs = build_pair_set(g, split.val, pairs_per_graph, topo_seed + 1, "val")
            test_pairs = build_pair_set(g, split.test, pairs_per_graph, topo_seed + 2, "test")
            best_dt, _ = tune_temperature(g, "distance", tau_grid, val_pairs, topo_seed, t_max)
            best_ct, _ = tune_temperature(g, "connection", tau_grid, val_pairs, topo_seed, t_max)
            models = []
            for mode in feature_modes:
                cfg = TrainConfig(**{**train_cfg.__dict__,
                                     "feature_mode": mode, "seed": topo_seed, "t_max": t_max})
                models.append(train(g, split, val_pairs, cfg).model)
            suite = default_policy_suite(best_dt, best_ct, models)
            result = evaluate(g, suite, test_pairs, topo_seed, t_max)
            for rep in result.reports:
                # strip the tau suffix so rows aggregate across topologies
                name = rep.policy.split("@")[0]
                by_policy.setdefault(name, {"oracle_ratio": [], "trunc_rate": [],
                                            "win_rate": []})
                by_policy[name]["oracle_ratio"].append(rep.oracle_ratio)
                by_policy[name]["trunc_rate"].append(rep.trunc_rate)
                by_policy[name]["win_rate"].append(rep.win_rate)
        for name, metrics in sorted(by_policy.items()):
            for metric, vals in metrics.items():
                arr = np.asarray(vals)
                ci = 0.0 if len(arr) < 2 else float(1.96 * arr.std(ddof=1) / np.sqrt(len(arr)))
                rows.append({"beta": float(beta), "policy": name, "metric": metric,
                             "value": float(arr.mean()), "ci": ci})
    return rows


def measure_action_time(g, policy, n_targets=100, seed=0, t_max=100, model=None):
    """Mean wall-clock milliseconds per action over episodes to n_targets targets.

    For attention-embedding models, the per-node embedding construction cost
    is measured separately over every node's ego graph and returned as the
    second element (None otherwise).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(policy.name.encode())]))
    total = 0.0
    count = 0
    for _ in range(n_targets):
        tgt = int(rng.integers(g.node_count))
        src = int(rng.integers(g.node_count))
        while src == tgt:
            src = int(rng.integers(g.node_count))
        policy.begin_episode(g, tgt)
        state = reset(g, src, tgt, t_max)
        while state.status is Status.RUNNING:
            t0 = time.perf_counter()
            choice = policy.act(state.holder, rng)
            total += time.perf_counter() - t0
            count += 1
            state, _ = step(g, state, choice)
    action_ms = 1000.0 * total / count
    overhead_ms = None
    if model is not None and model.mode == "gat":
        egos = [g.ego_graph(u) for u in range(g.node_count)]
        t0 = time.perf_counter()
        for ego in egos:
            gat_embed_ego(model.gat, ego, g.attributes)
        overhead_ms = 1000.0 * (time.perf_counter() - t0) / len(egos)
    return action_ms, overhead_ms


def export_value_heatmap(g, model, tgt, tau):
    """Rows (node, learned value toward tgt, attribute-distance score -d/tau)."""
    features = model.node_features(g)
    m = model.target_feature(g, features, tgt)
    inputs = np.concatenate(
        [features, np.broadcast_to(m, (g.node_count, len(m)))], axis=1)
    values = model.value.forward_inference(inputs)[:, 0]
    baseline = -np.linalg.norm(g.attributes - g.attributes[tgt], axis=1) / tau
    return [(u, float(values[u]), float(baseline[u])) for u in range(g.node_count)]


def _write_csv(path, header, rows, note=None):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        if note:
            w.writerow([f"# {note}"])
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_episodes_csv(path, episode_rows):
    _write_csv(path, ["policy", "pair_id", "src", "tgt", "length", "oracle", "truncated"],
               episode_rows)


def write_metrics_csv(path, reports):
    rows = [(r.policy, repr(r.oracle_ratio), repr(r.ci), repr(r.trunc_rate),
             repr(r.win_rate)) for r in reports]
    _write_csv(path, ["policy", "oracle_ratio", "ci", "trunc_rate", "win_rate"],
               rows, note=CI_NOTE)


def write_sweep_csv(path, rows):
    _write_csv(path, ["beta", "policy", "metric", "value", "ci"],
               [(r["beta"], r["policy"], r["metric"], repr(r["value"]), repr(r["ci"]))
                for r in rows])


def write_timing_csv(path, rows):
    _write_csv(path, ["graph", "policy", "action_ms", "overhead_ms"], rows)


def write_heatmap_csv(path, rows):
    _write_csv(path, ["node", "value", "baseline_score"],
               [(u, repr(v), repr(b)) for u, v, b in rows])
