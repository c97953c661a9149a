"""Command-line entry point wiring the library into reproducible runs.

Every subcommand resolves its configuration as CLI flag > config file >
built-in default, writes the resolved values (plus input digests and
timestamps) into ``run_manifest.json`` inside the run directory, and writes
only deterministic, seed-driven CSV artifacts next to it.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric
divergence during training.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, ConnectivityError, DataFormatError, GraphInputError,
                     TrainingDiverged)
from .evaluation import (build_pair_set, evaluate, export_value_heatmap, load_pair_set,
                         measure_action_time, save_pair_set, sensitivity_sweep,
                         write_episodes_csv, write_heatmap_csv, write_metrics_csv,
                         write_sweep_csv, write_timing_csv)
from .graphs import load_graph, save_graph, split_nodes
from .networks import ActorCriticModel, load_checkpoint, save_checkpoint
from .policies import (ConnectionWalker, DistanceWalker, GreedyWalker, LearnedWalker,
                       RandomWalker)
from .snap import KNOWN_COMPONENT_STATS, select_experiment_graphs, write_id_map
from .synth import SynthConfig, generate, generate_connected
from .training import TrainConfig, train, tune_temperature

log = logging.getLogger(__name__)

USAGE_EXIT, DATA_EXIT, DIVERGED_EXIT = 2, 3, 4


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects resolved config, inputs, and artifacts for the manifest."""

    def __init__(self, subcommand, out_dir, seed):
        self.subcommand = subcommand
        self.dir = Path(out_dir) if out_dir else Path(
            f"runs/{subcommand}-{time.strftime('%Y%m%d-%H%M%S')}-s{seed}")
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = {}
        self.inputs = {}
        self.artifacts = []
        self.extra = {}
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S")

    def path(self, name):
        p = self.dir / name
        self.artifacts.append(str(p))
        return p

    def add_input(self, path):
        p = Path(path)
        if p.exists():
            self.inputs[str(p)] = _sha256(p)

    def finish(self):
        manifest = {
            "subcommand": self.subcommand,
            "version": __version__,
            "config": self.config,
            "input_digests": self.inputs,
            "artifacts": sorted(self.artifacts),
            "started_at": self.started,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            **self.extra,
        }
        with open(self.dir / "run_manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        return self.dir


class Resolver:
    """CLI flag > config file > built-in default, recording resolved values."""

    def __init__(self, args, parser):
        self.args = args
        self.parser = parser
        self.file_values = {}
        if getattr(args, "config", None):
            with open(args.config) as f:
                self.file_values = json.load(f)
            if not isinstance(self.file_values, dict):
                raise ConfigError(f"{args.config}: config file must hold a JSON object")
        self.resolved = {}

    def get(self, key, default=None, required=False):
        v = getattr(self.args, key, None)
        if v is None:
            v = self.file_values.get(key, default)
        if v is None and required:
            self.parser.error(f"missing required option --{key.replace('_', '-')}")
        self.resolved[key] = v
        return v


def _load_graph_prefix(prefix):
    edges, attrs = Path(f"{prefix}.edges"), Path(f"{prefix}.attrs")
    for p in (edges, attrs):
        if not p.exists():
            raise DataFormatError(f"graph file not found: {p}")
    return load_graph(edges, attrs), edges, attrs


def _prepare_split(g, r):
    split_seed = r.get("split_seed", 0)
    return split_nodes(g, rng=np.random.default_rng(split_seed))


def _prepare_pairs(g, split, r, run, default_split="test"):
    """Load --pairs if given, else build (and serialize) a fresh pair set."""
    pairs_file = r.get("pairs")
    if pairs_file:
        run.add_input(pairs_file)
        return load_pair_set(pairs_file)
    which = r.get("split", default_split)
    pool = {"train": split.train, "val": split.val, "test": split.test}.get(which)
    if pool is None:
        raise ConfigError(f"--split must be train, val or test, not {which!r}")
    ps = build_pair_set(g, pool, r.get("pair_count", 1000), r.get("pair_seed", 0), which)
    save_pair_set(run.path("pairs.csv"), ps)
    return ps


def _parse_policies(spec, attr_dim, run):
    """Policy list from 'greedy,distance:0.3,connection:1,random,a2c:ckpt.npz'."""
    out = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        kind, _, arg = token.partition(":")
        if kind == "greedy":
            out.append(GreedyWalker())
        elif kind == "random":
            out.append(RandomWalker())
        elif kind == "distance":
            out.append(DistanceWalker(float(arg or 1.0)))
        elif kind == "connection":
            out.append(ConnectionWalker(float(arg or 1.0)))
        elif kind == "a2c":
            if not arg:
                raise ConfigError("a2c policy needs a checkpoint path, e.g. a2c:ckpt.npz")
            run.add_input(arg)
            model, _, _ = load_checkpoint(arg)
            if model.attr_dim != attr_dim:
                raise ConfigError(
                    f"checkpoint {arg} was trained for attr_dim={model.attr_dim}, "
                    f"graph has {attr_dim}")
            out.append(LearnedWalker(model))
        else:
            raise ConfigError(f"unknown policy token {token!r}")
    if not out:
        raise ConfigError("no policies given")
    return out


def cmd_generate(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("generate", r.get("out"), seed)
    cfg = SynthConfig(n=r.get("n", required=True), alpha=r.get("alpha", required=True),
                      beta=r.get("beta", required=True), seed=seed, d=r.get("d", 2))
    connected = r.get("connected", True)
    if connected:
        draw = generate_connected(cfg)
        g = draw.graph
        provenance = {"attempt": draw.attempt, "derived_seed": draw.derived_seed,
                      "lcc_fraction": draw.lcc_fraction, "met_threshold": draw.met_threshold}
    else:
        g = generate(cfg)
        provenance = {}
    save_graph(g, run.path("graph.edges"), run.path("graph.attrs"))
    with open(run.path("graph.json"), "w") as f:
        json.dump({"n": cfg.n, "d": cfg.d, "alpha": cfg.alpha, "beta": cfg.beta,
                   "seed": cfg.seed, "connected": connected,
                   "node_count": g.node_count, "edge_count": g.edge_count,
                   **provenance}, f, indent=2, sort_keys=True)
    run.config = r.resolved
    print(f"generated graph: {g.node_count} nodes, {g.edge_count} edges -> {run.finish()}")
    return 0


def cmd_ingest(args, parser):
    r = Resolver(args, parser)
    run = Run("ingest", r.get("out"), 0)
    data_dir = r.get("data_dir", required=True)
    run.config = r.resolved
    selected = select_experiment_graphs(data_dir, r.get("min_nodes", 100),
                                        r.get("max_nodes", 600))
    rows = []
    matches = {}
    for s in selected:
        prefix = run.dir / s.name
        save_graph(s.result.graph, run.path(f"{s.name}.edges"), run.path(f"{s.name}.attrs"))
        write_id_map(run.path(f"{s.name}.idmap"), s.result.old_to_new)
        rows.append((s.name, s.n, repr(s.mean_path_length), repr(s.density), s.attr_dim))
        ref = KNOWN_COMPONENT_STATS.get(s.n)
        if ref is not None:
            l_ref, rho_ref, d_ref = ref
            matches[s.name] = bool(abs(s.mean_path_length - l_ref) <= 0.01
                                   and abs(s.density - rho_ref) <= 0.01
                                   and s.attr_dim == d_ref)
        log.info("selected ego network %s: n=%d l_G=%.3f rho=%.3f d=%d",
                 s.name, s.n, s.mean_path_length, s.density, s.attr_dim)
    with open(run.path("stats.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["graph", "n", "l_G", "rho", "d"])
        w.writerows(rows)
    run.extra["reference_matches"] = matches
    print(f"ingested {len(selected)} graphs -> {run.finish()}")
    return 0


def cmd_train(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("train", r.get("out"), seed)
    g, edges, attrs = _load_graph_prefix(r.get("graph", required=True))
    run.add_input(edges)
    run.add_input(attrs)
    cfg = TrainConfig(
        episodes=r.get("episodes", 200_000), eval_every=r.get("eval_every", 100),
        gamma=r.get("gamma", 0.99), entropy_coef=r.get("entropy_coef", 1e-3),
        t_max=r.get("t_max", 100), feature_mode=r.get("features", "gat"),
        learning_rate=r.get("lr", 3e-4), seed=seed, patience=r.get("patience", 50),
        hidden=r.get("hidden", 64), mlp_layers=r.get("mlp_layers", 3),
        embed_dim=r.get("embed_dim", 64), gat_layers=r.get("gat_layers", 3))
    split = _prepare_split(g, r)
    val_pairs = build_pair_set(g, split.val, r.get("val_pairs", 100),
                               r.get("pair_seed", 0), "val")
    save_pair_set(run.path("val_pairs.csv"), val_pairs)
    with open(run.path("split.json"), "w") as f:
        json.dump({k: getattr(split, k).tolist() for k in ("train", "val", "test")}, f)
    run.config = r.resolved
    try:
        result = train(g, split, val_pairs, cfg)
    except TrainingDiverged as exc:
        log.error("training diverged: %s", exc)
        if exc.checkpoint:
            model = ActorCriticModel(mode=cfg.feature_mode, attr_dim=g.attribute_dim,
                                     hidden=cfg.hidden, mlp_layers=cfg.mlp_layers,
                                     embed_dim=cfg.embed_dim, gat_layers=cfg.gat_layers,
                                     seed=cfg.seed)
            for (_, t), (_, data) in zip(model.parameters(), exc.checkpoint["last_finite"]):
                t.data = data
            save_checkpoint(run.path("checkpoint.npz"), model,
                            extra={"diverged": True, "learning_rate": cfg.learning_rate})
        run.extra["diverged"] = True
        run.finish()
        return DIVERGED_EXIT
    save_checkpoint(run.path("checkpoint.npz"), result.model,
                    extra={"learning_rate": cfg.learning_rate,
                           "best_val": result.best_val,
                           "best_episode": result.best_episode,
                           "episodes_run": result.episodes_run})
    with open(run.path("curve.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["episode", "train_return", "val_oracle_ratio",
                    "val_trunc_rate", "entropy_mean"])
        for row in result.curve:
            w.writerow([row["episode"], repr(row["train_return"]),
                        repr(row["val_oracle_ratio"]), repr(row["val_trunc_rate"]),
                        repr(row["entropy_mean"])])
    run.extra.update({"best_val": result.best_val, "episodes_run": result.episodes_run,
                      "stopped_early": result.stopped_early})
    print(f"trained {cfg.feature_mode} model: best val oracle ratio "
          f"{result.best_val:.4f} after {result.episodes_run} episodes -> {run.finish()}")
    return 0


def cmd_evaluate(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("evaluate", r.get("out"), seed)
    g, edges, attrs = _load_graph_prefix(r.get("graph", required=True))
    run.add_input(edges)
    run.add_input(attrs)
    split = _prepare_split(g, r)
    pairs = _prepare_pairs(g, split, r, run)
    policies = _parse_policies(r.get("policies", required=True), g.attribute_dim, run)
    result = evaluate(g, policies, pairs, seed, t_max=r.get("t_max", 100),
                      episodes_per_pair=r.get("episodes_per_pair", 1),
                      n_jobs=r.get("jobs", 1))
    write_episodes_csv(run.path("episodes.csv"), result.episodes)
    write_metrics_csv(run.path("metrics.csv"), result.reports)
    run.config = r.resolved
    for rep in result.reports:
        print(f"{rep.policy}: oracle_ratio={rep.oracle_ratio:.3f}±{rep.ci:.3f} "
              f"trunc={rep.trunc_rate:.2f}% win={rep.win_rate:.2f}%")
    print(f"-> {run.finish()}")
    return 0


def cmd_tune(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("tune", r.get("out"), seed)
    g, edges, attrs = _load_graph_prefix(r.get("graph", required=True))
    run.add_input(edges)
    run.add_input(attrs)
    walker = r.get("walker", required=True)
    grid = [float(x) for x in str(r.get("tau_grid", "0.01,0.03,0.1,0.3,1,3,10")).split(",")]
    split = _prepare_split(g, r)
    pairs = _prepare_pairs(g, split, r, run, default_split="val")
    best_tau, rows = tune_temperature(g, walker, grid, pairs, seed, r.get("t_max", 100))
    with open(run.path("tune.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau", "oracle_ratio", "trunc_rate"])
        for row in rows:
            w.writerow([repr(row["tau"]), repr(row["oracle_ratio"]), repr(row["trunc_rate"])])
    run.config = r.resolved
    run.extra["best_tau"] = best_tau
    print(f"best tau for {walker}: {best_tau:g} -> {run.finish()}")
    return 0


def cmd_sweep(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("sweep", r.get("out"), seed)
    betas = [float(x) for x in
             str(r.get("betas", "0.01,0.05,0.1,0.2,0.3,0.4,0.5,0.75,1.0")).split(",")]
    train_cfg = TrainConfig(
        episodes=r.get("episodes", 2000), eval_every=r.get("eval_every", 100),
        patience=r.get("patience", 5), seed=seed,
        t_max=r.get("t_max", 100), learning_rate=r.get("lr", 3e-4))
    rows = sensitivity_sweep(
        betas, n=r.get("n", 200), alpha=r.get("alpha", 30.0),
        topologies=r.get("topologies", 10), seed=seed, d=r.get("d", 2),
        train_cfg=train_cfg, feature_modes=tuple(str(r.get("modes", "gat")).split(",")),
        pairs_per_graph=r.get("pair_count", 100), t_max=r.get("t_max", 100))
    write_sweep_csv(run.path("sweep.csv"), rows)
    run.config = r.resolved
    print(f"swept {len(betas)} densities -> {run.finish()}")
    return 0


def cmd_bench(args, parser):
    r = Resolver(args, parser)
    seed = r.get("seed", 0)
    run = Run("bench", r.get("out"), seed)
    prefix = r.get("graph", required=True)
    g, edges, attrs = _load_graph_prefix(prefix)
    run.add_input(edges)
    run.add_input(attrs)
    policies = _parse_policies(r.get("policies", required=True), g.attribute_dim, run)
    graph_name = Path(prefix).name
    rows = []
    for policy in policies:
        model = policy.model if isinstance(policy, LearnedWalker) else None
        if isinstance(policy, LearnedWalker):
            policy.precompute = "none"  # honest per-action cost
        action_ms, overhead_ms = measure_action_time(
            g, policy, n_targets=r.get("targets", 100), seed=seed,
            t_max=r.get("t_max", 100), model=model)
        rows.append((graph_name, policy.name, repr(action_ms),
                     "" if overhead_ms is None else repr(overhead_ms)))
        print(f"{policy.name}: {action_ms:.4f} ms/action"
              + (f" (+{overhead_ms:.4f} ms/node embedding)" if overhead_ms else ""))
    write_timing_csv(run.path("timing.csv"), rows)
    run.config = r.resolved
    print(f"-> {run.finish()}")
    return 0


def cmd_heatmap(args, parser):
    r = Resolver(args, parser)
    run = Run("heatmap", r.get("out"), r.get("seed", 0))
    g, edges, attrs = _load_graph_prefix(r.get("graph", required=True))
    run.add_input(edges)
    run.add_input(attrs)
    ckpt = r.get("checkpoint", required=True)
    run.add_input(ckpt)
    model, _, _ = load_checkpoint(ckpt)
    tgt = r.get("target", required=True)
    g.check_node(tgt)
    rows = export_value_heatmap(g, model, tgt, r.get("tau", 1.0))
    write_heatmap_csv(run.path("heatmap.csv"), rows)
    run.config = r.resolved
    print(f"value heatmap for target {tgt} -> {run.finish()}")
    return 0


def _add_common(sp):
    sp.add_argument("--out", help="run directory (default: runs/<cmd>-<timestamp>-s<seed>)")
    sp.add_argument("--config", help="JSON file with default option values")
    sp.add_argument("--seed", type=int)


def build_parser():
    p = argparse.ArgumentParser(prog="egonav",
                                description="decentralized graph search experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("generate", help="synthesize a homophily graph")
    _add_common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--connected", action=argparse.BooleanOptionalAction)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("ingest", help="parse SNAP ego networks and select experiment graphs")
    _add_common(sp)
    sp.add_argument("--data-dir")
    sp.add_argument("--min-nodes", type=int)
    sp.add_argument("--max-nodes", type=int)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train", help="train an actor-critic routing model")
    _add_common(sp)
    sp.add_argument("--graph")
    sp.add_argument("--features", choices=("raw", "degree", "gat"))
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--eval-every", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--entropy-coef", type=float)
    sp.add_argument("--t-max", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--patience", type=int)
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--mlp-layers", type=int)
    sp.add_argument("--embed-dim", type=int)
    sp.add_argument("--gat-layers", type=int)
    sp.add_argument("--split-seed", type=int)
    sp.add_argument("--val-pairs", type=int)
    sp.add_argument("--pair-seed", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="head-to-head policy evaluation")
    _add_common(sp)
    sp.add_argument("--graph")
    sp.add_argument("--policies")
    sp.add_argument("--pairs")
    sp.add_argument("--split", choices=("train", "val", "test"))
    sp.add_argument("--pair-count", type=int)
    sp.add_argument("--pair-seed", type=int)
    sp.add_argument("--split-seed", type=int)
    sp.add_argument("--t-max", type=int)
    sp.add_argument("--episodes-per-pair", type=int)
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("tune", help="temperature grid search for a stochastic walker")
    _add_common(sp)
    sp.add_argument("--graph")
    sp.add_argument("--walker", choices=("distance", "connection"))
    sp.add_argument("--tau-grid")
    sp.add_argument("--pairs")
    sp.add_argument("--split", choices=("train", "val", "test"))
    sp.add_argument("--pair-count", type=int)
    sp.add_argument("--pair-seed", type=int)
    sp.add_argument("--split-seed", type=int)
    sp.add_argument("--t-max", type=int)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("sweep", help="density sensitivity sweep")
    _add_common(sp)
    sp.add_argument("--betas")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--topologies", type=int)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--eval-every", type=int)
    sp.add_argument("--patience", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--modes")
    sp.add_argument("--pair-count", type=int)
    sp.add_argument("--t-max", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bench", help="wall-clock per-action timing")
    _add_common(sp)
    sp.add_argument("--graph")
    sp.add_argument("--policies")
    sp.add_argument("--targets", type=int)
    sp.add_argument("--t-max", type=int)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("heatmap", help="export the learned value surface for one target")
    _add_common(sp)
    sp.add_argument("--graph")
    sp.add_argument("--checkpoint")
    sp.add_argument("--target", type=int)
    sp.add_argument("--tau", type=float)
    sp.set_defaults(func=cmd_heatmap)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (DataFormatError, GraphInputError, ConnectivityError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except TrainingDiverged as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return DIVERGED_EXIT


if __name__ == "__main__":
    sys.exit(main())
