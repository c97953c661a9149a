#!/usr/bin/env python3
"""Train the raw-attribute actor-critic router on a small graph and watch the
validation curve drop below the random-walk baseline."""
import numpy as np

from egonav import SynthConfig, generate_connected
from egonav.evaluation import build_pair_set, mean_oracle_ratio, run_pair_episodes
from egonav.graphs import split_nodes
from egonav.policies import RandomWalker
from egonav.training import TrainConfig, train

g = generate_connected(SynthConfig(n=100, alpha=30.0, beta=5.0, seed=5)).graph
print(f"graph: {g.node_count} nodes, {g.edge_count} edges")
split = split_nodes(g, rng=np.random.default_rng(0))
val_pairs = build_pair_set(g, split.val, 100, seed=1, split_label="val")

cfg = TrainConfig(episodes=8000, eval_every=100, feature_mode="raw", seed=0, patience=30)
result = train(g, split, val_pairs, cfg)

rand = run_pair_episodes(g, RandomWalker(), val_pairs, seed=1, t_max=cfg.t_max)
rand_ratio, _ = mean_oracle_ratio(rand.lengths, rand.oracles)

print(f"\n{'episode':>8} {'val oracle ratio':>17} {'trunc %':>8} {'entropy':>8}")
for row in result.curve[:: max(1, len(result.curve) // 12)]:
    print(f"{row['episode']:>8} {row['val_oracle_ratio']:>17.3f} "
          f"{row['val_trunc_rate']:>8.1f} {row['entropy_mean']:>8.3f}")
print(f"\nbest validation oracle ratio: {result.best_val:.3f} "
      f"(random walk: {rand_ratio:.3f})")
print(f"episodes run: {result.episodes_run} (early stop: {result.stopped_early})")
