#!/usr/bin/env python3
"""Head-to-head of the four heuristic walkers on one homophily graph.

Every policy replays the identical serialized source-target pairs; reported
are the mean oracle ratio (episode length / shortest path, lower is better),
truncation rate, and win rate with random tie-breaking.
"""
import numpy as np

from egonav import SynthConfig, generate_connected
from egonav.evaluation import build_pair_set, evaluate
from egonav.graphs import split_nodes
from egonav.policies import ConnectionWalker, DistanceWalker, GreedyWalker, RandomWalker
from egonav.training import tune_temperature

g = generate_connected(SynthConfig(n=200, alpha=30.0, beta=5.0, seed=3)).graph
split = split_nodes(g, rng=np.random.default_rng(0))
val_pairs = build_pair_set(g, split.val, 150, seed=1, split_label="val")
test_pairs = build_pair_set(g, split.test, 300, seed=2, split_label="test")

grid = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0]
best_dt, _ = tune_temperature(g, "distance", grid, val_pairs, seed=0)
best_ct, _ = tune_temperature(g, "connection", grid, val_pairs, seed=0)
print(f"tuned temperatures: distance {best_dt:g}, connection {best_ct:g}\n")

policies = [GreedyWalker(), DistanceWalker(best_dt), ConnectionWalker(best_ct),
            RandomWalker()]
result = evaluate(g, policies, test_pairs, seed=0)
print(f"{'policy':<18} {'oracle_ratio':>14} {'trunc %':>9} {'win %':>7}")
for rep in result.reports:
    print(f"{rep.policy:<18} {rep.oracle_ratio:>8.2f} ± {rep.ci:<4.2f} "
          f"{rep.trunc_rate:>8.1f} {rep.win_rate:>7.1f}")
