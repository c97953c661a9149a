#!/usr/bin/env python3
"""Inspect the ego-graph attention embeddings and export a value heatmap.

Trains the attention-based router briefly, then writes heatmap.csv with the
learned value v(node, target) next to the attribute-distance score the
distance walker would use. Plot with any tool, e.g.:

    python -c "import pandas as pd; d = pd.read_csv('heatmap.csv'); print(d.corr())"
"""
import numpy as np

from egonav import SynthConfig, generate_connected
from egonav.evaluation import build_pair_set, export_value_heatmap, write_heatmap_csv
from egonav.graphs import split_nodes
from egonav.networks import EgoIndex, embed_centers_inference
from egonav.training import TrainConfig, train

g = generate_connected(SynthConfig(n=80, alpha=30.0, beta=5.0, seed=9)).graph
split = split_nodes(g, rng=np.random.default_rng(0))
val_pairs = build_pair_set(g, split.val, 60, seed=1, split_label="val")

cfg = TrainConfig(episodes=4000, eval_every=100, feature_mode="gat", seed=0,
                  patience=20, learning_rate=3e-4)
result = train(g, split, val_pairs, cfg)
model = result.model

emb = embed_centers_inference(model.gat, EgoIndex.build(g), g.attributes)
norm = emb / np.linalg.norm(emb, axis=1, keepdims=True)
cos = norm @ norm.T
print(f"embedding matrix: {emb.shape}, mean pairwise cosine "
      f"{cos[np.triu_indices(len(emb), 1)].mean():.3f}")

tgt = int(split.test[0])
rows = export_value_heatmap(g, model, tgt, tau=1.0)
write_heatmap_csv("heatmap.csv", rows)
values = np.array([v for _, v, _ in rows])
print(f"value surface for target {tgt}: target rank "
      f"{int((values >= values[tgt]).sum())} of {len(values)} (1 = highest value)")
print("wrote heatmap.csv (node, value, baseline_score)")
