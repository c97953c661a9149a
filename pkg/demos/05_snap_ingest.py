#!/usr/bin/env python3
"""Ingest SNAP-style Facebook ego networks.

Point EGONAV_SNAP_DIR (or the first CLI argument) at a directory containing
<id>.edges / <id>.feat / <id>.egofeat / <id>.featnames files. Without real
data the demo builds a small synthetic fixture so the pipeline still runs.
"""
import os
import sys
import tempfile
from pathlib import Path

from egonav.graphs import mean_shortest_path_and_density
from egonav.snap import select_experiment_graphs


def make_fixture(directory):
    directory = Path(directory)
    alters = list(range(1, 140))
    with open(directory / "0.edges", "w") as f:
        for i in range(0, 130, 2):
            f.write(f"{alters[i]} {alters[i + 1]}\n")
    with open(directory / "0.feat", "w") as f:
        for a in alters:
            f.write(f"{a} {a % 2} {(a // 2) % 2} 1\n")
    with open(directory / "0.egofeat", "w") as f:
        f.write("1 0 1\n")
    with open(directory / "0.featnames", "w") as f:
        f.writelines(f"{i} feature;{i}\n" for i in range(3))


data_dir = sys.argv[1] if len(sys.argv) > 1 else os.environ.get("EGONAV_SNAP_DIR")
tmp = None
if data_dir is None:
    tmp = tempfile.TemporaryDirectory()
    make_fixture(tmp.name)
    data_dir = tmp.name
    print("no data directory given; using a synthetic 140-node fixture\n")

selected = select_experiment_graphs(data_dir, min_nodes=100, max_nodes=600)
print(f"{'graph':<8} {'n':>5} {'l_G':>6} {'rho':>6} {'d':>5} {'dropped':>8}")
for s in selected:
    print(f"{s.name:<8} {s.n:>5} {s.mean_path_length:>6.2f} {s.density:>6.3f} "
          f"{s.attr_dim:>5} {s.result.dropped:>8}")
if not selected:
    print("(no ego network had a largest component inside [100, 600] nodes)")
