"""Ingest of SNAP-style Facebook ego-network files into attributed graphs.

An ego network ships as four plain-text files sharing a stem (the ego's id):
``<id>.edges`` (one friendship per line between alters), ``<id>.feat`` (alter
id followed by d binary attributes), ``<id>.egofeat`` (the ego's d binary
attributes), and ``<id>.featnames`` (one line per attribute). The edges file
omits the ego itself, so ego-alter edges are added for every alter.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .graphs import (AttributedGraph, largest_connected_component,
                     mean_shortest_path_and_density)


# published summary statistics of the five Facebook ego-network components that
# fall in the 100-600 node band, keyed by component size:
# size -> (mean shortest path length, edge density, attribute dimension)
KNOWN_COMPONENT_STATS = {
    148: (2.69, 0.16, 105),
    168: (2.43, 0.12, 63),
    224: (2.52, 0.13, 161),
    324: (3.75, 0.05, 224),
    532: (3.45, 0.03, 262),
}


@dataclass(frozen=True)
class EgoNetFiles:
    edges_path: Path
    feat_path: Path
    egofeat_path: Path
    featnames_path: Path

    @classmethod
    def from_stem(cls, directory, ego_id):
        d = Path(directory)
        files = cls(edges_path=d / f"{ego_id}.edges", feat_path=d / f"{ego_id}.feat",
                    egofeat_path=d / f"{ego_id}.egofeat",
                    featnames_path=d / f"{ego_id}.featnames")
        for p in (files.edges_path, files.feat_path, files.egofeat_path, files.featnames_path):
            if not p.exists():
                raise DataFormatError(f"missing ego-network file: {p}")
        return files

    @property
    def ego_id(self):
        return int(self.edges_path.stem)


def _int_fields(path, expect=None):
    rows = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                vals = [int(p) for p in parts]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{ln}: {exc}") from None
            if expect is not None and len(vals) != expect:
                raise DataFormatError(
                    f"{path}:{ln}: expected {expect} fields, got {len(vals)}")
            rows.append(vals)
    return rows


@dataclass(frozen=True)
class IngestResult:
    graph: AttributedGraph
    old_to_new: dict          # original SNAP ids of kept nodes -> dense ids
    ego_id: int
    n_before_lcc: int
    dropped: int


def ingest(files):
    """Build the attributed graph of one ego network and keep its largest component.

    Attributes must be binary; the attribute dimension is the featnames line
    count. Node ids are remapped to dense integers (ascending original id)
    and the mapping of the kept component is returned.
    """
    with open(files.featnames_path) as f:
        d = sum(1 for line in f if line.strip())
    if d < 1:
        raise DataFormatError(f"{files.featnames_path}: no feature names")

    feat_rows = _int_fields(files.feat_path, expect=d + 1)
    ego_rows = _int_fields(files.egofeat_path, expect=d)
    if len(ego_rows) != 1:
        raise DataFormatError(f"{files.egofeat_path}: expected exactly 1 row")
    ego = files.ego_id
    feats = {row[0]: row[1:] for row in feat_rows}
    if ego in feats:
        raise DataFormatError(f"{files.feat_path}: ego id {ego} listed among alters")
    feats[ego] = ego_rows[0]
    for node, row in feats.items():
        if any(v not in (0, 1) for v in row):
            raise DataFormatError(f"attributes of node {node} are not binary")

    original_ids = sorted(feats)
    dense = {node: i for i, node in enumerate(original_ids)}
    edges = set()
    for u, v in _int_fields(files.edges_path, expect=2):
        if u == v:
            continue
        for node in (u, v):
            if node not in feats:
                raise DataFormatError(
                    f"{files.edges_path}: endpoint {node} has no attribute row")
        edges.add((min(dense[u], dense[v]), max(dense[u], dense[v])))
    for alter in original_ids:
        if alter != ego:
            edges.add((min(dense[ego], dense[alter]), max(dense[ego], dense[alter])))

    attrs = np.array([feats[node] for node in original_ids], dtype=np.float64)
    full = AttributedGraph(attrs, sorted(edges))
    lcc, dense_to_new = largest_connected_component(full)
    old_to_new = {original_ids[i]: new for i, new in dense_to_new.items()}
    return IngestResult(graph=lcc, old_to_new=old_to_new, ego_id=ego,
                        n_before_lcc=full.node_count,
                        dropped=full.node_count - lcc.node_count)


def write_id_map(path, old_to_new):
    with open(path, "w") as f:
        for old in sorted(old_to_new):
            f.write(f"{old} {old_to_new[old]}\n")


@dataclass(frozen=True)
class SelectedGraph:
    name: str
    result: IngestResult
    n: int
    mean_path_length: float
    density: float
    attr_dim: int


def select_experiment_graphs(data_dir, min_nodes=100, max_nodes=600):
    """Ingest every ego network under data_dir and keep graphs whose largest
    component has between min_nodes and max_nodes nodes (inclusive), sorted
    ascending by size. Each keeps its summary stats (n, mean path length,
    density, attribute dimension)."""
    data_dir = Path(data_dir)
    stems = sorted((p.stem for p in data_dir.glob("*.edges")), key=int)
    if not stems:
        raise ConfigError(f"no *.edges files under {data_dir}")
    selected = []
    for stem in stems:
        result = ingest(EgoNetFiles.from_stem(data_dir, stem))
        n = result.graph.node_count
        if not min_nodes <= n <= max_nodes:
            continue
        l_g, rho = mean_shortest_path_and_density(result.graph)
        selected.append(SelectedGraph(name=stem, result=result, n=n,
                                      mean_path_length=l_g, density=rho,
                                      attr_dim=result.graph.attribute_dim))
    selected.sort(key=lambda s: s.n)
    return selected
