import numpy as np
import pytest

from egonav.errors import ConfigError
from egonav.graphs import bfs_distances
from egonav.synth import (SynthConfig, edge_probability, generate, generate_connected,
                          sample_attributes, wire_edges)


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(n=1, alpha=1.0, beta=1.0)
    with pytest.raises(ConfigError):
        SynthConfig(n=5, alpha=-1.0, beta=1.0)


def test_beta_zero_gives_empty_edge_set():
    g = generate(SynthConfig(n=20, alpha=3.0, beta=0.0, seed=1))
    assert g.edge_count == 0


def test_alpha_zero_beta_one_gives_complete_graph():
    g = generate(SynthConfig(n=12, alpha=0.0, beta=1.0, seed=2))
    assert g.edge_count == 12 * 11 // 2


def test_probability_clamped_at_one():
    assert edge_probability(0.0, 30.0, 5.0) == 1.0
    assert edge_probability(0.1, 30.0, 5.0) == pytest.approx(5 * np.exp(-3.0))


def test_same_seed_bit_identical():
    cfg = SynthConfig(n=40, alpha=10.0, beta=2.0, seed=123)
    a, b = generate(cfg), generate(cfg)
    assert np.array_equal(a.attributes, b.attributes)
    assert np.array_equal(a.edges(), b.edges())


def _pair_frequency(dist, alpha, beta, trials, seed):
    """Monte-Carlo edge frequency for a node pair at an exact attribute distance."""
    attrs = np.array([[0.0, 0.0], [dist, 0.0]])
    rng = np.random.default_rng(seed)
    hits = sum(len(wire_edges(attrs, alpha, beta, rng)) for _ in range(trials))
    return hits / trials


def test_monte_carlo_frequency_matches_closed_form():
    # fixed pair at distance 0.1, alpha=30, beta=5: p = min(1, 5 e^-3) ~ 0.2489
    trials = 10_000
    p = min(1.0, 5 * np.exp(-3.0))
    freq = _pair_frequency(0.1, 30.0, 5.0, trials, seed=99)
    sigma = np.sqrt(p * (1 - p) / trials)
    assert abs(freq - p) <= 3 * sigma


def test_edge_probability_monotone_in_distance():
    trials = 4000
    f_near = _pair_frequency(0.05, 30.0, 5.0, trials, seed=5)
    f_far = _pair_frequency(0.30, 30.0, 5.0, trials, seed=6)
    assert f_near > f_far


def test_expected_edge_count_alpha_zero():
    # alpha=0 makes every pair an independent Bernoulli(min(1, beta))
    n, beta, seed = 60, 0.3, 17
    g = generate(SynthConfig(n=n, alpha=0.0, beta=beta, seed=seed))
    n_pairs = n * (n - 1) // 2
    sigma = np.sqrt(n_pairs * beta * (1 - beta))
    assert abs(g.edge_count - beta * n_pairs) <= 3 * sigma


def test_attributes_live_in_unit_box():
    attrs = sample_attributes(500, 3, np.random.default_rng(0))
    assert attrs.shape == (500, 3)
    assert attrs.min() >= 0.0 and attrs.max() < 1.0


def test_generate_connected_complete_graph_unchanged():
    draw = generate_connected(SynthConfig(n=10, alpha=0.0, beta=1.0, seed=4))
    assert draw.graph.node_count == 10
    assert draw.met_threshold
    assert draw.attempt == 0
    assert draw.lcc_fraction == 1.0


def test_generate_connected_reports_best_when_sparse():
    draw = generate_connected(SynthConfig(n=30, alpha=30.0, beta=0.05, seed=8),
                              max_attempts=10)
    assert 1 <= draw.graph.node_count <= 30
    assert not draw.met_threshold
    # returned graph really is connected
    assert (bfs_distances(draw.graph, 0) >= 0).all()


def test_generate_connected_dense_config_reaches_large_component():
    sizes = []
    for seed in range(10):
        draw = generate_connected(SynthConfig(n=200, alpha=30.0, beta=5.0, seed=seed))
        sizes.append(draw.graph.node_count)
        assert (bfs_distances(draw.graph, 0) >= 0).all()
    # measured over 10 seeds; the dense config keeps at least 90% of nodes
    assert min(sizes) >= 180
