import numpy as np
import pytest

from egonav import autodiff as ad
from egonav.autodiff import Tensor
from egonav.errors import TrainingDiverged
from egonav.graphs import AttributedGraph
from egonav.networks import (ActorCriticModel, AdamOptimizer, EgoIndex, GatLayer, Mlp,
                             embed_centers, embed_centers_inference, gat_embed_ego,
                             load_checkpoint, save_checkpoint)


def finite_difference(f, params, h=1e-4):
    """Central-difference gradient of scalar f() w.r.t. each tensor in params."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gf[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(a, b):
    num = np.abs(a - b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float((num / den).max())


# --- primitive ops -----------------------------------------------------------

def test_sum_of_parameters_gives_ones():
    p = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    loss = ad.tsum(p)
    loss.backward()
    assert np.array_equal(p.grad, np.ones((2, 3)))


def test_detach_severs_gradient():
    p = Tensor(np.ones(3), requires_grad=True)
    loss = ad.tsum(ad.mul(p.detach(), 2.0))
    with pytest.raises(ValueError):
        loss.backward()  # nothing traced at all
    mixed = ad.add(ad.tsum(ad.mul(p.detach(), 2.0)), ad.tsum(p))
    mixed.backward()
    assert np.array_equal(p.grad, np.ones(3))  # only the live branch contributes


def test_backward_requires_scalar():
    p = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.mul(p, 2.0).backward()


def test_broadcast_add_unbroadcasts_gradient():
    a = Tensor(np.zeros((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    ad.tsum(ad.mul(ad.add(a, b), 2.0)).backward()
    assert a.grad.shape == (4, 3) and np.all(a.grad == 2.0)
    assert b.grad.shape == (3,) and np.all(b.grad == 8.0)


@pytest.mark.parametrize("seed", range(5))
def test_primitive_grads_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    idx = np.array([0, 2, 1, 2])
    seg = np.array([0, 0, 1, 1])

    def f():
        m = ad.matmul(a, b)                      # (3,2)
        gathered = ad.gather(m, idx)             # (4,2)
        pooled = ad.segment_sum(gathered, seg, 2)
        z = ad.elu(pooled)
        w = ad.leaky_relu(ad.sub(z, 0.3), 0.2)
        return ad.tsum(ad.mul(ad.exp(ad.mul(w, 0.3)), ad.log(ad.add(ad.mul(z, z), 1.5))))

    loss = f()
    loss.backward()
    got = [a.grad.copy(), b.grad.copy()]
    want = finite_difference(lambda: f().item(), [a, b])
    assert max_rel_error(got[0], want[0]) < 1e-3
    assert max_rel_error(got[1], want[1]) < 1e-3


def test_segment_softmax_sums_to_one_and_matches_plain_softmax():
    rng = np.random.default_rng(0)
    logits = Tensor(rng.normal(size=6), requires_grad=True)
    seg = np.array([0, 0, 0, 1, 1, 1])
    p, lp = ad.segment_softmax_parts(logits, seg, 2)
    for s in (0, 1):
        part = logits.data[seg == s]
        ref = np.exp(part - part.max())
        ref /= ref.sum()
        assert np.allclose(p.data[seg == s], ref, atol=1e-14)
    assert np.allclose(np.exp(lp.data), p.data, atol=1e-14)


def test_matmul_vector_cases_match_fd():
    rng = np.random.default_rng(1)
    m = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    v = Tensor(rng.normal(size=4), requires_grad=True)

    def f():
        return ad.tsum(ad.mul(ad.matmul(m, v), ad.matmul(m, v)))

    f().backward()
    got = [m.grad.copy(), v.grad.copy()]
    want = finite_difference(lambda: f().item(), [m, v])
    assert max_rel_error(got[0], want[0]) < 1e-3
    assert max_rel_error(got[1], want[1]) < 1e-3


# --- MLP ---------------------------------------------------------------------

def test_mlp_zero_weights_zero_output():
    mlp = Mlp(3, 1, hidden=4, n_layers=3, rng=np.random.default_rng(0))
    for _, p in mlp.parameters():
        p.data = np.zeros_like(p.data)
    out = mlp.forward_inference(np.array([1.0, -2.0, 3.0]))
    assert np.all(out == 0.0)


def test_mlp_identity_single_layer():
    mlp = Mlp(3, 3, hidden=3, n_layers=1, rng=np.random.default_rng(0))
    mlp.layers[0].weights.data = np.eye(3)
    mlp.layers[0].bias.data = np.zeros(3)
    x = np.array([0.3, -1.2, 4.5])
    assert np.array_equal(mlp.forward_inference(x)[0], x)


def test_mlp_matches_straight_line_arithmetic():
    rng = np.random.default_rng(42)
    mlp = Mlp(4, 2, hidden=5, n_layers=3, rng=rng)
    x = np.random.default_rng(1).normal(size=(3, 4))
    w0, b0 = mlp.layers[0].weights.data, mlp.layers[0].bias.data
    w1, b1 = mlp.layers[1].weights.data, mlp.layers[1].bias.data
    w2, b2 = mlp.layers[2].weights.data, mlp.layers[2].bias.data
    h = np.maximum(x @ w0.T + b0, 0.0)
    h = np.maximum(h @ w1.T + b1, 0.0)
    ref = h @ w2.T + b2
    assert np.allclose(mlp.forward_inference(x), ref, atol=1e-14)
    assert np.array_equal(mlp.forward(x).data, mlp.forward_inference(x))


# --- Adam --------------------------------------------------------------------

def test_adam_zero_gradient_leaves_parameters():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = AdamOptimizer([p], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, [1.0, 2.0])


def test_adam_first_step_closed_form():
    p = Tensor(np.array([5.0]), requires_grad=True)
    opt = AdamOptimizer([p], lr=0.001)
    p.grad = np.array([1.0])
    opt.step()
    # bias-corrected m=v=1 on step 1 -> delta = -lr / (1 + eps)
    assert p.data[0] == pytest.approx(5.0 - 0.001, abs=1e-9)


def test_adam_descends_quadratic_bowl():
    p = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = AdamOptimizer([p], lr=0.05)
    losses = []
    for _ in range(100):
        opt.zero_grad()
        loss = ad.tsum(ad.mul(p, p))
        loss.backward()
        losses.append(loss.item())
        opt.step()
    assert losses[-1] < losses[10] < losses[0]


def test_adam_raises_on_non_finite_gradient():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = AdamOptimizer([p])
    p.grad = np.array([np.nan])
    with pytest.raises(TrainingDiverged):
        opt.step()


# --- attention embeddings ----------------------------------------------------

def _graph(n, edges, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return AttributedGraph(rng.random((n, d)), np.array(edges).reshape(-1, 2))


def _layers(attr_dim, dims, seed=0):
    rng = np.random.default_rng(seed)
    full = [attr_dim + 1] + list(dims)
    return [GatLayer(full[i], full[i + 1], rng) for i in range(len(dims))]


def test_singleton_ego_attention_is_identity_chain():
    g = _graph(2, [], d=3)  # node 0 isolated
    layers = _layers(3, [4, 4, 4], seed=1)
    ego = g.ego_graph(0)
    got = gat_embed_ego(layers, ego, g.attributes)
    # attention over one member puts weight 1 on self: plain layer chain
    h = np.append(g.attributes[0], 1.0)
    for layer in layers:
        z = h @ layer.weights.data.T
        h = np.where(z > 0, z, np.exp(np.minimum(z, 0.0)) - 1.0)
    assert np.allclose(got, h, atol=1e-12)


def test_symmetric_members_get_equal_embeddings():
    # path 1-0-2 with identical attributes on 1 and 2: roles are symmetric
    attrs = np.array([[0.5, 0.5], [0.2, 0.9], [0.2, 0.9]])
    g = AttributedGraph(attrs, [(0, 1), (0, 2)])
    layers = _layers(2, [4, 4], seed=3)
    index = EgoIndex.build(g, centers=[0])
    h = embed_centers_inference(layers, index, g.attributes)
    # intermediate check via single layer on rows 1 and 2 of the ego
    one = EgoIndex.for_ego(g.ego_graph(0))
    feats = one.input_features(g.attributes)
    assert np.array_equal(feats[1], feats[2])
    assert h.shape == (1, 4)


def test_center_embedding_invariant_to_member_relabeling():
    rng = np.random.default_rng(7)
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3), (3, 4), (0, 4), (1, 5), (0, 5)]
    g = _graph(6, edges, d=3, seed=7)
    layers = _layers(3, [8, 8, 8], seed=11)
    base = gat_embed_ego(layers, g.ego_graph(0), g.attributes)
    for trial in range(20):
        perm = np.append(0, 1 + rng.permutation(5))  # keep center id 0
        inv = np.argsort(perm)
        relabeled = AttributedGraph(g.attributes[inv],
                                    [(int(perm[a]), int(perm[b])) for a, b in g.edges()])
        got = gat_embed_ego(layers, relabeled.ego_graph(0), relabeled.attributes)
        assert np.allclose(got, base, atol=1e-12)


def test_batched_embeddings_match_single_ego_path():
    g = _graph(9, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (5, 6), (6, 2),
                   (7, 8), (0, 7)], d=2, seed=5)
    layers = _layers(2, [6, 6, 6], seed=6)
    index = EgoIndex.build(g)
    batched = embed_centers_inference(layers, index, g.attributes)
    for u in range(9):
        single = gat_embed_ego(layers, g.ego_graph(u), g.attributes)
        assert np.allclose(single, batched[u], rtol=1e-12, atol=1e-13)


def test_traced_and_inference_embeddings_bit_identical():
    g = _graph(8, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (2, 5), (5, 6), (6, 7)],
               d=2, seed=8)
    layers = _layers(2, [5, 5], seed=9)
    index = EgoIndex.build(g)
    traced = embed_centers(layers, index, g.attributes)
    plain = embed_centers_inference(layers, index, g.attributes)
    assert np.array_equal(traced.data, plain)


def test_embedding_gradients_match_finite_differences():
    g = _graph(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)], d=2, seed=10)
    layers = _layers(2, [4, 4], seed=12)
    index = EgoIndex.build(g)
    params = [t for layer in layers for _, t in layer.parameters()]
    coef = np.random.default_rng(0).normal(size=(6, 4))

    def f():
        return ad.tsum(ad.mul(embed_centers(layers, index, g.attributes), Tensor(coef)))

    loss = f()
    loss.backward()
    got = [p.grad.copy() for p in params]
    want = finite_difference(lambda: f().item(), params)
    for gg, ww in zip(got, want):
        assert max_rel_error(gg, ww) < 1e-3


# --- checkpoints -------------------------------------------------------------

def test_checkpoint_round_trip_bit_identical(tmp_path):
    model = ActorCriticModel("gat", attr_dim=3, hidden=8, embed_dim=6, seed=4)
    g = _graph(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0)], d=3, seed=4)
    opt = AdamOptimizer([t for _, t in model.parameters()], lr=0.01)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, optimizer=opt, extra={"learning_rate": 0.01})
    loaded, meta, adam_state = load_checkpoint(path)
    assert meta["extra"]["learning_rate"] == 0.01
    assert adam_state["t"] == 0
    for (n1, t1), (n2, t2) in zip(model.parameters(), loaded.parameters()):
        assert n1 == n2
        assert np.array_equal(t1.data, t2.data)
    feats_a = model.node_features(g)
    feats_b = loaded.node_features(g)
    assert np.array_equal(feats_a, feats_b)
    x = np.random.default_rng(3).normal(size=(4, 2 * model.feature_dim))
    assert np.array_equal(model.policy.forward_inference(x),
                          loaded.policy.forward_inference(x))
