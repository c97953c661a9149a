"""Dense layers, MLPs, ego-graph attention embeddings, Adam, and checkpoints.

Two execution paths exist on purpose: the traced path builds autodiff graphs
for training, and the `_inference` twins run the identical arithmetic in plain
numpy for rollouts and evaluation. Tests pin the two paths to bit-equality.
"""
from __future__ import annotations

import json

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, TrainingDiverged

FEATURE_MODES = ("raw", "degree", "gat")

LEAKY_SLOPE = 0.2          # attention score nonlinearity
MLP_ACTIVATION = "relu"    # hidden activation of policy/value heads
GAT_ACTIVATION = "elu"     # activation between attention layers


def _uniform_fan_in(rng, out_dim, in_dim):
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


class DenseLayer:
    """Affine map y = x W^T + b."""

    def __init__(self, in_dim, out_dim, rng):
        self.weights = Tensor(_uniform_fan_in(rng, out_dim, in_dim), requires_grad=True)
        self.bias = Tensor(rng.uniform(-1.0 / np.sqrt(in_dim), 1.0 / np.sqrt(in_dim), out_dim),
                           requires_grad=True)
        self.in_dim = in_dim
        self.out_dim = out_dim

    def __call__(self, x):
        return ad.add(ad.matmul(x, _transpose(self.weights)), self.bias)


def _transpose(t):
    return ad._node(t.data.T, (t,), lambda g: (g.T,))


class Mlp:
    """Stack of dense layers, rectified-linear between them, linear output."""

    def __init__(self, in_dim, out_dim, hidden=64, n_layers=3, rng=None):
        if n_layers < 1:
            raise ConfigError("need at least one layer")
        rng = np.random.default_rng() if rng is None else rng
        dims = [in_dim] + [hidden] * (n_layers - 1) + [out_dim]
        self.layers = [DenseLayer(dims[i], dims[i + 1], rng) for i in range(n_layers)]

    def forward(self, x):
        """Traced forward pass; x may be a Tensor or a constant array."""
        h = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(x))
        for layer in self.layers[:-1]:
            h = ad.relu(layer(h))
        return self.layers[-1](h)

    def forward_inference(self, x):
        """Plain-numpy twin of forward (bit-identical outputs)."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        for layer in self.layers[:-1]:
            h = np.maximum(h @ layer.weights.data.T + layer.bias.data, 0.0)
        return h @ self.layers[-1].weights.data.T + self.layers[-1].bias.data

    def parameters(self):
        for i, layer in enumerate(self.layers):
            yield f"l{i}.w", layer.weights
            yield f"l{i}.b", layer.bias


class GatLayer:
    """Single-head graph attention layer.

    Scores follow the usual recipe: e_ij = leaky_relu(a . [W h_i || W h_j])
    with the attention vector split into source and destination halves,
    normalized by softmax over each node's ego neighborhood plus itself.
    """

    def __init__(self, in_dim, out_dim, rng, slope=LEAKY_SLOPE):
        self.weights = Tensor(_uniform_fan_in(rng, out_dim, in_dim), requires_grad=True)
        self.att_src = Tensor(_uniform_fan_in(rng, 1, out_dim)[0], requires_grad=True)
        self.att_dst = Tensor(_uniform_fan_in(rng, 1, out_dim)[0], requires_grad=True)
        self.slope = slope
        self.in_dim = in_dim
        self.out_dim = out_dim

    def parameters(self):
        yield "w", self.weights
        yield "a_src", self.att_src
        yield "a_dst", self.att_dst


class EgoIndex:
    """Flattened view of a batch of ego graphs for vectorized attention.

    Rows are the disjoint union of all ego-graph member lists; attention
    pairs (i attends to j) cover, inside each ego graph, every member's
    within-ego neighborhood plus a self pair.
    """

    def __init__(self, rows, is_center, center_rows, centers, att_i, att_j):
        self.rows = rows
        self.is_center = is_center
        self.center_rows = center_rows
        self.centers = centers
        self.att_i = att_i
        self.att_j = att_j
        self.n_rows = len(rows)

    @classmethod
    def build(cls, graph, centers=None):
        centers = range(graph.node_count) if centers is None else [int(c) for c in centers]
        rows, flags, center_rows, kept = [], [], [], []
        att_i, att_j = [], []
        base = 0
        for c in centers:
            ego = graph.ego_graph(c)
            members = ego.members.tolist()
            pos = {m: base + k for k, m in enumerate(members)}
            rows.extend(members)
            flags.extend(1.0 if m == c else 0.0 for m in members)
            center_rows.append(pos[c])
            kept.append(c)
            for k in range(len(members)):
                att_i.append(base + k)
                att_j.append(base + k)
            for a, b in ego.edges.tolist():
                att_i.append(pos[a])
                att_j.append(pos[b])
                att_i.append(pos[b])
                att_j.append(pos[a])
            base += len(members)
        return cls(np.array(rows, dtype=np.int64), np.array(flags, dtype=np.float64),
                   np.array(center_rows, dtype=np.int64), np.array(kept, dtype=np.int64),
                   np.array(att_i, dtype=np.int64), np.array(att_j, dtype=np.int64))

    @classmethod
    def for_ego(cls, ego):
        """Index over a single ego graph."""

        class _One:
            node_count = 1

            def ego_graph(self, _):
                return ego

        return cls.build(_One(), centers=[ego.center])

    def input_features(self, attrs):
        """Per-row [raw attributes || center indicator] feature matrix."""
        return np.concatenate([np.asarray(attrs)[self.rows], self.is_center[:, None]], axis=1)


def embed_centers(layers, index, attrs):
    """Traced attention embeddings for every center in the index; (n_centers, out)."""
    h = Tensor(index.input_features(attrs))
    r = index.n_rows
    for layer in layers:
        wh = ad.matmul(h, _transpose(layer.weights))
        s_i = ad.matmul(wh, layer.att_src)
        s_j = ad.matmul(wh, layer.att_dst)
        e = ad.leaky_relu(ad.add(ad.gather(s_i, index.att_i), ad.gather(s_j, index.att_j)),
                          layer.slope)
        p, _ = ad.segment_softmax_parts(e, index.att_i, r)
        msgs = ad.mul(ad.gather(wh, index.att_j), ad.reshape(p, (-1, 1)))
        h = ad.elu(ad.segment_sum(msgs, index.att_i, r))
    return ad.gather(h, index.center_rows)


def embed_centers_inference(layers, index, attrs):
    """Plain-numpy twin of embed_centers (bit-identical outputs)."""
    h = index.input_features(attrs)
    r = index.n_rows
    for layer in layers:
        wh = h @ layer.weights.data.T
        s_i = wh @ layer.att_src.data
        s_j = wh @ layer.att_dst.data
        raw = s_i[index.att_i] + s_j[index.att_j]
        e = raw * np.where(raw > 0.0, 1.0, layer.slope)
        shift = ad.segment_max_data(e, index.att_i, r)
        ex = np.exp(e - shift[index.att_i])
        denom = ad.scatter_add_rows(index.att_i, ex, r)
        p = ex / denom[index.att_i]
        msgs = wh[index.att_j] * p[:, None]
        agg = ad.scatter_add_rows(index.att_i, msgs, r)
        neg = np.exp(np.minimum(agg, 0.0)) - 1.0
        h = np.where(agg > 0.0, agg, neg)
    return h[index.center_rows]


def gat_embed_ego(layers, ego, attrs, traced=False):
    """Embedding of one ego graph's center node.

    The center indicator is appended to each member's raw attributes and
    message passing runs over the same 1-hop subgraph at every layer.
    """
    index = EgoIndex.for_ego(ego)
    if traced:
        return ad.reshape(embed_centers(layers, index, attrs), (-1,))
    return embed_centers_inference(layers, index, attrs)[0]


class AdamOptimizer:
    """Adam with bias correction over a list of parameter tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        # moments live in one flat buffer; the update is a handful of
        # vectorized ops instead of eight per parameter tensor
        sizes = [p.data.size for p in self.params]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)])
        total = int(self._offsets[-1])
        self._m = np.zeros(total)
        self._v = np.zeros(total)
        self._g = np.zeros(total)
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        g = self._g
        for p, lo, hi in zip(self.params, self._offsets, self._offsets[1:]):
            if p.grad is None:
                g[lo:hi] = 0.0
            else:
                g[lo:hi] = p.grad.reshape(-1)
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient in optimizer step")
        self._m *= self.beta1
        self._m += (1.0 - self.beta1) * g
        self._v *= self.beta2
        self._v += (1.0 - self.beta2) * (g * g)
        mhat = self._m / (1.0 - self.beta1 ** self.t)
        vhat = self._v / (1.0 - self.beta2 ** self.t)
        delta = self.lr * mhat / (np.sqrt(vhat) + self.eps)
        for p, lo, hi in zip(self.params, self._offsets, self._offsets[1:]):
            p.data -= delta[lo:hi].reshape(p.data.shape)

    @property
    def m(self):
        return [self._m[lo:hi].reshape(p.data.shape)
                for p, lo, hi in zip(self.params, self._offsets, self._offsets[1:])]

    @property
    def v(self):
        return [self._v[lo:hi].reshape(p.data.shape)
                for p, lo, hi in zip(self.params, self._offsets, self._offsets[1:])]

    def state(self):
        return {"t": self.t, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}


class ActorCriticModel:
    """Policy head, value head, and (for 'gat' mode) the embedding stack.

    Feature modes:
      raw     nodes use raw attributes, target side raw attributes
      degree  nodes use [attributes || degree], target side raw attributes
      gat     nodes and target use attention embeddings
    """

    def __init__(self, mode, attr_dim, hidden=64, mlp_layers=3,
                 embed_dim=64, gat_layers=3, seed=0):
        if mode not in FEATURE_MODES:
            raise ConfigError(f"unknown feature mode {mode!r}; pick one of {FEATURE_MODES}")
        self.mode = mode
        self.attr_dim = attr_dim
        self.hidden = hidden
        self.mlp_layers = mlp_layers
        self.embed_dim = embed_dim
        self.gat_layers = gat_layers
        self.seed = seed
        rng = np.random.default_rng(seed)
        if mode == "raw":
            self.feature_dim, self.target_dim = attr_dim, attr_dim
        elif mode == "degree":
            self.feature_dim, self.target_dim = attr_dim + 1, attr_dim
        else:
            self.feature_dim, self.target_dim = embed_dim, embed_dim
        self.gat = None
        if mode == "gat":
            dims = [attr_dim + 1] + [embed_dim] * gat_layers
            self.gat = [GatLayer(dims[i], dims[i + 1], rng) for i in range(gat_layers)]
        pair_dim = self.feature_dim + self.target_dim
        self.policy = Mlp(pair_dim, 1, hidden, mlp_layers, rng)
        self.value = Mlp(pair_dim, 1, hidden, mlp_layers, rng)

    @property
    def name(self):
        return f"a2c-{self.mode}"

    def parameters(self):
        """(name, tensor) pairs in a stable order."""
        out = []
        if self.gat is not None:
            for i, layer in enumerate(self.gat):
                out.extend((f"gat{i}.{n}", t) for n, t in layer.parameters())
        out.extend((f"policy.{n}", t) for n, t in self.policy.parameters())
        out.extend((f"value.{n}", t) for n, t in self.value.parameters())
        return out

    def static_features(self, graph):
        """Node feature matrix for raw/degree modes (None for gat)."""
        if self.mode == "raw":
            return graph.attributes
        if self.mode == "degree":
            return np.concatenate([graph.attributes,
                                   graph.degrees.astype(np.float64)[:, None]], axis=1)
        return None

    def node_features(self, graph, index=None):
        """Per-node features under this model's mode (inference path)."""
        if self.mode != "gat":
            return self.static_features(graph)
        index = EgoIndex.build(graph) if index is None else index
        return embed_centers_inference(self.gat, index, graph.attributes)

    def target_feature(self, graph, features, tgt):
        """The message vector: what the searcher knows about the target."""
        if self.mode == "gat":
            return features[tgt]
        return graph.attributes[tgt]

    def config(self):
        return {
            "mode": self.mode, "attr_dim": self.attr_dim, "hidden": self.hidden,
            "mlp_layers": self.mlp_layers, "embed_dim": self.embed_dim,
            "gat_layers": self.gat_layers, "seed": self.seed,
            "mlp_activation": MLP_ACTIVATION, "gat_activation": GAT_ACTIVATION,
            "attention_slope": LEAKY_SLOPE, "init": "uniform-fan-in",
        }


def save_checkpoint(path, model, optimizer=None, extra=None):
    """Write every parameter tensor plus a JSON config sidecar into one .npz."""
    meta = {"config": model.config(), "extra": extra or {}}
    arrays = {f"param/{name}": t.data for name, t in model.parameters()}
    if optimizer is not None:
        state = optimizer.state()
        meta["adam"] = {"t": state["t"], "lr": optimizer.lr,
                        "beta1": optimizer.beta1, "beta2": optimizer.beta2,
                        "eps": optimizer.eps}
        for i, (m, v) in enumerate(zip(state["m"], state["v"])):
            arrays[f"adam/m{i}"] = m
            arrays[f"adam/v{i}"] = v
    np.savez(path, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path):
    """Rebuild a model (and optimizer moments, if present) from save_checkpoint output."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"][()]))
        cfg = meta["config"]
        model = ActorCriticModel(
            mode=cfg["mode"], attr_dim=cfg["attr_dim"], hidden=cfg["hidden"],
            mlp_layers=cfg["mlp_layers"], embed_dim=cfg["embed_dim"],
            gat_layers=cfg["gat_layers"], seed=cfg["seed"])
        for name, t in model.parameters():
            stored = z[f"param/{name}"]
            if stored.shape != t.data.shape:
                raise ConfigError(f"checkpoint tensor {name} has shape {stored.shape}, "
                                  f"expected {t.data.shape}")
            t.data = stored.astype(np.float64)
        adam_state = None
        if "adam" in meta:
            n = len(model.parameters())
            adam_state = dict(meta["adam"])
            adam_state["m"] = [z[f"adam/m{i}"] for i in range(n)]
            adam_state["v"] = [z[f"adam/v{i}"] for i in range(n)]
    return model, meta, adam_state
