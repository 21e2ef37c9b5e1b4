"""GIN graph encoder in plain numpy.

Layer k update: h_v <- MLP_k(h_v + sum of neighbor states), i.e. sum
aggregation with epsilon = 0. Each MLP is mlp_depth linear maps with batch
normalization and ReLU after every hidden layer. The graph readout sums
node states per layer and concatenates the per-layer sums, so the
embedding dimension is num_layers * hidden.

Normalization modes:
  train  batch statistics over all nodes in the forward pass; running
         statistics updated.
  eval   statistics computed from the nodes of the collection being
         embedded, in one deterministic pass. Comparing two sets is done
         by embedding their union so both live on a common scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import FeatureMismatchError
from .features import FEATURE_CONFIGS, feature_dim, structural_features
from .graphs import Graph, atomic_write_text

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

# feature selectors accepted by the encoder: the structural ones, plus
# "provided" for datasets whose files carry their own node features
ENCODER_FEATURE_CONFIGS = FEATURE_CONFIGS + ("provided",)


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 3
    hidden: int = 32
    lipschitz_bound: float = 1.0
    feature_config: str = "none"
    mlp_depth: int = 2
    input_dim: int | None = None  # required iff feature_config == "provided"

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if not self.lipschitz_bound > 0:
            raise ValueError("lipschitz_bound must be > 0")
        if self.mlp_depth < 1:
            raise ValueError("mlp_depth must be >= 1")
        if self.feature_config not in ENCODER_FEATURE_CONFIGS:
            raise ValueError(f"unknown feature_config {self.feature_config!r}")
        if self.feature_config == "provided" and self.input_dim is None:
            raise ValueError("feature_config 'provided' requires input_dim")

    @property
    def in_dim(self) -> int:
        if self.feature_config == "provided":
            return int(self.input_dim)
        return feature_dim(self.feature_config)

    @property
    def embedding_dim(self) -> int:
        return self.num_layers * self.hidden

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "hidden": self.hidden,
            "lipschitz_bound": self.lipschitz_bound,
            "feature_config": self.feature_config,
            "mlp_depth": self.mlp_depth,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d) -> "EncoderConfig":
        return cls(**d)


@dataclass
class EncoderParams:
    """Trainable weights plus batch-norm running statistics.

    weights maps "l{k}.m{m}.W" / ".b" for every linear and
    "l{k}.m{m}.gamma" / ".beta" for every hidden-layer normalization;
    running maps "l{k}.m{m}.mean" / ".var".
    """

    config: EncoderConfig
    weights: dict = field(default_factory=dict)
    running: dict = field(default_factory=dict)

    def weight_matrices(self):
        """(name, matrix) pairs for the linear weights, layer order."""
        return [(name, w) for name, w in sorted(self.weights.items()) if name.endswith(".W")]

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            config=self.config,
            weights={k: v.copy() for k, v in self.weights.items()},
            running={k: v.copy() for k, v in self.running.items()},
        )


def orthogonal_matrix(rng, rows: int, cols: int) -> np.ndarray:
    """Haar-orthogonal (rows, cols): tall gives W'W = I, wide gives WW' = I."""
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q)


def init_random(config: EncoderConfig, seed: int = 0) -> EncoderParams:
    """Orthogonally initialized encoder; deterministic per seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    weights = {}
    running = {}
    d_in = config.in_dim
    for k in range(config.num_layers):
        dims = [d_in] + [config.hidden] * config.mlp_depth
        for m in range(config.mlp_depth):
            weights[f"l{k}.m{m}.W"] = orthogonal_matrix(rng, dims[m], dims[m + 1])
            weights[f"l{k}.m{m}.b"] = np.zeros(dims[m + 1])
            if m < config.mlp_depth - 1:
                weights[f"l{k}.m{m}.gamma"] = np.ones(dims[m + 1])
                weights[f"l{k}.m{m}.beta"] = np.zeros(dims[m + 1])
                running[f"l{k}.m{m}.mean"] = np.zeros(dims[m + 1])
                running[f"l{k}.m{m}.var"] = np.ones(dims[m + 1])
        d_in = config.hidden
    return EncoderParams(config=config, weights=weights, running=running)


def spectral_norm(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 5000) -> float:
    """Largest singular value by power iteration on the Gram matrix."""
    w = np.asarray(matrix, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("spectral_norm expects a matrix")
    if not np.all(np.isfinite(w)):
        raise ValueError("spectral_norm expects finite entries")
    if w.size == 0:
        return 0.0
    rng = np.random.Generator(np.random.PCG64(12345))
    v = rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = w @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = w.T @ (u / nu)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
        prev, sigma = sigma, nv
        if abs(sigma - prev) <= tol * max(sigma, 1.0):
            break
    return float(sigma)


def project_lipschitz(params: EncoderParams, lam: float | None = None) -> EncoderParams:
    """Rescale every linear weight whose spectral norm exceeds lam.

    Idempotent: matrices already inside the ball are untouched; others are
    scaled to norm exactly lam. Biases and normalization parameters are
    never modified.
    """
    if lam is None:
        lam = params.config.lipschitz_bound
    if not lam > 0:
        raise ValueError("lipschitz bound must be > 0")
    out = params.copy()
    for name, w in out.weight_matrices():
        sigma = spectral_norm(w)
        if sigma > lam:
            out.weights[name] = w * (lam / sigma)
    return out


def max_weight_spectral_norm(params: EncoderParams) -> float:
    return max(spectral_norm(w) for _, w in params.weight_matrices())


@dataclass
class BatchedGraphs:
    """Block-diagonal packing of a graph collection for one forward pass."""

    features: np.ndarray       # (total_nodes, d_in)
    agg: sp.csr_matrix         # A + I over the packed nodes
    pool: sp.csr_matrix        # (num_graphs, total_nodes) sum-pooling
    sizes: np.ndarray

    @property
    def num_graphs(self) -> int:
        return self.pool.shape[0]


def graph_features(graph: Graph, config: EncoderConfig) -> np.ndarray:
    """Node feature matrix for one graph under the encoder's selector.

    Graphs that already carry node features (e.g. augmented views with
    carried-over structural features, or datasets with intrinsic features)
    must match the configured input dimension.
    """
    if graph.node_features is not None:
        if graph.node_features.shape[1] != config.in_dim:
            raise FeatureMismatchError(
                f"graph carries {graph.node_features.shape[1]}-dim node features, "
                f"config expects {config.in_dim}"
            )
        return graph.node_features
    if config.feature_config == "provided":
        raise FeatureMismatchError("config expects provided node features, graph has none")
    return structural_features(graph, config.feature_config)


def pack_graphs(graphs, config: EncoderConfig) -> BatchedGraphs:
    feats = []
    for i, g in enumerate(graphs):
        try:
            feats.append(graph_features(g, config))
        except FeatureMismatchError as exc:
            raise FeatureMismatchError(f"graph {i}: {exc}") from exc
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    x = np.vstack(feats) if total else np.zeros((0, config.in_dim))

    rows, cols = [np.arange(total)], [np.arange(total)]  # the +I part
    for g, off in zip(graphs, offsets):
        e = g.edge_array() + off
        rows.extend([e[:, 0], e[:, 1]])
        cols.extend([e[:, 1], e[:, 0]])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    agg = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(total, total))

    gidx = np.repeat(np.arange(len(graphs)), sizes)
    pool = sp.csr_matrix(
        (np.ones(total), (gidx, np.arange(total))), shape=(len(graphs), total)
    )
    return BatchedGraphs(features=x, agg=agg, pool=pool, sizes=sizes)


def forward_batch(params: EncoderParams, batch: BatchedGraphs, mode: str = "eval",
                  collect_cache: bool = False):
    """Run the encoder over a packed batch.

    Returns (embeddings, cache); cache holds the intermediates needed for
    the reverse pass when collect_cache is set. Train mode additionally
    updates the running normalization statistics in place.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    cfg = params.config
    w = params.weights
    h = batch.features
    readouts = []
    cache = {"batch": batch, "layers": []} if collect_cache else None
    for k in range(cfg.num_layers):
        lc = {"h_in": h} if collect_cache else None
        z = batch.agg @ h
        if collect_cache:
            lc["agg_out"] = z
        steps = []
        for m in range(cfg.mlp_depth):
            lin_in = z
            z = z @ w[f"l{k}.m{m}.W"] + w[f"l{k}.m{m}.b"]
            step = {"lin_in": lin_in}
            if m < cfg.mlp_depth - 1:
                mean = z.mean(axis=0)
                var = z.var(axis=0)
                if mode == "train":
                    n = z.shape[0]
                    unbiased = var * (n / (n - 1)) if n > 1 else var
                    params.running[f"l{k}.m{m}.mean"] *= 1 - BN_MOMENTUM
                    params.running[f"l{k}.m{m}.mean"] += BN_MOMENTUM * mean
                    params.running[f"l{k}.m{m}.var"] *= 1 - BN_MOMENTUM
                    params.running[f"l{k}.m{m}.var"] += BN_MOMENTUM * unbiased
                inv_std = 1.0 / np.sqrt(var + BN_EPS)
                normed = (z - mean) * inv_std
                z = normed * w[f"l{k}.m{m}.gamma"] + w[f"l{k}.m{m}.beta"]
                pre_relu = z
                z = np.maximum(z, 0.0)
                if collect_cache:
                    step.update(normed=normed, inv_std=inv_std, pre_relu=pre_relu)
            if collect_cache:
                steps.append(step)
        if collect_cache:
            lc["steps"] = steps
            lc["h_out"] = z
            cache["layers"].append(lc)
        h = z
        readouts.append(batch.pool @ h)
    emb = np.hstack(readouts)
    if collect_cache:
        cache["embedding"] = emb
    return emb, cache


def embed_set(params: EncoderParams, graphs, mode: str = "eval") -> np.ndarray:
    """Embed a collection of graphs; row i corresponds to graphs[i].

    In eval mode the normalization statistics come from this collection's
    nodes, so embedding the union of two sets places them on one scale.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("cannot embed an empty collection")
    batch = pack_graphs(graphs, params.config)
    emb, _ = forward_batch(params, batch, mode=mode)
    if not np.all(np.isfinite(emb)):
        bad = np.flatnonzero(~np.isfinite(emb).all(axis=1))
        raise FeatureMismatchError(f"non-finite embedding for graph indices {bad.tolist()}")
    return emb


def embed_union(params: EncoderParams, set_a, set_b, mode: str = "eval"):
    """Embed two sets in one pass with shared statistics; returns (H_a, H_b)."""
    graphs_a, graphs_b = list(set_a), list(set_b)
    emb = embed_set(params, graphs_a + graphs_b, mode=mode)
    return emb[: len(graphs_a)], emb[len(graphs_a):]


def forward(params: EncoderParams, graph: Graph, mode: str = "eval") -> np.ndarray:
    """Embedding vector of a single graph."""
    return embed_set(params, [graph], mode=mode)[0]


CHECKPOINT_VERSION = 1


def save_params(params: EncoderParams, path) -> None:
    """Versioned JSON checkpoint with the config embedded."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "weights": {k: v.tolist() for k, v in params.weights.items()},
        "running": {k: v.tolist() for k, v in params.running.items()},
    }
    atomic_write_text(path, json.dumps(payload))


def load_params(path) -> EncoderParams:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    return EncoderParams(
        config=EncoderConfig.from_dict(payload["config"]),
        weights={k: np.asarray(v, dtype=np.float64) for k, v in payload["weights"].items()},
        running={k: np.asarray(v, dtype=np.float64) for k, v in payload["running"].items()},
    )
