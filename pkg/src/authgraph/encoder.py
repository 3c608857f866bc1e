"""Multi-scale attention encoder for event-centered subgraphs.

Two branches share one hidden width and are fused by addition before sum
pooling:

* a stack of local attention layers that weight each node's merged-edge
  neighbors (self included) and aggregate with an Elu nonlinearity;
* an edge-aware global attention branch in which every node attends over all
  nodes, with pairwise edge features gating the scores through a signed-sqrt
  nonlinearity.

Random-walk transition probabilities up to K-1 steps provide relative
position features: the diagonal augments node features, the full table
augments the dense pairwise edge features (zero rows for absent edges).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeMismatch
from .graph import EDGE_FEATURE_DIM, node_feature_rows
from .sampling import EventSubgraph
from .tensor import Tensor


@dataclass
class EncoderConfig:
    node_feat_dim: int
    edge_feat_dim: int = EDGE_FEATURE_DIM
    hidden: int = 64
    local_layers: int = 2
    heads: int = 4
    walk_len: int = 32
    dropout: float = 0.2
    disable_local: bool = False
    disable_global: bool = False
    disable_pos: bool = False
    dtype: str = "float64"

    def validate(self) -> "EncoderConfig":
        if self.walk_len < 1:
            raise ConfigError(f"walk_len must be >= 1, got {self.walk_len}")
        if self.hidden % self.heads != 0:
            raise ConfigError(f"heads ({self.heads}) must divide hidden ({self.hidden})")
        if self.disable_local and self.disable_global:
            raise ConfigError("disabling both attention branches leaves nothing to pool")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        return self

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_dict(self) -> dict:
        return {
            "node_feat_dim": self.node_feat_dim, "edge_feat_dim": self.edge_feat_dim,
            "hidden": self.hidden, "local_layers": self.local_layers, "heads": self.heads,
            "walk_len": self.walk_len, "dropout": self.dropout,
            "disable_local": self.disable_local, "disable_global": self.disable_global,
            "disable_pos": self.disable_pos, "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d).validate()


def init_params(cfg: EncoderConfig, seed: int = 0) -> dict[str, Tensor]:
    """Glorot-uniform parameter tensors, keyed by stable names for checkpointing."""
    cfg.validate()
    rng = np.random.default_rng([seed, 97])
    dt = cfg.np_dtype
    params: dict[str, Tensor] = {}

    def mat(name, rows, cols):
        s = np.sqrt(6.0 / (rows + cols))
        params[name] = T.parameter(rng.uniform(-s, s, size=(rows, cols)), name=name, dtype=dt)

    h, dh = cfg.hidden, cfg.hidden // cfg.heads
    mat("input.node_proj", cfg.node_feat_dim + cfg.walk_len, h)
    mat("input.edge_proj", cfg.edge_feat_dim + 1 + cfg.walk_len, h)
    for l in range(cfg.local_layers):
        mat(f"local{l}.feat", h, h)
        mat(f"local{l}.attn", 2 * h, 1)
        mat(f"local{l}.agg", h, h)
    for i in range(cfg.heads):
        mat(f"global.h{i}.query", h, dh)
        mat(f"global.h{i}.key", h, dh)
        mat(f"global.h{i}.value", h, dh)
        mat(f"global.h{i}.edge_gate", h, dh)
        mat(f"global.h{i}.edge_bias", h, dh)
        mat(f"global.h{i}.score", dh, 1)
        mat(f"global.h{i}.aggregate", dh, dh)
    mat("global.out_proj", h, h)
    mat("head.classify", h, 2)
    return params


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple]:
    return {name: p.shape for name, p in init_params(cfg, seed=0).items()}


# -- position encoding -------------------------------------------------------

def transition_matrix(n: int, edge_src, edge_dst) -> np.ndarray:
    """Row-stochastic M = D^-1 A over the symmetrized, binarized adjacency.

    Self-edges are ignored; isolated nodes self-transition with probability 1.
    """
    A = np.zeros((n, n), dtype=np.float64)
    src = np.asarray(edge_src, dtype=np.int64)
    dst = np.asarray(edge_dst, dtype=np.int64)
    off = src != dst
    A[src[off], dst[off]] = 1.0
    A[dst[off], src[off]] = 1.0
    deg = A.sum(axis=1)
    M = np.zeros_like(A)
    nz = deg > 0
    M[nz] = A[nz] / deg[nz, None]
    M[~nz, ~nz] = 1.0
    return M


def compute_position_encoding(n: int, edge_src, edge_dst, walk_len: int) -> np.ndarray:
    """Stack [I, M, M^2, ..., M^(K-1)] along the last axis: shape (n, n, K)."""
    if walk_len < 1:
        raise ConfigError(f"walk_len must be >= 1, got {walk_len}")
    M = transition_matrix(n, edge_src, edge_dst)
    P = np.empty((n, n, walk_len), dtype=np.float64)
    step = np.eye(n)
    P[:, :, 0] = step
    for s in range(1, walk_len):
        step = step @ M
        P[:, :, s] = step
    return P


def position_encoding_for(sub: EventSubgraph, walk_len: int) -> np.ndarray:
    return compute_position_encoding(sub.n_nodes, sub.edge_src, sub.edge_dst, walk_len)


# -- feature assembly --------------------------------------------------------

@dataclass
class FeatureSpace:
    """Enough of the parent graph to rebuild node features: its size and kinds."""

    num_graph_nodes: int
    kind_of: dict[int, int] | np.ndarray

    def node_rows(self, gids: np.ndarray) -> np.ndarray:
        if isinstance(self.kind_of, np.ndarray):
            kinds = self.kind_of[gids]
        else:
            kinds = np.array([self.kind_of[int(g)] for g in gids], dtype=np.int64)
        return node_feature_rows(gids, kinds, self.num_graph_nodes)


@dataclass
class EncoderInputs:
    """Dense per-subgraph arrays the forward pass consumes."""

    node_feats: np.ndarray      # n x d_v
    edge_src: np.ndarray        # merged edges, local indices
    edge_dst: np.ndarray
    edge_feats: np.ndarray      # n_e x (d_e + 1), categorical multi-hot + log1p(T)
    pos: np.ndarray             # n x n x K

    @property
    def n(self) -> int:
        return len(self.node_feats)


def build_inputs(sub: EventSubgraph, space: FeatureSpace, cfg: EncoderConfig) -> EncoderInputs:
    X = space.node_rows(sub.node_ids)
    if X.shape[1] != cfg.node_feat_dim:
        raise ShapeMismatch(f"node features: {X.shape[1]} vs configured {cfg.node_feat_dim}")
    if sub.edge_feat.shape[1] != cfg.edge_feat_dim:
        raise ShapeMismatch(f"edge features: {sub.edge_feat.shape[1]} vs configured {cfg.edge_feat_dim}")
    ef = np.concatenate([sub.edge_feat, np.log1p(sub.edge_T)[:, None]], axis=1)
    if cfg.disable_pos:
        P = np.zeros((sub.n_nodes, sub.n_nodes, cfg.walk_len), dtype=np.float64)
    else:
        P = position_encoding_for(sub, cfg.walk_len)
    return EncoderInputs(X, sub.edge_src, sub.edge_dst, ef, P)


def augment_features(inputs: EncoderInputs) -> tuple[np.ndarray, np.ndarray]:
    """Splice position features in: X_hat (n x (d_v+K)) and the dense pairwise
    table E_hat (n x n x (d_e+1+K)), with zero edge rows where no merged edge
    exists."""
    n = inputs.n
    K = inputs.pos.shape[2]
    de = inputs.edge_feats.shape[1]
    X_hat = np.concatenate([inputs.node_feats, inputs.pos[np.arange(n), np.arange(n)]], axis=1)
    E_hat = np.zeros((n, n, de + K), dtype=np.float64)
    E_hat[inputs.edge_src, inputs.edge_dst, :de] = inputs.edge_feats
    E_hat[:, :, de:] = inputs.pos
    return X_hat, E_hat


def neighbor_mask(inputs: EncoderInputs) -> np.ndarray:
    """Boolean n x n mask: True where j is an undirected merged-edge neighbor
    of i or j == i (local attention normalizes over the self-inclusive set)."""
    n = inputs.n
    mask = np.zeros((n, n), dtype=bool)
    mask[inputs.edge_src, inputs.edge_dst] = True
    mask |= mask.T
    np.fill_diagonal(mask, True)
    return mask


# -- forward pass -------------------------------------------------------------

_NEG_INF = -1e30


@dataclass
class ForwardTrace:
    """Attention matrices captured for debugging/export."""

    local_alpha: list = field(default_factory=list)   # one n x n array per layer
    global_beta: list = field(default_factory=list)   # one n x n array per head


def local_attention_layer(H: Tensor, mask: np.ndarray, feat_w: Tensor,
                          attn_w: Tensor, agg_w: Tensor,
                          dropout: float = 0.0, rng=None, training: bool = False,
                          trace: Optional[ForwardTrace] = None) -> Tensor:
    """One neighborhood-attention layer: scores from concatenated transformed
    feature pairs through LeakyReLU, softmax over the masked row, Elu after
    aggregation."""
    n = H.shape[0]
    h = feat_w.shape[1]
    u = T.matmul(H, feat_w)
    left = T.matmul(u, _rows(attn_w, 0, h))
    right = T.matmul(u, _rows(attn_w, h, 2 * h))
    scores = T.add(T.reshape(left, (n, 1)), T.reshape(right, (1, n)))
    scores = T.leaky_relu(scores)
    bias = np.where(mask, 0.0, _NEG_INF)
    alpha = T.softmax(T.add(scores, Tensor(bias)))
    if trace is not None:
        trace.local_alpha.append(alpha.values.copy())
    alpha = T.dropout(alpha, dropout, rng=rng, training=training)
    return T.elu(T.matmul(alpha, T.matmul(H, agg_w)))


def _rows(t: Tensor, a: int, b: int) -> Tensor:
    """Differentiable row slice of a 2-D tensor."""
    rows = t.shape[0]

    def back(g):
        out = np.zeros((rows, *g.shape[1:]), dtype=g.dtype)
        out[a:b] = g
        return (out,)
    return T._op(t.values[a:b], (t,), back)


def global_attention_layer(X0: Tensor, E0_flat: Tensor, n: int,
                           params: dict[str, Tensor], heads: int,
                           dropout: float = 0.0, rng=None, training: bool = False,
                           trace: Optional[ForwardTrace] = None) -> Tensor:
    """Edge-aware all-pairs attention.

    Per head: pair scores gate the sum of projected endpoint features with
    projected edge features through a signed-sqrt nonlinearity; softmax runs
    over every node; aggregation mixes projected node values with a linear
    image of the pair activations. Head outputs concatenate and project back
    to the shared hidden width.
    """
    dh = params["global.h0.query"].shape[1]
    head_outs = []
    for i in range(heads):
        q = T.matmul(X0, params[f"global.h{i}.query"])       # n x dh
        k = T.matmul(X0, params[f"global.h{i}.key"])
        v = T.matmul(X0, params[f"global.h{i}.value"])
        eg = T.matmul(E0_flat, params[f"global.h{i}.edge_gate"])   # n^2 x dh
        eb = T.matmul(E0_flat, params[f"global.h{i}.edge_bias"])
        pair = T.add(T.reshape(q, (n, 1, dh)), T.reshape(k, (1, n, dh)))
        gated = T.hadamard(pair, T.reshape(eg, (n, n, dh)))
        b = T.relu(T.add(T.signed_sqrt_relu(gated), T.reshape(eb, (n, n, dh))))
        b_flat = T.reshape(b, (n * n, dh))
        scores = T.reshape(T.matmul(b_flat, params[f"global.h{i}.score"]), (n, n))
        beta = T.softmax(scores)
        if trace is not None:
            trace.global_beta.append(beta.values.copy())
        beta = T.dropout(beta, dropout, rng=rng, training=training)
        agg = T.reshape(T.matmul(b_flat, params[f"global.h{i}.aggregate"]), (n, n, dh))
        mixed = T.sum_reduce(T.hadamard(T.reshape(beta, (n, n, 1)), agg), axis=1)
        head_outs.append(T.add(T.matmul(beta, v), mixed))
    stacked = head_outs[0] if heads == 1 else T.concat(head_outs, axis=1)
    return T.matmul(stacked, params["global.out_proj"])


def forward_inputs(inputs: EncoderInputs, params: dict[str, Tensor], cfg: EncoderConfig,
                   training: bool = False, rng=None,
                   trace: Optional[ForwardTrace] = None) -> tuple[Tensor, Tensor]:
    """Run the encoder on assembled inputs; returns (logits, probabilities)."""
    n = inputs.n
    dt = cfg.np_dtype
    X_hat, E_hat = augment_features(inputs)
    X0 = T.matmul(Tensor(X_hat.astype(dt)), params["input.node_proj"])

    parts = []
    if not cfg.disable_local:
        mask = neighbor_mask(inputs)
        H = X0
        for l in range(cfg.local_layers):
            H = local_attention_layer(
                H, mask, params[f"local{l}.feat"], params[f"local{l}.attn"],
                params[f"local{l}.agg"], cfg.dropout, rng, training, trace)
            H = T.dropout(H, cfg.dropout, rng=rng, training=training)
        parts.append(H)
    if not cfg.disable_global:
        E0_flat = T.matmul(Tensor(E_hat.reshape(n * n, -1).astype(dt)), params["input.edge_proj"])
        G = global_attention_layer(X0, E0_flat, n, params, cfg.heads,
                                   cfg.dropout, rng, training, trace)
        G = T.dropout(G, cfg.dropout, rng=rng, training=training)
        parts.append(G)

    fused = parts[0] if len(parts) == 1 else T.add(parts[0], parts[1])
    pooled = T.reshape(T.sum_reduce(fused, axis=0), (1, cfg.hidden))
    logits = T.reshape(T.matmul(pooled, params["head.classify"]), (2,))
    return logits, T.softmax(logits)


def encode_subgraph(sub: EventSubgraph, params: dict[str, Tensor], cfg: EncoderConfig,
                    space: FeatureSpace, training: bool = False, rng=None,
                    trace: Optional[ForwardTrace] = None) -> tuple[Tensor, Tensor]:
    return forward_inputs(build_inputs(sub, space, cfg), params, cfg, training, rng, trace)


def cross_entropy_loss(probabilities: Tensor, labels_onehot: np.ndarray) -> Tensor:
    """Mean negative log-likelihood; the log is clamped at 1e-12."""
    if probabilities.shape != labels_onehot.shape:
        raise ShapeMismatch(f"cross entropy: {probabilities.shape} vs {labels_onehot.shape}")
    batch = probabilities.shape[0]
    y = Tensor(labels_onehot.astype(probabilities.dtype))
    picked = T.sum_reduce(T.hadamard(y, T.log(T.clip_min(probabilities, 1e-12))))
    return T.scale(picked, -1.0 / batch)


def ablated(cfg: EncoderConfig, disable_local=False, disable_global=False,
            disable_pos=False) -> EncoderConfig:
    return replace(cfg, disable_local=disable_local, disable_global=disable_global,
                   disable_pos=disable_pos).validate()
