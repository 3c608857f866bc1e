"""Dataset splitting, mini-batch training, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .dataset import SubgraphDataset
from .encoder import (EncoderConfig, FeatureSpace, cross_entropy_loss,
                      encode_subgraph, init_params)
from .errors import EmptyClass, NonFiniteLoss
from .metrics import Metrics, score_predictions
from .tensor import Tensor, backward, zero_grads


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 5e-4
    max_epochs: int = 200
    patience: int = 20
    split: tuple = (0.6, 0.2, 0.2)
    class_weight: bool = False

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split}")
        return self

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "learning_rate": self.learning_rate,
                "max_epochs": self.max_epochs, "patience": self.patience,
                "split": list(self.split), "class_weight": self.class_weight}


def split_dataset(labels, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Stratified, seeded (train, val, test) index arrays.

    Class proportions are preserved per split within rounding; splits are
    disjoint and cover the dataset.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng([seed, 23])
    parts = ([], [], [])
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 3:
            raise EmptyClass(f"class {cls} has {len(idx)} samples, need >= 3")
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        n_tr = int(round(n * ratios[0]))
        n_val = int(round(n * ratios[1]))
        n_val = min(n_val, n - n_tr - 1)  # keep at least one test sample
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr:n_tr + n_val])
        parts[2].append(idx[n_tr + n_val:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


class Adam:
    """Adaptive-moment optimizer with decay rates (0.9, 0.999) and eps 1e-8."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.values) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.values) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            m_hat = self.m[k] / (1 - self.b1 ** self.t)
            v_hat = self.v[k] / (1 - self.b2 ** self.t)
            p.values -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.values.dtype)


def _onehot(labels: np.ndarray) -> np.ndarray:
    out = np.zeros((len(labels), 2), dtype=np.float64)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def predict(params: dict[str, Tensor], enc_cfg: EncoderConfig,
            ds: SubgraphDataset, idx, space: FeatureSpace) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode forward over samples; returns (probability rows, labels)."""
    probs = np.zeros((len(idx), 2), dtype=np.float64)
    labels = np.zeros(len(idx), dtype=np.int64)
    for row, i in enumerate(idx):
        sub = ds.subgraphs[i]
        _, p = encode_subgraph(sub, params, enc_cfg, space, training=False)
        probs[row] = p.values
        labels[row] = sub.label
    return probs, labels


def evaluate(params: dict[str, Tensor], enc_cfg: EncoderConfig,
             ds: SubgraphDataset, idx, space: FeatureSpace | None = None) -> Metrics:
    """Metric suite on one index set: argmax predictions, malicious-class AUC."""
    space = space or FeatureSpace(ds.num_graph_nodes, ds.node_kind_lookup())
    probs, labels = predict(params, enc_cfg, ds, idx, space)
    return score_predictions(labels, probs.argmax(axis=1), probs[:, 1])


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    history: list  # rows of (epoch, train_loss, val_f1, val_auc)
    best_epoch: int
    best_val_f1: float

    def history_csv(self) -> str:
        lines = ["epoch,train_loss,val_f1,val_auc"]
        for row in self.history:
            lines.append(f"{row[0]},{row[1]:.6f},{row[2]:.6f},{row[3]:.6f}")
        return "\n".join(lines) + "\n"


def train(ds: SubgraphDataset, splits, enc_cfg: EncoderConfig,
          cfg: TrainConfig, seed: int = 0, log=None) -> TrainResult:
    """Mini-batch training with early stopping on validation macro-F1.

    Keeps the best-validation parameters; aborts with NonFiniteLoss if a
    batch produces a NaN/inf loss. Fully deterministic under (seed, inputs).
    """
    cfg.validate()
    enc_cfg.validate()
    train_idx, val_idx, _ = splits
    space = FeatureSpace(ds.num_graph_nodes, ds.node_kind_lookup())
    params = init_params(enc_cfg, seed=seed)
    opt = Adam(params, cfg.learning_rate)

    class_w = None
    if cfg.class_weight:
        counts = np.bincount([ds.subgraphs[i].label for i in train_idx], minlength=2)
        class_w = counts.sum() / np.maximum(counts, 1) / 2.0

    best = {"f1": -1.0, "epoch": -1, "values": None}
    history = []
    stale = 0
    for epoch in range(cfg.max_epochs):
        shuffle_rng = np.random.default_rng([seed, 1, epoch])
        order = np.asarray(train_idx)[shuffle_rng.permutation(len(train_idx))]
        losses = []
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            drop_rng = np.random.default_rng([seed, 2, epoch, b])
            rows = []
            labels = np.array([ds.subgraphs[i].label for i in batch])
            for i in batch:
                _, p = encode_subgraph(ds.subgraphs[i], params, enc_cfg, space,
                                       training=True, rng=drop_rng)
                rows.append(T.reshape(p, (1, 2)))
            probs = T.concat(rows, axis=0)
            y = _onehot(labels)
            if class_w is not None:
                y = y * class_w[labels][:, None]
            loss = cross_entropy_loss(probs, y)
            if not np.isfinite(loss.values):
                raise NonFiniteLoss(f"non-finite loss in epoch {epoch} batch {b}")
            zero_grads(params.values())
            backward(loss, params.values())
            opt.step()
            losses.append(float(loss.values))

        val = evaluate(params, enc_cfg, ds, val_idx, space)
        history.append((epoch, float(np.mean(losses)), val.f1, val.auc))
        if log:
            log(f"epoch {epoch}: loss={np.mean(losses):.4f} val_f1={val.f1:.4f} val_auc={val.auc:.4f}")
        if val.f1 > best["f1"]:
            best = {"f1": val.f1, "epoch": epoch,
                    "values": {k: p.values.copy() for k, p in params.items()}}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    if best["values"] is not None:
        for k, p in params.items():
            p.values = best["values"][k]
    return TrainResult(params, history, best["epoch"], best["f1"])
