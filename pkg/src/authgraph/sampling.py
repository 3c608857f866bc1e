"""Event-centered time-aware subgraph generation.

For a target authentication event, the sampler:

1. unions the 1-hop (optionally 2-hop) neighborhoods of the event's core
   entities, core nodes included;
2. induces the subgraph over that node set;
3. drops edges strictly outside the time window around the event (the
   boundary |t - t_event| == tau survives);
4. merges parallel edges per ordered node pair, recording the interaction
   count T, the element-wise union of categorical features, and the
   constituent timestamp closest to the event;
5. marks the event entities as core nodes, everything else auxiliary;
6. keeps only the top-k core-auxiliary merged edges ranked by
   (T desc, |t_repr - t_event| asc, min constituent edge id asc);
   auxiliary-auxiliary edges are kept unpruned;
7. drops auxiliary nodes left without edges and copies the event label.

A window that strips every edge is not an error: cores survive with zero
edges and the subgraph stays classifiable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, UnknownNode
from .graph import EDGE_FEATURE_DIM, AuthEvent, AuthGraph, edge_feature_rows


@dataclass(frozen=True)
class SamplerConfig:
    tau: int
    k: int = 150
    hops: int = 1
    mode: str = "time"        # "time" or "random" (uniform pruning, no window)
    seed: int = 0             # only used by mode="random"

    def validate(self) -> "SamplerConfig":
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.hops not in (1, 2):
            raise ConfigError(f"hops must be 1 or 2, got {self.hops}")
        if self.mode not in ("time", "random"):
            raise ConfigError(f"mode must be 'time' or 'random', got {self.mode!r}")
        return self

    def to_dict(self) -> dict:
        return {"tau": self.tau, "k": self.k, "hops": self.hops,
                "mode": self.mode, "seed": self.seed}


@dataclass
class EventSubgraph:
    """Compressed event-centered subgraph: cores first, then auxiliaries."""

    event_id: int
    label: int
    node_ids: np.ndarray      # global node ids; cores at local 0, 1(, 2)
    core_flags: np.ndarray    # uint8, aligned with node_ids
    edge_src: np.ndarray      # local endpoint indices of merged edges
    edge_dst: np.ndarray
    edge_feat: np.ndarray     # n_e x d_e multi-hot union of constituents
    edge_T: np.ndarray        # interaction counts
    edge_t_repr: np.ndarray   # constituent timestamp closest to the event

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def equals(self, other: "EventSubgraph") -> bool:
        return (self.event_id == other.event_id and self.label == other.label
                and np.array_equal(self.node_ids, other.node_ids)
                and np.array_equal(self.core_flags, other.core_flags)
                and np.array_equal(self.edge_src, other.edge_src)
                and np.array_equal(self.edge_dst, other.edge_dst)
                and np.array_equal(self.edge_feat, other.edge_feat)
                and np.array_equal(self.edge_T, other.edge_T)
                and np.array_equal(self.edge_t_repr, other.edge_t_repr))


def core_nodes(event: AuthEvent) -> list[int]:
    cores = [event.U, event.D]
    if event.O is not None:
        cores.append(event.O)
    return cores


def build_event_neighborhood(graph: AuthGraph, event: AuthEvent, hops: int = 1) -> set:
    """Union of the cores' neighbor sets plus the cores themselves."""
    if hops not in (1, 2):
        raise ConfigError(f"hops must be 1 or 2, got {hops}")
    cores = core_nodes(event)
    members = set(cores)
    for c in cores:
        members |= graph.neighbors(c)
    if hops == 2:
        ring = set(members)
        for v in ring:
            members |= graph.neighbors(v)
    return members


def _candidate_edges(graph: AuthGraph, members: set, event: AuthEvent,
                     cfg: SamplerConfig) -> np.ndarray:
    """Edge ids induced by the member set, window-filtered in 'time' mode."""
    found = set()
    for v in members:
        if cfg.mode == "time":
            eids = graph.query_time_window(v, event.t, cfg.tau)
        else:
            eids = graph.incident_edges(v)
        for e in eids:
            e = int(e)
            a, b = int(graph.edge_src[e]), int(graph.edge_dst[e])
            if a in members and b in members:
                found.add(e)
    return np.fromiter(sorted(found), dtype=np.int64, count=len(found))


def generate_time_aware_subgraph(graph: AuthGraph, event: AuthEvent,
                                 cfg: SamplerConfig) -> EventSubgraph:
    cfg.validate()
    cores = core_nodes(event)
    members = build_event_neighborhood(graph, event, cfg.hops)
    eids = _candidate_edges(graph, members, event, cfg)

    # merge parallel edges per ordered pair
    groups: dict[tuple[int, int], list[int]] = {}
    for e in eids:
        key = (int(graph.edge_src[e]), int(graph.edge_dst[e]))
        groups.setdefault(key, []).append(int(e))

    feats = edge_feature_rows(graph.edge_kind_idx[eids], graph.edge_auth_idx[eids],
                              graph.edge_logon_idx[eids], graph.edge_orient_idx[eids],
                              graph.edge_outcome_idx[eids])
    row_of = {int(e): i for i, e in enumerate(eids)}

    merged = []  # (src_gid, dst_gid, T, feat, t_repr, min_eid)
    for (a, b), es in sorted(groups.items()):
        feat = feats[[row_of[e] for e in es]].max(axis=0)
        best = min((abs(int(graph.edge_t[e]) - event.t), int(graph.edge_t[e]), e) for e in es)
        merged.append((a, b, len(es), feat, best[1], min(es)))

    core_set = set(cores)
    core_aux = [m for m in merged if (m[0] in core_set) != (m[1] in core_set)]
    rest = [m for m in merged if not ((m[0] in core_set) != (m[1] in core_set))]

    if len(core_aux) > cfg.k:
        if cfg.mode == "random":
            rng = np.random.default_rng([cfg.seed, event.event_id])
            order = rng.permutation(len(core_aux))
            core_aux = [core_aux[i] for i in order[:cfg.k]]
        else:
            core_aux.sort(key=lambda m: (-m[2], abs(m[4] - event.t), m[5]))
            core_aux = core_aux[:cfg.k]
    surviving = core_aux + rest

    # drop isolated auxiliaries, keep cores, relabel locally
    touched = set()
    for m in surviving:
        touched.add(m[0])
        touched.add(m[1])
    keep = cores + sorted(v for v in touched if v not in core_set)
    local = {g: i for i, g in enumerate(keep)}

    surviving.sort(key=lambda m: (local[m[0]], local[m[1]]))
    n_e = len(surviving)
    d_e = EDGE_FEATURE_DIM
    sub = EventSubgraph(
        event_id=event.event_id,
        label=event.label,
        node_ids=np.array(keep, dtype=np.int64),
        core_flags=np.array([1] * len(cores) + [0] * (len(keep) - len(cores)), dtype=np.uint8),
        edge_src=np.array([local[m[0]] for m in surviving], dtype=np.int64),
        edge_dst=np.array([local[m[1]] for m in surviving], dtype=np.int64),
        edge_feat=(np.stack([m[3] for m in surviving])
                   if n_e else np.zeros((0, d_e), dtype=np.float64)),
        edge_T=np.array([m[2] for m in surviving], dtype=np.int64),
        edge_t_repr=np.array([m[4] for m in surviving], dtype=np.int64),
    )
    return sub


def subsample_events(events: Sequence[AuthEvent], max_benign: Optional[int],
                     max_malicious: Optional[int], seed: int = 0) -> list[AuthEvent]:
    """Uniform-at-random per-class subsample, order-preserving, seeded."""
    if max_benign is None and max_malicious is None:
        return list(events)
    rng = np.random.default_rng([seed, 11])
    keep_idx = []
    for label, cap in ((0, max_benign), (1, max_malicious)):
        idx = [i for i, e in enumerate(events) if e.label == label]
        if cap is not None and cap < len(idx):
            chosen = rng.choice(len(idx), size=cap, replace=False)
            idx = [idx[i] for i in sorted(chosen)]
        keep_idx.extend(idx)
    return [events[i] for i in sorted(keep_idx)]


def build_dataset(graph: AuthGraph, events: Iterable[AuthEvent],
                  cfg: SamplerConfig, threads: int = 1) -> tuple[list[EventSubgraph], int]:
    """One subgraph per event, order preserved; failed events are skipped and
    counted (returned alongside).

    Generation is a pure function of the immutable graph, so with
    ``threads > 1`` events are chunked over a fork process pool and results
    are concatenated in event order (output identical to the sequential path).
    """
    events = list(events)
    if threads > 1 and len(events) > 1 and hasattr(os, "fork"):
        import multiprocessing as mp

        n_chunks = min(threads * 4, len(events))
        bounds = np.linspace(0, len(events), n_chunks + 1).astype(int)
        chunks = [events[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        _WORKER_STATE["args"] = (graph, cfg)
        with mp.get_context("fork").Pool(threads) as pool:
            results = pool.map(_dataset_chunk, chunks)
        out, skipped = [], 0
        for subs, skip in results:
            out.extend(subs)
            skipped += skip
        return out, skipped
    return _dataset_chunk(events, graph, cfg)


_WORKER_STATE: dict = {}


def _dataset_chunk(events, graph=None, cfg=None):
    if graph is None:
        graph, cfg = _WORKER_STATE["args"]
    out, skipped = [], 0
    for ev in events:
        try:
            out.append(generate_time_aware_subgraph(graph, ev, cfg))
        except UnknownNode:
            skipped += 1
    return out, skipped
