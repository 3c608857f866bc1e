"""Heterogeneous authentication multigraph: build, index, feature-encode, persist.

Nodes are typed entities (user, host, server, file, process); edges are typed,
timestamped interactions (login, connection, access, creation). Every parsed
record becomes exactly one edge, so parallel edges between the same pair are
preserved and distinguished by timestamp.

Edge endpoints by interaction type:

* login      -- acting user -> destination device (the source device still
  becomes a node; it is record context, not an endpoint).
* connection -- source device -> destination device; self-loops are allowed
  only when both fields name the same device (single-host activity exports)
  and are counted in ``meta``.
* access / creation -- acting user -> object (file for access, process for
  creation).
"""

from __future__ import annotations

import json
import struct
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from hashlib import blake2b
from typing import Optional, Sequence

import numpy as np

from .errors import ChecksumMismatch, IoError, UnknownNode, VersionMismatch
from .logs import (AUTH_TYPES, INTERACTIONS, LOGON_TYPES, ORIENTATIONS,
                   OUTCOMES, LabelSet, LogRecord)

NODE_KINDS = ("user", "host", "server", "file", "process")
KIND_TO_KLASS = {"user": "U", "host": "D", "server": "D", "file": "O", "process": "O"}

_KIND_IDX = {k: i for i, k in enumerate(NODE_KINDS)}
_INTER_IDX = {v: i for i, v in enumerate(INTERACTIONS)}
_AUTH_IDX = {v: i for i, v in enumerate(AUTH_TYPES)}
_LOGON_IDX = {v: i for i, v in enumerate(LOGON_TYPES)}
_ORIENT_IDX = {v: i for i, v in enumerate(ORIENTATIONS)}
_OUTCOME_IDX = {v: i for i, v in enumerate(OUTCOMES)}

VOCAB = {
    "interaction": INTERACTIONS,
    "auth_type": AUTH_TYPES,
    "logon_type": LOGON_TYPES,
    "orientation": ORIENTATIONS,
    "outcome": OUTCOMES,
}

_MAGIC = b"HAMG"
_VERSION = 1


@dataclass(frozen=True, slots=True)
class NodeRef:
    id: int
    kind: str
    name: str

    @property
    def klass(self) -> str:
        return KIND_TO_KLASS[self.kind]


@dataclass(frozen=True, slots=True)
class EdgeRef:
    src: int
    dst: int
    t: int
    kind: str
    auth_type: str
    logon_type: str
    orientation: str
    outcome: str


@dataclass(frozen=True, slots=True)
class AuthEvent:
    """A login-class event z = (t, U, D, O) referencing graph node ids."""

    event_id: int
    t: int
    U: int
    D: int
    O: Optional[int]
    label: int  # 0 benign, 1 malicious


class AuthGraph:
    """Immutable multigraph with a per-node, time-sorted incidence index.

    Edge attributes are stored columnar (numpy arrays indexed by edge id);
    ``edge(i)`` materializes a single EdgeRef view.
    """

    def __init__(self, node_kinds, node_names, edge_cols, meta=None):
        self.node_kind_idx = np.asarray(node_kinds, dtype=np.uint8)
        self.node_names = list(node_names)
        (self.edge_src, self.edge_dst, self.edge_t, self.edge_kind_idx,
         self.edge_auth_idx, self.edge_logon_idx, self.edge_orient_idx,
         self.edge_outcome_idx) = edge_cols
        self.meta = dict(meta or {})
        self.vocab = VOCAB
        self._name_to_id = {(NODE_KINDS[k], n): i
                            for i, (k, n) in enumerate(zip(self.node_kind_idx, self.node_names))}
        self._build_adjacency()

    # -- construction ---------------------------------------------------

    def _build_adjacency(self):
        n, m = self.num_nodes, self.num_edges
        ends = np.concatenate([self.edge_src, self.edge_dst])
        eids = np.concatenate([np.arange(m, dtype=np.int64)] * 2)
        # self-loops would register twice under the same node; keep one entry
        loop = self.edge_src == self.edge_dst
        if loop.any():
            keep = np.ones(2 * m, dtype=bool)
            keep[m:][loop] = False
            ends, eids = ends[keep], eids[keep]
        times = self.edge_t[eids]
        order = np.lexsort((eids, times, ends))
        ends, eids, times = ends[order], eids[order], times[order]
        starts = np.searchsorted(ends, np.arange(n + 1))
        self._adj_ptr = starts
        self._adj_eid = eids
        self._adj_t = times

    # -- basic accessors -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.node_names)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)

    def node(self, i: int) -> NodeRef:
        if not (0 <= i < self.num_nodes):
            raise UnknownNode(f"node id {i} out of range")
        return NodeRef(i, NODE_KINDS[self.node_kind_idx[i]], self.node_names[i])

    def edge(self, i: int) -> EdgeRef:
        return EdgeRef(
            int(self.edge_src[i]), int(self.edge_dst[i]), int(self.edge_t[i]),
            INTERACTIONS[self.edge_kind_idx[i]], AUTH_TYPES[self.edge_auth_idx[i]],
            LOGON_TYPES[self.edge_logon_idx[i]], ORIENTATIONS[self.edge_orient_idx[i]],
            OUTCOMES[self.edge_outcome_idx[i]],
        )

    def node_id(self, kind: str, name: str) -> Optional[int]:
        return self._name_to_id.get((kind, name))

    def incident_edges(self, node: int) -> np.ndarray:
        """Edge ids incident to a node, ascending by timestamp."""
        if not (0 <= node < self.num_nodes):
            raise UnknownNode(f"node id {node} out of range")
        return self._adj_eid[self._adj_ptr[node]:self._adj_ptr[node + 1]]

    def neighbors(self, node: int) -> set:
        """Distinct other-endpoint node ids over all incident edges."""
        eids = self.incident_edges(node)
        others = np.where(self.edge_src[eids] == node,
                          self.edge_dst[eids], self.edge_src[eids])
        out = set(int(x) for x in others)
        out.discard(node)
        return out

    def query_time_window(self, node: int, t_center: int, tau: int) -> np.ndarray:
        """Incident edge ids with |t - t_center| <= tau, ascending by t.

        The boundary |t - t_center| == tau is retained; only strictly more
        distant edges fall outside the window.
        """
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        if not (0 <= node < self.num_nodes):
            raise UnknownNode(f"node id {node} out of range")
        lo, hi = self._adj_ptr[node], self._adj_ptr[node + 1]
        times = self._adj_t[lo:hi]
        a = bisect_left(times, t_center - tau)
        b = bisect_right(times, t_center + tau)
        return self._adj_eid[lo + a:lo + b]

    def stats(self) -> dict:
        kind_hist = {k: int((self.node_kind_idx == i).sum()) for i, k in enumerate(NODE_KINDS)}
        edge_hist = {k: int((self.edge_kind_idx == i).sum()) for i, k in enumerate(INTERACTIONS)}
        return {
            "nodes": self.num_nodes,
            "edges": self.num_edges,
            "node_kinds": kind_hist,
            "edge_kinds": edge_hist,
            "self_loop_edges": int((self.edge_src == self.edge_dst).sum()),
        }

    def checksum(self) -> str:
        return blake2b(to_bytes(self, events=None), digest_size=8).hexdigest()


def _object_kind(interaction: str) -> str:
    return "file" if interaction == "access" else "process"


def build_hamg(records: Sequence[LogRecord], labels: LabelSet | None = None,
               server_top_frac: float = 0.01,
               source_format: str = "generic") -> tuple[AuthGraph, list[AuthEvent]]:
    """Build the multigraph and the labeled event list from normalized records.

    Device entities are split into host/server by login in-degree: the top
    ``server_top_frac`` fraction of devices becomes servers. Node ids are
    assigned after sorting the (kind, name) dictionary, so they are stable
    across runs regardless of record order.
    """
    labels = labels or LabelSet()

    users, devices, objects = set(), set(), set()
    login_indeg: dict[str, int] = {}
    for rec in records:
        if rec.src_user:
            users.add(rec.src_user)
        if rec.dst_user:
            users.add(rec.dst_user)
        if rec.interaction in ("login", "connection"):
            devices.add(rec.src_device)
            devices.add(rec.dst_device)
            if rec.interaction == "login":
                login_indeg[rec.dst_device] = login_indeg.get(rec.dst_device, 0) + 1
        else:
            if rec.src_device:
                devices.add(rec.src_device)
            if rec.dst_device:
                devices.add(rec.dst_device)
            objects.add((_object_kind(rec.interaction), rec.object))

    n_servers = int(len(devices) * server_top_frac)
    ranked = sorted(devices, key=lambda d: (-login_indeg.get(d, 0), d))
    server_names = set(ranked[:n_servers])

    keyed = [("user", u) for u in users]
    keyed += [("server" if d in server_names else "host", d) for d in devices]
    keyed += list(objects)
    keyed.sort()
    name_to_id = {kn: i for i, kn in enumerate(keyed)}
    node_kinds = [_KIND_IDX[k] for k, _ in keyed]
    node_names = [n for _, n in keyed]

    def _device_id(name: str) -> int:
        kind = "server" if name in server_names else "host"
        return name_to_id[(kind, name)]

    m = len(records)
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    t = np.empty(m, dtype=np.int64)
    kind = np.empty(m, dtype=np.uint8)
    auth = np.empty(m, dtype=np.uint8)
    logon = np.empty(m, dtype=np.uint8)
    orient = np.empty(m, dtype=np.uint8)
    outcome = np.empty(m, dtype=np.uint8)

    # access/creation records indexed by device name for O-entity correlation
    obj_by_device: dict[str, list[tuple[int, int]]] = {}

    for i, rec in enumerate(records):
        if rec.interaction == "login":
            src[i] = name_to_id[("user", rec.src_user)]
            dst[i] = _device_id(rec.dst_device)
        elif rec.interaction == "connection":
            src[i] = _device_id(rec.src_device)
            dst[i] = _device_id(rec.dst_device)
        else:
            src[i] = name_to_id[("user", rec.src_user)]
            dst[i] = name_to_id[(_object_kind(rec.interaction), rec.object)]
            dev = rec.dst_device or rec.src_device
            if dev:
                obj_by_device.setdefault(dev, []).append((rec.t, int(dst[i])))
        t[i] = rec.t
        kind[i] = _INTER_IDX[rec.interaction]
        auth[i] = _AUTH_IDX[rec.auth_type]
        logon[i] = _LOGON_IDX[rec.logon_type]
        orient[i] = _ORIENT_IDX[rec.orientation]
        outcome[i] = _OUTCOME_IDX[rec.outcome]

    for seq in obj_by_device.values():
        seq.sort()

    def _correlate_object(rec: LogRecord) -> Optional[int]:
        # tightest same-device access/creation within +/-1s of the login
        seq = obj_by_device.get(rec.dst_device)
        if not seq:
            return None
        times = [s[0] for s in seq]
        lo = bisect_left(times, rec.t - 1)
        hi = bisect_right(times, rec.t + 1)
        best = None
        for at, oid in seq[lo:hi]:
            cand = (abs(at - rec.t), at, oid)
            if best is None or cand < best:
                best = cand
        return best[2] if best else None

    events: list[AuthEvent] = []
    matched_keys = set()
    for i, rec in enumerate(records):
        if rec.interaction != "login":
            continue
        key = (rec.t, rec.src_user, rec.src_device, rec.dst_device)
        is_bad = key in labels
        if is_bad:
            matched_keys.add(key)
        events.append(AuthEvent(
            event_id=len(events),
            t=rec.t,
            U=name_to_id[("user", rec.src_user)],
            D=_device_id(rec.dst_device),
            O=_correlate_object(rec),
            label=1 if is_bad else 0,
        ))

    orphans = len(labels.entries - matched_keys)
    meta = {
        "source_format": source_format,
        "server_top_frac": server_top_frac,
        "orphan_labels": orphans,
        "self_loop_edges": int((src == dst).sum()),
    }
    graph = AuthGraph(node_kinds, node_names,
                      (src, dst, t, kind, auth, logon, orient, outcome), meta)
    return graph, events


# -- feature encoding ------------------------------------------------------

def id_bit_width(num_nodes: int) -> int:
    """Bits needed to address node ids 0..n-1, floored at 1."""
    return max(1, (max(num_nodes, 1) - 1).bit_length())


def node_feature_rows(node_ids, kind_idx, num_nodes: int) -> np.ndarray:
    """Feature rows [one-hot kind (5) || binary id (w bits, MSB first)]."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    kind_idx = np.asarray(kind_idx, dtype=np.int64)
    w = id_bit_width(num_nodes)
    out = np.zeros((len(node_ids), 5 + w), dtype=np.float64)
    out[np.arange(len(node_ids)), kind_idx] = 1.0
    shifts = np.arange(w - 1, -1, -1)
    out[:, 5:] = (node_ids[:, None] >> shifts[None, :]) & 1
    return out


def encode_node_features(graph: AuthGraph) -> np.ndarray:
    """|V| x (5 + ceil(log2 |V|)) node feature matrix."""
    ids = np.arange(graph.num_nodes, dtype=np.int64)
    return node_feature_rows(ids, graph.node_kind_idx, graph.num_nodes)


EDGE_FEATURE_DIM = len(INTERACTIONS) + len(AUTH_TYPES) + len(LOGON_TYPES) + len(ORIENTATIONS) + 1


def edge_feature_rows(kind_idx, auth_idx, logon_idx, orient_idx, outcome_idx) -> np.ndarray:
    """Rows [one-hot interaction || auth || logon || orientation || success bit]."""
    m = len(kind_idx)
    out = np.zeros((m, EDGE_FEATURE_DIM), dtype=np.float64)
    rows = np.arange(m)
    off = 0
    for idx, size in ((kind_idx, len(INTERACTIONS)), (auth_idx, len(AUTH_TYPES)),
                      (logon_idx, len(LOGON_TYPES)), (orient_idx, len(ORIENTATIONS))):
        out[rows, off + np.asarray(idx, dtype=np.int64)] = 1.0
        off += size
    out[:, off] = np.asarray(outcome_idx) == _OUTCOME_IDX["Success"]
    return out


def encode_edge_features(graph: AuthGraph) -> np.ndarray:
    """|E| x 24 edge feature matrix under the fixed category vocabularies."""
    return edge_feature_rows(graph.edge_kind_idx, graph.edge_auth_idx,
                             graph.edge_logon_idx, graph.edge_orient_idx,
                             graph.edge_outcome_idx)


# -- binary persistence ----------------------------------------------------

def _section(payload: bytes) -> bytes:
    return struct.pack("<I", len(payload)) + payload


def to_bytes(graph: AuthGraph, events: Optional[Sequence[AuthEvent]] = None) -> bytes:
    """Serialize deterministically: magic, version, little-endian sections
    (dictionary, node table, edge table, vocabulary header, events), then an
    8-byte checksum over everything before it."""
    parts = [_MAGIC, struct.pack("<I", _VERSION)]

    names = bytearray(struct.pack("<I", graph.num_nodes))
    for name in graph.node_names:
        raw = name.encode("utf-8")
        names += struct.pack("<H", len(raw)) + raw
    parts.append(_section(bytes(names)))

    parts.append(_section(struct.pack("<I", graph.num_nodes) +
                          graph.node_kind_idx.astype("<u1").tobytes()))

    edges = bytearray(struct.pack("<I", graph.num_edges))
    edges += graph.edge_src.astype("<u4").tobytes()
    edges += graph.edge_dst.astype("<u4").tobytes()
    edges += graph.edge_t.astype("<i8").tobytes()
    for col in (graph.edge_kind_idx, graph.edge_auth_idx, graph.edge_logon_idx,
                graph.edge_orient_idx, graph.edge_outcome_idx):
        edges += col.astype("<u1").tobytes()
    parts.append(_section(bytes(edges)))

    header = {"vocab": {k: list(v) for k, v in graph.vocab.items()}, "meta": graph.meta}
    parts.append(_section(json.dumps(header, sort_keys=True).encode("utf-8")))

    ev = events or []
    blob = bytearray(struct.pack("<I", len(ev)))
    if ev:
        blob += np.array([e.t for e in ev], dtype="<i8").tobytes()
        blob += np.array([e.U for e in ev], dtype="<u4").tobytes()
        blob += np.array([e.D for e in ev], dtype="<u4").tobytes()
        blob += np.array([-1 if e.O is None else e.O for e in ev], dtype="<i8").tobytes()
        blob += np.array([e.label for e in ev], dtype="<u1").tobytes()
    parts.append(_section(bytes(blob)))

    body = b"".join(parts)
    return body + blake2b(body, digest_size=8).digest()


def from_bytes(data: bytes) -> tuple[AuthGraph, list[AuthEvent]]:
    if len(data) < 16 or data[:4] != _MAGIC:
        raise VersionMismatch("not a HAMG graph file")
    body, digest = data[:-8], data[-8:]
    if blake2b(body, digest_size=8).digest() != digest:
        raise ChecksumMismatch("graph file checksum mismatch")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != _VERSION:
        raise VersionMismatch(f"unsupported graph version {version}")

    pos = 8
    sections = []
    while pos < len(body):
        (length,) = struct.unpack_from("<I", body, pos)
        pos += 4
        sections.append(body[pos:pos + length])
        pos += length
    if len(sections) != 5:
        raise VersionMismatch(f"expected 5 sections, got {len(sections)}")

    dic, nodes_sec, edges_sec, header_sec, events_sec = sections

    (n,) = struct.unpack_from("<I", dic, 0)
    names, p = [], 4
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", dic, p)
        p += 2
        names.append(dic[p:p + ln].decode("utf-8"))
        p += ln

    kinds = np.frombuffer(nodes_sec, dtype="<u1", count=n, offset=4).copy()

    (m,) = struct.unpack_from("<I", edges_sec, 0)
    p = 4
    src = np.frombuffer(edges_sec, dtype="<u4", count=m, offset=p).astype(np.int64); p += 4 * m
    dst = np.frombuffer(edges_sec, dtype="<u4", count=m, offset=p).astype(np.int64); p += 4 * m
    t = np.frombuffer(edges_sec, dtype="<i8", count=m, offset=p).copy(); p += 8 * m
    cols = []
    for _ in range(5):
        cols.append(np.frombuffer(edges_sec, dtype="<u1", count=m, offset=p).copy())
        p += m

    header = json.loads(header_sec.decode("utf-8"))

    (n_ev,) = struct.unpack_from("<I", events_sec, 0)
    events = []
    if n_ev:
        p = 4
        ev_t = np.frombuffer(events_sec, dtype="<i8", count=n_ev, offset=p); p += 8 * n_ev
        ev_u = np.frombuffer(events_sec, dtype="<u4", count=n_ev, offset=p); p += 4 * n_ev
        ev_d = np.frombuffer(events_sec, dtype="<u4", count=n_ev, offset=p); p += 4 * n_ev
        ev_o = np.frombuffer(events_sec, dtype="<i8", count=n_ev, offset=p); p += 8 * n_ev
        ev_y = np.frombuffer(events_sec, dtype="<u1", count=n_ev, offset=p)
        for i in range(n_ev):
            events.append(AuthEvent(i, int(ev_t[i]), int(ev_u[i]), int(ev_d[i]),
                                    None if ev_o[i] < 0 else int(ev_o[i]), int(ev_y[i])))

    graph = AuthGraph(kinds, names, (src, dst, t, *cols), meta=header.get("meta", {}))
    return graph, events


def save_graph(graph: AuthGraph, path: str, events: Optional[Sequence[AuthEvent]] = None) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(to_bytes(graph, events))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_graph(path: str) -> tuple[AuthGraph, list[AuthEvent]]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return from_bytes(data)


def graphs_equal(a: AuthGraph, b: AuthGraph) -> bool:
    """Structural identity: node table, edge table, adjacency, dictionary."""
    return (a.node_names == b.node_names
            and np.array_equal(a.node_kind_idx, b.node_kind_idx)
            and all(np.array_equal(x, y) for x, y in (
                (a.edge_src, b.edge_src), (a.edge_dst, b.edge_dst),
                (a.edge_t, b.edge_t), (a.edge_kind_idx, b.edge_kind_idx),
                (a.edge_auth_idx, b.edge_auth_idx), (a.edge_logon_idx, b.edge_logon_idx),
                (a.edge_orient_idx, b.edge_orient_idx), (a.edge_outcome_idx, b.edge_outcome_idx),
                (a._adj_ptr, b._adj_ptr), (a._adj_eid, b._adj_eid)))
            and a._name_to_id == b._name_to_id)
