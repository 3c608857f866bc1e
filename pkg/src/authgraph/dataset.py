"""Persisted subgraph datasets.

Two interchangeable containers hold the same payload and decode to identical
in-memory datasets:

* JSONL -- a header line (sampler config, vocabulary hash, graph checksum,
  and the node-kind map needed to rebuild node features without the graph),
  then one JSON object per event.
* TASG  -- a binary container (magic "TASG", versioned, checksummed) as the
  performance path.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from hashlib import blake2b

import numpy as np

from .errors import ChecksumMismatch, IoError, VersionMismatch
from .graph import EDGE_FEATURE_DIM, AuthGraph
from .sampling import EventSubgraph, SamplerConfig

_MAGIC = b"TASG"
_VERSION = 1


def vocab_hash(vocab: dict) -> str:
    payload = json.dumps({k: list(v) for k, v in vocab.items()}, sort_keys=True)
    return blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()


@dataclass
class SubgraphDataset:
    header: dict
    subgraphs: list[EventSubgraph]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.subgraphs], dtype=np.int64)

    @property
    def num_graph_nodes(self) -> int:
        return self.header["num_graph_nodes"]

    def node_kind_lookup(self) -> dict[int, int]:
        return {int(k): int(v) for k, v in self.header["node_kinds"].items()}

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(**self.header["sampler"])

    def equals(self, other: "SubgraphDataset") -> bool:
        return (self.header == other.header
                and len(self.subgraphs) == len(other.subgraphs)
                and all(a.equals(b) for a, b in zip(self.subgraphs, other.subgraphs)))


def make_header(graph: AuthGraph, cfg: SamplerConfig,
                subgraphs: list[EventSubgraph]) -> dict:
    used = sorted({int(g) for s in subgraphs for g in s.node_ids})
    return {
        "version": _VERSION,
        "sampler": cfg.to_dict(),
        "vocab_hash": vocab_hash(graph.vocab),
        "graph_checksum": graph.checksum(),
        "num_graph_nodes": graph.num_nodes,
        "edge_feature_dim": EDGE_FEATURE_DIM,
        "node_kinds": {str(g): int(graph.node_kind_idx[g]) for g in used},
    }


def assemble(graph: AuthGraph, cfg: SamplerConfig,
             subgraphs: list[EventSubgraph]) -> SubgraphDataset:
    return SubgraphDataset(make_header(graph, cfg, subgraphs), subgraphs)


# -- JSONL ------------------------------------------------------------------

def _record_obj(s: EventSubgraph) -> dict:
    return {
        "event_id": s.event_id,
        "label": s.label,
        "nodes": [[int(g), int(c)] for g, c in zip(s.node_ids, s.core_flags)],
        "edges": [[int(a), int(b), [int(x) for x in f], int(t), int(tr)]
                  for a, b, f, t, tr in zip(s.edge_src, s.edge_dst, s.edge_feat,
                                            s.edge_T, s.edge_t_repr)],
    }


def _record_from_obj(obj: dict, d_e: int) -> EventSubgraph:
    nodes = obj["nodes"]
    edges = obj["edges"]
    return EventSubgraph(
        event_id=int(obj["event_id"]),
        label=int(obj["label"]),
        node_ids=np.array([n[0] for n in nodes], dtype=np.int64),
        core_flags=np.array([n[1] for n in nodes], dtype=np.uint8),
        edge_src=np.array([e[0] for e in edges], dtype=np.int64),
        edge_dst=np.array([e[1] for e in edges], dtype=np.int64),
        edge_feat=(np.array([e[2] for e in edges], dtype=np.float64)
                   if edges else np.zeros((0, d_e), dtype=np.float64)),
        edge_T=np.array([e[3] for e in edges], dtype=np.int64),
        edge_t_repr=np.array([e[4] for e in edges], dtype=np.int64),
    )


def save_jsonl(ds: SubgraphDataset, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(ds.header, sort_keys=True, separators=(",", ":")) + "\n")
            for s in ds.subgraphs:
                fh.write(json.dumps(_record_obj(s), sort_keys=True, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_jsonl(path: str) -> SubgraphDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if not lines:
        raise VersionMismatch("empty dataset file")
    header = json.loads(lines[0])
    if header.get("version") != _VERSION:
        raise VersionMismatch(f"unsupported dataset version {header.get('version')}")
    d_e = header["edge_feature_dim"]
    subs = [_record_from_obj(json.loads(ln), d_e) for ln in lines[1:] if ln.strip()]
    return SubgraphDataset(header, subs)


# -- binary container --------------------------------------------------------

def to_bytes(ds: SubgraphDataset) -> bytes:
    header = json.dumps(ds.header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", _VERSION)
    blob += struct.pack("<I", len(header)) + header
    blob += struct.pack("<I", len(ds.subgraphs))
    d_e = ds.header["edge_feature_dim"]
    for s in ds.subgraphs:
        blob += struct.pack("<qBII", s.event_id, s.label, s.n_nodes, s.n_edges)
        blob += s.node_ids.astype("<u4").tobytes()
        blob += s.core_flags.astype("<u1").tobytes()
        blob += s.edge_src.astype("<u4").tobytes()
        blob += s.edge_dst.astype("<u4").tobytes()
        blob += s.edge_T.astype("<i8").tobytes()
        blob += s.edge_t_repr.astype("<i8").tobytes()
        blob += s.edge_feat.astype("<u1").tobytes()
    body = bytes(blob)
    return body + blake2b(body, digest_size=8).digest()


def from_bytes(data: bytes) -> SubgraphDataset:
    if len(data) < 16 or data[:4] != _MAGIC:
        raise VersionMismatch("not a TASG dataset file")
    body, digest = data[:-8], data[-8:]
    if blake2b(body, digest_size=8).digest() != digest:
        raise ChecksumMismatch("dataset file checksum mismatch")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != _VERSION:
        raise VersionMismatch(f"unsupported dataset version {version}")
    (hlen,) = struct.unpack_from("<I", body, 8)
    pos = 12
    header = json.loads(body[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    d_e = header["edge_feature_dim"]
    subs = []
    for _ in range(count):
        event_id, label, n, m = struct.unpack_from("<qBII", body, pos)
        pos += 17
        gids = np.frombuffer(body, dtype="<u4", count=n, offset=pos).astype(np.int64); pos += 4 * n
        cores = np.frombuffer(body, dtype="<u1", count=n, offset=pos).copy(); pos += n
        src = np.frombuffer(body, dtype="<u4", count=m, offset=pos).astype(np.int64); pos += 4 * m
        dst = np.frombuffer(body, dtype="<u4", count=m, offset=pos).astype(np.int64); pos += 4 * m
        eT = np.frombuffer(body, dtype="<i8", count=m, offset=pos).copy(); pos += 8 * m
        tr = np.frombuffer(body, dtype="<i8", count=m, offset=pos).copy(); pos += 8 * m
        feat = np.frombuffer(body, dtype="<u1", count=m * d_e, offset=pos)
        feat = feat.reshape(m, d_e).astype(np.float64)
        pos += m * d_e
        subs.append(EventSubgraph(event_id, label, gids, cores, src, dst, feat, eT, tr))
    return SubgraphDataset(header, subs)


def save_tasg(ds: SubgraphDataset, path: str) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(to_bytes(ds))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_tasg(path: str) -> SubgraphDataset:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return from_bytes(data)


def load_dataset(path: str) -> SubgraphDataset:
    """Sniff the container kind by magic bytes and load accordingly."""
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if magic == _MAGIC:
        return load_tasg(path)
    return load_jsonl(path)
