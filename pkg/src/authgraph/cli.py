"""Command-line entry point.

Subcommands cover the pipeline stages: ``synth`` (scenario generation),
``build-graph`` (logs -> graph file), ``sample`` (graph -> subgraph dataset),
``train``, ``eval``, and ``bench`` (the full desk-scale benchmark). Every
command writes a reproducibility manifest beside its output.

Exit codes: 0 success, 1 runtime error, 2 usage error. Malformed log rows do
not fail ingestion; their counts go to stderr as a final JSON summary.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, dataset as dsio
from .encoder import (EncoderConfig, FeatureSpace, ForwardTrace,
                      encode_subgraph)
from .errors import AuthGraphError, ConfigError
from .graph import build_hamg, id_bit_width, load_graph, save_graph
from .logs import load_labels, normalize_stream, read_records
from .manifest import build_manifest, write_manifest
from .pipeline import BenchConfig, run_bench
from .sampling import SamplerConfig, build_dataset, subsample_events
from .synth import ScenarioConfig, write_scenario
from .tensor import load_checkpoint, save_checkpoint
from .training import TrainConfig, evaluate, split_dataset, train

_DEFAULT_TAU = {"lanl": 3600, "generic": 3600, "cert": 10800}


def _log(args, message: str) -> None:
    if getattr(args, "json_logs", False):
        print(json.dumps({"level": "info", "message": message}), file=sys.stderr)
    else:
        print(message, file=sys.stderr)


def _error(args, message: str) -> None:
    if getattr(args, "json_logs", False):
        print(json.dumps({"level": "error", "message": message}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker pool size for parallel stages")
    p.add_argument("--json-logs", action="store_true",
                   help="emit diagnostics as structured JSON on stderr")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="authgraph",
                                 description="authentication-log graph analytics")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled scenario")
    p.add_argument("--users", type=int, default=40)
    p.add_argument("--hosts", type=int, default=80)
    p.add_argument("--servers", type=int, default=8)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--benign-events", type=int, default=2000)
    p.add_argument("--chains", type=int, default=10)
    p.add_argument("--chain-length", type=int, default=4)
    p.add_argument("--chain-window", type=int, default=900)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_common(p)

    p = sub.add_parser("build-graph", help="parse logs and build the graph file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("lanl", "cert", "generic"), default="lanl")
    p.add_argument("--labels")
    p.add_argument("--label-format", choices=("lanl", "cert"), default="lanl")
    p.add_argument("--out")
    p.add_argument("--server-top-frac", type=float, default=0.01)
    p.add_argument("--stats", action="store_true",
                   help="print node/edge counts and kind histograms as JSON")
    _add_common(p)

    p = sub.add_parser("sample", help="generate the time-aware subgraph dataset")
    p.add_argument("--graph", required=True)
    p.add_argument("--tau", type=int)
    p.add_argument("--topk", type=int, default=150)
    p.add_argument("--hops", type=int, choices=(1, 2), default=1)
    p.add_argument("--random-subgraph", action="store_true",
                   help="uniform random pruning without the time window")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--max-benign", type=int)
    p.add_argument("--max-malicious", type=int)
    p.add_argument("--event-seed", type=int, default=0)
    p.add_argument("--jsonl", action="store_true", help="write JSONL instead of binary")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("train", help="train the subgraph classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with train/encoder settings")
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--walk-len", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dtype", choices=("float32", "float64"))
    p.add_argument("--disable-local", action="store_true")
    p.add_argument("--disable-global", action="store_true")
    p.add_argument("--disable-pos", action="store_true")
    p.add_argument("--random-subgraph", action="store_true",
                   help="require a dataset built with random (non-time-aware) sampling")
    p.add_argument("--quiet", action="store_true")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("test", "all"), default="test")
    p.add_argument("--export-attention", metavar="PATH",
                   help="dump local/global attention matrices per subgraph as JSONL")
    p.add_argument("--export-attention-limit", type=int, default=16)
    _add_common(p)

    p = sub.add_parser("bench", help="run the full desk-scale benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=7, help="scenario seed")
    p.add_argument("--seeds", default="0,1,2,3,4", help="train/split seeds, comma-separated")
    p.add_argument("--benign", type=int, default=5000)
    p.add_argument("--malicious", type=int, default=200)
    p.add_argument("--tau", type=int, default=3600)
    p.add_argument("--topk", type=int, default=150)
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=6)
    p.add_argument("--disable-local", action="store_true")
    p.add_argument("--disable-global", action="store_true")
    p.add_argument("--disable-pos", action="store_true")
    p.add_argument("--random-subgraph", action="store_true")
    _add_common(p)

    return ap


# -- command bodies ----------------------------------------------------------

def _cmd_synth(args) -> int:
    cfg = ScenarioConfig(
        n_users=args.users, n_hosts=args.hosts, n_servers=args.servers,
        days=args.days, benign_events=args.benign_events,
        malicious_chains=args.chains, chain_length=args.chain_length,
        chain_window=args.chain_window, seed=args.seed,
    ).validate()
    os.makedirs(args.out_dir, exist_ok=True)
    records_path = os.path.join(args.out_dir, "records.jsonl")
    labels_path = os.path.join(args.out_dir, "labels.txt")
    n_rec, n_lab = write_scenario(cfg, records_path, labels_path)
    _log(args, f"wrote {n_rec} records, {n_lab} label keys")
    manifest = build_manifest("synth", cfg.to_dict(), [], seed=args.seed)
    write_manifest(records_path, manifest)
    return 0


def _cmd_build_graph(args) -> int:
    if not args.out and not args.stats:
        raise ConfigError("build-graph needs --out, --stats, or both")
    records, report = read_records(args.input, args.format)
    records = normalize_stream(records)
    labels = load_labels(args.labels, args.label_format) if args.labels else None
    graph, events = build_hamg(records, labels, server_top_frac=args.server_top_frac,
                               source_format=args.format)
    if args.stats:
        print(json.dumps(graph.stats(), sort_keys=True, indent=2))
    if args.out:
        save_graph(graph, args.out, events)
        cfg = {"format": args.format, "server_top_frac": args.server_top_frac,
               "labels": args.labels}
        inputs = [args.input] + ([args.labels] if args.labels else [])
        write_manifest(args.out, build_manifest("build-graph", cfg, inputs))
        _log(args, f"graph: {graph.num_nodes} nodes, {graph.num_edges} edges, "
                   f"{len(events)} events -> {args.out}")
    # ingestion summary goes last so scripts can scrape it
    print(json.dumps({"ingest": report.to_dict(),
                      "orphan_labels": graph.meta.get("orphan_labels", 0)},
                     sort_keys=True), file=sys.stderr)
    return 0


def _cmd_sample(args) -> int:
    graph, events = load_graph(args.graph)
    tau = args.tau
    if tau is None:
        tau = _DEFAULT_TAU.get(graph.meta.get("source_format", "generic"), 3600)
    cfg = SamplerConfig(tau=tau, k=args.topk, hops=args.hops,
                        mode="random" if args.random_subgraph else "time",
                        seed=args.sample_seed).validate()
    events = subsample_events(events, args.max_benign, args.max_malicious,
                              seed=args.event_seed)
    subs, skipped = build_dataset(graph, events, cfg, threads=args.threads)
    ds = dsio.assemble(graph, cfg, subs)
    if args.jsonl:
        dsio.save_jsonl(ds, args.out)
    else:
        dsio.save_tasg(ds, args.out)
    mal = int(ds.labels.sum())
    _log(args, f"dataset: {len(subs)} subgraphs ({mal} malicious, {skipped} skipped) -> {args.out}")
    cfg_doc = {**cfg.to_dict(), "max_benign": args.max_benign,
               "max_malicious": args.max_malicious, "event_seed": args.event_seed}
    write_manifest(args.out, build_manifest("sample", cfg_doc, [args.graph]))
    return 0


def _load_train_settings(args) -> tuple[dict, dict]:
    enc_over, train_over = {}, {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        enc_over.update(doc.get("encoder", {}))
        train_over.update(doc.get("train", {}))
    flag_map_enc = {"hidden": args.hidden, "heads": args.heads,
                    "local_layers": args.layers, "walk_len": args.walk_len,
                    "dropout": args.dropout, "dtype": args.dtype}
    flag_map_train = {"batch_size": args.batch_size, "learning_rate": args.lr,
                      "max_epochs": args.max_epochs, "patience": args.patience}
    enc_over.update({k: v for k, v in flag_map_enc.items() if v is not None})
    train_over.update({k: v for k, v in flag_map_train.items() if v is not None})
    return enc_over, train_over


def _cmd_train(args) -> int:
    ds = dsio.load_dataset(args.data)
    sampler_mode = ds.header.get("sampler", {}).get("mode", "time")
    if args.random_subgraph and sampler_mode != "random":
        raise ConfigError("--random-subgraph requires a dataset sampled with "
                          "`sample --random-subgraph` (header says mode="
                          f"{sampler_mode!r})")
    enc_over, train_over = _load_train_settings(args)
    enc_kwargs = {
        "node_feat_dim": 5 + id_bit_width(ds.num_graph_nodes),
        "edge_feat_dim": ds.header["edge_feature_dim"],
        "dtype": "float32",
    }
    enc_kwargs.update({k: v for k, v in enc_over.items()
                       if k not in ("node_feat_dim", "edge_feat_dim")})
    # ablation flags are additive on top of any config file
    for flag in ("disable_local", "disable_global", "disable_pos"):
        if getattr(args, flag):
            enc_kwargs[flag] = True
    enc_cfg = EncoderConfig(**enc_kwargs).validate()
    train_cfg = TrainConfig(**train_over).validate()
    splits = split_dataset(ds.labels, train_cfg.split, seed=args.seed)
    log = None if args.quiet else (lambda s: _log(args, s))
    result = train(ds, splits, enc_cfg, train_cfg, seed=args.seed, log=log)
    ckpt_cfg = {"encoder": enc_cfg.to_dict(), "train": train_cfg.to_dict(),
                "seed": args.seed, "split_seed": args.seed,
                "vocab_hash": ds.header["vocab_hash"], "sampler_mode": sampler_mode}
    save_checkpoint(args.out, result.params, ckpt_cfg)
    with open(f"{args.out}.history.csv", "w", encoding="utf-8") as fh:
        fh.write(result.history_csv())
    _log(args, f"best epoch {result.best_epoch} val_f1={result.best_val_f1:.4f} -> {args.out}")
    write_manifest(args.out, build_manifest("train", ckpt_cfg, [args.data], seed=args.seed))
    return 0


def _rebuild_model(ckpt_path: str):
    from .tensor import parameter

    arrays, cfg_doc = load_checkpoint(ckpt_path)
    enc_cfg = EncoderConfig.from_dict(cfg_doc["encoder"])
    from .encoder import param_shapes
    expected = param_shapes(enc_cfg)
    if set(expected) != set(arrays):
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        raise ConfigError(f"checkpoint parameters do not match model: "
                          f"missing={missing} extra={extra}")
    params = {}
    for name, shape in expected.items():
        if tuple(arrays[name].shape) != tuple(shape):
            raise ConfigError(f"checkpoint shape mismatch for {name}: "
                              f"{arrays[name].shape} vs {shape}")
        params[name] = parameter(arrays[name], name=name, dtype=enc_cfg.np_dtype)
    return params, enc_cfg, cfg_doc


def _cmd_eval(args) -> int:
    ds = dsio.load_dataset(args.data)
    params, enc_cfg, cfg_doc = _rebuild_model(args.ckpt)
    if cfg_doc.get("vocab_hash") and cfg_doc["vocab_hash"] != ds.header["vocab_hash"]:
        raise ConfigError("checkpoint and dataset were built with different vocabularies")
    if args.split == "test":
        train_cfg = TrainConfig(**cfg_doc.get("train", {}))
        splits = split_dataset(ds.labels, train_cfg.split, seed=cfg_doc.get("split_seed", 0))
        idx = splits[2]
    else:
        idx = np.arange(len(ds.subgraphs))
    m = evaluate(params, enc_cfg, ds, idx)
    doc = {"config": {"ckpt": cfg_doc, "split": args.split},
           "per_seed": [m.to_dict()],
           "mean": m.to_dict(), "std": {k: 0.0 for k in ("precision", "recall", "f1", "accuracy", "auc")},
           "confusion_total": m.confusion}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if args.export_attention:
        _export_attention(ds, idx, params, enc_cfg, args.export_attention,
                          args.export_attention_limit)
    _log(args, f"f1={m.f1:.4f} auc={m.auc:.4f} -> {args.out}")
    write_manifest(args.out, build_manifest("eval", {"split": args.split},
                                            [args.data, args.ckpt]))
    return 0


def _export_attention(ds, idx, params, enc_cfg, path: str, limit: int) -> None:
    space = FeatureSpace(ds.num_graph_nodes, ds.node_kind_lookup())
    with open(path, "w", encoding="utf-8") as fh:
        for i in list(idx)[:limit]:
            sub = ds.subgraphs[i]
            trace = ForwardTrace()
            encode_subgraph(sub, params, enc_cfg, space, trace=trace)
            fh.write(json.dumps({
                "event_id": sub.event_id,
                "local_alpha": [a.tolist() for a in trace.local_alpha],
                "global_beta": [b.tolist() for b in trace.global_beta],
            }, sort_keys=True) + "\n")


def _cmd_bench(args) -> int:
    from dataclasses import replace as dc_replace

    os.makedirs(args.out_dir, exist_ok=True)
    base = BenchConfig()
    cfg = dc_replace(
        base,
        scenario=dc_replace(base.scenario, seed=args.seed),
        benign_target=args.benign, malicious_target=args.malicious,
        sampler=SamplerConfig(tau=args.tau, k=args.topk,
                              mode="random" if args.random_subgraph else "time",
                              seed=args.seed),
        seeds=tuple(int(s) for s in args.seeds.split(",") if s != ""),
        train=dc_replace(base.train, max_epochs=args.max_epochs, patience=args.patience),
        disable_local=args.disable_local, disable_global=args.disable_global,
        disable_pos=args.disable_pos,
    )
    doc = run_bench(cfg, out_dir=args.out_dir, log=lambda s: _log(args, s),
                    threads=args.threads)
    print(json.dumps({"mean": doc["mean"], "std": doc["std"]}, sort_keys=True, indent=2))
    metrics_path = os.path.join(args.out_dir, "metrics.json")
    write_manifest(metrics_path, build_manifest("bench", cfg.to_dict(), [], seed=args.seed))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "build-graph": _cmd_build_graph,
    "sample": _cmd_sample,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        _error(args, f"{type(exc).__name__}: {exc}")
        return 2
    except AuthGraphError as exc:
        _error(args, f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
