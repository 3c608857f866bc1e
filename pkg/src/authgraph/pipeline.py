"""End-to-end desk-scale pipeline: synthesize, build, sample, train, evaluate.

``run_bench`` is the library entry behind the ``bench`` CLI command and the
acceptance suite: a seed-fixed scenario, stratified 6:2:2 splits, one model
per seed, and aggregated metrics.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import os
from dataclasses import dataclass, field, replace

from .dataset import SubgraphDataset, assemble
from .encoder import EncoderConfig
from .graph import build_hamg, id_bit_width
from .metrics import aggregate_metrics
from .sampling import SamplerConfig, build_dataset, subsample_events
from .synth import ScenarioConfig, generate_scenario
from .tensor import save_checkpoint
from .training import TrainConfig, evaluate, split_dataset, train


@dataclass
class BenchConfig:
    scenario: ScenarioConfig = field(default_factory=lambda: ScenarioConfig(
        n_users=60, n_hosts=110, n_servers=10, days=14,
        benign_events=5600, malicious_chains=50, chain_length=4,
        chain_window=900, seed=7))
    benign_target: int = 5000
    malicious_target: int = 200
    event_seed: int = 13
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(tau=3600, k=150))
    seeds: tuple = (0, 1, 2, 3, 4)
    hidden: int = 64
    heads: int = 4
    local_layers: int = 2
    walk_len: int = 32
    dropout: float = 0.2
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=16, learning_rate=5e-4, max_epochs=30, patience=6))
    disable_local: bool = False
    disable_global: bool = False
    disable_pos: bool = False
    dtype: str = "float32"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "benign_target": self.benign_target,
            "malicious_target": self.malicious_target,
            "event_seed": self.event_seed,
            "sampler": self.sampler.to_dict(),
            "seeds": list(self.seeds),
            "hidden": self.hidden, "heads": self.heads,
            "local_layers": self.local_layers, "walk_len": self.walk_len,
            "dropout": self.dropout,
            "train": self.train.to_dict(),
            "disable_local": self.disable_local,
            "disable_global": self.disable_global,
            "disable_pos": self.disable_pos,
            "dtype": self.dtype,
        }


def build_bench_dataset(cfg: BenchConfig, log=None) -> SubgraphDataset:
    """Scenario -> graph -> event subsample -> time-aware subgraph dataset."""
    records, labels = generate_scenario(cfg.scenario)
    graph, events = build_hamg(records, labels, source_format="generic")
    if log:
        log(f"graph: {graph.num_nodes} nodes, {graph.num_edges} edges, "
            f"{sum(e.label for e in events)} malicious of {len(events)} events")
    events = subsample_events(events, cfg.benign_target, cfg.malicious_target,
                              seed=cfg.event_seed)
    subs, skipped = build_dataset(graph, events, cfg.sampler)
    if log:
        log(f"dataset: {len(subs)} subgraphs ({skipped} skipped)")
    return assemble(graph, cfg.sampler, subs)


def encoder_config_for(ds: SubgraphDataset, cfg: BenchConfig) -> EncoderConfig:
    return EncoderConfig(
        node_feat_dim=5 + id_bit_width(ds.num_graph_nodes),
        edge_feat_dim=ds.header["edge_feature_dim"],
        hidden=cfg.hidden, local_layers=cfg.local_layers, heads=cfg.heads,
        walk_len=cfg.walk_len, dropout=cfg.dropout,
        disable_local=cfg.disable_local, disable_global=cfg.disable_global,
        disable_pos=cfg.disable_pos, dtype=cfg.dtype,
    ).validate()


_WORKER_STATE: dict = {}


def _seed_worker_init(ds, enc_cfg, train_cfg):
    _WORKER_STATE["args"] = (ds, enc_cfg, train_cfg)


def _run_one_seed(seed: int):
    ds, enc_cfg, train_cfg = _WORKER_STATE["args"]
    splits = split_dataset(ds.labels, train_cfg.split, seed=seed)
    result = train(ds, splits, enc_cfg, train_cfg, seed=seed, log=None)
    m = evaluate(result.params, enc_cfg, ds, splits[2])
    values = {k: p.values for k, p in result.params.items()}
    return seed, m, values, result.history, result.best_epoch, result.best_val_f1


def run_bench(cfg: BenchConfig, out_dir: str | None = None, log=None,
              ds: SubgraphDataset | None = None, threads: int = 1) -> dict:
    """Train/evaluate over all seeds; returns the aggregated metrics document.

    Seeds are independent experiments, so they may run on a process pool
    (``threads`` > 1); results are reduced in seed order either way, keeping
    the output bit-identical. When ``out_dir`` is given, per-seed checkpoints,
    history CSVs, and the metrics JSON are written there.
    """
    if ds is None:
        ds = build_bench_dataset(cfg, log=log)
    enc_cfg = encoder_config_for(ds, cfg)

    _seed_worker_init(ds, enc_cfg, cfg.train)
    if threads > 1 and len(cfg.seeds) > 1 and hasattr(os, "fork"):
        ctx = mp.get_context("fork")
        with ctx.Pool(min(threads, len(cfg.seeds))) as pool:
            outcomes = pool.map(_run_one_seed, cfg.seeds)
    else:
        outcomes = [_run_one_seed(s) for s in cfg.seeds]

    per_seed = []
    for seed, m, values, history, best_epoch, best_val in outcomes:
        per_seed.append(m)
        if log:
            log(f"seed {seed}: best epoch {best_epoch} "
                f"val_f1={best_val:.4f} test_f1={m.f1:.4f} test_auc={m.auc:.4f}")
        if out_dir:
            from .tensor import parameter
            ckpt_cfg = {
                "encoder": enc_cfg.to_dict(),
                "train": cfg.train.to_dict(),
                "seed": seed,
                "split_seed": seed,
                "vocab_hash": ds.header["vocab_hash"],
            }
            params = {k: parameter(v, name=k) for k, v in values.items()}
            save_checkpoint(os.path.join(out_dir, f"model_seed{seed}.lmck"),
                            params, ckpt_cfg)
            rows = ["epoch,train_loss,val_f1,val_auc"]
            rows += [f"{r[0]},{r[1]:.6f},{r[2]:.6f},{r[3]:.6f}" for r in history]
            with open(os.path.join(out_dir, f"history_seed{seed}.csv"), "w") as fh:
                fh.write("\n".join(rows) + "\n")

    doc = {"config": cfg.to_dict(), **aggregate_metrics(per_seed)}
    if out_dir:
        with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return doc


def ablation_variant(cfg: BenchConfig, **flags) -> BenchConfig:
    return replace(cfg, **flags)
