import json

import numpy as np
import pytest

from authgraph.cli import main
from authgraph.dataset import load_dataset


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> build-graph -> sample -> train on a tiny scenario."""
    root = tmp_path_factory.mktemp("pipeline")
    scen = root / "scen"
    assert main(["synth", "--users", "8", "--hosts", "16", "--servers", "2",
                 "--days", "2", "--benign-events", "300", "--chains", "4",
                 "--chain-length", "4", "--seed", "3",
                 "--out-dir", str(scen)]) == 0
    graph = root / "graph.bin"
    assert main(["build-graph", "--input", str(scen / "records.jsonl"),
                 "--format", "generic", "--labels", str(scen / "labels.txt"),
                 "--out", str(graph)]) == 0
    data = root / "data.tasg"
    assert main(["sample", "--graph", str(graph), "--topk", "20",
                 "--out", str(data)]) == 0
    ckpt = root / "model.lmck"
    assert main(["train", "--data", str(data), "--seed", "0", "--out", str(ckpt),
                 "--hidden", "8", "--heads", "2", "--walk-len", "4",
                 "--layers", "1", "--max-epochs", "2", "--patience", "2",
                 "--quiet"]) == 0
    return root, scen, graph, data, ckpt


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_input_is_io_error(tmp_path):
    rc = main(["build-graph", "--input", str(tmp_path / "nope.txt"),
               "--format", "lanl", "--out", str(tmp_path / "g.bin")])
    assert rc == 1


def test_synth_outputs_and_manifest(pipeline):
    _, scen, *_ = pipeline
    assert (scen / "records.jsonl").exists()
    assert (scen / "labels.txt").exists()
    manifest = json.loads((scen / "records.jsonl.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 3
    assert "wall_clock" in manifest


def test_build_graph_stats_and_summary(pipeline, capsys):
    root, scen, graph, *_ = pipeline
    rc = main(["build-graph", "--input", str(scen / "records.jsonl"),
               "--format", "generic", "--stats"])
    assert rc == 0
    out, err = capsys.readouterr()
    stats = json.loads(out)
    assert stats["nodes"] > 0 and stats["edges"] > 0
    assert set(stats["node_kinds"]) == {"user", "host", "server", "file", "process"}
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["ingest"]["skipped_malformed"] == 0


def test_malformed_rows_counted_not_fatal(tmp_path, capsys):
    log = tmp_path / "bad.txt"
    log.write_text("1,U1@D,U1@D,C1,C2,Kerberos,Network,LogOn,Success\n"
                   "this-is-not-a-row\n")
    rc = main(["build-graph", "--input", str(log), "--format", "lanl",
               "--out", str(tmp_path / "g.bin")])
    assert rc == 0
    _, err = capsys.readouterr()
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["ingest"]["parsed"] == 1
    assert summary["ingest"]["skipped_malformed"] == 1


def test_sample_defaults_tau_by_format(pipeline):
    root, _, graph, data, _ = pipeline
    ds = load_dataset(str(data))
    assert ds.header["sampler"]["tau"] == 3600  # generic maps to the 3600s default
    assert ds.header["sampler"]["k"] == 20


def test_sample_jsonl_equivalent(pipeline, tmp_path):
    root, _, graph, data, _ = pipeline
    jpath = tmp_path / "data.jsonl"
    assert main(["sample", "--graph", str(graph), "--topk", "20",
                 "--jsonl", "--out", str(jpath)]) == 0
    assert load_dataset(str(jpath)).equals(load_dataset(str(data)))


def test_train_writes_checkpoint_history_manifest(pipeline):
    root, _, _, _, ckpt = pipeline
    assert ckpt.exists()
    assert ckpt.read_bytes()[:4] == b"LMCK"
    history = (root / "model.lmck.history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,val_f1,val_auc"
    manifest = json.loads((root / "model.lmck.manifest.json").read_text())
    assert manifest["command"] == "train"


def test_train_random_subgraph_flag_requires_matching_dataset(pipeline):
    root, _, _, data, _ = pipeline
    rc = main(["train", "--data", str(data), "--out", str(root / "x.lmck"),
               "--random-subgraph", "--quiet"])
    assert rc == 2  # dataset was time-sampled


def test_sample_random_mode_then_train(pipeline, tmp_path):
    root, _, graph, _, _ = pipeline
    rdata = tmp_path / "rand.tasg"
    assert main(["sample", "--graph", str(graph), "--topk", "20",
                 "--random-subgraph", "--out", str(rdata)]) == 0
    ds = load_dataset(str(rdata))
    assert ds.header["sampler"]["mode"] == "random"
    ckpt = tmp_path / "rand.lmck"
    assert main(["train", "--data", str(rdata), "--out", str(ckpt),
                 "--random-subgraph", "--hidden", "8", "--heads", "2",
                 "--walk-len", "4", "--layers", "1", "--max-epochs", "1",
                 "--patience", "1", "--quiet"]) == 0


def test_eval_writes_metrics_and_attention(pipeline, tmp_path):
    root, _, _, data, ckpt = pipeline
    metrics = tmp_path / "metrics.json"
    attn = tmp_path / "attn.jsonl"
    assert main(["eval", "--data", str(data), "--ckpt", str(ckpt),
                 "--out", str(metrics), "--export-attention", str(attn),
                 "--export-attention-limit", "3"]) == 0
    doc = json.loads(metrics.read_text())
    assert set(doc["mean"]) >= {"precision", "recall", "f1", "accuracy", "auc"}
    assert len(doc["per_seed"]) == 1
    dumped = [json.loads(l) for l in attn.read_text().splitlines()]
    assert len(dumped) == 3
    for row in dumped:
        beta = np.array(row["global_beta"][0])
        assert np.all(np.abs(beta.sum(axis=1) - 1.0) < 1e-6)


def test_manifests_identical_except_wall_clock(pipeline, tmp_path):
    root, _, graph, _, _ = pipeline
    out1, out2 = tmp_path / "a.tasg", tmp_path / "b.tasg"
    assert main(["sample", "--graph", str(graph), "--topk", "20", "--out", str(out1)]) == 0
    assert main(["sample", "--graph", str(graph), "--topk", "20", "--out", str(out2)]) == 0
    m1 = json.loads((tmp_path / "a.tasg.manifest.json").read_text())
    m2 = json.loads((tmp_path / "b.tasg.manifest.json").read_text())
    m1.pop("wall_clock")
    m2.pop("wall_clock")
    assert m1 == m2
    assert out1.read_bytes() == out2.read_bytes()


def test_train_config_file_combines_with_flags(pipeline, tmp_path):
    root, _, _, data, _ = pipeline
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({
        "encoder": {"hidden": 8, "heads": 2, "walk_len": 4, "local_layers": 1,
                    "dtype": "float32"},
        "train": {"max_epochs": 1, "patience": 1, "batch_size": 8},
    }))
    out = tmp_path / "m.lmck"
    assert main(["train", "--data", str(data), "--out", str(out),
                 "--config", str(cfg), "--disable-pos", "--dtype", "float32",
                 "--quiet"]) == 0
    from authgraph.tensor import load_checkpoint
    _, doc = load_checkpoint(str(out))
    assert doc["encoder"]["hidden"] == 8
    assert doc["encoder"]["disable_pos"] is True
    assert doc["train"]["batch_size"] == 8


def test_eval_vocab_mismatch_detected(pipeline, tmp_path):
    root, scen, graph, data, ckpt = pipeline
    # a dataset from a different graph has a different graph checksum but the
    # same vocab; tamper with the header's vocab hash to simulate a mismatch
    ds = load_dataset(str(data))
    ds.header["vocab_hash"] = "0" * 16
    from authgraph.dataset import save_tasg
    bad = tmp_path / "bad.tasg"
    save_tasg(ds, str(bad))
    rc = main(["eval", "--data", str(bad), "--ckpt", str(ckpt),
               "--out", str(tmp_path / "m.json")])
    assert rc == 2
