import json
import re
from pathlib import Path

import numpy as np
import pytest

from ckgru.cli import main
from ckgru.synth import synth_gen


def _config_text(dataset, concepts=None, **over):
    model = {"d_w": 6, "d_c": 4, "h": 5, "d_red": 4, "gcm_iterations": 1}
    train = {"epochs": 2, "batch": 8, "dropout": 0.0, "l2": 0.0, "lr": 0.02, "seed": 5}
    model.update({k: v for k, v in over.items() if k in ("d_w", "d_c", "h")})
    train.update({k: v for k, v in over.items() if k in ("epochs", "seed", "lr")})
    lines = ["[data]", f"dataset = {dataset}", "", "[model]"]
    lines += [f"{k} = {v}" for k, v in model.items()]
    lines += ["", "[train]"]
    lines += [f"{k} = {v}" for k, v in train.items()]
    if concepts:
        lines += ["", "[resources]", f"concept_lexicon = {concepts}"]
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    paths = synth_gen("separable", 15, 8, root / "synth")
    cfg_path = root / "run.ini"
    cfg_path.write_text(_config_text(paths["dataset"]), encoding="utf-8")
    return root, cfg_path


def test_no_arguments_prints_usage_nonzero(capsys):
    assert main([]) != 0
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_nonzero():
    assert main(["frobnicate"]) != 0


def test_error_line_contract(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[data]\ndataset = /nonexistent/x.tsv\n", encoding="utf-8")
    rc = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("ERROR: ")
    assert len(err.strip().splitlines()) == 1


def test_synth_gen_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["synth-gen", "--spec", "concept_task", "--n", "30", "--seed", "4",
                 "--out", str(a)]) == 0
    assert main(["synth-gen", "--spec", "concept_task", "--n", "30", "--seed", "4",
                 "--out", str(b)]) == 0
    for name in ("dataset.tsv", "concepts.tsv", "task_meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_gen_unknown_spec():
    assert main(["synth-gen", "--spec", "weird", "--out", "/tmp/x"]) != 0


def test_preprocess_writes_tokenized_tsv(workspace, tmp_path):
    _, cfg_path = workspace
    out = tmp_path / "tok.tsv"
    assert main(["preprocess", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id\ttokens\tpos_ids\tdep_ids\tlabel"
    assert len(lines) == 16
    tokens, pos_ids, dep_ids = lines[1].split("\t")[1:4]
    assert len(tokens.split()) == len(pos_ids.split(",")) == len(dep_ids.split(","))


def test_train_predict_evaluate_cycle(workspace, tmp_path):
    _, cfg_path = workspace
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(run)]) == 0
    assert (run / "model.ckpt").exists()
    curve = (run / "loss_curve.tsv").read_text(encoding="utf-8").splitlines()
    assert curve[0] == "epoch\tloss"
    assert len(curve) == 3

    pred = tmp_path / "pred.tsv"
    assert main(["predict", "--config", str(cfg_path),
                 "--checkpoint", str(run / "model.ckpt"), "--out", str(pred)]) == 0
    lines = pred.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id\tlabel\tp_negative\tp_neutral\tp_positive"
    assert len(lines) == 16
    probs = [float(x) for x in lines[1].split("\t")[2:]]
    assert abs(sum(probs) - 1.0) < 1e-9

    out_tsv = tmp_path / "eval.tsv"
    assert main(["evaluate", "--config", str(cfg_path),
                 "--checkpoint", str(run / "model.ckpt"), "--out", str(out_tsv)]) == 0
    assert out_tsv.read_text(encoding="utf-8").startswith("variant\tfold\taccuracy")


def test_cv_outputs_and_determinism(workspace, tmp_path):
    _, cfg_path = workspace
    out1 = tmp_path / "cv1"
    out2 = tmp_path / "cv2"
    for out in (out1, out2):
        assert main(["cv", "--config", str(cfg_path), "--out", str(out), "--folds", "3"]) == 0
    assert (out1 / "metrics.tsv").read_bytes() == (out2 / "metrics.tsv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
    lines = (out1 / "metrics.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("variant\tfold\taccuracy")
    assert len(lines) == 1 + 3 + 1  # header, folds, mean
    assert lines[-1].split("\t")[1] == "mean"
    summary = json.loads((out1 / "summary.json").read_text(encoding="utf-8"))
    assert "full" in summary


def test_ablate_rows_per_variant(workspace, tmp_path):
    _, cfg_path = workspace
    out = tmp_path / "abl"
    assert main(["ablate", "--config", str(cfg_path), "--out", str(out),
                 "--folds", "2", "--switches", "no_vad,plain_bigru"]) == 0
    lines = (out / "ablation.tsv").read_text(encoding="utf-8").splitlines()
    variants = {line.split("\t")[0] for line in lines[1:]}
    assert variants == {"full", "no_vad", "plain_bigru"}
    assert main(["ablate", "--config", str(cfg_path), "--out", str(out),
                 "--switches", "nonsense_switch"]) == 1


def test_gradcheck_exits_zero(capsys):
    assert main(["gradcheck", "--seed", "1"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_attn_export_tsv_weights_sum_to_one(workspace, tmp_path):
    _, cfg_path = workspace
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(run)]) == 0
    out = tmp_path / "attn.tsv"
    assert main(["attn-export", "--config", str(cfg_path),
                 "--checkpoint", str(run / "model.ckpt"), "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id\tposition\ttoken\tweight"
    by_tweet = {}
    for line in lines[1:]:
        tweet_id, pos, token, weight = line.split("\t")
        by_tweet.setdefault(tweet_id, []).append(float(weight))
    assert len(by_tweet) == 15
    for weights in by_tweet.values():
        assert abs(sum(weights) - 1.0) < 1e-9


def test_attn_export_html_roundtrips_tsv_weights(workspace, tmp_path):
    _, cfg_path = workspace
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(run)]) == 0
    tsv = tmp_path / "attn.tsv"
    html_out = tmp_path / "attn.html"
    ckpt = str(run / "model.ckpt")
    assert main(["attn-export", "--config", str(cfg_path), "--checkpoint", ckpt,
                 "--out", str(tsv)]) == 0
    assert main(["attn-export", "--config", str(cfg_path), "--checkpoint", ckpt,
                 "--out", str(html_out), "--format", "html"]) == 0
    html_text = html_out.read_text(encoding="utf-8")
    html_weights = re.findall(r"data-weight='([^']+)'", html_text)
    tsv_weights = [line.split("\t")[3]
                   for line in tsv.read_text(encoding="utf-8").splitlines()[1:]]
    assert html_weights == tsv_weights  # byte-for-byte the same reprs


def test_seed_override_changes_result(workspace, tmp_path):
    _, cfg_path = workspace
    a = tmp_path / "s1"
    b = tmp_path / "s2"
    assert main(["cv", "--config", str(cfg_path), "--out", str(a), "--folds", "2",
                 "--seed", "1"]) == 0
    assert main(["cv", "--config", str(cfg_path), "--out", str(b), "--folds", "2",
                 "--seed", "2"]) == 0
    assert (a / "metrics.tsv").read_bytes() != (b / "metrics.tsv").read_bytes()
