import csv
import json

import numpy as np
import pytest

from segguard import spectral, synth
from segguard.cli import main
from segguard.tensor_core import Tensor, save_tensor


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def feature_dir(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "features"
    d.mkdir()
    for i in range(4):
        save_tensor(Tensor(rng.standard_normal((3, 3, 3, 5))), d / f"img{i}.npy")
    return d


def test_synth_writes_layout(tmp_path):
    out = tmp_path / "data"
    assert run("synth", "--family", "smooth-blobs", "--shape", "16,16,16", "--seeds", "0:3", "--out", out) == 0
    files = sorted((out / "smooth-blobs").glob("*.npy"))
    assert [f.name for f in files] == ["0.npy", "1.npy", "2.npy"]


def test_synth_features_shape(tmp_path):
    out = tmp_path / "feat"
    assert run("synth", "--family", "hi-freq-texture", "--shape", "32,32,32", "--seeds", "5", "--out", out, "--features") == 0
    from segguard.tensor_core import load_tensor

    f = load_tensor(out / "hi-freq-texture" / "5.npy")
    assert f.data.shape == (2, 2, 2, 14)


def test_signature_build_and_score(tmp_path, feature_dir):
    bank_path = tmp_path / "bank.json"
    assert run("signature-build", feature_dir, bank_path, "--c", "2.5") == 0
    bank = spectral.load_bank(bank_path)
    assert bank.signature_length == 5
    assert len(bank.dataset_labels) == 4

    out = tmp_path / "verdicts.json"
    member = feature_dir / "img0.npy"
    assert run("ood-score", bank_path, member, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["version"]
    verdict = doc["verdicts"][0]
    assert verdict["id"] == "img0"
    assert verdict["oodm"] == 0.0
    assert not verdict["is_ood"]
    assert verdict["nearest"] == "img0"


def test_cli_matches_library(tmp_path, feature_dir):
    """Thin-wrapper law: the CLI bank equals the direct library call."""
    bank_path = tmp_path / "bank.json"
    assert run("signature-build", feature_dir, bank_path) == 0
    from segguard.tensor_core import load_tensor

    files = sorted(feature_dir.glob("*.npy"))
    lib_bank = spectral.bank_build([load_tensor(f).data for f in files], [f.stem for f in files])
    cli_bank = spectral.load_bank(bank_path)
    assert cli_bank.tau == lib_bank.tau
    assert np.array_equal(cli_bank.signatures, lib_bank.signatures)


def test_signature_build_needs_two(tmp_path):
    d = tmp_path / "one"
    d.mkdir()
    save_tensor(Tensor(np.ones((2, 2, 2, 3))), d / "only.npy")
    assert run("signature-build", d, tmp_path / "bank.json") == 2


def test_ood_score_length_mismatch(tmp_path, feature_dir):
    bank_path = tmp_path / "bank.json"
    run("signature-build", feature_dir, bank_path)
    bad = tmp_path / "bad.npy"
    save_tensor(Tensor(np.random.default_rng(1).standard_normal((3, 3, 3, 7))), bad)
    assert run("ood-score", bank_path, bad) == 2


def test_ood_eval_outputs(tmp_path):
    rng = np.random.default_rng(2)
    spec = synth.ExtractorSpec(seed=3)
    dirs = {}
    for name, family, seeds in (
        ("train", "smooth-blobs", range(5)),
        ("in", "smooth-blobs", range(50, 55)),
        ("ood", "hi-freq-texture", range(5)),
    ):
        d = tmp_path / name
        d.mkdir()
        for s in seeds:
            vol = synth.gen_volume(family, (32, 32, 32), s)
            save_tensor(Tensor(synth.extract_features(vol, spec)), d / f"{family}-{s}.npy")
        dirs[name] = d

    bank_path = tmp_path / "bank.json"
    assert run("signature-build", dirs["train"], bank_path) == 0
    prefix = str(tmp_path / "exp_")
    assert run("ood-eval", bank_path, "--in-dist", dirs["in"], "--ood", dirs["ood"], "--out-prefix", prefix) == 0

    report = json.loads((tmp_path / "exp_report.json").read_text())
    assert set(report["row"]) == {"method", "accuracy", "sensitivity", "specificity", "auc"}
    assert report["config"]["positive_class"] == "ood"

    with open(tmp_path / "exp_roc.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["fpr", "tpr"]
    assert rows[1] == ["0.0", "0.0"]
    assert rows[-1] == ["1.0", "1.0"]

    with open(tmp_path / "exp_oodm_hist.csv") as fh:
        hist = list(csv.reader(fh))
    assert hist[0] == ["lo", "hi", "count", "cohort"]
    cohorts = {r[3] for r in hist[1:]}
    assert cohorts == {"in-dist", "ood"}
    assert sum(int(r[2]) for r in hist[1:]) == 10


def test_ood_eval_empty_dir(tmp_path, feature_dir):
    bank_path = tmp_path / "bank.json"
    run("signature-build", feature_dir, bank_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("ood-eval", bank_path, "--in-dist", feature_dir, "--ood", empty) == 2


def test_uncertainty_command(tmp_path):
    rng = np.random.default_rng(3)
    ens = tmp_path / "case0"
    ens.mkdir()
    for i in range(10):
        save_tensor(Tensor(rng.random((8, 8, 8))), ens / f"sample_{i:03d}.npy")
    train_scores = tmp_path / "train.json"
    train_scores.write_text(json.dumps([0.1, 0.12, 0.09, 0.11]))
    out = tmp_path / "unc.json"
    assert run("uncertainty", "--ensemble", ens, "--train-scores", train_scores, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["verdicts"][0]["n_samples"] == 10
    assert isinstance(doc["verdicts"][0]["is_ood"], bool)


def test_calib_command(tmp_path):
    rng = np.random.default_rng(4)
    gt = (rng.random((12, 12, 12)) < 0.5).astype(np.uint8)
    from segguard.synth import gen_calibrated_predictor

    p = gen_calibrated_predictor(gt, 0.0, 0)
    pred_f, gt_f = tmp_path / "p.npy", tmp_path / "g.npy"
    save_tensor(Tensor(p), pred_f)
    save_tensor(Tensor(gt), gt_f)
    out = tmp_path / "calib.json"
    assert run("calib", "--pred", pred_f, "--gt", gt_f, "--bins", "10", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert len(doc["pooled"]["bins"]) == 10
    assert doc["pooled"]["mce"] >= doc["pooled"]["ece"]
    assert doc["per_image"][0]["ece"] == doc["pooled"]["ece"]


def test_segmetrics_command(tmp_path):
    a = np.zeros((8, 8, 8), dtype=np.uint8)
    b = np.zeros((8, 8, 8), dtype=np.uint8)
    a[2:5, 2:5, 2:5] = 1
    b[3:6, 2:5, 2:5] = 1
    pa, pb = tmp_path / "a.npy", tmp_path / "b.npy"
    save_tensor(Tensor(a, spacing=(0.8, 0.8, 0.8)), pa)
    save_tensor(Tensor(b), pb)
    out = tmp_path / "m.json"
    assert run("segmetrics", pb, pa, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["spacing_mm"] == [0.8, 0.8, 0.8]  # from gt sidecar
    assert 0.0 < doc["dsc"] < 1.0
    assert doc["hd95_mm"] > 0.0


def test_sample_plan_csv(tmp_path, capsys):
    assert run("sample-plan", "small=10", "big=100") == 0
    rows = [line.split(",") for line in capsys.readouterr().out.strip().splitlines()]
    assert rows[0] == ["dataset", "n", "prob"]
    assert rows[1][0] == "small"
    assert round(float(rows[1][2]), 2) == 0.24
    assert round(float(rows[2][2]), 2) == 0.76


def test_tile_plan_csv(tmp_path, capsys):
    assert run("tile-plan", "--shape", "200,96,96", "--block", "96,96,96", "--overlap", "24") == 0
    rows = [line.split(",") for line in capsys.readouterr().out.strip().splitlines()]
    assert rows[0] == ["x", "y", "z"]
    assert [r[0] for r in rows[1:]] == ["0", "72", "104"]


def test_config_file_merge(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"shape": "200,96,96", "overlap": 24}))
    # flag overrides the file; file fills what flags leave unset
    assert run("tile-plan", "--config", cfg, "--block", "96,96,96") == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["0", "72", "104"]


def test_missing_bank_is_io_error(tmp_path):
    assert run("ood-score", tmp_path / "nope.json", tmp_path / "also-nope.npy") == 1
