"""Command-line surface: thin wrappers over the library modules.

Every command embeds its fully resolved configuration and the tool
version in its report so runs are reproducible. Exit codes: 0 success,
1 I/O failure, 2 validation failure, 3 numerical failure.

A JSON config file (--config) supplies defaults for any flag; values
given explicitly on the command line win. SEGGUARD_THREADS caps the
worker pool used for batch signature computation.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from segguard import __version__
from segguard import calibration, detect, sampling_tiling, segmetrics, spectral, synth, uncertainty
from segguard.errors import IoFailure, NumericalFailure, ValidationError
from segguard.tensor_core import Tensor, load_tensor, save_tensor


def _max_workers() -> int:
    env = os.environ.get("SEGGUARD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"SEGGUARD_THREADS={env!r} is not an integer")
    return min(8, os.cpu_count() or 1)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return cfg


def _resolve(args, defaults):
    """Merge defaults < config file < explicit flags (argparse leaves
    unset flags at None so the file can fill them)."""
    cfg = _load_config(getattr(args, "config", None))
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = cfg.get(key, default)
        resolved[key] = value
    return resolved


def _triple(text):
    parts = [int(x) for x in str(text).replace("x", ",").split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValidationError(f"expected an integer triple, got {text!r}")
    return tuple(parts)


def _seed_range(text):
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(x) for x in text.split(",")]


def _feature_files(directory):
    d = Path(directory)
    if not d.is_dir():
        raise ValidationError(f"{directory} is not a directory")
    return sorted(p for p in d.glob("*.npy") if not p.name.endswith(".meta.json"))


def _signatures_for(paths, cfg):
    """One signature per file, computed in parallel, input order kept."""
    def one(path):
        fmap = load_tensor(path).data
        return spectral.signature_from_feature_map(fmap, cfg, source_id=Path(path).stem)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        return list(pool.map(one, paths))


def _emit(doc, out):
    text = json.dumps(doc, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _report(payload: dict, config: dict) -> dict:
    return {**payload, "config": config, "version": __version__}


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    cfg = _resolve(
        args,
        {
            "family": None,
            "shape": "48,48,48",
            "seeds": "0:10",
            "out": None,
            "features": False,
            "extractor_seed": 0,
        },
    )
    if cfg["family"] not in synth.FAMILIES:
        raise ValidationError(f"--family must be one of {synth.FAMILIES}")
    if cfg["out"] is None:
        raise ValidationError("--out is required")
    shape = _triple(cfg["shape"])
    out = Path(cfg["out"]) / cfg["family"]
    out.mkdir(parents=True, exist_ok=True)
    spec = synth.ExtractorSpec(seed=int(cfg["extractor_seed"]))
    for seed in _seed_range(cfg["seeds"]):
        vol = synth.gen_volume(cfg["family"], shape, seed)
        if cfg["features"]:
            tensor = Tensor(synth.extract_features(vol, spec))
        else:
            tensor = vol
        save_tensor(tensor, out / f"{seed}.npy")
    return 0


def cmd_signature_build(args):
    cfg = _resolve(args, {"c": 2.5, "eps": 1e-12, "layer_id": ""})
    files = _feature_files(args.feature_dir)
    if len(files) < 2:
        raise ValidationError(f"need at least 2 feature files in {args.feature_dir}, found {len(files)}")
    bank_cfg = spectral.BankConfig(c_multiplier=float(cfg["c"]), epsilon_floor=float(cfg["eps"]))
    maps = [load_tensor(p).data for p in files]
    bank = spectral.bank_build(maps, [p.stem for p in files], bank_cfg, layer_id=cfg["layer_id"])
    spectral.save_bank(bank, args.out_bank)
    print(f"bank written to {args.out_bank}: {len(files)} signatures, tau={bank.tau!r}", file=sys.stderr)
    return 0


def _score_files(bank, paths):
    sigs = _signatures_for(paths, bank.config)
    records = []
    for sig in sigs:
        verdict = spectral.classify(sig, bank)
        records.append(
            {
                "id": sig.source_id,
                "oodm": verdict.oodm,
                "tau": verdict.tau,
                "is_ood": verdict.is_ood,
                "nearest": verdict.nearest_neighbor_id,
            }
        )
    return records


def cmd_ood_score(args):
    cfg = _resolve(args, {"out": None})
    bank = spectral.load_bank(args.bank)
    records = _score_files(bank, args.features)
    _emit(_report({"verdicts": records}, {"bank": str(args.bank), "files": [str(f) for f in args.features]}), cfg["out"])
    return 0


def _fd_bin_edges(values):
    """Freedman-Diaconis bin edges, degrading to a single bin for flat data."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    iqr = np.subtract(*np.percentile(values, [75, 25]))
    width = 2.0 * iqr / len(values) ** (1.0 / 3.0)
    if width <= 0 or hi <= lo:
        return np.array([lo, hi if hi > lo else lo + 1.0])
    nbins = max(1, int(np.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, nbins + 1)


def cmd_ood_eval(args):
    cfg = _resolve(args, {"in_dist": None, "ood": None, "out_prefix": "ood_eval_"})
    if not cfg["in_dist"] or not cfg["ood"]:
        raise ValidationError("--in-dist and --ood directories are required")
    bank = spectral.load_bank(args.bank)
    in_files = _feature_files(cfg["in_dist"])
    ood_files = _feature_files(cfg["ood"])
    if not in_files or not ood_files:
        raise ValidationError("both cohorts must contain at least one feature file")

    in_records = _score_files(bank, in_files)
    ood_records = _score_files(bank, ood_files)
    scores = detect.LabeledScores(
        np.array([r["oodm"] for r in in_records + ood_records]),
        np.array([False] * len(in_records) + [True] * len(ood_records)),
    )
    report = detect.evaluate(scores, bank.tau)
    fpr, tpr = detect.roc_curve(scores)

    prefix = cfg["out_prefix"]
    with open(f"{prefix}roc.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        writer.writerows(zip(fpr.tolist(), tpr.tolist()))

    edges = _fd_bin_edges(scores.scores)
    with open(f"{prefix}oodm_hist.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lo", "hi", "count", "cohort"])
        for cohort, records in (("in-dist", in_records), ("ood", ood_records)):
            counts, _ = np.histogram([r["oodm"] for r in records], bins=edges)
            for b in range(len(counts)):
                writer.writerow([edges[b], edges[b + 1], int(counts[b]), cohort])

    doc = _report(
        {
            "row": report.to_row("spectral-oodm"),
            "counts": {"tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn},
            "tau": bank.tau,
            "verdicts": {"in_dist": in_records, "ood": ood_records},
        },
        {"bank": str(args.bank), "in_dist": str(cfg["in_dist"]), "ood": str(cfg["ood"]), "positive_class": "ood"},
    )
    _emit(doc, f"{prefix}report.json")
    print(json.dumps(report.to_row("spectral-oodm")))
    return 0


def cmd_uncertainty(args):
    cfg = _resolve(args, {"train_scores": None, "c": 2.5, "out": None})
    if cfg["train_scores"] is None:
        raise ValidationError("--train-scores is required")
    try:
        train = json.loads(Path(cfg["train_scores"]).read_text())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"train scores must be a JSON array: {exc}") from exc
    threshold = uncertainty.uncertainty_threshold(train, float(cfg["c"]))

    records = []
    for ens_dir in args.ensemble:
        files = _feature_files(ens_dir)
        if not files:
            raise ValidationError(f"ensemble directory {ens_dir} holds no samples")
        maps = [load_tensor(p).data for p in files]
        mean = uncertainty.mean_prob_map(maps)
        score = uncertainty.image_uncertainty(mean)
        verdict = uncertainty.classify_uncertainty(score.value, threshold)
        records.append(
            {
                "id": Path(ens_dir).name,
                "n_samples": len(files),
                "score": verdict.value,
                "threshold": verdict.threshold,
                "is_ood": verdict.is_ood,
                "empty_foreground": score.empty_foreground,
            }
        )
    _emit(
        _report({"threshold": threshold, "verdicts": records}, {"c": float(cfg["c"]), "train_scores": str(cfg["train_scores"])}),
        cfg["out"],
    )
    return 0


def cmd_calib(args):
    cfg = _resolve(args, {"bins": 10, "mask": None, "out": None})
    bins_n = int(cfg["bins"])
    if len(args.pred) != len(args.gt):
        raise ValidationError("need one --gt per --pred")
    mask = load_tensor(cfg["mask"]).data if cfg["mask"] else None
    if mask is not None and len(args.pred) != 1:
        raise ValidationError("--mask is only supported with a single prediction/gt pair")

    per_image = []
    pooled = calibration.ReliabilityBins(bins_n)
    for pred_path, gt_path in zip(args.pred, args.gt):
        p = load_tensor(pred_path).data
        gt = load_tensor(gt_path).data
        bins = calibration.bin_predictions(p, gt, bins_n, mask=mask)
        per_image.append({"pred": str(pred_path), "ece": calibration.ece(bins), "mce": calibration.mce(bins)})
        pooled = pooled.merge(bins)

    doc = _report(
        {
            "pooled": calibration.calibration_report(pooled),
            "per_image": per_image,
            "per_image_mean": {
                "ece": float(np.mean([r["ece"] for r in per_image])),
                "mce": float(np.mean([r["mce"] for r in per_image])),
            },
            "population": "masked voxels" if mask is not None else "all voxels",
        },
        {"bins": bins_n, "mask": str(cfg["mask"]) if cfg["mask"] else None},
    )
    _emit(doc, cfg["out"])
    return 0


def cmd_segmetrics(args):
    cfg = _resolve(args, {"spacing": None, "pooled_hd95": False, "out": None})
    pred = load_tensor(args.pred)
    gt = load_tensor(args.gt)
    if cfg["spacing"] is not None:
        spacing = tuple(float(x) for x in str(cfg["spacing"]).split(","))
    else:
        spacing = gt.spacing or pred.spacing or (1.0, 1.0, 1.0)
    report = segmetrics.segmetrics_report(pred.data, gt.data, spacing)
    if cfg["pooled_hd95"] and not report["undefined_distances"]:
        report["hd95_mm"] = segmetrics.hd95(pred.data, gt.data, spacing, pooled=True)
        report["conventions"]["hd95"] = "pooled"
    _emit(_report(report, {"spacing_mm": list(spacing), "pred": str(args.pred), "gt": str(args.gt)}), cfg["out"])
    return 0


def cmd_sample_plan(args):
    cfg = _resolve(args, {"out": None})
    entries = []
    for item in args.dataset:
        if "=" not in item:
            raise ValidationError(f"expected name=count, got {item!r}")
        name, _, count = item.partition("=")
        entries.append((name, int(count)))
    plan = sampling_tiling.sampling_plan(sampling_tiling.DatasetCatalog(tuple(entries)))
    rows = [["dataset", "n", "prob"]] + [
        [name, n, prob] for name, n, prob in zip(plan.names, plan.sizes, plan.probabilities.tolist())
    ]
    _write_csv(rows, cfg["out"])
    return 0


def cmd_tile_plan(args):
    cfg = _resolve(args, {"shape": None, "block": "96,96,96", "overlap": 24, "out": None})
    if cfg["shape"] is None:
        raise ValidationError("--shape is required")
    plan = sampling_tiling.tiling_origins(_triple(cfg["shape"]), _triple(cfg["block"]), int(cfg["overlap"]))
    rows = [["x", "y", "z"]] + [list(origin) for origin in plan.origins]
    _write_csv(rows, cfg["out"])
    return 0


def _write_csv(rows, out):
    if out:
        with open(out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="segguard", description=__doc__)
    parser.add_argument("--version", action="version", version=f"segguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON file of flag defaults")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, help="generate synthetic volumes or feature maps")
    p.add_argument("--family", choices=synth.FAMILIES)
    p.add_argument("--shape")
    p.add_argument("--seeds", help="range lo:hi or comma list")
    p.add_argument("--out")
    p.add_argument("--features", action="store_true", default=None, help="write extracted feature maps instead of volumes")
    p.add_argument("--extractor-seed", type=int, dest="extractor_seed")

    p = add("signature-build", cmd_signature_build, help="build a signature bank from feature files")
    p.add_argument("feature_dir")
    p.add_argument("out_bank")
    p.add_argument("--c", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--layer-id", dest="layer_id")

    p = add("ood-score", cmd_ood_score, help="score feature files against a bank")
    p.add_argument("bank")
    p.add_argument("features", nargs="+")
    p.add_argument("--out")

    p = add("ood-eval", cmd_ood_eval, help="full OOD detection experiment with report, ROC and histogram")
    p.add_argument("bank")
    p.add_argument("--in-dist", dest="in_dist")
    p.add_argument("--ood")
    p.add_argument("--out-prefix", dest="out_prefix")

    p = add("uncertainty", cmd_uncertainty, help="entropy-baseline scores for probability-map ensembles")
    p.add_argument("--ensemble", action="append", required=True, help="directory of sampled prob maps (repeatable)")
    p.add_argument("--train-scores", dest="train_scores", help="JSON array of training scores")
    p.add_argument("--c", type=float)
    p.add_argument("--out")

    p = add("calib", cmd_calib, help="ECE/MCE calibration report")
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--bins", type=int)
    p.add_argument("--mask")
    p.add_argument("--out")

    p = add("segmetrics", cmd_segmetrics, help="DSC / HD95 / ASSD between two masks")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--spacing", help="override spacing, mm triple x,y,z")
    p.add_argument("--pooled-hd95", action="store_true", default=None, dest="pooled_hd95")
    p.add_argument("--out")

    p = add("sample-plan", cmd_sample_plan, help="multi-dataset sampling probability table")
    p.add_argument("dataset", nargs="+", help="name=count entries")
    p.add_argument("--out")

    p = add("tile-plan", cmd_tile_plan, help="sliding-window block origins")
    p.add_argument("--shape")
    p.add_argument("--block")
    p.add_argument("--overlap", type=int)
    p.add_argument("--out")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IoFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
