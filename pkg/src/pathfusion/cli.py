"""Command-line pipeline.

Subcommands: ``synth`` (planted-signal dataset), ``train`` (k-fold
training to checkpoints + logs), ``eval`` (survival metrics and KM
curves from risks or checkpoints), ``interpret`` (integrated-gradient
attribution reports), ``bench-attn`` (block vs dense attention cost).

Every command takes one ``--seed``, reads an optional config file whose
values flags override, and writes a run manifest next to its outputs.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent import futures
from dataclasses import asdict

import numpy as np

from .backend import active_backend
from .config import (apply_overrides, build_model_config, build_synth_config,
                     build_train_config, load_config, require_data_keys)
from .data import load_expression, load_labels, load_splits
from .errors import ConfigError, DataError, NumericError, PathFusionError
from .fusion import (DENSE_GUARD, FusionConfig, FusionLayer,
                     dense_entry_count, score_entry_count)
from .interpret import (aggregate_pathway_importance, attribute_case,
                        rank_by_magnitude, top_cross_pairs)
from .manifest import MANIFEST_NAME, RunManifest, write_manifest
from .metrics import (RiskedCohort, c_index, km_estimate, logrank_test,
                      median_split, subset)
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .pathways import DEFAULT_COVERAGE, filter_by_coverage, parse_gene_sets
from .patches import load_embeddings
from .rng import Rng, derive_seed
from .synth import generate
from .trainer import DataBundle, FoldSplit, train_fold
from . import autodiff as ad


# ---------------------------------------------------------------- loading

def _load_bundle(data_cfg: dict):
    """Build the in-memory dataset a run needs from the [data] settings."""
    coverage = data_cfg.get("coverage", DEFAULT_COVERAGE)
    table = load_expression(data_cfg["expression"])
    labels = load_labels(data_cfg["labels"])
    splits = load_splits(data_cfg["splits"])
    defs = filter_by_coverage(
        parse_gene_sets(data_cfg["gene_sets"]), table.gene_names, coverage
    )
    if not defs:
        raise DataError(
            f"no gene set passes coverage {coverage} against this table"
        )
    expression = {
        cid: table.values[:, j] for j, cid in enumerate(table.sample_ids)
    }
    patch_dir = data_cfg["patch_dir"]
    patch_sets = {}
    embed_dim = None
    for lab in labels:
        path = os.path.join(patch_dir, f"{lab.slide_id}.pfe")
        if not os.path.exists(path):
            raise DataError(
                f"case {lab.case_id!r}: no patch embedding file at {path}"
            )
        pset = load_embeddings(path, slide_id=lab.slide_id)
        if embed_dim is None:
            embed_dim = pset.embed_dim
        elif pset.embed_dim != embed_dim:
            raise DataError(
                f"{path}: embedding width {pset.embed_dim} differs from "
                f"{embed_dim} seen earlier"
            )
        patch_sets[lab.case_id] = pset
    bundle = DataBundle(
        gene_names=table.gene_names,
        defs=defs,
        embed_dim=embed_dim,
        expression=expression,
        labels={lab.case_id: lab for lab in labels},
        patch_sets=patch_sets,
    )
    return bundle, splits


def _data_inputs(data_cfg: dict) -> list:
    paths = [data_cfg[k] for k in ("expression", "labels", "splits", "gene_sets")]
    patch_dir = data_cfg["patch_dir"]
    for name in sorted(os.listdir(patch_dir)):
        if name.endswith(".pfe"):
            paths.append(os.path.join(patch_dir, name))
    return paths


def _fold_splits(splits: dict) -> list:
    return [
        FoldSplit(fid, splits[fid]["train"], splits[fid]["val"], {})
        for fid in sorted(splits)
    ]


def _clean_float(x) -> float | None:
    x = float(x)
    return x if np.isfinite(x) else None


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> None:
    cfg = load_config(args.config) if args.config else {}
    apply_overrides(cfg, "synth", seed=args.seed, n_cases=args.cases,
                    strength=args.strength)
    scfg = build_synth_config(cfg)
    manifest = RunManifest.begin(
        "synth", scfg.seed, {"synth": asdict(scfg)},
        input_paths=[args.config] if args.config else (),
    )
    result = generate(scfg, args.out)
    for path in (result.gmt_path, result.expression_path, result.labels_path,
                 result.splits_path, result.truth_path, result.true_risks_path):
        manifest.add_output(path)
    manifest.add_output(result.patch_dir)
    manifest.finish()
    write_manifest(os.path.join(args.out, MANIFEST_NAME), manifest)
    print(f"wrote {scfg.n_cases} cases, {scfg.n_pathways} pathways, "
          f"{scfg.patches_per_case} patches/case to {args.out}")
    print(f"planted pathway: {result.truth['planted_pathway']} "
          f"(strength {scfg.strength})")


# ---------------------------------------------------------------- train

def _train_one_fold(model_cfg: ModelConfig, train_cfg, fold: FoldSplit,
                    bundle: DataBundle, out_dir: str) -> dict:
    fold_dir = os.path.join(out_dir, f"fold{fold.fold_id}")
    os.makedirs(fold_dir, exist_ok=True)
    result = train_fold(model_cfg, train_cfg, fold, bundle)
    ckpt_path = os.path.join(fold_dir, "checkpoint.pfck")
    save_checkpoint(ckpt_path, result.model)
    log = {
        "fold": fold.fold_id,
        "best_epoch": result.best_epoch,
        "epochs": [
            {"epoch": e["epoch"],
             "train_loss": e["train_loss"],
             "val_cindex": _clean_float(e["val_cindex"])}
            for e in result.log
        ],
        "val_risks": {cid: float(r) for cid, r in sorted(result.val_risks.items())},
    }
    log_path = os.path.join(fold_dir, "log.json")
    with open(log_path, "w", encoding="utf-8") as fh:
        json.dump(log, fh, indent=2, sort_keys=True)
        fh.write("\n")
    best = None
    finite = [e["val_cindex"] for e in log["epochs"]
              if e["val_cindex"] is not None]
    if finite:
        best = max(finite)
    return {
        "fold": fold.fold_id,
        "best_epoch": result.best_epoch,
        "best_val_cindex": best,
        "checkpoint": ckpt_path,
        "log": log_path,
    }


def _train_fold_worker(packed) -> dict:
    # runs in a separate process: rebuild the bundle from files
    data_cfg, model_kwargs, train_kwargs, fold_id, out_dir = packed
    bundle, splits = _load_bundle(data_cfg)
    from .trainer import TrainConfig

    fold = FoldSplit(fold_id, splits[fold_id]["train"],
                     splits[fold_id]["val"], {})
    return _train_one_fold(ModelConfig(**model_kwargs),
                           TrainConfig(**train_kwargs), fold, bundle, out_dir)


def cmd_train(args) -> None:
    cfg = load_config(args.config) if args.config else {}
    apply_overrides(cfg, "data", expression=args.expression,
                    labels=args.labels, splits=args.splits,
                    gene_sets=args.gene_sets, patch_dir=args.patch_dir)
    apply_overrides(cfg, "train", epochs=args.epochs, seed=args.seed)
    data_cfg = require_data_keys(
        cfg, ("expression", "labels", "splits", "gene_sets", "patch_dir")
    )
    bundle, splits = _load_bundle(data_cfg)

    model_section = dict(cfg.get("model", {}))
    if "embed_dim" in model_section and model_section["embed_dim"] != bundle.embed_dim:
        raise ConfigError(
            f"[model] embed_dim={model_section['embed_dim']} but the patch "
            f"files carry width {bundle.embed_dim}"
        )
    model_section["embed_dim"] = bundle.embed_dim
    cfg["model"] = model_section
    model_cfg = build_model_config(cfg)
    train_cfg = build_train_config(cfg)

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest.begin(
        "train", train_cfg.seed,
        {"model": asdict(model_cfg), "train": asdict(train_cfg),
         "data": dict(data_cfg)},
        input_paths=_data_inputs(data_cfg),
    )
    folds = _fold_splits(splits)
    if args.fold is not None:
        folds = [f for f in folds if f.fold_id == args.fold]
        if not folds:
            raise ConfigError(f"fold {args.fold} not present in the splits file")

    t0 = time.time()
    if args.jobs > 1 and len(folds) > 1:
        packed = [
            (dict(data_cfg), asdict(model_cfg), asdict(train_cfg),
             f.fold_id, args.out)
            for f in folds
        ]
        with futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_train_fold_worker, packed))
    else:
        summaries = [
            _train_one_fold(model_cfg, train_cfg, f, bundle, args.out)
            for f in folds
        ]

    for s in summaries:
        shown = "nan" if s["best_val_cindex"] is None else f"{s['best_val_cindex']:.4f}"
        print(f"fold {s['fold']}: best epoch {s['best_epoch']} "
              f"val c-index {shown}")
        manifest.add_output(s["checkpoint"])
        manifest.add_output(s["log"])

    # wall time goes to stdout, not the artifact: identical runs must
    # produce byte-identical outputs, manifest timestamps aside
    print(f"trained {len(folds)} fold(s) in {time.time() - t0:.1f}s")
    summary = {"folds": summaries}
    summary_path = os.path.join(args.out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add_output(summary_path)
    manifest.finish()
    write_manifest(os.path.join(args.out, MANIFEST_NAME), manifest)


# ---------------------------------------------------------------- eval

def _load_risks_csv(path) -> dict:
    risks = {}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read risks file {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["case_id", "risk"]:
            raise DataError(f"{path}: header must be case_id,risk")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 fields")
            cid, raw = row
            if cid in risks:
                raise DataError(f"{path}: line {lineno}: duplicate case {cid!r}")
            try:
                risks[cid] = float(raw)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: risk must be a number, got {raw!r}"
                ) from None
    if not risks:
        raise DataError(f"{path}: no risk rows")
    return risks


def _pooled_val_risks(run_dir: str, data_cfg: dict) -> dict:
    """Each fold's checkpoint scores its own validation cases."""
    bundle, splits = _load_bundle(data_cfg)
    risks = {}
    for fold in _fold_splits(splits):
        ckpt = os.path.join(run_dir, f"fold{fold.fold_id}", "checkpoint.pfck")
        if not os.path.exists(ckpt):
            raise DataError(f"missing checkpoint for fold {fold.fold_id}: {ckpt}")
        model = load_checkpoint(ckpt)
        bundle.check_cases(fold.val_ids)
        for cid in fold.val_ids:
            out = model.predict(bundle.expression[cid], bundle.patch_sets[cid])
            risks[cid] = float(out.risk)
    return risks


def _km_rows(high: RiskedCohort, low: RiskedCohort) -> list:
    km_high = km_estimate(high.times, high.censorships)
    km_low = km_estimate(low.times, low.censorships)
    grid = np.unique(np.concatenate([km_high.times, km_low.times]))
    rows = []
    for t in grid:
        rows.append({
            "time": float(t),
            "s_high": km_high.value_at(float(t)),
            "s_low": km_low.value_at(float(t)),
            "at_risk_high": int(np.sum(high.times >= t)),
            "at_risk_low": int(np.sum(low.times >= t)),
        })
    return rows


def cmd_eval(args) -> None:
    cfg = load_config(args.config) if args.config else {}
    apply_overrides(cfg, "data", expression=args.expression,
                    labels=args.labels, splits=args.splits,
                    gene_sets=args.gene_sets, patch_dir=args.patch_dir)
    data_cfg = cfg.get("data", {})
    if "labels" not in data_cfg:
        raise ConfigError("eval needs a labels file (--labels)")
    labels = load_labels(data_cfg["labels"])
    labmap = {lab.case_id: lab for lab in labels}

    inputs = [data_cfg["labels"]]
    if args.risks:
        risks = _load_risks_csv(args.risks)
        inputs.append(args.risks)
        unknown = sorted(set(risks) - set(labmap))
        if unknown:
            raise DataError(
                "risk rows for unlabeled cases: " + ", ".join(unknown[:5])
            )
        missing = sorted(set(labmap) - set(risks))
        if missing:
            raise DataError(
                f"{len(missing)} labeled case(s) have no risk, first: "
                + ", ".join(missing[:5])
            )
        seed = 0
    elif args.run_dir:
        data_cfg = require_data_keys(
            cfg, ("expression", "labels", "splits", "gene_sets", "patch_dir")
        )
        risks = _pooled_val_risks(args.run_dir, data_cfg)
        inputs = _data_inputs(data_cfg)
        missing = sorted(set(labmap) - set(risks))
        if missing:
            # folds may not cover every case; score only what validated
            labmap = {cid: labmap[cid] for cid in risks}
        seed = 0
    else:
        raise ConfigError("eval needs either --risks or --run-dir")

    ids = sorted(labmap)
    cohort = RiskedCohort(
        np.array([risks[c] for c in ids]),
        np.array([labmap[c].time_months for c in ids]),
        np.array([labmap[c].censorship for c in ids]),
        ids,
    )
    ci = c_index(cohort)
    hi_idx, lo_idx = median_split(cohort)
    high, low = subset(cohort, hi_idx), subset(cohort, lo_idx)
    stat, p = logrank_test(high, low)

    os.makedirs(args.out, exist_ok=True)
    metrics = {
        "c_index": ci,
        "n": cohort.size,
        "events": int(np.sum(cohort.censorships == 0)),
        "logrank_stat": stat,
        "logrank_p": p,
        "n_high": int(high.size),
        "n_low": int(low.size),
    }
    metrics_path = os.path.join(args.out, "metrics.json")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")

    km_path = os.path.join(args.out, "km.csv")
    with open(km_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["time", "s_high", "s_low",
                            "at_risk_high", "at_risk_low"]
        )
        writer.writeheader()
        for row in _km_rows(high, low):
            writer.writerow(row)

    manifest = RunManifest.begin("eval", seed, {"data": dict(data_cfg)},
                                 input_paths=inputs)
    manifest.add_output(metrics_path)
    manifest.add_output(km_path)
    manifest.finish()
    write_manifest(os.path.join(args.out, MANIFEST_NAME), manifest)
    print(f"c-index {ci:.4f} over {cohort.size} cases "
          f"({metrics['events']} events)")
    print(f"median-split logrank: stat {stat:.4f} p {p:.3e}")


# ---------------------------------------------------------------- interpret

def _case_report(model, bundle: DataBundle, cid: str, steps: int,
                 top_k: int) -> dict:
    report = attribute_case(model, bundle.expression[cid],
                            bundle.patch_sets[cid], steps=steps)
    attr = report.case_attr
    fwd = model.forward(bundle.expression[cid], bundle.patch_sets[cid])
    pairs = top_cross_pairs(fwd.fusion, k=top_k)
    coords = bundle.patch_sets[cid].coords
    patches = []
    for i, score in enumerate(attr.patch_scores):
        entry = {"index": i, "score": float(score)}
        if coords is not None:
            entry["x"] = int(coords[i, 0])
            entry["y"] = int(coords[i, 1])
        patches.append(entry)
    pathway_names = [d.name for d in model.defs]
    return {
        "case_id": cid,
        "risk": attr.risk,
        "baseline_risk": attr.baseline_risk,
        "completeness": {
            "attribution_total": attr.total,
            "risk_delta": attr.risk - attr.baseline_risk,
            "gap": attr.completeness_gap,
        },
        "modality": {"omics": report.omics_fraction,
                     "wsi": report.wsi_fraction},
        "genes": [
            [name, float(score)] for name, score in
            rank_by_magnitude(model.gene_names, attr.gene_scores)
        ],
        "pathways": [
            [name, float(score)] for name, score in
            rank_by_magnitude(pathway_names, attr.pathway_scores)
        ],
        "patches": patches,
        "cross_pairs": [
            {"pathway": pathway_names[i], "patch_index": j, "weight": w}
            for i, j, w in pairs
        ],
    }


def cmd_interpret(args) -> None:
    cfg = load_config(args.config) if args.config else {}
    apply_overrides(cfg, "data", expression=args.expression,
                    labels=args.labels, splits=args.splits,
                    gene_sets=args.gene_sets, patch_dir=args.patch_dir)
    data_cfg = require_data_keys(
        cfg, ("expression", "labels", "splits", "gene_sets", "patch_dir")
    )
    bundle, splits = _load_bundle(data_cfg)
    folds = _fold_splits(splits)
    if args.fold is not None:
        folds = [f for f in folds if f.fold_id == args.fold]
        if not folds:
            raise ConfigError(f"fold {args.fold} not present in the splits file")

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest.begin(
        "interpret", args.seed or 0,
        {"data": dict(data_cfg), "steps": args.steps, "top_k": args.top_k},
        input_paths=_data_inputs(data_cfg),
    )
    summary = []
    for fold in folds:
        ckpt = os.path.join(args.run_dir, f"fold{fold.fold_id}",
                            "checkpoint.pfck")
        if not os.path.exists(ckpt):
            raise DataError(f"missing checkpoint for fold {fold.fold_id}: {ckpt}")
        model = load_checkpoint(ckpt)
        cases = [args.case] if args.case else list(fold.val_ids)
        bundle.check_cases(cases)
        reports = [
            _case_report(model, bundle, cid, args.steps, args.top_k)
            for cid in cases
        ]
        # aggregate in definition order, not rank order
        stacked = [
            np.array([dict(r["pathways"])[d.name] for d in model.defs])
            for r in reports
        ]
        agg = aggregate_pathway_importance(stacked)
        ranking = rank_by_magnitude([d.name for d in model.defs], agg)
        fold_out = {
            "fold": fold.fold_id,
            "steps": args.steps,
            "cases": reports,
            "aggregate_pathways": [[n, float(s)] for n, s in ranking],
        }
        path = os.path.join(args.out, f"fold{fold.fold_id}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(fold_out, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest.add_output(path)
        top_name, top_score = ranking[0]
        summary.append({"fold": fold.fold_id, "top_pathway": top_name,
                        "top_score": float(top_score)})
        print(f"fold {fold.fold_id}: top pathway {top_name} "
              f"(mean |IG| {top_score:.4g}) over {len(cases)} case(s)")

    summary_path = os.path.join(args.out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump({"folds": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add_output(summary_path)
    manifest.finish()
    write_manifest(os.path.join(args.out, MANIFEST_NAME), manifest)


# ---------------------------------------------------------------- bench

def _time_call(fn, repeats: int) -> list:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return times


def cmd_bench_attn(args) -> None:
    if args.n_p < 1 or args.n_h < 1:
        raise ConfigError("bench-attn needs n-p >= 1 and n-h >= 1")
    rng = Rng(derive_seed(args.seed, "bench"))
    layer = FusionLayer(args.d, rng.child("layer"))
    full = FusionConfig(d=args.d)
    tok_p = rng.normal_matrix(args.n_p, args.d)
    tok_h = rng.normal_matrix(args.n_h, args.d)

    def run_masked():
        tape = ad.Tape()
        layer.fuse(full, tape.constant(tok_p), tape.constant(tok_h))

    def run_dense():
        tape = ad.Tape()
        layer.dense_reference(tape.constant(tok_p), tape.constant(tok_h))

    masked_entries = score_entry_count(args.n_p, args.n_h, full)
    dense_entries = dense_entry_count(args.n_p, args.n_h)
    rows = []
    masked_times = _time_call(run_masked, args.repeats)
    rows.append({
        "variant": "masked", "n_p": args.n_p, "n_h": args.n_h, "d": args.d,
        "backend": active_backend(), "entries": masked_entries, "status": "ok",
        "seconds_mean": f"{np.mean(masked_times):.6f}",
        "seconds_best": f"{min(masked_times):.6f}",
    })
    if args.n_p + args.n_h <= DENSE_GUARD:
        dense_times = _time_call(run_dense, args.repeats)
        rows.append({
            "variant": "dense", "n_p": args.n_p, "n_h": args.n_h, "d": args.d,
            "backend": active_backend(), "entries": dense_entries,
            "status": "ok",
            "seconds_mean": f"{np.mean(dense_times):.6f}",
            "seconds_best": f"{min(dense_times):.6f}",
        })
    else:
        rows.append({
            "variant": "dense", "n_p": args.n_p, "n_h": args.n_h, "d": args.d,
            "backend": active_backend(), "entries": dense_entries,
            "status": f"refused(guard={DENSE_GUARD})",
            "seconds_mean": "", "seconds_best": "",
        })

    fields = ["variant", "n_p", "n_h", "d", "backend", "entries", "status",
              "seconds_mean", "seconds_best"]
    if args.out:
        out_fh = open(args.out, "w", encoding="utf-8", newline="")
    else:
        out_fh = sys.stdout
    try:
        writer = csv.DictWriter(out_fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    finally:
        if args.out:
            out_fh.close()
    print(f"masked entries {masked_entries} vs dense {dense_entries} "
          f"(ratio {dense_entries / masked_entries:.1f}x)", file=sys.stderr)


# ---------------------------------------------------------------- parser

def _add_data_flags(sub) -> None:
    sub.add_argument("--expression", help="expression TSV (genes x cases)")
    sub.add_argument("--labels", help="labels CSV")
    sub.add_argument("--splits", help="cross-validation splits CSV")
    sub.add_argument("--gene-sets", dest="gene_sets", help="GMT gene sets")
    sub.add_argument("--patch-dir", dest="patch_dir",
                     help="directory of per-slide .pfe files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathfusion",
        description="Multimodal survival pipeline over pathway tokens "
                    "and histology patch embeddings.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("synth", help="generate a planted-signal dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cases", type=int, dest="cases")
    sp.add_argument("--strength", type=float)
    sp.set_defaults(func=cmd_synth)

    tp = subs.add_parser("train", help="k-fold training run")
    tp.add_argument("--out", required=True)
    tp.add_argument("--config")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--epochs", type=int)
    tp.add_argument("--fold", type=int, help="train only this fold")
    tp.add_argument("--jobs", type=int, default=1,
                    help="fold-level worker processes")
    _add_data_flags(tp)
    tp.set_defaults(func=cmd_train)

    ep = subs.add_parser("eval", help="survival metrics and KM curves")
    ep.add_argument("--out", required=True)
    ep.add_argument("--config")
    ep.add_argument("--risks", help="case_id,risk CSV to score directly")
    ep.add_argument("--run-dir", dest="run_dir",
                    help="training run directory with fold checkpoints")
    _add_data_flags(ep)
    ep.set_defaults(func=cmd_eval)

    ip = subs.add_parser("interpret", help="integrated-gradient attributions")
    ip.add_argument("--out", required=True)
    ip.add_argument("--config")
    ip.add_argument("--run-dir", dest="run_dir", required=True)
    ip.add_argument("--steps", type=int, default=128)
    ip.add_argument("--top-k", type=int, default=20, dest="top_k")
    ip.add_argument("--fold", type=int)
    ip.add_argument("--case", help="restrict to one case id")
    ip.add_argument("--seed", type=int)
    _add_data_flags(ip)
    ip.set_defaults(func=cmd_interpret)

    bp = subs.add_parser("bench-attn",
                         help="block vs dense attention cost report")
    bp.add_argument("--n-p", type=int, required=True, dest="n_p")
    bp.add_argument("--n-h", type=int, required=True, dest="n_h")
    bp.add_argument("--d", type=int, default=64)
    bp.add_argument("--repeats", type=int, default=3)
    bp.add_argument("--seed", type=int, default=0)
    bp.add_argument("--out", help="CSV path (default: stdout)")
    bp.set_defaults(func=cmd_bench_attn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except PathFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
