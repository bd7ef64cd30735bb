"""Command-line harness: synth | train | eval | ablate | report.

Every command takes a config file plus overriding flags and writes only
into its --out directory. Outputs are deterministic for a fixed config and
seed; the single timestamp lives in the training-log header line.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .corpus import Corpus, load_corpus, save_corpus, synth_corpus
from .errors import ParameterError, PipelineError
from .metrics import EvalReport, id_metrics, ood_metrics
from .model import SLOT_SYNTH
from .numerics import component_rng
from .scoring import apply_scorer, fit_scorer, normalize_scores
from .train import ABLATION_VARIANTS, train, variant_config

ABLATION_SLUGS = {
    "full": "Full",
    "add": "Fusion (Add)",
    "concat": "Fusion (Concat)",
    "no_contrast": "w / o Contrast",
    "no_cosine": "w / o Cosine",
    "no_binary": "w / o Binary",
}

ABLATION_METRICS = ("acc", "wf1", "auroc", "aupr_in", "aupr_out", "fpr95", "der")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


# -- synth ------------------------------------------------------------------


def run_synth(cfg: RunConfig, out_dir, seed: int) -> Path:
    corpus = synth_corpus(cfg.synth, component_rng(seed, SLOT_SYNTH))
    manifest = save_corpus(corpus, out_dir)
    load_corpus(manifest)  # verification pass
    return manifest


# -- train ------------------------------------------------------------------


def _test_mahalanobis_row(trained, corpus: Corpus) -> dict:
    test = corpus.split("test")
    if not test:
        return {}
    test_id = [r for r in test if not r.is_ood]
    feats = trained.model.features_for(test)
    logits = trained.model.logits_for(feats)
    id_idx = [i for i, r in enumerate(test) if not r.is_ood]
    preds = logits[id_idx].argmax(axis=1)
    idm = id_metrics(preds, [r.label for r in test_id], corpus.num_classes)
    row = {"acc": idm.acc, "wf1": idm.wf1}
    if any(r.is_ood for r in test):
        state = fit_scorer("mahalanobis", trained.train_features,
                           trained.train_logits, trained.class_stats,
                           corpus.num_classes)
        scores = apply_scorer(state, feats, logits)
        flags = np.array([not r.is_ood for r in test])
        row.update(ood_metrics(scores, flags).as_dict())
    return row


def _write_train_log(path: Path, trained, seed: int, variant: str | None) -> None:
    header = {
        "event": "start",
        "seed": seed,
        "variant": variant or "Full",
        "time": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for entry in trained.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        fh.write(json.dumps({"event": "end", "best": trained.best},
                            sort_keys=True) + "\n")


def run_training(corpus: Corpus, cfg: RunConfig, out_dir, seeds: list[int],
                 variant: str | None = None) -> list[dict]:
    """Train once per seed; returns one result row per seed.

    A single seed writes the checkpoint into ``out_dir`` directly; several
    seeds write ``out_dir/seed_<n>/`` each, plus results.csv and a
    mean/std summary.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in seeds:
        train_cfg = replace(cfg.train, seed=seed)
        if variant is not None:
            train_cfg = variant_config(train_cfg, variant)
        trained = train(corpus, train_cfg, cfg.oodgen)
        target = out_dir if len(seeds) == 1 else out_dir / f"seed_{seed}"
        target.mkdir(parents=True, exist_ok=True)
        save_checkpoint(trained, target)
        _write_train_log(target / "train_log.jsonl", trained, seed, variant)
        row = {"seed": seed, "best_epoch": trained.best.get("epoch"),
               "val_wf1": trained.best.get("wf1")}
        row.update(_test_mahalanobis_row(trained, corpus))
        rows.append(row)

    keys = sorted({k for row in rows for k in row} - {"seed"})
    _write_csv(out_dir / "results.csv", ["seed"] + keys,
               [[row["seed"]] + [row.get(k, "") for k in keys] for row in rows])
    summary_rows = []
    for key in keys:
        values = [row[key] for row in rows
                  if isinstance(row.get(key), (int, float))
                  and row.get(key) is not None]
        if not values:
            continue
        mean = sum(values) / len(values)
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
        summary_rows.append([key, float(mean), float(std)])
    _write_csv(out_dir / "results_summary.csv", ["metric", "mean", "std"],
               summary_rows)
    return rows


# -- eval -------------------------------------------------------------------


def run_eval(checkpoint_dir, corpus: Corpus, scorers: list[str],
             out_dir) -> EvalReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, stats, train_feats, train_logits, _ = load_checkpoint(checkpoint_dir)

    test = corpus.split("test")
    if not test:
        raise ParameterError("cli: corpus has no test records to evaluate")
    feats = model.features_for(test)
    logits = model.logits_for(feats)
    flags = np.array([not r.is_ood for r in test])
    id_idx = np.flatnonzero(flags)
    idm = id_metrics(
        logits[id_idx].argmax(axis=1),
        [test[i].label for i in id_idx],
        corpus.num_classes,
    )

    report = EvalReport(id_metrics=idm, ood_metrics={}, score_table={})
    for variant in scorers:
        state = fit_scorer(variant, train_feats, train_logits, stats,
                           corpus.num_classes)
        scores = apply_scorer(state, feats, logits)
        norm = normalize_scores(scores)
        report.ood_metrics[variant] = ood_metrics(scores, flags)
        rows = [
            {"id": rec.id, "is_id": bool(flags[i]),
             "raw": float(scores[i]), "norm": float(norm[i])}
            for i, rec in enumerate(test)
        ]
        report.score_table[variant] = rows
        with open(out_dir / f"scores_{variant}.jsonl", "w",
                  encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    _write_json(out_dir / "eval_report.json", report.as_dict())
    header = ["scorer", "auroc", "aupr_in", "aupr_out", "fpr95", "der"]
    _write_csv(out_dir / "metrics.csv", header, [
        [v, m.auroc, m.aupr_in, m.aupr_out, m.fpr95, m.der]
        for v, m in sorted(report.ood_metrics.items())
    ])
    return report


# -- ablate -----------------------------------------------------------------


def run_ablation(corpus: Corpus, cfg: RunConfig, variants: list[str],
                 seeds: list[int], out_dir) -> dict:
    """Train/evaluate every (variant, seed) pair and write the comparison.

    Emits ablation.csv (one row per run), aggregate.csv (per-variant mean
    and std), and ablation_summary.json including directional ordering
    checks on mean AUROC. The summary is written even when an expected
    ordering fails; failures are flagged, not hidden.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for variant in variants:
        if variant not in ABLATION_VARIANTS:
            raise ParameterError(f"cli: unknown ablation variant {variant!r}")

    rows = []
    for variant in variants:
        for seed in seeds:
            train_cfg = variant_config(replace(cfg.train, seed=seed), variant)
            trained = train(corpus, train_cfg, cfg.oodgen)
            row = {"variant": variant, "seed": seed}
            row.update(_test_mahalanobis_row(trained, corpus))
            rows.append(row)

    metric_keys = [k for k in ABLATION_METRICS if all(k in r for r in rows)]
    _write_csv(out_dir / "ablation.csv", ["variant", "seed"] + metric_keys, [
        [r["variant"], r["seed"]] + [r[k] for k in metric_keys] for r in rows
    ])

    aggregate: dict[str, dict[str, dict[str, float]]] = {}
    for variant in variants:
        values = [r for r in rows if r["variant"] == variant]
        aggregate[variant] = {}
        for key in metric_keys:
            per_seed = [r[key] for r in values]
            mean = sum(per_seed) / len(per_seed)
            std = math.sqrt(sum((v - mean) ** 2 for v in per_seed) / len(per_seed))
            aggregate[variant][key] = {"mean": mean, "std": std}
    _write_csv(out_dir / "aggregate.csv", ["variant", "metric", "mean", "std"], [
        [variant, key, aggregate[variant][key]["mean"],
         aggregate[variant][key]["std"]]
        for variant in variants for key in metric_keys
    ])

    checks = {}
    if "auroc" in metric_keys:
        def mean_auroc(name):
            return aggregate[name]["auroc"]["mean"] if name in aggregate else None

        full = mean_auroc("Full")
        for label, other in (("weighted_ge_add", "Fusion (Add)"),
                             ("weighted_ge_concat", "Fusion (Concat)"),
                             ("full_ge_no_binary", "w / o Binary")):
            rhs = mean_auroc(other)
            if full is not None and rhs is not None:
                checks[label] = bool(full >= rhs)
    summary = {
        "aggregate": aggregate,
        "ordering_checks": checks,
        "ordering_ok": all(checks.values()) if checks else None,
    }
    _write_json(out_dir / "ablation_summary.json", summary)
    return {"rows": rows, "aggregate": aggregate, "checks": checks}


# -- report -----------------------------------------------------------------


def run_report(eval_dir, out_dir=None) -> Path:
    """Re-shape an eval directory into plot-ready CSV tables."""
    eval_dir = Path(eval_dir)
    out_dir = Path(out_dir) if out_dir is not None else eval_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = eval_dir / "eval_report.json"
    if not report_path.exists():
        raise ParameterError(f"cli: {report_path} not found; run eval first")
    report = json.loads(report_path.read_text(encoding="utf-8"))

    per_class = report["id_metrics"]["per_class_acc"]
    _write_csv(out_dir / "per_class_acc.csv", ["class", "accuracy"],
               [[i, float(v)] for i, v in enumerate(per_class)])

    long_rows = []
    for scorer, rows in sorted(report["score_table"].items()):
        for row in rows:
            long_rows.append([scorer, row["id"], int(row["is_id"]),
                              float(row["raw"]), float(row["norm"])])
    _write_csv(out_dir / "scores_long.csv",
               ["scorer", "sample_id", "is_id", "raw", "normalized"], long_rows)

    id_rows = [[k, float(v)] for k, v in sorted(report["id_metrics"].items())
               if k not in ("per_class_acc", "confusion")]
    _write_csv(out_dir / "id_metrics.csv", ["metric", "value"], id_rows)
    return out_dir


# -- argument plumbing --------------------------------------------------------


def _parse_seeds(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ParameterError(f"cli: bad --seed list {raw!r}") from exc


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "scorer", None):
        cfg.eval = replace(cfg.eval, scorer=args.scorer)
    return cfg


def _resolve_out(args, cfg: RunConfig) -> str:
    out = args.out if args.out is not None else cfg.out_dir
    if out is None:
        raise ParameterError(
            "cli: no output directory; pass --out or set [run] out_dir"
        )
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmood",
        description="Multimodal intent classification and OOD detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--config", default=None)
    p_synth.add_argument("--out", default=None)
    p_synth.add_argument("--seed", default="0")

    p_train = sub.add_parser("train", help="train on a corpus")
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--corpus", required=True)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seed", default=None)
    p_train.add_argument("--ablation", default=None,
                         choices=sorted(ABLATION_SLUGS))

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--scorer", default=None)

    p_ablate = sub.add_parser("ablate", help="run the ablation grid")
    p_ablate.add_argument("--config", default=None)
    p_ablate.add_argument("--corpus", required=True)
    p_ablate.add_argument("--out", default=None)
    p_ablate.add_argument("--seed", default="0")
    p_ablate.add_argument("--ablation", default=",".join(sorted(ABLATION_SLUGS)),
                          help="comma-separated variant slugs")

    p_report = sub.add_parser("report", help="emit plot-ready CSV tables")
    p_report.add_argument("eval_dir")
    p_report.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            cfg = _load_run_config(args)
            seeds = _parse_seeds(args.seed)
            if len(seeds) != 1:
                raise ParameterError("cli: synth takes exactly one seed")
            manifest = run_synth(cfg, _resolve_out(args, cfg), seeds[0])
            print(f"wrote corpus manifest {manifest}")
        elif args.command == "train":
            cfg = _load_run_config(args)
            corpus = load_corpus(Path(args.corpus))
            seeds = _parse_seeds(args.seed) if args.seed is not None \
                else [cfg.train.seed]
            variant = ABLATION_SLUGS[args.ablation] if args.ablation else None
            out = _resolve_out(args, cfg)
            rows = run_training(corpus, cfg, out, seeds, variant)
            for row in rows:
                print(json.dumps(row, sort_keys=True))
            print(f"wrote {len(rows)} result row(s) to {out}")
        elif args.command == "eval":
            cfg = _load_run_config(args)
            corpus = load_corpus(Path(args.corpus))
            out = _resolve_out(args, cfg)
            report = run_eval(args.checkpoint, corpus, cfg.eval.selected(),
                              out)
            for scorer, m in sorted(report.ood_metrics.items()):
                print(f"{scorer}: auroc={m.auroc:.4f} fpr95={m.fpr95:.4f} "
                      f"der={m.der:.4f}")
            print(f"wrote evaluation report to {out}")
        elif args.command == "ablate":
            cfg = _load_run_config(args)
            corpus = load_corpus(Path(args.corpus))
            seeds = _parse_seeds(args.seed)
            slugs = [s.strip() for s in args.ablation.split(",") if s.strip()]
            unknown = [s for s in slugs if s not in ABLATION_SLUGS]
            if unknown:
                raise ParameterError(f"cli: unknown ablation slug {unknown[0]!r}")
            variants = [ABLATION_SLUGS[s] for s in slugs]
            out = _resolve_out(args, cfg)
            result = run_ablation(corpus, cfg, variants, seeds, out)
            print(f"wrote {len(result['rows'])} ablation rows to {out}")
            if result["checks"]:
                print(json.dumps(result["checks"], sort_keys=True))
        elif args.command == "report":
            out = run_report(args.eval_dir, args.out)
            print(f"wrote report tables to {out}")
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
