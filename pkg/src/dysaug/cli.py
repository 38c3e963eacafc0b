"""Command-line entry point. Exit codes: 0 ok, 2 validation error, 3 stage failure."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import classify as clf
from . import pipeline as pl
from .errors import StageError, ValidationError
from .manifest import ingest, scan, write_manifest
from .reports import emit_report, load_report, ratio_report

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3

MODE_ALIASES = {"speaker": "speaker_only", "speaker-prosody": "speaker_prosody",
                "speaker_only": "speaker_only", "speaker_prosody": "speaker_prosody"}


def _kv(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ValidationError(f"expected key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_scan(args):
    man = scan(args.root, args.pattern, _kv(args.set), args.text_ext)
    if not man:
        raise ValidationError(f"no files under {args.root} match {args.pattern!r}")
    write_manifest(man, args.out)
    print(f"{len(man)} utterances -> {args.out}")


def cmd_augment(args):
    man = ingest(args.manifest)
    plan, _ = pl.augment_manifest(man, args.method, args.seed, args.out, args.workers)
    print(f"{len(plan)} {args.method}-perturbed utterances -> {args.out}")


def cmd_transfer(args):
    man = ingest(args.manifest)
    mode = MODE_ALIASES[args.mode]
    targets = pl.load_targets(args.targets)
    jobs, _ = pl.transfer_manifest(man, targets, [mode], args.seed, args.out, args.workers)
    print(f"{len(jobs)} {mode} conversions -> {os.path.join(args.out, mode)}")


def cmd_analyze(args):
    rows = pl.analyze_manifest(ingest(args.manifest), args.method, args.workers)
    clf.write_features(rows, args.out)
    print(f"{len(rows)} feature rows -> {args.out}")


def _report_paths(out):
    stem = os.path.splitext(out)[0] if out.endswith((".json", ".csv")) else out
    return stem + ".json", stem + ".csv"


def cmd_eval_cer(args):
    report = pl.evaluate_manifest(ingest(args.manifest), args.hyps, "utterance" if args.mean_per_utt else "corpus")
    label = args.row_label or ingest(args.manifest)[0].language
    json_path, csv_path = _report_paths(args.out)
    emit_report(report, json_path, row_label=label)
    emit_report(report, csv_path, row_label=label)
    print(f"CER (all/all): {100 * report.cer('all', 'all'):.2f}% -> {json_path}, {csv_path}")


def cmd_classify_train(args):
    rows = clf.read_features(args.features)
    models = clf.train_regimes(rows, args.test_fraction, args.seed, args.grid)
    pl.save_classifiers(models, args.out)
    for regime, m in models.items():
        if m is None:
            print(f"{regime:>8}: ---")
        else:
            f1 = "---" if m.test_f1 is None else f"{100 * m.test_f1:.2f}%"
            print(f"{regime:>8}: test F1 {f1}  hyper {m.hyper}")


def cmd_classify_ratio(args):
    models = pl.load_classifiers(args.model)
    rows = clf.read_features(args.features)
    f1s = {k: (None if v is None else v.test_f1) for k, v in models.items()}
    report = ratio_report(clf.ratio_table(models, rows), f1s)
    json_path, csv_path = _report_paths(args.out)
    emit_report(report, csv_path)
    emit_report(report, json_path)
    print(f"ratio table -> {csv_path}")


def cmd_run(args):
    overrides = {"seed": args.seed, "workers": args.workers, "out_dir": args.out}
    if args.config:
        cfg = pl.load_config(args.config, **overrides)
    else:
        cfg = pl.RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    for key in ("sources", "corpus", "targets", "hypotheses"):
        if getattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if args.stages:
        cfg.stages = tuple(args.stages.split(","))
    if args.grid:
        cfg.grid_search = True
    summary = pl.run(cfg.validate())
    print(json.dumps({"status": summary["status"], "timings": summary["timings"],
                      "outputs": len(summary["outputs"])}, indent=2))


def cmd_report(args):
    report, row = load_report(args.input)
    emit_report(report, args.out, row_label=args.row_label or row)
    print(f"-> {args.out}")


def cmd_synth(args):
    from .synth import make_corpus

    paths = make_corpus(args.out, seed=args.seed, n_sources=args.sources)
    print(json.dumps(paths, indent=2))
    if args.config:
        cfg = {"out_dir": "run", "sources": "sources.csv", "corpus": "corpus.csv",
               "targets": "targets.json", "hypotheses": "hypotheses.tsv", "seed": args.seed}
        with open(os.path.join(args.out, "run.toml"), "w") as fh:
            for k, v in cfg.items():
                fh.write(f"{k} = {json.dumps(v)}\n")


def build_parser():
    p = argparse.ArgumentParser(prog="dysaug", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    workers = dict(type=int, default=pl.default_workers(),
                   help=f"parallel workers (default: ${pl.WORKERS_ENV} or 1)")

    s = sub.add_parser("scan", help="build a manifest from a directory and a path template")
    s.add_argument("--root", required=True)
    s.add_argument("--pattern", required=True, help='e.g. "{speaker_id}/{severity}/{utt_id}.wav"')
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="value for fields not in the template")
    s.add_argument("--text-ext", default=".txt")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("augment", help="speed or tempo perturbation, one random grid ratio per utterance")
    s.add_argument("--manifest", required=True)
    s.add_argument("--method", choices=["speed", "tempo"], required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", **workers)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("transfer", help="convert sources toward randomly paired dysarthric targets")
    s.add_argument("--manifest", required=True)
    s.add_argument("--targets", required=True, help="JSON list of {target_id, gender, wav_path}")
    s.add_argument("--mode", choices=sorted(MODE_ALIASES), default="speaker-prosody")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", **workers)
    s.set_defaults(func=cmd_transfer)

    s = sub.add_parser("analyze", help="prosodic feature CSV, one row per utterance")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", default="", help="value for the trailing method column")
    s.add_argument("--workers", **workers)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("eval-cer", help="severity x level CER report")
    s.add_argument("--manifest", required=True)
    s.add_argument("--hyps", required=True, help="TSV (utt_id, hypothesis) or JSONL")
    s.add_argument("--out", required=True, help="output stem; writes <stem>.json and <stem>.csv")
    s.add_argument("--mean-per-utt", action="store_true", help="average per-utterance CER instead of pooling")
    s.add_argument("--row-label", default="")
    s.set_defaults(func=cmd_eval_cer)

    s = sub.add_parser("classify", help="dysarthric-vs-healthy classifier")
    csub = s.add_subparsers(dest="action", required=True)
    t = csub.add_parser("train")
    t.add_argument("--features", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--test-fraction", type=float, default=0.2)
    t.add_argument("--grid", action="store_true", help="pick hyperparameters by grouped 5-fold CV")
    t.set_defaults(func=cmd_classify_train)
    r = csub.add_parser("ratio")
    r.add_argument("--model", required=True)
    r.add_argument("--features", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_classify_ratio)

    s = sub.add_parser("run", help="full pipeline from a TOML config and/or flags")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--sources")
    s.add_argument("--corpus")
    s.add_argument("--targets")
    s.add_argument("--hypotheses")
    s.add_argument("--stages", help="comma-separated subset of " + ",".join(pl.STAGES))
    s.add_argument("--grid", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="render a report JSON as CSV (or JSON)")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--row-label", default="")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("synth", help="write the synthetic miniature corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sources", type=int, default=12)
    s.add_argument("--config", action="store_true", help="also write run.toml next to the manifests")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
