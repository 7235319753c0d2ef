"""The ``escalade`` command: one entry point for the whole workflow.

    escalade synth     --seed 7 --pmrs 50000 --out corpus/
    escalade featurize --events corpus/events.jsonl --critsits corpus/critsits.jsonl \
                       --preset final57 --out matrix.csv
    escalade train     --matrix matrix.csv --mode boost --out model.json
    escalade eval      --matrix matrix.csv --out report/
    escalade compare   --events ... --critsits ... --out compare/
    escalade cascade   --events ... --critsits ... --out cascade/
    escalade serve     --events ... --critsits ... --model model.json --port 8008
    escalade report    --dir report/

Every command is idempotent for fixed inputs and seeds. A JSON config file
(``--config``) may supply any long flag by its destination name; explicit
flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .domain import DomainError, label_pmr
from .evalharness import (
    EvalError,
    cascade_experiment,
    compare_models,
    cross_validate,
    render_confusion_text,
    render_pr_svg,
    write_report,
)
from .featurize import FeatureSetPreset, build_matrix, read_matrix_csv, write_matrix_csv
from .ingest import IngestError, build_index, parse_critsit_log, parse_event_log
from .learner import EnsembleModel, LearnerError, Mode, TrainConfig, train
from .synthgen import CorpusSpec, GenerationError, corpus_stats, generate_files
from .triage import MODEL_PATH_ENV, TriageService, TriageStore, create_app

_PRESETS = {p.value: p for p in FeatureSetPreset}


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", required=True, help="events.jsonl path (.gz accepted)")
    p.add_argument("--critsits", required=True, help="critsits.jsonl path (.gz accepted)")
    p.add_argument("--lenient", action="store_true", help="drop malformed PMRs instead of failing")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["boost", "bag"], default="boost")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--lr", type=float, default=0.1, help="learning rate (boost)")
    p.add_argument("--l2", type=float, default=1.0, help="leaf L2 penalty (boost)")
    p.add_argument("--scale-pos-weight", type=float, default=None,
                   help="positive-class weight (boost); default negatives/positives")
    p.add_argument("--feature-subsample", type=float, default=None)
    p.add_argument("--no-oversample", action="store_true",
                   help="disable 1:1 minority oversampling (bag)")
    p.add_argument("--seed", type=int, default=0)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        mode=Mode(args.mode),
        n_trees=args.trees,
        max_depth=args.depth,
        learning_rate=args.lr,
        l2_leaf_penalty=args.l2,
        scale_pos_weight=args.scale_pos_weight,
        oversample_to_balance=not args.no_oversample,
        feature_subsample=args.feature_subsample,
        seed=args.seed,
    )


def _load_corpus(args):
    pmrs = parse_event_log(args.events, lenient=args.lenient)
    critsits = parse_critsit_log(args.critsits)
    labels = [label_pmr(p, critsits) for p in pmrs]
    index = build_index(pmrs, critsits)
    return pmrs, critsits, labels, index


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="escalade",
        description="Support-ticket escalation prediction: corpus, features, models, reports, triage.",
    )
    parser.add_argument("--version", action="version", version=f"escalade {__version__}")
    parser.add_argument("--config", default=None,
                        help="JSON file of default flag values (keys = flag destinations)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmrs", type=int, default=5000)
    p.add_argument("--customers", type=int, default=120)
    p.add_argument("--analysts", type=int, default=40)
    p.add_argument("--crit-ratio", type=float, default=1 / 265)
    p.add_argument("--cascade-prob", type=float, default=0.25)
    p.add_argument("--signal", type=float, default=0.8)
    p.add_argument("--horizon-weeks", type=int, default=104)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="build a feature matrix CSV")
    _add_corpus_args(p)
    p.add_argument("--preset", choices=sorted(_PRESETS), default="final57")
    p.add_argument("--out", required=True, help="matrix CSV path")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train an ensemble on a matrix")
    p.add_argument("--matrix", required=True)
    _add_train_args(p)
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validate a matrix and write a report")
    p.add_argument("--matrix", required=True)
    _add_train_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="baseline vs first13 vs final57 over shared folds")
    _add_corpus_args(p)
    _add_train_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cascade", help="re-validate keeping only known-cause escalations")
    _add_corpus_args(p)
    _add_train_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_cascade)

    p = sub.add_parser("serve", help="run the triage HTTP service")
    _add_corpus_args(p)
    p.add_argument("--model", default=os.environ.get(MODEL_PATH_ENV),
                   help=f"model file (default ${MODEL_PATH_ENV})")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store", default=None, help="triage state file (journal + snapshot)")
    p.add_argument("--as-of", default=None,
                   help="corpus instant to serve at (ISO, e.g. 2024-06-01T00:00Z); "
                        "default: 60th percentile of open dates")
    p.add_argument("--ui", default=None,
                   help="built dashboard directory to serve at / (e.g. frontend/)")
    p.add_argument("--recompute-interval", type=float, default=0.0,
                   help="seconds between automatic recomputes (0 = on demand only); "
                        "each tick advances the corpus clock by one day")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="print the tables from a report directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = CorpusSpec(
        seed=args.seed,
        n_customers=args.customers,
        n_analysts=args.analysts,
        n_pmrs=args.pmrs,
        crit_ratio=args.crit_ratio,
        cascade_prob=args.cascade_prob,
        signal_strength=args.signal,
        horizon_weeks=args.horizon_weeks,
    )
    pmrs, critsits = generate_files(spec, out / "events.jsonl", out / "critsits.jsonl")
    stats = corpus_stats(pmrs, critsits)
    print(f"wrote {out / 'events.jsonl'} ({stats.n_events} events, {stats.n_pmrs} PMRs)")
    print(f"wrote {out / 'critsits.jsonl'} ({stats.n_critsits} CritSits, "
          f"{stats.n_positives} positives, imbalance 1:{stats.imbalance:.0f})")
    return 0


def cmd_featurize(args) -> int:
    pmrs, critsits, labels, index = _load_corpus(args)
    matrix = build_matrix(pmrs, labels, index, _PRESETS[args.preset])
    write_matrix_csv(matrix, args.out)
    print(f"wrote {args.out}: {matrix.X.shape[0]} rows x {matrix.X.shape[1]} features "
          f"({int(matrix.y.sum())} positives)")
    return 0


def cmd_train(args) -> int:
    matrix = read_matrix_csv(args.matrix)
    model = train(matrix.X, matrix.y, _train_config(args), matrix.columns)
    model.save(args.out)
    top = model.importances()[:5]
    print(f"wrote {args.out} ({args.mode}, {args.trees} trees, depth {args.depth})")
    print("top importances: " + ", ".join(f"{n}={v:.2f}%" for n, v in top))
    return 0


def cmd_eval(args) -> int:
    matrix = read_matrix_csv(args.matrix)
    report = cross_validate(
        matrix.X,
        matrix.y,
        _train_config(args),
        k=args.k,
        seed=args.seed,
        threshold=args.threshold,
        feature_names=matrix.columns,
        stratified=args.stratified,
        preset=matrix.preset.value,
    )
    write_report(report, args.out)
    render_pr_svg({report.preset: report.curve}, Path(args.out) / f"{report.preset}_pr.svg")
    print(render_confusion_text(report.cm, title=f"{report.preset} @ threshold {args.threshold}"))
    return 0


def cmd_compare(args) -> int:
    pmrs, critsits, labels, index = _load_corpus(args)
    comparison = compare_models(
        pmrs, labels, index, _train_config(args), k=args.k, seed=args.seed,
        threshold=args.threshold,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for preset, report in comparison.reports.items():
        write_report(report, out)
        curves[preset.value] = report.curve
        print(render_confusion_text(report.cm, title=f"preset={preset.value}"))
        print()
    render_pr_svg(curves, out / "pr_space.svg", title="PR space: baseline vs first13 vs final57")
    ranking = [
        {"preset": preset.value, "recall_at_matched_summarization": recall}
        for preset, recall in comparison.ranking
    ]
    (out / "ranking.json").write_text(
        json.dumps({"target_summarization": comparison.target_summarization,
                    "ranking": ranking}, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"ranking at summarization {comparison.target_summarization:.4f}: "
          + " >= ".join(r["preset"] for r in ranking))
    return 0


def cmd_cascade(args) -> int:
    pmrs, critsits, labels, index = _load_corpus(args)
    result = cascade_experiment(
        pmrs, labels, critsits, index, _train_config(args), k=args.k, seed=args.seed,
        threshold=args.threshold,
    )
    if result is None:
        print("no single-PMR CritSit positives; nothing to report", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(result.unfiltered, out)
    write_report(result.filtered, out)
    summary = {
        "n_removed": result.n_removed,
        "kept_positive_fraction": result.kept_positive_fraction,
        "recall_delta_pp": result.recall_delta_pp,
    }
    (out / "cascade_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(render_confusion_text(result.unfiltered.cm, title="all CritSits"))
    print()
    print(render_confusion_text(result.filtered.cm, title="single-PMR (cause) CritSits only"))
    print(f"\nremoved {result.n_removed} PMRs; kept {result.kept_positive_fraction:.0%} of positives; "
          f"recall delta {result.recall_delta_pp:+.2f} pp")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .domain import iso_to_minutes

    if not args.model:
        print(f"escalade: serve needs --model or ${MODEL_PATH_ENV}", file=sys.stderr)
        return 2
    pmrs = parse_event_log(args.events, lenient=args.lenient)
    critsits = parse_critsit_log(args.critsits)
    model = EnsembleModel.load(args.model)
    store = TriageStore(args.store) if args.store else None
    service = TriageService(pmrs, critsits, model, store=store)
    now = iso_to_minutes(args.as_of) if args.as_of else None
    updated = service.recompute_all(now)
    print(f"serving {updated} open PMRs on http://{args.host}:{args.port}")
    if args.recompute_interval > 0:
        import threading
        import time as time_mod

        def tick() -> None:
            while True:
                time_mod.sleep(args.recompute_interval)
                try:
                    service.recompute_all()
                except Exception as exc:  # keep serving even if a tick fails
                    print(f"escalade: periodic recompute failed: {exc}", file=sys.stderr)

        threading.Thread(target=tick, daemon=True).start()
    uvicorn.run(create_app(service, ui_dir=args.ui), host=args.host, port=args.port,
                log_level="warning")
    return 0


def cmd_report(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"escalade: no such report directory: {directory}", file=sys.stderr)
        return 2
    shown = 0
    for path in sorted(directory.glob("*_confusion.txt")):
        print(path.read_text(encoding="utf-8"))
        shown += 1
    ranking = directory / "ranking.json"
    if ranking.exists():
        print(ranking.read_text(encoding="utf-8"))
        shown += 1
    if not shown:
        print(f"escalade: nothing to report in {directory}", file=sys.stderr)
        return 1
    return 0


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """Fold --config JSON values in as defaults for the chosen subcommand."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    config_path = argv[i + 1]
    values = json.loads(Path(config_path).read_text(encoding="utf-8"))
    if not isinstance(values, dict):
        raise IngestError(f"{config_path}: config must be a JSON object")
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            sub.set_defaults(**{k: v for k, v in values.items()})
    return argv[:i] + argv[i + 2 :]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return args.func(args)
    except (IngestError, DomainError, GenerationError, LearnerError, EvalError) as exc:
        print(f"escalade: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"escalade: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
