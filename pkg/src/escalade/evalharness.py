"""Cross-validation, confusion matrices, and PR-space reporting.

Conventions, all of which the reports depend on:

* Recall = TP/(TP+FN), precision = TP/(TP+FP), and summarization =
  (TN+FN)/total: the share of the corpus a reviewer no longer has to read.
  Components with a zero denominator are undefined and reported as None.
* Metrics are computed in exact rational arithmetic, then rounded to four
  decimals (two decimals once expressed as percentages).
* K-fold assignment is a seeded uniform shuffle, not stratified (a
  ``stratified`` flag exists for the exception). Held-out predictions from
  all folds are pooled into a single confusion matrix and PR curve rather
  than averaging per-fold metrics.
* A ticket counts as predicted-positive only when its score is strictly
  above the threshold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .domain import CritSit, CritSitKind, Label, PMR, classify_critsit
from .featurize import FeatureMatrix, FeatureSetPreset, build_matrix
from .ingest import CorpusIndex
from .learner import EnsembleModel, OneClassError, TrainConfig, train


class FoldOneClassWarning(UserWarning):
    """A fold's training split had a single class; it was scored with the prior."""


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion cells must be non-negative")
        if self.total == 0:
            raise ValueError("confusion matrix must cover at least one prediction")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_scores(cls, y: np.ndarray, ers: np.ndarray, threshold: float = 0.5) -> "ConfusionMatrix":
        y = np.asarray(y) > 0
        pred = np.asarray(ers) > threshold
        return cls(
            tp=int(np.count_nonzero(pred & y)),
            tn=int(np.count_nonzero(~pred & ~y)),
            fp=int(np.count_nonzero(pred & ~y)),
            fn=int(np.count_nonzero(~pred & y)),
        )


@dataclass(frozen=True)
class Metrics:
    recall: float | None
    precision: float | None
    summarization: float | None

    def pct(self, name: str) -> str:
        value = getattr(self, name)
        return "undef" if value is None else f"{value * 100:.2f}%"


def _round4(value: Fraction) -> float:
    return float(round(value, 4))


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Recall, precision, summarization from the cells; zero denominators yield None."""
    recall = _round4(Fraction(cm.tp, cm.tp + cm.fn)) if cm.tp + cm.fn else None
    precision = _round4(Fraction(cm.tp, cm.tp + cm.fp)) if cm.tp + cm.fp else None
    summarization = _round4(Fraction(cm.tn + cm.fn, cm.total))
    return Metrics(recall=recall, precision=precision, summarization=summarization)


@dataclass
class PRCurve:
    """Precision/recall/summarization over a uniform threshold grid in [0, 1]."""

    thresholds: np.ndarray
    precision: np.ndarray  # NaN where no ticket is predicted positive
    recall: np.ndarray
    summarization: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)


def pr_sweep(y: np.ndarray, ers: np.ndarray, grid_step: float = 0.01) -> PRCurve:
    """Sweep the decision threshold over a uniform grid and score each point."""
    y = np.asarray(y) > 0
    ers = np.asarray(ers, dtype=np.float64)
    if len(y) != len(ers) or len(y) == 0:
        raise EvalError("labels and scores must be non-empty and aligned")
    if ers.min() < 0 or ers.max() > 1:
        raise EvalError("scores must lie in [0, 1]")
    steps = int(round(1.0 / grid_step))
    thresholds = np.arange(steps + 1) / steps
    ers_sorted = np.sort(ers)
    pos_sorted = np.sort(ers[y])
    n = len(y)
    n_pos = len(pos_sorted)
    predicted = n - np.searchsorted(ers_sorted, thresholds, side="right")
    tp = n_pos - np.searchsorted(pos_sorted, thresholds, side="right")
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / np.maximum(predicted, 1), np.nan)
    recall = tp / n_pos if n_pos else np.full_like(thresholds, np.nan)
    summarization = (n - predicted) / n
    return PRCurve(
        thresholds=thresholds,
        precision=precision,
        recall=recall,
        summarization=summarization,
    )


@dataclass
class EvalReport:
    """Pooled cross-validation outcome for one feature preset."""

    preset: str
    cm: ConfusionMatrix
    metrics: Metrics
    curve: PRCurve
    importances: list[tuple[str, float]]
    k: int
    seed: int
    threshold: float
    n_rows: int
    n_pos: int
    y: np.ndarray
    ers: np.ndarray
    warnings: list[str] = field(default_factory=list)


def _fold_assignment(n: int, k: int, seed: int, y: np.ndarray, stratified: bool) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    if not stratified:
        return [np.sort(chunk) for chunk in np.array_split(rng.permutation(n), k)]
    pos = rng.permutation(np.flatnonzero(y > 0))
    neg = rng.permutation(np.flatnonzero(y == 0))
    folds = [np.concatenate([p, q]) for p, q in zip(np.array_split(pos, k), np.array_split(neg, k))]
    return [np.sort(f) for f in folds]


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    feature_names: tuple[str, ...] | None = None,
    stratified: bool = False,
    preset: str = "",
) -> EvalReport:
    """Seeded k-fold cross-validation with pooled held-out predictions."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = len(y)
    if k < 2 or n < k:
        raise EvalError(f"need 2 <= k <= n, got k={k}, n={n}")
    if (y > 0).all() or (y <= 0).all():
        raise EvalError("both classes must be present overall")

    folds = _fold_assignment(n, k, seed, y, stratified)
    ers = np.empty(n, dtype=np.float64)
    captured: list[str] = []
    pct_sums: np.ndarray | None = None
    names = feature_names or tuple(f"f{i}" for i in range(X.shape[1]))
    n_models = 0
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        try:
            model = train(X[mask], y[mask], config, names)
        except OneClassError:
            prior = float((y[mask] > 0).mean())
            message = f"fold with single-class training data scored with prior {prior:.3f}"
            warnings.warn(message, FoldOneClassWarning, stacklevel=2)
            captured.append(message)
            ers[fold] = prior
            continue
        ers[fold] = model.predict_proba(X[fold])
        vec = np.zeros(len(names))
        for name, pct in model.importances():
            vec[names.index(name)] = pct
        pct_sums = vec if pct_sums is None else pct_sums + vec
        n_models += 1

    cm = ConfusionMatrix.from_scores(y, ers, threshold)
    mean_pct = (pct_sums / n_models) if n_models else np.zeros(len(names))
    order = sorted(range(len(names)), key=lambda i: (-mean_pct[i], names[i]))
    importances = [(names[i], float(mean_pct[i])) for i in order]
    return EvalReport(
        preset=preset,
        cm=cm,
        metrics=metrics(cm),
        curve=pr_sweep(y, ers),
        importances=importances,
        k=k,
        seed=seed,
        threshold=threshold,
        n_rows=n,
        n_pos=int((y > 0).sum()),
        y=np.asarray(y).copy(),
        ers=ers,
        warnings=captured,
    )


# ---------------------------------------------------------------------------
# Model comparison and the cascade-filtering experiment
# ---------------------------------------------------------------------------


DEFAULT_PRESETS = (
    FeatureSetPreset.BASELINE_RAW,
    FeatureSetPreset.FIRST13,
    FeatureSetPreset.FINAL57,
)


@dataclass
class ComparisonReport:
    reports: dict[FeatureSetPreset, EvalReport]
    ranking: list[tuple[FeatureSetPreset, float]]  # (preset, recall at matched summarization)
    target_summarization: float


def recall_at_summarization(curve: PRCurve, target: float) -> float:
    """Best recall among grid thresholds that summarize at least ``target``.

    Comparing models at matched workload reduction: each model gets the
    most favorable operating point that still saves the target share of
    review work. 0.0 when no grid point reaches the target.
    """
    eligible = curve.summarization >= target - 1e-12
    if not eligible.any():
        return 0.0
    return float(curve.recall[eligible].max())


def dominance_fraction(a: PRCurve, b: PRCurve) -> float:
    """Share of ``b``'s grid points weakly dominated by curve ``a``.

    Curve dominance in PR space: ``b``'s operating point at a grid
    threshold counts as dominated when some point of ``a`` reaches at
    least its recall and at least its precision. Points are compared by
    position in PR space, not by the thresholds that produced them, since
    two models need not be calibrated alike. An empty retrieval counts as
    precision 0.0, so silence is never rewarded over retrieval.
    """
    if len(a) != len(b):
        raise EvalError("curves must share a grid")
    pa = np.where(np.isnan(a.precision), 0.0, a.precision)
    pb = np.where(np.isnan(b.precision), 0.0, b.precision)
    dominated = (a.recall[None, :] >= b.recall[:, None]) & (pa[None, :] >= pb[:, None])
    return float(dominated.any(axis=1).mean())


def compare_models(
    pmrs: list[PMR],
    labels: list[Label],
    index: CorpusIndex,
    config: TrainConfig,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    presets: tuple[FeatureSetPreset, ...] = DEFAULT_PRESETS,
) -> ComparisonReport:
    """Evaluate several presets over identical rows and fold assignments."""
    reports: dict[FeatureSetPreset, EvalReport] = {}
    for preset in presets:
        matrix = build_matrix(pmrs, labels, index, preset)
        reports[preset] = cross_validate(
            matrix.X,
            matrix.y,
            config,
            k=k,
            seed=seed,
            threshold=threshold,
            feature_names=matrix.columns,
            preset=preset.value,
        )
    anchor = reports.get(FeatureSetPreset.FINAL57) or next(iter(reports.values()))
    target = float(anchor.metrics.summarization)
    ranking = sorted(
        ((p, recall_at_summarization(r.curve, target)) for p, r in reports.items()),
        key=lambda pr: -pr[1],
    )
    return ComparisonReport(reports=reports, ranking=ranking, target_summarization=target)


@dataclass
class CascadeReport:
    filtered: EvalReport
    unfiltered: EvalReport
    recall_delta_pp: float  # unfiltered recall minus filtered recall, percentage points
    n_removed: int
    kept_positive_fraction: float


def cascade_experiment(
    pmrs: list[PMR],
    labels: list[Label],
    critsits: list[CritSit],
    index: CorpusIndex,
    config: TrainConfig,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
) -> CascadeReport | None:
    """Re-run the final-preset validation keeping only known-cause escalations.

    CritSits with several attached PMRs mix the causing ticket with swept-in
    siblings; all their PMRs leave the dataset. Positives that remain are
    attached to single-PMR CritSits. Returns None (with a warning) when no
    positive survives the filter.
    """
    multi_pmr_ids: set[str] = set()
    for c in critsits:
        if classify_critsit(c) is CritSitKind.MULTI:
            multi_pmr_ids.update(c.attached_pmr_ids)
    kept = [(p, l) for p, l in zip(pmrs, labels) if p.pmr_id not in multi_pmr_ids]
    kept_pmrs = [p for p, _ in kept]
    kept_labels = [l for _, l in kept]
    n_pos_before = sum(1 for l in labels if l.is_crit)
    n_pos_after = sum(1 for l in kept_labels if l.is_crit)
    if n_pos_after == 0:
        warnings.warn("no single-PMR CritSit positives remain; skipping", stacklevel=2)
        return None

    full = build_matrix(pmrs, labels, index, FeatureSetPreset.FINAL57)
    unfiltered = cross_validate(
        full.X, full.y, config, k=k, seed=seed, threshold=threshold,
        feature_names=full.columns, preset="final57",
    )
    filtered_matrix = build_matrix(kept_pmrs, kept_labels, index, FeatureSetPreset.FINAL57)
    filtered = cross_validate(
        filtered_matrix.X, filtered_matrix.y, config, k=k, seed=seed, threshold=threshold,
        feature_names=filtered_matrix.columns, preset="final57-cause-only",
    )
    delta = ((unfiltered.metrics.recall or 0.0) - (filtered.metrics.recall or 0.0)) * 100
    return CascadeReport(
        filtered=filtered,
        unfiltered=unfiltered,
        recall_delta_pp=delta,
        n_removed=len(pmrs) - len(kept_pmrs),
        kept_positive_fraction=n_pos_after / n_pos_before if n_pos_before else 0.0,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_confusion_text(cm: ConfusionMatrix, title: str = "") -> str:
    """Confusion matrix as a small text table with row percentages."""
    m = metrics(cm)
    no_total = cm.tn + cm.fp
    yes_total = cm.fn + cm.tp

    def pct(part: int, whole: int) -> str:
        return f"{100 * part / whole:.2f}%" if whole else "undef"

    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'Actual':<10}{'Total':>12}  {'Pred. No':>24}  {'Pred. Yes':>24}")
    lines.append(
        f"{'No':<10}{no_total:>12,}  "
        f"{f'{cm.tn:,} (TN) {pct(cm.tn, no_total)}':>24}  "
        f"{f'{cm.fp:,} (FP) {pct(cm.fp, no_total)}':>24}"
    )
    lines.append(
        f"{'Yes':<10}{yes_total:>12,}  "
        f"{f'{cm.fn:,} (FN) {pct(cm.fn, yes_total)}':>24}  "
        f"{f'{cm.tp:,} (TP) {pct(cm.tp, yes_total)}':>24}"
    )
    lines.append(
        f"recall {m.pct('recall')}  precision {m.pct('precision')}  "
        f"summarization {m.pct('summarization')}"
    )
    return "\n".join(lines)


_SVG_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")


def render_pr_svg(
    curves: dict[str, PRCurve],
    path: str | Path,
    title: str = "Precision-Recall space",
    label_thresholds: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9),
) -> None:
    """Write an SVG of PR curves with confidence-threshold labels."""
    width, height, margin = 640, 480, 56
    plot_w, plot_h = width - 2 * margin, height - 2 * margin

    def sx(recall: float) -> float:
        return margin + recall * plot_w

    def sy(precision: float) -> float:
        return height - margin - precision * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle">Recall</text>',
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {height / 2:.0f})">Precision</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{height - margin + 16}" text-anchor="middle">{tick:g}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{sy(tick) + 4:.1f}" text-anchor="end">{tick:g}</text>'
        )
    for ci, (name, curve) in enumerate(curves.items()):
        color = _SVG_COLORS[ci % len(_SVG_COLORS)]
        pts = [
            f"{sx(float(r)):.1f},{sy(float(p)):.1f}"
            for r, p in zip(curve.recall, curve.precision)
            if not np.isnan(p)
        ]
        if pts:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.6"/>'
            )
        for t in label_thresholds:
            idx = int(np.argmin(np.abs(curve.thresholds - t)))
            p = curve.precision[idx]
            if np.isnan(p):
                continue
            x, yy = sx(float(curve.recall[idx])), sy(float(p))
            parts.append(f'<circle cx="{x:.1f}" cy="{yy:.1f}" r="2.5" fill="{color}"/>')
            parts.append(
                f'<text x="{x + 4:.1f}" y="{yy - 4:.1f}" fill="{color}">{t:g}</text>'
            )
        ly = margin + 16 + 16 * ci
        parts.append(
            f'<line x1="{width - margin - 150}" y1="{ly}" x2="{width - margin - 126}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{width - margin - 120}" y="{ly + 4}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def write_curve_csv(curve: PRCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("threshold,precision,recall,summarization\n")
        for i in range(len(curve)):
            p = curve.precision[i]
            fh.write(
                f"{curve.thresholds[i]:.2f},{'' if np.isnan(p) else repr(float(p))},"
                f"{float(curve.recall[i])!r},{float(curve.summarization[i])!r}\n"
            )


def write_report(report: EvalReport, out_dir: str | Path) -> None:
    """Machine-readable report: metrics JSON, curve CSV, importances CSV, text table."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report.preset or "report"
    payload = {
        "preset": report.preset,
        "k": report.k,
        "seed": report.seed,
        "threshold": report.threshold,
        "rows": report.n_rows,
        "positives": report.n_pos,
        "cells": {"tp": report.cm.tp, "tn": report.cm.tn, "fp": report.cm.fp, "fn": report.cm.fn},
        "recall": report.metrics.recall,
        "precision": report.metrics.precision,
        "summarization": report.metrics.summarization,
        "warnings": report.warnings,
    }
    (out / f"{stem}_metrics.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    write_curve_csv(report.curve, out / f"{stem}_pr_curve.csv")
    with open(out / f"{stem}_importances.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,importance_pct\n")
        for name, pct in report.importances:
            fh.write(f"{name},{pct:.4f}\n")
    (out / f"{stem}_confusion.txt").write_text(
        render_confusion_text(report.cm, title=f"preset={report.preset}") + "\n", encoding="utf-8"
    )
