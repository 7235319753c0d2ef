"""From-scratch tree ensembles producing Escalation Risk scores.

Two modes:

* ``boost``: gradient boosting on logistic loss with second-order leaf
  values and cost-sensitive instance weights (positives scaled by
  ``scale_pos_weight``, default negatives/positives). This is the
  imbalance treatment: false negatives get expensive, so the model leans
  toward predicting the minority class.
* ``bag``: a bagged forest where each bootstrap resample duplicates the
  minority class up to an exact 1:1 ratio and trees vote; the score is the
  vote fraction.

Split search is exact greedy over sorted unique values, no histograms.
Candidate thresholds sit between consecutive distinct values; ties in gain
break to the lowest feature index, then the lowest threshold, which makes
training deterministic and lets a brute-force enumeration oracle check the
chosen split bit-for-bit. Prefix sums run in sorted order (numpy cumsum is
sequential) so the arithmetic an oracle performs left-to-right is the same
arithmetic performed here.

Scores from ``boost`` are sigmoids of clipped margins and therefore live
strictly inside (0, 1); a threshold sweep at 0 always recalls everything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

# Margins are clipped before the sigmoid so scores never round to 0.0 or 1.0.
_MARGIN_LIMIT = 30.0


class LearnerError(Exception):
    pass


class EmptyDatasetError(LearnerError):
    pass


class OneClassError(LearnerError):
    pass


class WidthMismatchError(LearnerError):
    pass


class Mode(str, Enum):
    BOOST = "boost"
    BAG = "bag"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; mode-specific fields are ignored in the other mode.

    ``scale_pos_weight=None`` means negatives/positives, computed at fit
    time. ``feature_subsample=None`` means all features for boost and the
    sqrt fraction for bag.
    """

    mode: Mode = Mode.BOOST
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    l2_leaf_penalty: float = 1.0
    scale_pos_weight: float | None = None
    oversample_to_balance: bool = True
    feature_subsample: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 0 or self.max_depth < 1:
            raise ValueError("n_trees must be >= 0 and max_depth >= 1")
        if self.learning_rate <= 0 or self.l2_leaf_penalty < 0:
            raise ValueError("learning_rate must be > 0 and l2_leaf_penalty >= 0")
        if self.scale_pos_weight is not None and self.scale_pos_weight <= 0:
            raise ValueError("scale_pos_weight must be > 0")
        if self.feature_subsample is not None and not 0 < self.feature_subsample <= 1:
            raise ValueError("feature_subsample must be in (0, 1]")


@dataclass
class Tree:
    """Binary tree in flat arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            xv = X[np.arange(X.shape[0]), np.where(internal, feat, 0)]
            go_left = xv < self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def to_obj(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "Tree":
        return cls(
            feature=np.asarray(obj["feature"], dtype=np.int32),
            threshold=np.asarray(obj["threshold"], dtype=np.float64),
            left=np.asarray(obj["left"], dtype=np.int32),
            right=np.asarray(obj["right"], dtype=np.int32),
            value=np.asarray(obj["value"], dtype=np.float64),
        )


def split_threshold(lo: float, hi: float) -> float:
    """Midpoint between adjacent distinct values, nudged so ``x < t`` separates them."""
    t = (lo + hi) / 2.0
    if t <= lo:
        return hi
    return t


def sigmoid(m: np.ndarray) -> np.ndarray:
    m = np.clip(m, -_MARGIN_LIMIT, _MARGIN_LIMIT)
    out = np.empty_like(m, dtype=np.float64)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


# ---------------------------------------------------------------------------
# Split engine
# ---------------------------------------------------------------------------


class _TreeBuilder:
    """Level-wise exact greedy growth over a fixed sample set.

    Per feature we keep sample positions sorted by value and grouped into
    contiguous per-node blocks; splitting a level is a stable partition of
    each block, so the initial argsort is the only sort ever done. Within a
    node, ties in feature value keep ascending original sample order, which
    pins the float accumulation order the gain scan sees.
    """

    def __init__(
        self,
        X: np.ndarray,
        g: np.ndarray,
        h: np.ndarray,
        feature_ids: np.ndarray,
        max_depth: int,
        lam: float,
        criterion: str,  # "xgb" or "gini"
        presorted: list[np.ndarray] | None = None,
    ):
        self.X = X
        self.g = g
        self.h = h
        self.feature_ids = feature_ids
        self.max_depth = max_depth
        self.lam = lam
        self.criterion = criterion
        self.n = X.shape[0]
        # per selected feature: values per sample and sample ids sorted by value
        self.xvals = [np.ascontiguousarray(X[:, f]) for f in feature_ids]
        if presorted is not None:
            self.orders = [o.copy() for o in presorted]
        else:
            self.orders = [np.argsort(xv, kind="stable").astype(np.int64) for xv in self.xvals]
        # flat tree arrays under construction
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain_by_feature: dict[int, float] = {}

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _leaf_stats(self, starts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        order0 = self.orders[0]
        gsum = np.add.reduceat(self.g[order0], starts[:-1])
        hsum = np.add.reduceat(self.h[order0], starts[:-1])
        return gsum, hsum

    def _leaf_value(self, gsum: float, hsum: float) -> float:
        if self.criterion == "xgb":
            return -gsum / (hsum + self.lam)
        # gini trees vote for the majority class; exact ties vote negative
        return 1.0 if 2.0 * gsum > hsum else 0.0

    def _gains(self, gl, hl, gt, ht, valid) -> np.ndarray:
        lam = self.lam
        gr = gt - gl
        hr = ht - hl
        # divisions at invalid positions (e.g. block tails) are masked out below
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.criterion == "xgb":
                gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - gt * gt / (ht + lam))
            else:
                # count space: g holds positives, h holds ones
                gain = 2.0 * (gt * (ht - gt) / ht - gl * (hl - gl) / hl - gr * (hr - gr) / hr)
        return np.where(valid, gain, -np.inf)

    def build(self) -> Tree:
        root = self._new_node()
        node_ids = np.array([root], dtype=np.int64)
        starts = np.array([0, self.n], dtype=np.int64)

        for depth in range(self.max_depth + 1):
            n_blocks = len(node_ids)
            if n_blocks == 0:
                break
            m = int(starts[-1])
            counts = np.diff(starts)
            block_of = np.repeat(np.arange(n_blocks), counts)
            pos = np.arange(m)

            best_gain = np.full(n_blocks, -np.inf)
            best_feat = np.full(n_blocks, -1, dtype=np.int64)
            best_thr = np.zeros(n_blocks)
            best_local = np.full(n_blocks, -1, dtype=np.int64)  # feature slot of the winner

            if depth < self.max_depth:
                unit_h = self.criterion == "gini"  # hessians are all ones, skip their cumsum
                starts_end = starts[1:]
                last_of_block = starts_end[block_of] - 1
                valid_pos = pos < last_of_block
                pos_in_block = pos - starts[:-1][block_of]
                c0 = np.empty(m + 1)
                c0[0] = 0.0
                ch0 = np.empty(m + 1)
                ch0[0] = 0.0
                for slot, fid in enumerate(self.feature_ids):
                    idx = self.orders[slot]
                    xs = self.xvals[slot][idx]
                    np.cumsum(self.g[idx], out=c0[1:])
                    cg = c0[1:]
                    before = c0[starts[:-1]]
                    gt_b = cg[starts_end - 1] - before
                    gl = cg - before[block_of]
                    if unit_h:
                        hl = pos_in_block + 1.0
                        ht_b = counts.astype(np.float64)
                    else:
                        np.cumsum(self.h[idx], out=ch0[1:])
                        ch = ch0[1:]
                        before_h = ch0[starts[:-1]]
                        ht_b = ch[starts_end - 1] - before_h
                        hl = ch - before_h[block_of]
                    valid = valid_pos.copy()
                    if m > 1:
                        valid[:-1] &= xs[:-1] != xs[1:]
                    valid[-1] = False
                    gain = self._gains(gl, hl, gt_b[block_of], ht_b[block_of], valid)
                    maxs = np.maximum.reduceat(gain, starts[:-1])
                    improved = maxs > best_gain
                    if not improved.any():
                        continue
                    hit = gain == maxs[block_of]
                    first = np.minimum.reduceat(np.where(hit & valid, pos, m), starts[:-1])
                    for b in np.flatnonzero(improved):
                        i = int(first[b])
                        if i >= m:
                            continue
                        best_gain[b] = maxs[b]
                        best_feat[b] = fid
                        best_local[b] = slot
                        best_thr[b] = split_threshold(float(xs[i]), float(xs[i + 1]))

            gsum, hsum = self._leaf_stats(starts)
            splitting = (best_gain > 0.0) & (best_feat >= 0)

            if not splitting.any():
                for b in range(n_blocks):
                    self.value[node_ids[b]] = self._leaf_value(float(gsum[b]), float(hsum[b]))
                break

            goes_left = np.zeros(self.n, dtype=bool)
            order0 = self.orders[0]
            child_ids: list[int] = []
            new_counts: list[int] = []
            keep = np.zeros(n_blocks, dtype=bool)
            for b in range(n_blocks):
                nid = node_ids[b]
                if not splitting[b]:
                    self.value[nid] = self._leaf_value(float(gsum[b]), float(hsum[b]))
                    continue
                keep[b] = True
                sids = order0[starts[b] : starts[b + 1]]
                gl_b = self.xvals[int(best_local[b])][sids] < best_thr[b]
                goes_left[sids] = gl_b
                n_left = int(np.count_nonzero(gl_b))
                lid, rid = self._new_node(), self._new_node()
                self.feature[nid] = int(best_feat[b])
                self.threshold[nid] = float(best_thr[b])
                self.left[nid], self.right[nid] = lid, rid
                self.gain_by_feature[int(best_feat[b])] = (
                    self.gain_by_feature.get(int(best_feat[b]), 0.0) + self._split_importance(b, best_gain[b])
                )
                child_ids.extend((lid, rid))
                new_counts.extend((n_left, int(counts[b]) - n_left))

            new_starts = np.concatenate(([0], np.cumsum(np.asarray(new_counts, dtype=np.int64))))
            self._partition(starts, block_of, keep, goes_left, new_starts)
            node_ids = np.asarray(child_ids, dtype=np.int64)
            starts = new_starts

        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )

    def _split_importance(self, block: int, gain: float) -> float:
        if self.criterion == "xgb":
            return float(gain)
        # gini gains are in count units; normalize by the tree's sample count
        return float(gain) / self.n

    def _partition(self, starts, block_of, keep, goes_left, new_starts) -> None:
        """Stable-partition every feature order by left/right, dropping leaf blocks."""
        n_keep = int(np.count_nonzero(keep))
        if n_keep == 0:
            for slot in range(len(self.orders)):
                self.orders[slot] = self.orders[slot][:0]
            return
        # destination block pair for each kept old block
        pair_index = np.cumsum(keep) - 1  # valid where keep
        left_dest = new_starts[:-1][0::2]
        right_dest = new_starts[:-1][1::2]
        for slot in range(len(self.orders)):
            idx = self.orders[slot]
            gl = goes_left[idx]
            kept = keep[block_of]
            csl = np.cumsum(gl.astype(np.int64))
            before = np.concatenate(([0], csl))[starts[:-1]]
            lefts_inclusive = csl - before[block_of]
            pos_in_block = np.arange(len(idx)) - starts[:-1][block_of]
            pairs = pair_index[block_of]
            dest = np.where(
                gl,
                left_dest[pairs] + lefts_inclusive - 1,
                right_dest[pairs] + pos_in_block - lefts_inclusive,
            )
            new_order = np.empty(int(new_starts[-1]), dtype=np.int64)
            new_order[dest[kept]] = idx[kept]
            self.orders[slot] = new_order


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    er: float
    predicted_crit: bool


@dataclass
class EnsembleModel:
    mode: Mode
    feature_names: tuple[str, ...]
    trees: list[Tree]
    base_score: float
    learning_rate: float
    gain_by_feature: dict[int, float] = field(default_factory=dict)
    config: TrainConfig | None = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check_width(self, X: np.ndarray) -> None:
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise WidthMismatchError(
                f"expected {self.n_features} feature columns, got {X.shape[1] if X.ndim == 2 else X.shape}"
            )

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Escalation risk per row, in [0, 1]."""
        X = np.asarray(X, dtype=np.float64)
        self._check_width(X)
        if self.mode is Mode.BOOST:
            margin = np.full(X.shape[0], self.base_score)
            for tree in self.trees:
                margin += tree.predict(X)
            return sigmoid(margin)
        if not self.trees:
            return np.full(X.shape[0], 0.0)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)

    def importances(self) -> list[tuple[str, float]]:
        """(feature, percentage) sorted descending; unused features are exactly 0.0."""
        raw = np.zeros(self.n_features)
        for fid, gain in self.gain_by_feature.items():
            raw[fid] = gain
        total = float(raw.sum())
        pct = raw * (100.0 / total) if total > 0 else raw
        order = sorted(range(self.n_features), key=lambda i: (-pct[i], self.feature_names[i]))
        return [(self.feature_names[i], float(pct[i])) for i in order]

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        obj = {
            "format": "escalade-ensemble",
            "version": 1,
            "mode": self.mode.value,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names),
            "gain_by_feature": {str(k): v for k, v in sorted(self.gain_by_feature.items())},
            "trees": [t.to_obj() for t in self.trees],
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "EnsembleModel":
        obj = json.loads(text)
        if obj.get("format") != "escalade-ensemble" or obj.get("version") != 1:
            raise ValueError("not a version-1 ensemble file")
        return cls(
            mode=Mode(obj["mode"]),
            feature_names=tuple(obj["feature_names"]),
            trees=[Tree.from_obj(t) for t in obj["trees"]],
            base_score=float(obj["base_score"]),
            learning_rate=float(obj["learning_rate"]),
            gain_by_feature={int(k): float(v) for k, v in obj["gain_by_feature"].items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "EnsembleModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _validate_training_input(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyDatasetError("need a non-empty 2-D feature matrix")
    if y.shape != (X.shape[0],):
        raise WidthMismatchError("labels must align with matrix rows")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite values")
    y = (y > 0).astype(np.float64)
    if y.min() == y.max():
        raise OneClassError("training data contains a single class")
    return X, y


def train(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    feature_names: tuple[str, ...] | None = None,
) -> EnsembleModel:
    """Fit a boosted or bagged ensemble; deterministic for a fixed seed."""
    X, y = _validate_training_input(X, y)
    n, d = X.shape
    names = tuple(feature_names) if feature_names else tuple(f"f{i}" for i in range(d))
    if len(names) != d:
        raise WidthMismatchError("feature_names width does not match matrix")
    if config.mode is Mode.BOOST:
        return _train_boost(X, y, config, names)
    return _train_bag(X, y, config, names)


def _train_boost(X, y, config: TrainConfig, names) -> EnsembleModel:
    n, d = X.shape
    n_pos = float(y.sum())
    n_neg = float(len(y) - y.sum())
    spw = config.scale_pos_weight if config.scale_pos_weight is not None else n_neg / n_pos
    w = np.where(y == 1.0, spw, 1.0)
    p0 = float((w * y).sum() / w.sum())
    base = float(np.log(p0 / (1.0 - p0)))

    frac = config.feature_subsample if config.feature_subsample is not None else 1.0
    k = max(1, int(round(frac * d)))
    rng = np.random.default_rng(config.seed)

    # X is fixed across rounds, so sort each column once up front
    presort_all = [
        np.argsort(np.ascontiguousarray(X[:, f]), kind="stable").astype(np.int64)
        for f in range(d)
    ]
    trees: list[Tree] = []
    gain_total: dict[int, float] = {}
    margin = np.full(n, base)
    for _ in range(config.n_trees):
        feature_ids = np.arange(d) if k == d else np.sort(rng.choice(d, size=k, replace=False))
        p = sigmoid(margin)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        builder = _TreeBuilder(
            X, g, h, feature_ids, config.max_depth, config.l2_leaf_penalty, "xgb",
            presorted=[presort_all[f] for f in feature_ids],
        )
        tree = builder.build()
        tree.value *= config.learning_rate
        margin += tree.predict(X)
        for fid, gain in builder.gain_by_feature.items():
            gain_total[fid] = gain_total.get(fid, 0.0) + gain
        trees.append(tree)
    return EnsembleModel(
        mode=Mode.BOOST,
        feature_names=names,
        trees=trees,
        base_score=base,
        learning_rate=config.learning_rate,
        gain_by_feature=gain_total,
        config=config,
    )


def _train_bag(X, y, config: TrainConfig, names) -> EnsembleModel:
    n, d = X.shape
    frac = config.feature_subsample if config.feature_subsample is not None else np.sqrt(d) / d
    k = max(1, int(round(frac * d)))
    rng = np.random.default_rng(config.seed)

    trees: list[Tree] = []
    gain_total: dict[int, float] = {}
    for _ in range(config.n_trees):
        while True:  # bootstrap again until both classes are present
            boot = rng.integers(0, n, size=n)
            if 0.0 < y[boot].sum() < n:
                break
        if config.oversample_to_balance:
            pos = boot[y[boot] == 1.0]
            neg = boot[y[boot] == 0.0]
            minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
            extra = np.resize(minority, len(majority) - len(minority))
            boot = np.concatenate([boot, extra])
        feature_ids = np.arange(d) if k == d else np.sort(rng.choice(d, size=k, replace=False))
        Xb = X[boot]
        yb = y[boot]
        builder = _TreeBuilder(Xb, yb, np.ones(len(yb)), feature_ids, config.max_depth, 0.0, "gini")
        tree = builder.build()
        for fid, gain in builder.gain_by_feature.items():
            gain_total[fid] = gain_total.get(fid, 0.0) + gain
        trees.append(tree)
    return EnsembleModel(
        mode=Mode.BAG,
        feature_names=names,
        trees=trees,
        base_score=0.0,
        learning_rate=1.0,
        gain_by_feature=gain_total,
        config=config,
    )


def predict(model: EnsembleModel, row: np.ndarray, threshold: float = 0.5) -> Prediction:
    """Score one feature row; a ticket is flagged only when ER is strictly over the threshold."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim == 1:
        row = row.reshape(1, -1)
    er = float(model.predict_proba(row)[0])
    return Prediction(er=er, predicted_crit=er > threshold)


def weighted_log_loss(y: np.ndarray, scores: np.ndarray, pos_weight: float) -> float:
    """Mean weighted logistic loss; the per-round training-progress metric."""
    eps = 1e-15
    s = np.clip(scores, eps, 1 - eps)
    w = np.where(y > 0, pos_weight, 1.0)
    ll = -(np.where(y > 0, np.log(s), np.log(1 - s)) * w)
    return float(ll.sum() / w.sum())
