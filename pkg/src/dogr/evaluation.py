"""Nested cross-validation of the mixture model against a pooled linear
regression baseline."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dogr.exceptions import DogrError
from dogr.inference import _normalize_mode, predict_rows
from dogr.model import Dataset, FitConfig, fit
from dogr.numerics import wls_fit

log = logging.getLogger(__name__)


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def rmse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean(np.abs(a - b)))


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle ``range(n)`` and cut it into ``folds`` contiguous chunks."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    return [np.sort(c) for c in np.array_split(rng.permutation(n), folds)]


@dataclass(frozen=True)
class CvConfig:
    outer_folds: int = 5
    inner_folds: int = 5
    repeats: int = 1
    k_grid: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    seed: int = 0
    prediction_mode: str = "posterior_weights"

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.k_grid or any(int(k) < 1 for k in self.k_grid):
            raise ValueError("k_grid must be a non-empty list of positive integers")
        object.__setattr__(self, "k_grid", tuple(sorted({int(k) for k in self.k_grid})))
        object.__setattr__(self, "prediction_mode", _normalize_mode(self.prediction_mode))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    repeat: int
    chosen_k: int | None
    rmse: float
    mae: float
    baseline_rmse: float
    baseline_mae: float
    train_index: np.ndarray = field(repr=False)
    test_index: np.ndarray = field(repr=False)
    y_pred: np.ndarray | None = field(default=None, repr=False)
    y_pred_baseline: np.ndarray | None = field(default=None, repr=False)
    inner_rmse: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _summary(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


@dataclass(frozen=True)
class EvalReport:
    """Per-fold results plus means and sample standard deviations."""

    per_fold: tuple[FoldResult, ...]

    def _ok(self):
        return [f for f in self.per_fold if not f.failed]

    @property
    def mean_rmse(self):
        return _summary([f.rmse for f in self._ok()])[0]

    @property
    def std_rmse(self):
        return _summary([f.rmse for f in self._ok()])[1]

    @property
    def mean_mae(self):
        return _summary([f.mae for f in self._ok()])[0]

    @property
    def std_mae(self):
        return _summary([f.mae for f in self._ok()])[1]

    @property
    def baseline(self) -> dict:
        ok = self._ok()
        r, sr = _summary([f.baseline_rmse for f in ok])
        m, sm = _summary([f.baseline_mae for f in ok])
        return {"mean_rmse": r, "std_rmse": sr, "mean_mae": m, "std_mae": sm}

    def to_dict(self) -> dict:
        return {
            "per_fold": [
                {"repeat": f.repeat, "fold": f.fold, "chosen_k": f.chosen_k,
                 "rmse": f.rmse, "mae": f.mae,
                 "baseline_rmse": f.baseline_rmse, "baseline_mae": f.baseline_mae,
                 "inner_rmse": {str(k): v for k, v in f.inner_rmse.items()},
                 "error": f.error}
                for f in self.per_fold
            ],
            "dogr": {"mean_rmse": self.mean_rmse, "std_rmse": self.std_rmse,
                     "mean_mae": self.mean_mae, "std_mae": self.std_mae},
            "baseline": self.baseline,
        }

    def table(self) -> str:
        lines = [f"{'repeat':>6} {'fold':>4} {'K':>3} {'rmse':>12} {'mae':>12} {'mlr_rmse':>12} {'mlr_mae':>12}"]
        for f in self.per_fold:
            k = "-" if f.chosen_k is None else str(f.chosen_k)
            lines.append(
                f"{f.repeat:>6} {f.fold:>4} {k:>3} {f.rmse:>12.4f} {f.mae:>12.4f} "
                f"{f.baseline_rmse:>12.4f} {f.baseline_mae:>12.4f}"
            )
        b = self.baseline
        lines.append(
            f"DoGR  RMSE {self.mean_rmse:.3f} (+/- {self.std_rmse:.3f})  MAE {self.mean_mae:.3f} (+/- {self.std_mae:.3f})"
        )
        lines.append(
            f"MLR   RMSE {b['mean_rmse']:.3f} (+/- {b['std_rmse']:.3f})  MAE {b['mean_mae']:.3f} (+/- {b['std_mae']:.3f})"
        )
        return "\n".join(lines)

    def prediction_rows(self, d: Dataset) -> list[tuple]:
        """(row index, y_true, y_pred_dogr, y_pred_mlr, fold) for every held-out row."""
        rows = []
        for f in self.per_fold:
            if f.failed or f.y_pred is None:
                continue
            for i, a, b in zip(f.test_index, f.y_pred, f.y_pred_baseline):
                rows.append((int(i), float(d.outcome[i]), float(a), float(b), f.fold))
        return rows


def _mlr_predict(train: Dataset, X_test) -> np.ndarray:
    return wls_fit(train.features, train.outcome, np.ones(train.n)).predict(X_test)


def _inner_select(train: Dataset, cv: CvConfig, fit_cfg: FitConfig, rng) -> tuple[int | None, dict]:
    splits = kfold_indices(train.n, cv.inner_folds, rng)
    scores = {}
    for k in cv.k_grid:
        cfg = fit_cfg.replace(n_components=k)
        errs = []
        try:
            for i, test in enumerate(splits):
                tr = np.concatenate([s for j, s in enumerate(splits) if j != i])
                m = fit(train.subset(tr), cfg)
                errs.append(rmse(train.outcome[test], predict_rows(m, train.features[test], cv.prediction_mode)))
        except DogrError as exc:
            log.debug("K=%d disqualified in inner CV: %s", k, exc)
            continue
        scores[k] = float(np.mean(errs))
    if not scores:
        return None, scores
    best = min(scores, key=lambda k: (scores[k], k))
    return best, scores


def _outer_fold(d: Dataset, cv: CvConfig, fit_cfg: FitConfig, repeat, fold, train_idx, test_idx, inner_seed):
    train, test = d.subset(train_idx), d.subset(test_idx)
    base = _mlr_predict(train, test.features)
    b_rmse, b_mae = rmse(test.outcome, base), mae(test.outcome, base)
    rng = np.random.default_rng(inner_seed)
    best, scores = _inner_select(train, cv, fit_cfg, rng)
    common = dict(fold=fold, repeat=repeat, baseline_rmse=b_rmse, baseline_mae=b_mae,
                  train_index=train_idx, test_index=test_idx, inner_rmse=scores,
                  y_pred_baseline=base)
    if best is None:
        return FoldResult(chosen_k=None, rmse=math.nan, mae=math.nan,
                          error="every K failed in inner cross-validation", **common)
    # refit failure falls through to the next-best K from the inner loop
    failures = []
    for k in sorted(scores, key=lambda j: (scores[j], j)):
        try:
            m = fit(train, fit_cfg.replace(n_components=k))
            break
        except DogrError as exc:
            failures.append(f"K={k}: {exc}")
            log.debug("refit with K=%d failed: %s", k, exc)
    else:
        return FoldResult(chosen_k=None, rmse=math.nan, mae=math.nan,
                          error="every refit failed: " + "; ".join(failures), **common)
    pred = predict_rows(m, test.features, cv.prediction_mode)
    return FoldResult(chosen_k=k, rmse=rmse(test.outcome, pred), mae=mae(test.outcome, pred),
                      y_pred=pred, **common)


def nested_cv(d: Dataset, cv: CvConfig, fit_cfg: FitConfig, threads: int | None = None) -> EvalReport:
    """Nested cross-validation with K chosen by inner-CV RMSE.

    For every repeat the rows are shuffled and cut into ``outer_folds``
    chunks. Within each outer training split an inner CV over ``k_grid``
    picks the K with the lowest mean RMSE (ties go to the smaller K); the
    model is then refit on the whole outer training split and scored on
    the held-out chunk; if that refit fails the next-best K is tried. The pooled regression baseline uses the same
    splits. Folds whose every K fails are kept in the report with an error
    and left out of the summary statistics.
    """
    seeds = np.random.SeedSequence(int(cv.seed) % 2**64)
    jobs = []
    for r, rep_seed in enumerate(seeds.spawn(cv.repeats)):
        outer_seed, *inner_seeds = rep_seed.spawn(cv.outer_folds + 1)
        folds = kfold_indices(d.n, cv.outer_folds, np.random.default_rng(outer_seed))
        for f, test_idx in enumerate(folds):
            train_idx = np.sort(np.concatenate([s for j, s in enumerate(folds) if j != f]))
            jobs.append((r, f, train_idx, test_idx, inner_seeds[f]))

    def run(job):
        r, f, tr, te, s = job
        return _outer_fold(d, cv, fit_cfg, r, f, tr, te, s)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for f in results:
        if f.failed:
            log.warning("repeat %d fold %d failed: %s", f.repeat, f.fold, f.error)
    return EvalReport(tuple(results))
