"""Choosing the number of components by BIC."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from dogr.exceptions import AllFitsFailedError, DogrError
from dogr.model import Dataset, FitConfig, Model, fit


def parameter_count(k: int, p: int) -> int:
    """Free-parameter count used for BIC: ``k * (p**2 + 2p + 3)``.

    Each component contributes a weight, a mean (p), a covariance counted as
    p**2 entries, p + 1 regression coefficients and a residual variance.
    """
    return k * (p * p + 2 * p + 3)


def bic(log_likelihood: float, k: int, p: int, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return -2.0 * log_likelihood + parameter_count(k, p) * math.log(n)


@dataclass(frozen=True)
class BicRow:
    k: int
    log_likelihood: float
    parameter_count: int
    bic: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class BicSweepResult:
    rows: tuple[BicRow, ...]
    best_k: int
    models: dict

    def table(self) -> list[dict]:
        return [
            {"K": r.k, "loglik": r.log_likelihood, "params": r.parameter_count,
             "bic": r.bic, "selected": r.k == self.best_k, "error": r.error}
            for r in self.rows
        ]


def _fit_k(d: Dataset, cfg: FitConfig, k: int):
    try:
        m = fit(d, cfg.replace(n_components=k, seed=int(cfg.seed) + k))
    except DogrError as exc:
        return k, None, f"{type(exc).__name__}: {exc}"
    return k, m, None


def sweep(d: Dataset, k_range, cfg: FitConfig, threads: int | None = None) -> BicSweepResult:
    """Fit every K in ``k_range`` (seed ``cfg.seed + K``) and pick the minimal BIC.

    Ties go to the smaller K. Fits that raise are kept in the table with
    their error message and excluded from the choice.
    """
    ks = sorted({int(k) for k in k_range})
    if not ks:
        raise ValueError("k_range must not be empty")
    if threads is not None and threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda k: _fit_k(d, cfg, k), ks))
    else:
        results = [_fit_k(d, cfg, k) for k in ks]

    rows, models = [], {}
    for k, m, err in results:
        count = parameter_count(k, d.p)
        if m is None:
            rows.append(BicRow(k, math.nan, count, math.nan, err))
        else:
            models[k] = m
            ll = m.log_likelihood_value
            rows.append(BicRow(k, ll, count, bic(ll, k, d.p, d.n)))
    ok = [r for r in rows if not r.failed]
    if not ok:
        raise AllFitsFailedError("every K in the sweep failed: " + "; ".join(r.error for r in rows))
    best = min(ok, key=lambda r: (r.bic, r.k))
    return BicSweepResult(tuple(rows), best.k, models)
