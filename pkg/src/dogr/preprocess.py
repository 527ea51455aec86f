"""Data ingestion, multicollinearity pruning and the two-subgroup
synthetic generator."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from dogr.exceptions import (
    CsvError,
    DataError,
    EmptyFileError,
    MissingColumnError,
    NonNumericCellError,
    SingularDesignError,
)
from dogr.model import Dataset
from dogr.numerics import wls_fit

# ---------------------------------------------------------------------------
# CSV


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(row, column, text) from None
    if not math.isfinite(value):
        raise NonNumericCellError(row, column, text)
    return value


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a CSV file.

    Data rows are numbered from 1 (the header is row 0) in error messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if len(set(header)) != len(header):
            raise CsvError(f"{path}: duplicate column names in header {header}")
        body = []
        for i, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise CsvError(f"{path}: row {i} has {len(raw)} cells, header has {len(header)}")
            body.append([_parse_cell(c.strip(), i, header[j]) for j, c in enumerate(raw)])
    if not body:
        raise EmptyFileError(f"{path}: no data rows")
    return header, np.array(body, dtype=float)


def load_csv(path, outcome_column: str) -> Dataset:
    """Read a CSV into a :class:`Dataset`; every other column becomes a feature."""
    header, body = read_table(path)
    if outcome_column not in header:
        raise MissingColumnError(f"{path}: outcome column {outcome_column!r} not in header {header}")
    j = header.index(outcome_column)
    names = [h for h in header if h != outcome_column]
    if not names:
        raise DataError(f"{path}: no feature columns besides {outcome_column!r}")
    X = np.delete(body, j, axis=1)
    return Dataset(X, body[:, j], tuple(names), outcome_column)


def format_float(value, precision: int = 17) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), f".{precision}g")


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def rows_to_csv(columns, rows, precision: int = 17) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_float(v, precision) for v in r])
    return buf.getvalue()


def dataset_to_csv(d: Dataset, precision: int = 17) -> str:
    cols = list(d.feature_names) + [d.outcome_name]
    body = np.column_stack([d.features, d.outcome])
    return rows_to_csv(cols, body.tolist(), precision)


def write_csv(d: Dataset, path, precision: int = 17):
    atomic_write(path, dataset_to_csv(d, precision))


# ---------------------------------------------------------------------------
# VIF


@dataclass(frozen=True)
class VifReport:
    threshold: float
    removed: tuple[tuple[str, float], ...] = field(default=())
    kept: tuple[tuple[str, float], ...] = field(default=())

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if math.isinf(v) else (None if math.isnan(v) else v)

        return {
            "threshold": self.threshold,
            "removed": [{"feature": n, "vif": enc(v)} for n, v in self.removed],
            "kept": [{"feature": n, "vif": enc(v)} for n, v in self.kept],
        }


_PERFECT_FIT_TOL = 1e-12


def variance_inflation_factors(X) -> np.ndarray:
    """VIF of every column of ``X``: ``1 / (1 - R^2)`` from regressing it on
    the remaining columns with an intercept. Exact collinearity gives ``inf``."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    out = np.full(p, np.nan)
    if p < 2:
        return out
    for j in range(p):
        target = X[:, j]
        others = np.delete(X, j, axis=1)
        tss = float(np.sum((target - target.mean()) ** 2))
        if tss == 0.0:
            out[j] = np.inf
            continue
        try:
            sol = wls_fit(others, target, np.ones(n))
        except SingularDesignError:
            out[j] = np.inf
            continue
        r2 = 1.0 - sol.weighted_rss / tss
        out[j] = np.inf if r2 >= 1.0 - _PERFECT_FIT_TOL else 1.0 / (1.0 - r2)
    return out


def vif_prune(d: Dataset, threshold: float = 5.0) -> tuple[Dataset, VifReport]:
    """Drop features one at a time, highest VIF first, until all VIFs are at
    most ``threshold``. Ties are broken by the lexicographically smallest
    name. With a single feature left the VIF is undefined and pruning stops.
    """
    names = list(d.feature_names)
    X = np.array(d.features)
    removed = []
    while len(names) >= 2:
        vifs = variance_inflation_factors(X)
        worst = max(vifs)
        if not worst > threshold:
            break
        j = min((n, i) for i, n in enumerate(names) if vifs[i] == worst)[1]
        removed.append((names[j], float(worst)))
        del names[j]
        X = np.delete(X, j, axis=1)
    final = variance_inflation_factors(X)
    report = VifReport(float(threshold), tuple(removed), tuple((n, float(v)) for n, v in zip(names, final)))
    return Dataset(X, d.outcome, tuple(names), d.outcome_name), report


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Per-subgroup sizes, feature distribution and regression line.

    The defaults reproduce the two-subgroup benchmark: 3000 and 2000 rows,
    both centred at x = 500 with variances 100 and 600, lines
    y = 200 + x and y = 800 + x, and residual variance 20.
    """

    component_sizes: tuple[int, ...] = (3000, 2000)
    x_means: tuple = (500.0, 500.0)
    x_variances: tuple = (100.0, 600.0)
    intercepts: tuple[float, ...] = (200.0, 800.0)
    slopes: tuple = (1.0, 1.0)
    residual_variance: float = 20.0
    seed: int = 0

    def __post_init__(self):
        k = len(self.component_sizes)
        lengths = {len(self.x_means), len(self.x_variances), len(self.intercepts), len(self.slopes)}
        if k == 0 or lengths != {k}:
            raise ValueError("component_sizes, x_means, x_variances, intercepts and slopes must share one length")
        if any(int(s) < 1 for s in self.component_sizes):
            raise ValueError("component sizes must be positive")
        if self.residual_variance < 0:
            raise ValueError("residual_variance must be nonnegative")
        dims = {np.atleast_1d(m).size for m in self.x_means}
        dims |= {np.atleast_1d(v).size for v in self.x_variances}
        dims |= {np.atleast_1d(b).size for b in self.slopes}
        if len(dims) != 1:
            raise ValueError("x_means, x_variances and slopes must share one feature dimension")
        if any(np.any(np.atleast_1d(v) <= 0) for v in self.x_variances):
            raise ValueError("x variances must be positive")

    @property
    def p(self) -> int:
        return np.atleast_1d(self.x_means[0]).size


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), return_labels: bool = False):
    """Draw a dataset from ``spec``; rows are shuffled with the spec's seed.

    Features get independent normal coordinates with the given means and
    (diagonal) variances. Uses numpy's PCG64 generator.
    """
    rng = np.random.default_rng(int(spec.seed) % 2**64)
    p = spec.p
    xs, ys, labels = [], [], []
    for c, size in enumerate(spec.component_sizes):
        mean = np.atleast_1d(np.asarray(spec.x_means[c], dtype=float))
        sd = np.sqrt(np.atleast_1d(np.asarray(spec.x_variances[c], dtype=float)))
        slope = np.atleast_1d(np.asarray(spec.slopes[c], dtype=float))
        x = mean + sd * rng.standard_normal((int(size), p))
        noise = math.sqrt(spec.residual_variance) * rng.standard_normal(int(size))
        xs.append(x)
        ys.append(spec.intercepts[c] + x @ slope + noise)
        labels.append(np.full(int(size), c))
    X, y, lab = np.vstack(xs), np.concatenate(ys), np.concatenate(labels)
    order = rng.permutation(X.shape[0])
    names = ("x",) if p == 1 else tuple(f"x{j + 1}" for j in range(p))
    d = Dataset(X[order], y[order], names, "y")
    return (d, lab[order]) if return_labels else d
