import math

import numpy as np
import pytest

from conftest import linear_dataset
from dogr.exceptions import AllFitsFailedError
from dogr.model import FitConfig
from dogr.preprocess import SyntheticSpec, generate_synthetic
from dogr.selection import bic, parameter_count, sweep


def test_bic_unit_log_case():
    assert bic(0.0, 1, 1, math.e) == pytest.approx(6.0)


def test_parameter_count_five_components_six_features():
    assert parameter_count(5, 6) == 255


def test_bic_random_inputs(rng):
    for _ in range(50):
        ll = rng.normal(scale=1e3)
        k, p = (int(v) for v in rng.integers(1, 8, size=2))
        n = int(rng.integers(10, 10_000))
        assert bic(ll, k, p, n) == pytest.approx(-2 * ll + k * (p * p + 2 * p + 3) * math.log(n))


def test_bic_increases_with_parameters():
    values = [bic(-100.0, k, 2, 50) for k in range(1, 6)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_bic_rejects_zero_n():
    with pytest.raises(ValueError):
        bic(0.0, 1, 1, 0)


def test_singleton_range(rng):
    d = linear_dataset(rng, 100, 2)
    res = sweep(d, [3], FitConfig())
    assert res.best_k == 3 and len(res.rows) == 1


def test_single_linear_model_selects_one(rng):
    d = linear_dataset(rng, 400, 2)
    res = sweep(d, range(1, 4), FitConfig(seed=2))
    assert res.best_k == 1
    for r in res.rows:
        assert r.parameter_count == r.k * (2 * 2 + 2 * 2 + 3)


def test_synthetic_selects_two():
    d = generate_synthetic(SyntheticSpec(seed=3))
    res = sweep(d, range(1, 5), FitConfig(seed=3))
    assert res.best_k == 2
    assert [r.k for r in res.rows] == [1, 2, 3, 4]
    assert sum(row["selected"] for row in res.table()) == 1


def test_threaded_sweep_is_identical(rng):
    d = linear_dataset(rng, 200, 1)
    a = sweep(d, [1, 2, 3], FitConfig(seed=5))
    b = sweep(d, [3, 1, 2], FitConfig(seed=5), threads=3)
    assert a.rows == b.rows and a.best_k == b.best_k


def test_failed_k_is_excluded(rng):
    d = linear_dataset(rng, 20, 2)
    # K=5 violates the N > K(p+2) precondition
    res = sweep(d, [1, 5], FitConfig())
    assert res.best_k == 1
    failed = [r for r in res.rows if r.failed]
    assert [r.k for r in failed] == [5] and "InsufficientData" in failed[0].error


def test_all_failed(rng):
    with pytest.raises(AllFitsFailedError):
        sweep(linear_dataset(rng, 10, 2), [4, 5], FitConfig())
