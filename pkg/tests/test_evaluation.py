import math

import numpy as np
import pytest

from conftest import linear_dataset
from dogr.evaluation import CvConfig, kfold_indices, mae, nested_cv, rmse
from dogr.model import FitConfig


def test_metric_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0 and mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, -3.0]) == 3.0 and mae([0.0, 0.0], [3.0, -3.0]) == 3.0
    assert rmse([1, 2, 3], [2, 2, 5]) == pytest.approx(math.sqrt(5 / 3))
    assert rmse([1, 2, 3], [2, 2, 5]) == pytest.approx(1.29099, abs=1e-5)
    assert mae([1, 2, 3], [2, 2, 5]) == 1.0


@pytest.mark.parametrize("a,b", [([1.0], [1.0, 2.0]), ([], [])])
def test_metric_errors(a, b):
    with pytest.raises(ValueError):
        rmse(a, b)
    with pytest.raises(ValueError):
        mae(a, b)


@pytest.mark.parametrize("n,k", [(10, 2), (103, 5), (7, 7)])
def test_fold_partition(n, k):
    folds = kfold_indices(n, k, np.random.default_rng(1))
    joined = np.concatenate(folds)
    assert sorted(joined.tolist()) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_cv_config_validation():
    with pytest.raises(ValueError):
        CvConfig(outer_folds=1)
    with pytest.raises(ValueError):
        CvConfig(k_grid=())
    assert CvConfig(k_grid=(3, 1, 3)).k_grid == (1, 3)


def test_structural_two_fold_toy():
    rng = np.random.default_rng(0)
    d = linear_dataset(rng, 10, 1)
    rep = nested_cv(d, CvConfig(outer_folds=2, k_grid=(1,), seed=1), FitConfig())
    assert len(rep.per_fold) == 2
    assert not any(f.failed for f in rep.per_fold)


def test_all_folds_failing_still_reports():
    rng = np.random.default_rng(0)
    d = linear_dataset(rng, 10, 1)
    # 2-3 row inner training splits cannot host even K=1
    rep = nested_cv(d, CvConfig(outer_folds=2, inner_folds=2, k_grid=(1,)), FitConfig())
    assert len(rep.per_fold) == 2 and all(f.failed for f in rep.per_fold)
    assert math.isnan(rep.mean_rmse)


def test_single_linear_model_prefers_k1():
    rng = np.random.default_rng(7)
    d = linear_dataset(rng, 400, 2, noise=1.0)
    rep = nested_cv(d, CvConfig(k_grid=(1, 2), seed=2), FitConfig(seed=2))
    assert sum(f.chosen_k == 1 for f in rep.per_fold) >= 4
    assert rep.mean_rmse == pytest.approx(rep.baseline["mean_rmse"], rel=0.02)


def test_report_invariants_and_determinism():
    rng = np.random.default_rng(9)
    d = linear_dataset(rng, 150, 1)
    cv = CvConfig(outer_folds=3, inner_folds=2, repeats=2, k_grid=(1, 2), seed=4)
    a = nested_cv(d, cv, FitConfig(seed=1))
    b = nested_cv(d, cv, FitConfig(seed=1), threads=4)
    assert len(a.per_fold) == 6
    assert a.to_dict() == b.to_dict()
    for f in a.per_fold:
        assert set(f.train_index).isdisjoint(f.test_index)
        assert len(f.train_index) + len(f.test_index) == d.n
        assert f.rmse >= f.mae >= 0 and f.baseline_rmse >= f.baseline_mae >= 0
        assert len(f.y_pred) == len(f.y_pred_baseline) == len(f.test_index)
    for r in range(2):
        tests = [f.test_index for f in a.per_fold if f.repeat == r]
        assert sorted(np.concatenate(tests).tolist()) == list(range(d.n))
    assert a.std_rmse >= 0 and a.std_mae >= 0
    rows = a.prediction_rows(d)
    assert len(rows) == 2 * d.n


def test_failed_folds_are_reported():
    rng = np.random.default_rng(3)
    d = linear_dataset(rng, 40, 2)
    # K=6 cannot satisfy N > K(p+2) on 16-row inner splits, K=1 can
    rep = nested_cv(d, CvConfig(outer_folds=2, inner_folds=2, k_grid=(1, 6)), FitConfig())
    assert all(f.chosen_k == 1 for f in rep.per_fold)
    assert all(6 not in f.inner_rmse for f in rep.per_fold)
