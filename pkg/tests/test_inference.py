import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import linear_dataset, random_model
from dogr.inference import (
    coefficient_report,
    coefficient_rows,
    coefficient_z_test,
    component_outcome_summary,
    membership,
    posterior_weights,
    predict,
    predict_rows,
    radar_export,
)
from dogr.model import Component, Dataset, FitConfig, Model, component_regression_value, e_step, fit
from dogr.numerics import WlsSolution, wls_fit

MODES = ("global_weights", "posterior_weights")


def normal_two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2.0))


def two_lines(w=(0.5, 0.5)):
    return Model(
        (Component(w[0], [0.0], [[1.0]], [0.0, 1.0], 1.0),
         Component(w[1], [0.0], [[1.0]], [10.0, 1.0], 1.0)),
        ("x",),
    )


# ---------------------------------------------------------------------------
# predict


@pytest.mark.parametrize("mode", MODES)
def test_single_component_prediction_is_regression_value(rng, mode):
    m = random_model(rng, 3, 1)
    c = m.components[0]
    X = rng.normal(size=(1000, 3))
    assert np.allclose(predict_rows(m, X, mode), [component_regression_value(c, x) for x in X], atol=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_symmetric_average(mode):
    assert predict(two_lines(), [0.0], mode) == pytest.approx(5.0)


def test_mode_aliases():
    m = two_lines((0.2, 0.8))
    assert predict(m, [0.0], "global") == predict(m, [0.0], "global_weights")
    with pytest.raises(ValueError):
        predict(m, [0.0], "median")


def test_predict_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        predict(random_model(rng, 2, 2), [1.0, 2.0, 3.0])


def test_global_mode_is_affine(rng):
    m = random_model(rng, 3, 4)
    base = predict(m, np.zeros(3), "global_weights")
    for _ in range(50):
        a, b = rng.normal(size=3), rng.normal(size=3)
        lhs = predict(m, a + b, "global_weights") - predict(m, b, "global_weights")
        rhs = predict(m, a, "global_weights") - base
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_posterior_weights_normalized(rng):
    m = random_model(rng, 2, 5)
    W = posterior_weights(m, rng.normal(scale=20.0, size=(500, 2)))
    assert np.all(W >= 0)
    assert np.allclose(W.sum(axis=1), 1.0, atol=1e-10)


def test_posterior_prediction_adapts_to_location():
    m = Model(
        (Component(0.5, [-10.0], [[1.0]], [0.0, 0.0], 1.0),
         Component(0.5, [10.0], [[1.0]], [100.0, 0.0], 1.0)),
        ("x",),
    )
    assert predict(m, [-10.0], "posterior_weights") == pytest.approx(0.0, abs=1e-9)
    assert predict(m, [10.0], "posterior_weights") == pytest.approx(100.0, abs=1e-9)
    assert predict(m, [10.0], "global_weights") == pytest.approx(50.0)


# ---------------------------------------------------------------------------
# membership


def test_membership_single_component(rng):
    assert membership(random_model(rng, 2, 1), [0.3, 0.1]).tolist() == [1.0]


def test_membership_separation():
    m = Model(
        (Component(0.5, [0.0], [[1.0]], [0.0, 1.0], 1.0),
         Component(0.5, [15.0], [[1.0]], [0.0, 1.0], 1.0)),
        ("x",),
    )
    assert membership(m, [0.0])[0] > 0.999
    assert membership(m, [0.0], 0.0)[0] > 0.999


def test_membership_with_outcome_matches_e_step(rng):
    m = random_model(rng, 2, 2)
    x, y = np.array([0.4, -1.1]), 0.7
    row = e_step(m, Dataset(x[None, :], [y], m.feature_names))[0]
    assert np.allclose(membership(m, x, y), row, atol=1e-15)


# ---------------------------------------------------------------------------
# coefficient z-test


def test_z_equal_betas():
    z, p, undefined = coefficient_z_test(1.5, 0.2, 1.5, 0.3)
    assert z == 0.0 and p == 1.0 and not undefined


def test_z_at_196_gives_five_percent():
    se0, se1 = 0.3, 0.4
    diff = 1.959963984540054 * math.sqrt(se0**2 + se1**2)
    z, p, _ = coefficient_z_test(1.0 + diff, se0, 1.0, se1)
    assert p == pytest.approx(normal_two_sided_p(z), abs=1e-12)
    assert p == pytest.approx(0.05, abs=1e-3)


def test_z_undefined_when_both_se_zero():
    z, p, undefined = coefficient_z_test(1.0, 0.0, 2.0, 0.0)
    assert undefined and p == 1.0 and math.isnan(z)


@given(
    st.floats(-100, 100), st.floats(1e-3, 10), st.floats(-100, 100), st.floats(1e-3, 10)
)
def test_z_antisymmetry(b0, s0, b1, s1):
    z01, p01, _ = coefficient_z_test(b0, s0, b1, s1)
    z10, p10, _ = coefficient_z_test(b1, s1, b0, s0)
    assert z01 == pytest.approx(-z10, abs=1e-12)
    assert p01 == pytest.approx(p10, abs=1e-12)
    assert 0.0 <= p01 <= 1.0


def test_report_flags_simpson_reversal():
    # three parallel downward lines whose offsets increase with x: the pooled trend is upward
    rng = np.random.default_rng(8)
    xs, ys = [], []
    for k, (cx, b0) in enumerate([(0.0, 0.0), (10.0, 30.0), (20.0, 60.0)]):
        x = cx + rng.normal(size=200)
        xs.append(x)
        ys.append(b0 - x + 0.3 * rng.normal(size=200))
    d = Dataset(np.concatenate(xs)[:, None], np.concatenate(ys), ("x",))
    m = fit(d, FitConfig(n_components=3, seed=1, n_restarts=3))
    pooled = wls_fit(d.features, d.outcome, np.ones(d.n))
    assert pooled.coefficients[1] > 0
    (rep,) = coefficient_report(m, pooled)
    assert rep.feature == "x"
    for row in rep.per_component:
        assert row.beta == pytest.approx(-1.0, abs=0.1)
        assert row.reversal_flag and row.p_value <= 0.001
    rows = coefficient_rows([rep])
    assert rows[0]["component"] == "pooled" and len(rows) == 4


def test_report_invariant_reversal_definition(rng):
    m = random_model(rng, 3, 3)
    comps = tuple(
        Component(c.weight, c.mean, c.covariance, c.coefficients, c.residual_variance,
                  rng.uniform(0.01, 2.0, size=4))
        for c in m.components
    )
    m = Model(comps, m.feature_names)
    pooled = WlsSolution(rng.normal(size=4), rng.uniform(0.01, 2.0, size=4), 1.0, 10.0)
    for r in coefficient_report(m, pooled):
        for c in r.per_component:
            expected = np.sign(c.beta) != np.sign(r.pooled_beta) and c.p_value <= 0.05
            assert c.reversal_flag == expected
            assert 0 <= c.p_value <= 1


def test_report_dimension_mismatch(rng):
    m = random_model(rng, 2, 2)
    pooled = WlsSolution(np.zeros(4), np.ones(4), 0.0, 1.0)
    with pytest.raises(ValueError):
        coefficient_report(m, pooled)


# ---------------------------------------------------------------------------
# radar export


def test_radar_single_component(rng):
    m = random_model(rng, 3, 1)
    m = Model((Component(1.0, [1.0, 2.0, 3.0], np.eye(3), np.zeros(4), 1.0),), m.feature_names)
    out = radar_export(m)
    assert list(out["components"][0]["normalized_mu"].values()) == [1.0, 1.0, 1.0]


def test_radar_hand_case():
    m = Model(
        (Component(0.5, [2.0, 4.0], np.eye(2), [1.0, 0.0, 0.0], 1.0),
         Component(0.5, [4.0, 2.0], np.eye(2), [3.0, 1.0, 1.0], 1.0)),
        ("a", "b"),
    )
    rows = radar_export(m)["components"]
    assert rows[0]["normalized_mu"] == {"a": 0.5, "b": 1.0}
    assert rows[1]["normalized_mu"] == {"a": 1.0, "b": 0.5}
    assert rows[1]["outcome_mean"] == pytest.approx(9.0)


def test_radar_max_is_exactly_one(rng):
    for _ in range(20):
        m = random_model(rng, 4, 3)
        shifted = tuple(
            Component(c.weight, np.abs(c.mean) + 0.1, c.covariance, c.coefficients, c.residual_variance)
            for c in m.components
        )
        out = radar_export(Model(shifted, m.feature_names))
        for f in m.feature_names:
            assert max(c["normalized_mu"][f] for c in out["components"]) == 1.0


def test_radar_non_positive_feature_warns():
    m = Model(
        (Component(0.5, [-2.0], [[1.0]], [0.0, 0.0], 1.0),
         Component(0.5, [-4.0], [[1.0]], [0.0, 0.0], 1.0)),
        ("a",),
    )
    with pytest.warns(RuntimeWarning):
        out = radar_export(m)
    assert out["warnings"] == ["abs_max_normalization:a"]
    assert [c["normalized_mu"]["a"] for c in out["components"]] == [-0.5, -1.0]


def test_outcome_summary_single_component(rng):
    d = linear_dataset(rng, 50, 1)
    m = fit(d, FitConfig(n_components=1))
    (s,) = component_outcome_summary(m, d)
    assert s["outcome_mean"] == pytest.approx(d.outcome.mean())
    assert s["outcome_weighted_se"] == pytest.approx(d.outcome.std() / math.sqrt(50))
