import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_jacobi

from simgcf.errors import RankDeficientError
from simgcf.filters import (
    FilterSpec,
    ScalerParams,
    eval_jacobi_backbone,
    eval_jacobi_basis,
    eval_monomial,
    eval_scaler,
    filter_loss,
    fit_monomial,
    jacobi_bases,
    lightgcn_filter,
    quadrant_signs,
    sample_points,
    signed_coefficients,
    waveform_table,
)


def test_monomial_values():
    assert eval_monomial([0.25] * 4, 1.0) == 1.0
    assert eval_monomial([1], -0.7) == 1.0
    assert eval_monomial([0, 1, 0, 2], 0.5) == pytest.approx(0.75)


def test_jacobi_hand_values():
    assert eval_jacobi_basis(0.7, 1.3, 0, 0.2) == 1.0
    assert eval_jacobi_basis(0, 0, 1, 0.3) == pytest.approx(0.3)
    assert eval_jacobi_basis(0, 0, 2, 0.5) == pytest.approx(-0.125)
    assert eval_jacobi_backbone(1, 1, 0, 0.4) == 1.0
    assert eval_jacobi_backbone(0, 0, 1, 1.0) == pytest.approx(1.0)
    assert eval_jacobi_backbone(0, 0, 2, 0.0) == pytest.approx(1 / 6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 3.0), st.floats(-0.9, 3.0), st.integers(0, 8))
def test_jacobi_matches_scipy(a, b, k):
    lam = np.linspace(-1, 1, 17)
    ours = eval_jacobi_basis(a, b, k, lam)
    ref = eval_jacobi(k, a, b, lam)
    assert np.allclose(ours, ref, rtol=1e-10, atol=1e-10)


def test_jacobi_bases_shape():
    assert jacobi_bases(1, 1, 3, np.zeros(5)).shape == (4, 5)


def test_jacobi_parameter_domain():
    with pytest.raises(ValueError):
        eval_jacobi_basis(-1.5, 0, 2, 0.1)


def test_scaler_values():
    assert eval_scaler(ScalerParams(1, 0, 0.3), 0.8) == 0.5
    assert eval_scaler(ScalerParams(2.5, -4, 0.2), -0.2) == pytest.approx(1.25)
    p = ScalerParams(1, -10, 0)
    assert eval_scaler(p, 1.0) == pytest.approx(1 / (1 + math.exp(-10)))
    assert eval_scaler(p, -1.0) == pytest.approx(4.54e-5, rel=1e-2)


def test_scaler_extreme_steepness_is_finite():
    lam = np.linspace(-1, 1, 101)
    with np.errstate(over="raise"):
        g = eval_scaler(ScalerParams(1, -5000, 0), lam)
    assert np.isfinite(g).all()


def test_scaler_needs_positive_mu():
    with pytest.raises(ValueError):
        ScalerParams(0.0, -1, 0)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.1, 5), st.floats(-20, 20).filter(lambda a: abs(a) > 1e-3), st.floats(-1, 1))
def test_scaler_range_and_monotonicity(mu, alpha, beta):
    lam = np.linspace(-1, 1, 50)
    g = eval_scaler(ScalerParams(mu, alpha, beta), lam)
    assert np.all(g >= 0) and np.all(g <= mu)
    d = np.diff(g)
    assert np.all(d * -np.sign(alpha) >= -1e-15)


def test_quadrant_signs():
    assert quadrant_signs("I", 2).tolist() == [1, 1, 1]
    assert quadrant_signs("IV", 2).tolist() == [-1, -1, -1]
    assert quadrant_signs("II", 2).tolist() == [1, -1, 1]
    assert signed_coefficients([1, 1, 1], "III").tolist() == [-1, 1, -1]


def test_apply_quadrant_constant_term():
    spec = FilterSpec(basis="monomial", degree=2, base_coefficients=(0.3, 0.5, 0.2))
    assert spec.apply_quadrant(0.0) == pytest.approx(0.3)


coeff_lists = st.lists(st.floats(0.01, 2.0), min_size=1, max_size=7)


@settings(max_examples=100, deadline=None)
@given(coeff_lists, st.floats(-1, 1))
def test_quadrant_mirror_identities(coeffs, lam):
    f = {q: eval_monomial(signed_coefficients(coeffs, q), lam) for q in ("I", "II", "III", "IV")}
    f_neg = eval_monomial(coeffs, -lam)
    assert f["II"] == pytest.approx(f_neg, abs=1e-12)
    assert f["III"] == pytest.approx(-f_neg, abs=1e-12)
    assert f["IV"] == pytest.approx(-f["I"], abs=1e-12)
    assert abs(f["III"]) == pytest.approx(abs(eval_monomial(coeffs, -lam)), abs=1e-12)


def test_fit_constant_and_in_span():
    res = fit_monomial(lambda x: np.ones_like(x), 3)
    assert np.allclose(res.coefficients, [1, 0, 0, 0], atol=1e-10)
    res = fit_monomial(lambda x: 0.5 * x**2 + 0.25, 2, samples=64)
    assert np.allclose(res.coefficients, [0.25, 0, 0.5], atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=7))
def test_fit_recovers_polynomials(coeffs):
    res = fit_monomial(lambda x: eval_monomial(coeffs, x), len(coeffs) - 1)
    assert np.max(np.abs(res.coefficients - coeffs)) < 1e-8


def test_fit_is_locally_optimal():
    spec = FilterSpec(scaler=ScalerParams(1, -3, 0))
    res = fit_monomial(spec.target, 3)
    base = filter_loss(res.coefficients, spec.target, res.points)
    for k in range(4):
        for step in (1e-3, -1e-3):
            c = res.coefficients.copy()
            c[k] += step
            assert filter_loss(c, spec.target, res.points) >= base


def test_fit_random_points_are_seeded():
    a = sample_points(32, seed=4)
    assert np.array_equal(a, sample_points(32, seed=4))
    assert a.min() >= -1 and a.max() <= 1
    assert np.array_equal(sample_points(3), [-1, 0, 1])


def test_rank_deficient_fit():
    with pytest.raises(RankDeficientError):
        fit_monomial(lambda x: x, 5, samples=3)


def test_scaled_jacobi_fit_held_out():
    spec = FilterSpec(a=0.3, b=0.3, degree=3, scaler=ScalerParams(1, -3, 0))
    res = fit_monomial(spec.target, 4, samples=1024)
    held = np.random.default_rng(0).uniform(-1, 1, 256)
    rmse = np.sqrt(np.mean((eval_monomial(res.coefficients, held) - spec.target(held)) ** 2))
    assert rmse < 0.02


def test_constant_scaler_halves_and_doubles():
    lam = np.linspace(-1, 1, 9)
    base = FilterSpec(basis="monomial", degree=2, base_coefficients=(0.2, 0.3, 0.5))
    half = FilterSpec(basis="monomial", degree=2, base_coefficients=(0.2, 0.3, 0.5), scaler=ScalerParams(1, 0, 0))
    same = FilterSpec(basis="monomial", degree=2, base_coefficients=(0.2, 0.3, 0.5), scaler=ScalerParams(2, 0, 0))
    assert np.allclose(half.scaled(lam), 0.5 * base.backbone(lam))
    assert np.allclose(same.scaled(lam), base.backbone(lam))


def test_step_scaler_limits():
    spec = FilterSpec(basis="monomial", degree=0, base_coefficients=(1.0,), scaler=ScalerParams(1, -50, 0))
    assert spec.scaled(0.5) == pytest.approx(1.0, abs=1e-8)
    assert spec.scaled(-0.5) == pytest.approx(0.0, abs=1e-8)


def test_fit_constant_scaler_on_unit_backbone():
    spec = FilterSpec(basis="monomial", degree=3, base_coefficients=(1, 0, 0, 0), scaler=ScalerParams(1, 0, 0)).fit()
    assert np.allclose(spec.fitted_coefficients, [0.5, 0, 0, 0], atol=1e-10)


def test_quadrant_three_export_is_signed():
    spec = FilterSpec(quadrant="III", scaler=ScalerParams()).fit()
    c = spec.propagation_coefficients()
    assert np.array_equal(np.sign(c), [-1, 1, -1, 1])
    assert np.allclose(np.abs(c), np.abs(spec.fitted_coefficients))
    d = spec.to_dict()
    assert d["propagation_coefficients"] == c.tolist()


def test_base_coefficient_validation():
    with pytest.raises(ValueError):
        FilterSpec(basis="monomial", degree=1, base_coefficients=(1.0, -0.5))
    with pytest.raises(ValueError):
        FilterSpec(basis="monomial", degree=1, base_coefficients=(0.0, 0.0))
    with pytest.raises(ValueError):
        FilterSpec(basis="monomial", degree=2, base_coefficients=(1.0,))
    with pytest.raises(ValueError):
        FilterSpec(quadrant="V")


def test_json_round_trip():
    spec = FilterSpec(a=0.5, b=1.5, quadrant="II", scaler=ScalerParams(1.2, -2, 0.5)).fit()
    assert FilterSpec.from_json(spec.to_json()) == spec


def test_negated_mirrors_across_axis():
    spec = FilterSpec(quadrant="II", scaler=ScalerParams()).fit()
    assert np.allclose(spec.negated().propagation_coefficients(), -spec.propagation_coefficients())


def test_lightgcn_uniform():
    assert np.allclose(lightgcn_filter(3).propagation_coefficients(), 0.25)


def test_waveform_table_columns():
    rows = waveform_table(FilterSpec(scaler=ScalerParams()).fit(), points=5)
    assert len(rows) == 5
    assert set(rows[0]) == {"lambda", "f", "g", "f_scaled", "f_fit"}
    assert rows[0]["lambda"] == -1.0 and rows[-1]["lambda"] == 1.0
