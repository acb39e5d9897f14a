import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logconcave import (
    DegenerateDataError,
    DomainError,
    WeightedData,
    cdf,
    diagnostics,
    eval_objective,
    gradient,
    hessian,
    mean_and_second_moment,
    mean_integral_of_F,
    newton_maximize,
    prepare,
)
from logconcave.objective import coercivity_bound
from oracles import central_gradient, central_jacobian, density_integral, objective_quad, random_weighted

E = math.e
UNIT = WeightedData([0.0, 1.0], [0.5, 0.5])


# --- prepare ---------------------------------------------------------------


def test_prepare_merges_ties():
    d = prepare([3, 1, 3, 2])
    assert d.x.tolist() == [1.0, 2.0, 3.0]
    assert d.p.tolist() == [0.25, 0.25, 0.5]


def test_prepare_normalizes():
    d = prepare([0, 1], [2, 2])
    assert d.p.tolist() == [0.5, 0.5]
    assert d.renormalized


def test_prepare_degenerate():
    with pytest.raises(DegenerateDataError):
        prepare([5, 5])


def test_prepare_negative_weight():
    with pytest.raises(DomainError):
        prepare([0, 1, 2], [1, -1, 1])


def test_prepare_drops_zero_weight():
    d = prepare([0, 1, 2], [1, 0, 1])
    assert d.x.tolist() == [0.0, 2.0]


def test_weighted_data_is_immutable():
    with pytest.raises(ValueError):
        UNIT.x[0] = 3.0


def test_weighted_data_checks_sum():
    with pytest.raises(DomainError):
        WeightedData([0.0, 1.0], [0.5, 0.6])


# --- objective, gradient, hessian -------------------------------------------


def test_objective_examples():
    assert eval_objective([0.0, 0.0], UNIT) == -1.0
    h = math.log(0.5)
    assert eval_objective([h, h], WeightedData([0.0, 1.0], [0.5, 0.5])) == pytest.approx(h - 0.5, abs=1e-15)
    d3 = WeightedData([0.0, 1.0, 2.0], [1 / 3, 1 / 3, 1 / 3])
    assert eval_objective([0.0, 0.0, 0.0], d3) == pytest.approx(-2.0, abs=1e-15)


def test_objective_matches_quadrature():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, p = random_weighted(rng, 6)
        psi = rng.normal(0, 2, 6)
        assert eval_objective(psi, WeightedData(x, p)) == pytest.approx(objective_quad(x, p, psi), rel=1e-11)


def test_gradient_examples():
    np.testing.assert_allclose(gradient([0.0, 0.0], WeightedData([0.0, 1.0], [0.3, 0.7])), [-0.2, 0.2], atol=1e-15)
    np.testing.assert_allclose(gradient([0.0, 0.0], UNIT), [0.0, 0.0], atol=1e-15)


def test_hessian_example():
    np.testing.assert_allclose(hessian([0.0, 0.0], UNIT), [[-1 / 3, -1 / 6], [-1 / 6, -1 / 3]], atol=1e-15)


def test_gradient_and_hessian_by_finite_differences(backend):
    rng = np.random.default_rng(1)
    for m in (2, 3, 5, 8):
        x, p = random_weighted(rng, m)
        d = WeightedData(x, p)
        psi = rng.normal(0, 1.5, m)
        g = central_gradient(lambda v: eval_objective(v, d), psi)
        np.testing.assert_allclose(gradient(psi, d), g, atol=1e-6)
        H = central_jacobian(lambda v: gradient(v, d), psi)
        np.testing.assert_allclose(hessian(psi, d), H, atol=1e-5)


def test_hessian_tridiagonal_and_negative_definite():
    rng = np.random.default_rng(2)
    x, p = random_weighted(rng, 7)
    d = WeightedData(x, p)
    H = hessian(rng.normal(0, 2, 7), d)
    i, k = np.indices(H.shape)
    assert np.all(H[np.abs(i - k) > 1] == 0.0)
    np.testing.assert_array_equal(H, H.T)
    assert np.all(np.linalg.eigvalsh(H) < 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strict_concavity(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 9))
    x, p = random_weighted(rng, m)
    d = WeightedData(x, p)
    a = rng.normal(0, 2, m)
    b = a + rng.normal(0, 1, m)
    mid = eval_objective((a + b) / 2, d)
    assert mid > (eval_objective(a, d) + eval_objective(b, d)) / 2


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coercivity_bound(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 9))
    x, p = random_weighted(rng, m)
    d = WeightedData(x, p)
    psi = rng.normal(0, 10, m)
    assert eval_objective(psi, d) <= coercivity_bound(psi, d) + 1e-12


# --- distribution function and moments --------------------------------------


def test_cdf_examples():
    assert cdf([0.0, 0.0], UNIT, 1.0) == 1.0
    assert cdf([0.0, 0.0], UNIT, 0.25) == pytest.approx(0.25, abs=1e-15)
    assert cdf([0.0, 1.0], UNIT, 1.0) == pytest.approx(E - 1, rel=1e-14)


def test_cdf_domain():
    with pytest.raises(DomainError):
        cdf([0.0, 0.0], UNIT, 1.5)


def test_cdf_monotone_and_matches_quadrature():
    rng = np.random.default_rng(3)
    x, p = random_weighted(rng, 5)
    d = WeightedData(x, p)
    psi = rng.normal(0, 1, 5)
    r = np.linspace(x[0], x[-1], 101)
    F = cdf(psi, d, r)
    assert np.all(np.diff(F) >= 0)
    for ri, Fi in zip(r[::10], F[::10]):
        sub = x[x < ri]
        if sub.size == 0:
            assert Fi == 0.0
            continue
        xs = np.append(sub, ri)
        ps = np.interp(xs, x, psi)
        assert Fi == pytest.approx(density_integral(xs, ps), rel=1e-11)
    assert cdf(psi, d, x[-1]) == pytest.approx(density_integral(x, psi), rel=1e-12)


def test_moment_examples():
    np.testing.assert_allclose(mean_and_second_moment([0.0, 0.0], UNIT), (0.5, 1 / 3), rtol=1e-14)
    np.testing.assert_allclose(mean_and_second_moment([0.0, 0.0], UNIT, 0.5), (0.0, 1 / 12), atol=1e-15)
    first, second = mean_and_second_moment([0.0, 1.0], UNIT)
    assert first == pytest.approx(1.0, rel=1e-14)  # integral of x e^x on [0, 1]
    assert second == pytest.approx(E - 2, rel=1e-13)


def test_moments_match_quadrature():
    rng = np.random.default_rng(4)
    x, p = random_weighted(rng, 6)
    d = WeightedData(x, p)
    psi = rng.normal(0, 1, 6)
    a = 0.3
    first, second = mean_and_second_moment(psi, d, a)
    assert first == pytest.approx(density_integral(x, psi, lambda u: u - a), rel=1e-10, abs=1e-13)
    assert second == pytest.approx(density_integral(x, psi, lambda u: (u - a) ** 2), rel=1e-10)


def test_mean_integral_of_F_examples():
    assert mean_integral_of_F([0.0, 0.0], UNIT, 0) == pytest.approx(0.5)
    d = WeightedData([0.0, 2.0], [0.5, 0.5])
    assert mean_integral_of_F([0.0, 0.0], d, 0) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        mean_integral_of_F([0.0, 0.0], UNIT, 1)


def test_mean_integral_of_F_matches_quadrature():
    from scipy import integrate

    rng = np.random.default_rng(5)
    x, p = random_weighted(rng, 4)
    d = WeightedData(x, p)
    psi = rng.normal(0, 1, 4)
    for k in range(3):
        val, _ = integrate.quad(lambda u: cdf(psi, d, u), x[k], x[k + 1], epsabs=0, epsrel=1e-12)
        got = mean_integral_of_F(psi, d, k)
        assert got == pytest.approx(val / (x[k + 1] - x[k]), rel=1e-9)
        F = cdf(psi, d, np.array([x[k], x[k + 1]]))
        assert F[0] < got < F[1]


# --- distribution-function characterization of the unrestricted maximizer ---


def test_diagnostics_examples():
    rep = diagnostics([0.0, 0.0], UNIT)
    assert rep.max_abs() == 0.0
    rep = diagnostics([0.0, 0.0], WeightedData([0.0, 1.0], [0.3, 0.7]))
    assert rep.interval_residuals[0] == pytest.approx(0.2)


def test_mean_residual_definition():
    rng = np.random.default_rng(6)
    x, p = random_weighted(rng, 5)
    d = WeightedData(x, p)
    psi = rng.normal(0, 1, 5)
    expected = float(np.dot(p, x)) - density_integral(x, psi, lambda u: u)
    assert diagnostics(psi, d).mean_residual == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stationarity_iff_residuals_vanish(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 12))
    x, p = random_weighted(rng, m)
    d = WeightedData(x, p)
    psi = newton_maximize(d)
    assert np.max(np.abs(gradient(psi, d))) <= 1e-10
    assert diagnostics(psi, d).max_abs() <= 1e-8
    # away from the maximizer some residual is clearly nonzero
    off = psi + rng.normal(0, 0.1, m)
    assert diagnostics(off, d).max_abs() > 1e-6
