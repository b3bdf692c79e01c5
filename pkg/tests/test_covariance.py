import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rexsub.covariance import (
    CovarianceParams, cholesky_jitter, cov_matrix, matern, matern_correlation,
    matern_correlation_bessel, solve_range,
)


def test_same_site_adds_nugget():
    assert matern(0.0, CovarianceParams(0.5, 1.0, 1.0, 0.1), same_site=True) == pytest.approx(1.1, abs=1e-15)


def test_exponential_value():
    assert matern(1.0, CovarianceParams(0.5, 1.0, 1.0)) == pytest.approx(math.exp(-1), abs=1e-15)


def test_matern32_value():
    r3 = math.sqrt(3)
    assert matern(1.0, CovarianceParams(1.5, 1.0, 1.0)) == pytest.approx((1 + r3) * math.exp(-r3), abs=1e-15)
    assert matern(1.0, CovarianceParams(1.5, 1.0, 1.0)) == pytest.approx(0.4834, abs=1e-4)


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        matern(-0.1, CovarianceParams(0.5, 1.0, 1.0))


@pytest.mark.parametrize("bad", [
    dict(nu=0, phi=1, sigma2=1), dict(nu=0.5, phi=0, sigma2=1), dict(nu=0.5, phi=1, sigma2=-1),
    dict(nu=0.5, phi=1, sigma2=0, tau2=0), dict(nu=0.5, phi=float("nan"), sigma2=1),
])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        CovarianceParams(**bad)


def test_cov_matrix_single_point():
    p = CovarianceParams(0.5, 0.2, 1.3, 0.2)
    np.testing.assert_allclose(cov_matrix([[0.1, 0.1]], p), [[1.5]])


def test_coincident_points_nugget_only_on_diagonal():
    p = CovarianceParams(1.5, 0.2, 1.0, 0.25)
    K = cov_matrix([[0.3, 0.3], [0.3, 0.3]], p)
    np.testing.assert_allclose(K, [[1.25, 1.0], [1.0, 1.25]])


def test_cov_matrix_elementwise(rng):
    S = rng.random((5, 2))
    p = CovarianceParams(1.5, 0.3, 0.8, 0.05)
    K = cov_matrix(S, p)
    for i in range(5):
        for j in range(5):
            d = math.dist(S[i], S[j])
            assert K[i, j] == pytest.approx(matern(d, p, same_site=(i == j)), abs=1e-15)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_closed_forms_match_bessel(nu, rng):
    d = np.concatenate([rng.uniform(0, 3, 200), [0.0, 1e-8]])
    phi = 0.37
    np.testing.assert_allclose(matern_correlation(d, nu, phi), matern_correlation_bessel(d, nu, phi),
                               rtol=0, atol=1e-10)


@pytest.mark.parametrize("nu", [0.5, 1.5])
def test_monotone_and_decays(nu):
    p = CovarianceParams(nu, 0.4, 2.0)
    d = np.linspace(0, 5, 1001)
    c = matern(d, p)
    assert np.all(np.diff(c) <= 0)
    assert matern(50 * p.phi, p) < 1e-6 * p.sigma2


def test_general_nu_bessel_is_decreasing():
    c = matern_correlation(np.linspace(0, 3, 300), 0.8, 0.3)
    assert c[0] == 1.0 and np.all(np.diff(c) <= 0)


def test_solve_range_examples():
    assert solve_range(0.3, 0.5) == pytest.approx(0.3 / math.log(20), abs=1e-6)
    assert solve_range(0.3, 0.5) == pytest.approx(0.100143, abs=1e-6)
    assert solve_range(0.6, 0.5) == pytest.approx(0.6 / math.log(20), abs=1e-9)
    # 0.200286 is twice the rounded 0.100143; the exact value is 0.2002849...
    assert solve_range(0.6, 0.5) == pytest.approx(0.200286, abs=2e-6)


@given(st.floats(0.01, 10.0), st.sampled_from([0.5, 1.5, 2.5, 0.8, 3.0]))
def test_solve_range_round_trip(rho, nu):
    phi = solve_range(rho, nu)
    assert abs(float(matern_correlation(rho, nu, phi)) - 0.05) < 1e-8


def test_solve_range_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_range(-1.0, 0.5)


def test_cholesky_jitter_escalates():
    K = np.ones((3, 3))  # rank one, needs jitter
    L = cholesky_jitter(K, 1.0)
    assert np.allclose(L @ L.T, K, atol=1e-5)
