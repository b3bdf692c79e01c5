import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rexsub.covariance import CovarianceParams
from rexsub.gp_exact import GPData, exact_loglik, krige
from rexsub.simulate import simulate_grf
from rexsub.vecchia import (
    FitConfig, VecchiaConfig, build_sets, condition, conditional_coefficients, fit_mle,
    vecchia_loglik, vecchia_predict,
)

from conftest import random_params


def brute_predecessors(S, order, m):
    out = []
    for i, site in enumerate(order):
        prev = order[:i]
        d = np.hypot(*(S[prev] - S[site]).T)
        out.append(list(prev[np.lexsort((prev, d))][:m]))
    return out


def test_single_site_sets():
    sets = build_sets([[0.5, 0.5]], VecchiaConfig(m=5))
    assert list(sets.order) == [0] and sets.sizes.tolist() == [0]


def test_three_sites_two_neighbours(rng):
    S = rng.random((3, 2))
    sets = build_sets(S, VecchiaConfig(m=2))
    o = sets.order
    assert list(sets.set_of(0)) == []
    assert list(sets.set_of(1)) == [o[0]]
    assert set(sets.set_of(2)) == {o[0], o[1]}


@pytest.mark.parametrize("ordering", ["maxmin", "coordinate"])
def test_sets_match_brute_force(rng, ordering):
    S = rng.random((20, 2))
    sets = build_sets(S, VecchiaConfig(m=5, ordering=ordering))
    expect = brute_predecessors(S, sets.order, 5)
    for i in range(20):
        assert list(sets.set_of(i)) == expect[i]


def test_given_ordering(rng):
    S = rng.random((6, 2))
    order = np.array([5, 3, 1, 0, 2, 4])
    sets = build_sets(S, VecchiaConfig(m=3, ordering="given"), order=order)
    assert list(sets.order) == list(order)
    with pytest.raises(ValueError):
        build_sets(S, VecchiaConfig(ordering="given"), order=[0, 0, 1, 2, 3, 4])


def test_build_sets_deterministic(rng):
    S = rng.random((300, 2))
    a, b = build_sets(S, VecchiaConfig(m=7)), build_sets(S, VecchiaConfig(m=7))
    assert a.order.tobytes() == b.order.tobytes()
    assert a.neighbors.tobytes() == b.neighbors.tobytes()


@pytest.mark.parametrize("nu", [0.5, 1.5, 0.8])
def test_full_conditioning_is_exact(rng, nu):
    for _ in range(50 if nu != 0.8 else 10):
        n = int(rng.integers(1, 21))
        p = random_params(rng, nus=(nu,))
        d = GPData(rng.random((n, 2)), rng.normal(size=n), float(rng.normal()))
        sets = build_sets(d.locations, VecchiaConfig(m=max(n - 1, 1)))
        assert abs(vecchia_loglik(d, p, sets) - exact_loglik(d, p)) < 1e-8


def test_two_point_hand_formula():
    p = CovarianceParams(0.5, 0.4, 1.2, 0.3)
    S = np.array([[0.1, 0.2], [0.5, 0.5]])
    z = np.array([0.7, -0.4])
    sets = build_sets(S, VecchiaConfig(m=1, ordering="given"), order=[0, 1])
    s = p.total_variance
    rho = p.sigma2 * math.exp(-0.5 / p.phi) / s
    def lognorm(x, var):
        return -0.5 * math.log(2 * math.pi * var) - x * x / (2 * var)
    hand = lognorm(z[0], s) + lognorm(z[1] - rho * z[0], s * (1 - rho ** 2))
    assert vecchia_loglik(GPData(S, z), p, sets) == pytest.approx(hand, abs=1e-10)


def test_loglik_invariant_to_offset_shift(rng):
    S, z = rng.random((40, 2)), rng.normal(size=40)
    p = CovarianceParams(1.5, 0.2, 1.0, 0.1)
    sets = build_sets(S, VecchiaConfig(m=6))
    a = vecchia_loglik(GPData(S, z, 0.0), p, sets)
    b = vecchia_loglik(GPData(S, z + 3.5, 3.5), p, sets)
    assert a == pytest.approx(b, abs=1e-10)


def test_conditional_variances_bounded(rng):
    for _ in range(10):
        p = random_params(rng)
        S = rng.random((60, 2))
        _, dvar = conditional_coefficients(GPData(S, np.zeros(60)), p, build_sets(S, VecchiaConfig(m=8)))
        assert np.all(dvar > 0) and np.all(dvar <= p.total_variance + 1e-12)


def test_bessel_path_matches_closed_form_path(rng):
    # nu=1.5 goes through the compiled kernel; 1.5 + 1e-12 through the batched path
    S, z = rng.random((50, 2)), rng.normal(size=50)
    sets = build_sets(S, VecchiaConfig(m=6))
    a = vecchia_loglik(GPData(S, z), CovarianceParams(1.5, 0.2, 1.0, 0.1), sets)
    b = vecchia_loglik(GPData(S, z), CovarianceParams(1.5 + 1e-12, 0.2, 1.0, 0.1), sets)
    assert a == pytest.approx(b, abs=1e-6)


@pytest.mark.parametrize("nu", [0.5, 1.5, 0.8])
def test_full_neighbourhood_prediction_is_exact(rng, nu):
    for _ in range(20):
        n = int(rng.integers(3, 30))
        p = random_params(rng, nus=(nu,))
        d = GPData(rng.random((n, 2)), rng.normal(size=n), 0.4)
        fit = condition(d, p, VecchiaConfig(m=n))
        Q = rng.random((15, 2))
        a, b = vecchia_predict(fit, Q), krige(d, p, Q)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)
        np.testing.assert_allclose(a.variance, b.variance, atol=1e-8)


def test_prediction_interpolates_at_site(rng):
    S, z = rng.random((25, 2)), rng.normal(size=25)
    fit = condition(GPData(S, z), CovarianceParams(0.5, 0.3, 1.0, 0.0), VecchiaConfig(m=5))
    pred = vecchia_predict(fit, S[:10])
    np.testing.assert_allclose(pred.mean, z[:10], atol=1e-8)
    np.testing.assert_allclose(pred.variance, 0.0, atol=1e-8)


def test_local_prediction_close_to_exact(rng):
    # frozen threshold: 0.05 total sd on at least 95 of 100 query points
    p = CovarianceParams(0.5, 0.1, 1.0, 0.01)
    S = rng.random((30, 2))
    z = simulate_grf(S, p, rng)
    fit = condition(GPData(S, z), p, VecchiaConfig(m=10))
    Q = rng.random((100, 2))
    a, b = vecchia_predict(fit, Q), krige(GPData(S, z), p, Q)
    ok = np.abs(a.mean - b.mean) < 0.05 * math.sqrt(p.total_variance)
    assert ok.sum() >= 95
    assert np.all(a.variance >= 0) and np.all(a.variance <= p.total_variance + 1e-12)


def _simulated(rng, n=200, ratio=0.01):
    tau2 = ratio / (1 - ratio)
    p = CovarianceParams(0.5, 0.3 / math.log(20), 1.0, tau2)
    S = rng.random((n, 2))
    return GPData.centered(S, simulate_grf(S, p, rng))


def test_fit_improves_on_init_and_is_fixed_point(rng):
    for _ in range(5):
        d = _simulated(rng, n=120)
        fit = fit_mle(d)
        assert fit.loglik >= fit.init_loglik
        assert fit.loglik == pytest.approx(vecchia_loglik(d, fit.params, fit.sets), abs=1e-9)
        refit = fit_mle(d, fcfg=FitConfig(init=fit.params, nu_grid=(fit.params.nu,)))
        assert abs(refit.loglik - fit.loglik) <= 1e-6 * max(1.0, abs(fit.loglik)) + 1e-9


def test_fit_nugget_share_mostly_small():
    rng = np.random.default_rng(7)
    good = 0
    for _ in range(100):
        p = fit_mle(_simulated(rng)).params
        good += p.tau2 / (p.tau2 + p.sigma2) <= 0.15
    assert good >= 80


def test_fit_needs_three_points():
    with pytest.raises(ValueError):
        fit_mle(GPData([[0, 0], [1, 1]], [0.0, 1.0]))


@given(st.integers(3, 12), st.integers(0, 2**31))
def test_fit_handles_tiny_designs(n, seed):
    r = np.random.default_rng(seed)
    d = GPData.centered(r.random((n, 2)), r.normal(size=n))
    fit = fit_mle(d, VecchiaConfig(m=10))
    assert np.isfinite(fit.loglik)
    pred = fit.predict(r.random((5, 2)))
    assert np.all(np.isfinite(pred.mean)) and np.all(pred.variance >= 0)
