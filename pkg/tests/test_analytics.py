import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stickyquake import analytics as A
from stickyquake.errors import DomainError, SingularityError


def test_mean_tau_ell_values():
    assert A.mean_tau_ell(0.0, 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert A.mean_tau_ell(1.0, 1.0, 0.7) == 0.0
    assert A.mean_tau_ell(0.0, 1.0, 0.0) == 0.5
    with pytest.raises(DomainError):
        A.mean_tau_ell(2.0, 1.0, 1.0)


@pytest.mark.parametrize("mu", [1e-6, -1e-6, 1e-3, -1e-3])
def test_mean_tau_ell_continuous_at_zero(mu):
    for x, ell in [(0.0, 1.0), (0.3, 2.0)]:
        assert A.mean_tau_ell(x, ell, mu) == pytest.approx(A.mean_tau_ell(x, ell, 0.0), rel=1e-3)


def test_mean_tau_ell_solves_ode():
    # u'' + mu u' = -1, u'(0) = 0, u(ell) = 0, checked by finite differences
    mu, ell, h = 0.8, 1.5, 1e-4
    u = lambda x: A.mean_tau_ell(x, ell, mu)  # noqa: E731
    for x in (0.2, 0.7, 1.1):
        d2 = (u(x + h) - 2 * u(x) + u(x - h)) / h ** 2
        d1 = (u(x + h) - u(x - h)) / (2 * h)
        assert d2 + mu * d1 == pytest.approx(-1.0, abs=1e-5)
    assert (u(h) - u(0.0)) / h == pytest.approx(0.0, abs=1e-3)


def test_resolvent_bvp_reduces_to_mean_exit():
    for mu in (-1.0, 0.0, 0.5, 2.0):
        assert A.resolvent_bvp(0.0, 0.2, 1.3, mu, 0.0) == pytest.approx(
            A.mean_tau_ell(0.2, 1.3, mu), rel=1e-12)


def test_resolvent_bvp_solves_robin_problem():
    lam, mu, c, ell, h = 1.0, 1.0, 1.5, 1.0, 1e-4
    u = lambda x: A.resolvent_bvp(lam, x, ell, mu, c)  # noqa: E731
    for x in (0.25, 0.6):
        d2 = (u(x + h) - 2 * u(x) + u(x - h)) / h ** 2
        d1 = (u(x + h) - u(x - h)) / (2 * h)
        assert d2 + mu * d1 - lam * u(x) == pytest.approx(-1.0, abs=1e-5)
    assert (u(h) - u(0.0)) / h == pytest.approx(c * u(0.0), rel=1e-3)
    assert abs(u(ell)) < 1e-14


def test_resolvent_closed_form_limits_and_errors():
    assert A.resolvent_closed_form(0.0, 0.0, 1.0, 1.0, 0.0) == pytest.approx(math.exp(-1),
                                                                             rel=1e-12)
    assert abs(A.resolvent_closed_form(1.0, 1.0 - 1e-12, 1.0, 1.0, 1.0)) < 1e-9
    with pytest.raises(SingularityError):
        A.resolvent_closed_form(1.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        A.resolvent_closed_form(-1.0, 0.0, 1.0, 1.0, 0.0)


def test_resolvent_closed_form_differs_from_exact_for_positive_lambda():
    closed = A.resolvent_closed_form(1.0, 0.0, 1.0, 1.0, 1.0)
    exact = A.resolvent_bvp(1.0, 0.0, 1.0, 1.0, 1.5)
    assert closed == pytest.approx(0.27902, abs=1e-5)
    assert exact == pytest.approx(0.158359, abs=1e-6)


def test_sticky_extra():
    val = A.mean_sticky_extra(0.0, 1.0, 1.0, 0.5, 1)
    assert val == pytest.approx(0.5 * (1 - math.exp(-1)), rel=1e-14)
    assert A.mean_sticky_extra(0.0, 1.0, 1.0, 0.5, 0) == pytest.approx(val / 1.5, rel=1e-14)
    assert A.mean_sticky_extra(0.0, 1.0, 1e-9, 0.5, 1) == pytest.approx(0.5, rel=1e-6)
    assert A.mean_sticky_extra(0.3, 1.0, 1.0, 0.0, 1) == 0.0


def test_mean_exit_sticky():
    assert A.mean_exit_sticky(0.2, 1.0, 1.3, 0.0) == pytest.approx(A.mean_tau_ell(0.2, 1.0, 1.3))
    assert A.mean_exit_sticky(0.2, 1.0, 1.3, 1.0) == pytest.approx(0.8 / 1.3, rel=1e-12)
    mu, eta = 1.0, 0.4
    want = 1.0 / mu - (1 - math.exp(-mu)) * (1 - eta / (eta * mu + 1)) / mu ** 2
    assert A.mean_exit_sticky_delta0(0.0, 1.0, mu, eta) == pytest.approx(want, rel=1e-12)
    # general form with phi'(0) = 1 matches the verbatim one
    assert A.mean_exit_sticky_general(0.0, 1.0, 1.0, 0.5, 1.0) == pytest.approx(
        A.mean_exit_sticky(0.0, 1.0, 1.0, 0.5), rel=1e-12)


def test_transition_density_reduces_to_reflected_kernel():
    y = np.linspace(0.0, 3.0, 13)
    t, x = 0.7, 0.4
    want = A.heat_kernel(t, x - y) + A.heat_kernel(t, x + y)
    assert np.allclose(A.transition_density(t, x, y, 0.0, 0.0), want, rtol=1e-10, atol=1e-14)


def test_transition_density_erfc_matches_quadrature():
    y = np.linspace(0.0, 2.5, 9)
    a = A.transition_density(0.5, 0.3, y, 0.7, 0.4, method="erfc")
    b = A.transition_density(0.5, 0.3, y, 0.7, 0.4, method="quad")
    assert np.allclose(a, b, rtol=1e-7, atol=1e-10)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.8])
def test_transition_density_conserves_mass_without_killing(mu):
    mass = integrate.quad(lambda y: float(A.transition_density(0.6, 0.0, y, mu, 0.0)), 0, np.inf,
                          epsabs=1e-12)[0]
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_transition_density_dirichlet_limit():
    t, x = 0.4, 0.5
    y = np.linspace(0.05, 2.0, 8)
    dirichlet = A.heat_kernel(t, x - y) - A.heat_kernel(t, x + y)
    p = A.transition_density(t, x, y, 0.0, 1e6)
    assert np.allclose(p, dirichlet, atol=1e-5)


def test_transition_density_domain():
    with pytest.raises(DomainError):
        A.transition_density(0.0, 0.3, 0.2, 1.0, 0.5)
    with pytest.raises(DomainError):
        A.transition_density(0.5, -0.1, 0.2, 1.0, 0.5)
    # negative Robin parameter c + mu/2 is allowed and stays finite far out
    p = A.transition_density(0.5, 0.3, np.array([0.0, 1.0, 50.0]), -2.0, 0.5)
    assert np.all(np.isfinite(p)) and np.all(p >= 0)


def test_survival_probability_value():
    assert A.survival_probability(0.5, 0.3, 0.7, 0.4) == pytest.approx(0.87026, abs=1e-5)
    assert A.survival_probability(0.5, 0.3, 0.7, 0.0) == pytest.approx(1.0, abs=1e-8)


def test_gr_survival_examples():
    ln10 = math.log(10.0)
    assert A.gr_survival(3, [(1.0, 1.0)] * 3, 0.0) == 1.0
    assert A.gr_survival(1, [(1.0, 1.0)], ln10) == pytest.approx(0.1, rel=1e-12)
    assert A.gr_survival(2, [(1.0, 1.0), (2.0, 4.0)], ln10) == pytest.approx(1e-3, rel=1e-12)
    assert A.gr_power_law(2, 1.5) == pytest.approx(1e-3, rel=1e-12)


regions = st.lists(st.tuples(st.floats(0.1, 5.0), st.floats(0.1, 5.0)), min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(regions, st.floats(0.0, 5.0), st.floats(0.0, 2.0))
def test_gr_survival_nonincreasing(regs, h_star, dh):
    vals = [A.gr_survival(n, regs, h_star) for n in range(len(regs) + 1)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(A.gr_survival(n, regs, h_star + dh) <= v + 1e-15 for n, v in enumerate(vals))


def test_mean_tau0():
    assert A.mean_tau0(1.0, -2.0) == pytest.approx(0.5)
    assert A.mean_tau0(1e-12, -1.0) == pytest.approx(0.0, abs=1e-11)
    assert A.truncated_mean_tau0_pos(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)


def test_truncated_mean_tau0_by_quadrature():
    # E[tau_0; tau_0 < inf] from the first-passage density
    x, mu = 1.0, 1.0
    f = lambda s: s * x / math.sqrt(4 * math.pi * s ** 3) * math.exp(-(x + mu * s) ** 2 / (4 * s))  # noqa: E731
    q = integrate.quad(f, 0, np.inf)[0]
    assert A.truncated_mean_tau0_pos(x, mu) == pytest.approx(q, rel=1e-7)
    assert A.conditional_mean_tau0_pos(x, mu) == pytest.approx(q / math.exp(-mu * x), rel=1e-7)


def test_laplace_H():
    assert A.laplace_H(0.0, 1.0, 2.0) == 1.0
    assert A.laplace_H(3.0, 1.0, 2.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert A.laplace_H(4.0, 0.5, 0.0) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_hitting_density_and_cdf():
    for ell, mu in [(1.0, 2.0), (0.5, 0.0), (1.2, -0.7)]:
        mass = integrate.quad(lambda z: float(A.hitting_density(z, ell, mu)), 0, np.inf)[0]
        assert mass == pytest.approx(1.0, abs=1e-7)
        q = integrate.quad(lambda z: float(A.hitting_density(z, ell, mu)), 0, 0.8)[0]
        assert float(A.hitting_cdf(0.8, ell, mu)) == pytest.approx(q, abs=1e-8)
        lam = 1.3
        lt = integrate.quad(lambda z: math.exp(-lam * z) * float(A.hitting_density(z, ell, mu)),
                            0, np.inf)[0]
        assert lt == pytest.approx(A.laplace_H(lam, ell, mu), abs=1e-7)


@pytest.mark.parametrize("m,sigma", [(1.0, 1.0), (2.0, 4.0), (0.5, 3.0)])
def test_tauE_density(m, sigma):
    mass = integrate.quad(lambda z: float(A.tauE_density(z, m, sigma)), 0, np.inf, limit=200)[0]
    mean = integrate.quad(lambda z: z * float(A.tauE_density(z, m, sigma)), 0, np.inf,
                          limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-5)
    assert mean == pytest.approx(1.0 / sigma, abs=1e-4)
    z = np.array([0.05, 0.3, 1.0, 2.5])
    assert np.allclose(A.tauE_density(z, m, sigma, method="closed"),
                       A.tauE_density(z, m, sigma, method="quad"), rtol=1e-6)
    q = integrate.quad(lambda s: float(A.tauE_density(s, m, sigma)), 0, 0.7)[0]
    assert A.tauE_cdf(0.7, m, sigma)[0] == pytest.approx(q, abs=1e-7)
