"""Closed-form laws used as exact oracles for the simulators.

Conventions: the free motion has generator ``u'' + mu u'`` (variance ``2t``)
and ``gamma`` is the Skorokhod local time at 0, so that the Robin condition
``u'(0) = c u(0)`` corresponds to the multiplicative functional
``exp(-c gamma_t)``.

Where a formula has a removable singularity at ``mu = 0`` the exact limit is
used for ``|mu| < MU_LIMIT`` and a short Taylor series for
``|mu| < MU_SERIES``.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError, SingularityError

MU_LIMIT = 1e-12
MU_SERIES = 1e-6
QUAD_EPSABS = 1e-10


def _exp_diff_over_mu(x: float, ell: float, mu: float) -> float:
    """``(exp(-mu x) - exp(-mu ell)) / mu`` with its limit ``ell - x`` at ``mu = 0``."""
    if mu == 0:
        return ell - x
    return math.exp(-mu * x) * -math.expm1(-mu * (ell - x)) / mu


def mean_tau_ell(x: float, ell: float, mu: float) -> float:
    """Mean first hitting time of ``ell`` for the reflected motion started at ``x``.

    ``(ell - x)/mu - (exp(-mu x) - exp(-mu ell))/mu^2``; ``(ell^2 - x^2)/2`` at ``mu = 0``.
    """
    if x > ell:
        raise DomainError("need x <= ell")
    if x < 0:
        raise DomainError("need x >= 0")
    if abs(mu) < MU_LIMIT:
        return 0.5 * (ell * ell - x * x)
    if abs(mu) < MU_SERIES:
        # sum_{k>=2} (-mu)^{k-2} (ell^k - x^k) / k!
        return sum((-mu) ** (k - 2) * (ell ** k - x ** k) / math.factorial(k) for k in range(2, 8))
    return (ell - x) / mu - _exp_diff_over_mu(x, ell, mu) / mu


def _phi_pm(lam: float, mu: float) -> tuple[float, float]:
    s = math.sqrt(lam + mu * mu / 4.0)
    return s + mu / 2.0, s - mu / 2.0


def resolvent_closed_form(lam: float, x: float, ell: float, mu: float, c: float) -> float:
    """Closed-form expression attached to the discounted exit functional.

    Evaluates

        (ell - x)/mu + (1 + c ell)/mu * (e^{(x-ell) P-} - e^{(ell-x) P+})
                                        / ((c + P+) e^{ell P+} - (c - P-) e^{ell P-})

    with ``P+- = sqrt(lam + mu^2/4) +- mu/2``.  At ``lam = 0`` it equals the
    exact expected exit functional; for ``lam > 0`` it does *not* solve
    ``u'' + mu u' = lam u - 1`` (the linear term is the ``lam = 0`` particular
    solution).  See :func:`resolvent_bvp` for the exact solution.

    The ``lam = 0, c = 0`` identity relies on ``P- = 0`` and so holds for
    ``mu > 0`` only; for ``|mu| < MU_SERIES`` that case uses the limit.
    """
    if not 0 <= x < ell:
        raise DomainError("need 0 <= x < ell")
    if lam < 0:
        raise DomainError("need lam >= 0")
    if lam == 0 and c == 0 and abs(mu) < MU_SERIES:
        return mean_tau_ell(x, ell, mu)
    if abs(mu) < MU_LIMIT:
        raise SingularityError("mu = 0 is singular for lam > 0 or c > 0")
    pp, pm = _phi_pm(lam, mu)
    den = (c + pp) * math.exp(ell * pp) - (c - pm) * math.exp(ell * pm)
    if den == 0 or not math.isfinite(den):
        raise SingularityError("degenerate denominator")
    num = math.exp((x - ell) * pm) - math.exp((ell - x) * pp)
    return (ell - x) / mu + (1.0 + c * ell) / mu * num / den


def resolvent_bvp(lam: float, x: float, ell: float, mu: float, c: float) -> float:
    """Exact ``E_x[int_0^{tau_ell} exp(-lam t - c gamma_t) dt]``.

    Solves ``u'' + mu u' = lam u - 1`` on ``[0, ell)`` with ``u'(0) = c u(0)``
    and ``u(ell) = 0``.  Replace ``c`` by ``c + mu/2`` to weight by
    ``exp(-(c + mu/2) gamma_t)`` instead.
    """
    if not 0 <= x <= ell:
        raise DomainError("need 0 <= x <= ell")
    if lam < 0:
        raise DomainError("need lam >= 0")
    if lam == 0:
        if abs(mu) < MU_LIMIT:
            # u = -x^2/2 + A + B x
            part = lambda y: -0.5 * y * y  # noqa: E731
            dpart0 = 0.0
            basis = (lambda y: 1.0, lambda y: y)
            dbasis0 = (0.0, 1.0)
        else:
            part = lambda y: -y / mu  # noqa: E731
            dpart0 = -1.0 / mu
            basis = (lambda y: 1.0, lambda y: math.exp(-mu * y))
            dbasis0 = (0.0, -mu)
    else:
        pp, pm = _phi_pm(lam, mu)
        part = lambda y: 1.0 / lam  # noqa: E731
        dpart0 = 0.0
        # scaled so that neither basis function overflows on [0, ell]
        basis = (lambda y: math.exp(pm * (y - ell)), lambda y: math.exp(-pp * y))
        dbasis0 = (pm * math.exp(-pm * ell), -pp)
    m = np.array([
        [basis[0](ell), basis[1](ell)],
        [dbasis0[0] - c * basis[0](0.0), dbasis0[1] - c * basis[1](0.0)],
    ])
    rhs = np.array([-part(ell), c * part(0.0) - dpart0])
    if abs(np.linalg.det(m)) < 1e-300:
        raise SingularityError("boundary value problem is singular")
    a, b = np.linalg.solve(m, rhs)
    return part(x) + a * basis[0](x) + b * basis[1](x)


def expected_local_time_at_exit(x: float, ell: float, mu: float) -> float:
    """``E_x[gamma(tau_ell)] = (exp(-mu x) - exp(-mu ell)) / mu``."""
    if not 0 <= x <= ell:
        raise DomainError("need 0 <= x <= ell")
    return _exp_diff_over_mu(x, ell, mu)


def mean_sticky_extra(x: float, ell: float, mu: float, eta: float, delta: int) -> float:
    """Mean extra exit time caused by stickiness ``eta`` at 0, boundary variant ``delta``."""
    if delta not in (0, 1):
        raise DomainError("delta must be 0 or 1")
    if not 0 <= x <= ell:
        raise DomainError("need 0 <= x <= ell")
    if eta < 0:
        raise DomainError("need eta >= 0")
    return eta / (1.0 + eta * (1 - delta) * mu) * _exp_diff_over_mu(x, ell, mu)


def mean_exit_sticky(x: float, ell: float, mu: float, eta_eps: float) -> float:
    """Mean exit time of the sticky edge process in the reduced form with factor ``(1 - eta_eps)``."""
    return _mean_exit_with_factor(x, ell, mu, 1.0 - eta_eps)


def mean_exit_sticky_general(x: float, ell: float, mu: float, eta_eps: float,
                             phi_prime0: float) -> float:
    """Mean exit time with holding law ``H^Phi(Exp(eta_eps))``, ``Phi'(0) = phi_prime0``.

    ``E[tau_ell] + eta_eps phi_prime0 E[gamma(tau_ell)]``; reduces to
    :func:`mean_exit_sticky` when ``mu * phi_prime0 == 1``.
    """
    if eta_eps < 0:
        raise DomainError("need eta_eps >= 0")
    return mean_tau_ell(x, ell, mu) + eta_eps * phi_prime0 * expected_local_time_at_exit(x, ell, mu)


def mean_exit_sticky_delta0(x: float, ell: float, mu: float, eta_eps: float) -> float:
    """Mean exit time under the ``delta = 0`` boundary condition."""
    return _mean_exit_with_factor(x, ell, mu, 1.0 - eta_eps / (eta_eps * mu + 1.0))


def _mean_exit_with_factor(x, ell, mu, factor):
    if not 0 <= x <= ell:
        raise DomainError("need 0 <= x <= ell")
    if mu <= 0:
        raise DomainError("need mu > 0")
    return (ell - x) / mu - _exp_diff_over_mu(x, ell, mu) / mu * factor


def heat_kernel(t, z):
    """``g(t, z) = exp(-z^2 / 4t) / sqrt(4 pi t)``."""
    z = np.asarray(z, dtype=float)
    return np.exp(-z * z / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def _robin_correction(t, a, k, method, shift=0.0):
    """``2 k exp(shift) int_0^inf exp(-k w) g(t, w + a) dw``.

    ``shift`` is an exponent folded in before evaluation so that the caller's
    prefactor cannot overflow against a vanishing integral.
    """
    a = np.asarray(a, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if k == 0:
        return np.zeros(np.broadcast(a, shift).shape)
    if method == "erfc":
        u = (a + 2.0 * k * t) / (2.0 * math.sqrt(t))
        with np.errstate(over="ignore", under="ignore"):
            pos = np.exp(shift - a * a / (4.0 * t)) * special.erfcx(np.maximum(u, 0.0))
            neg = np.exp(shift + k * a + k * k * t) * special.erfc(np.minimum(u, 0.0))
        return k * np.where(u >= 0, pos, neg)
    if method == "quad":
        def one(av, sv):
            val, err = integrate.quad(
                lambda w: math.exp(sv - k * w - (w + av) ** 2 / (4.0 * t)), 0.0, math.inf,
                epsabs=QUAD_EPSABS, limit=200)
            if err > 1e-7:
                raise QuadratureError(f"robin correction: error estimate {err:g} at a={av}")
            return 2.0 * k * val / math.sqrt(4.0 * math.pi * t)
        return np.vectorize(one, otypes=[float])(a, shift)
    raise ValueError(f"unknown method {method!r}")


def transition_density(t, x, y, mu: float, c: float, method: str = "erfc"):
    """Sub-probability density ``p(t, x, y)`` of the elastic reflected motion.

    The Robin parameter is ``k = c + mu/2``; any sign is allowed.
    """
    k = c + mu / 2.0
    if t <= 0:
        raise DomainError("need t > 0")
    if np.any(np.asarray(x) < 0):
        raise DomainError("need x >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e0 = -mu * mu * t / 4.0 + mu * (y - x) / 2.0
    norm = math.sqrt(4.0 * math.pi * t)
    with np.errstate(under="ignore"):
        p1 = (np.exp(e0 - (x - y) ** 2 / (4.0 * t)) + np.exp(e0 - (x + y) ** 2 / (4.0 * t))) / norm
    p2 = _robin_correction(t, x + y, k, method, shift=e0)
    out = np.where(y >= 0, p1 - p2, 0.0)
    return out if out.ndim else float(out)


def survival_probability(t: float, x: float, mu: float, c: float) -> float:
    """``int_0^inf p(t, x, y) dy``: probability the elastic motion is alive at ``t``."""
    val, err = integrate.quad(lambda y: transition_density(t, x, y, mu, c), 0.0, math.inf,
                              epsabs=QUAD_EPSABS, limit=200)
    if err > 1e-7:
        raise QuadratureError(f"survival quadrature error {err:g}")
    return val


def transition_cdf(t: float, x: float, y, mu: float, c: float):
    """``int_0^y p(t, x, u) du`` for an array of ``y`` (sub-probability)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    order = np.argsort(y)
    out = np.empty_like(y)
    acc, prev = 0.0, 0.0
    f = lambda u: transition_density(t, x, u, mu, c)  # noqa: E731
    for i in order:
        yi = max(y[i], 0.0)
        if yi > prev:
            acc += integrate.quad(f, prev, yi, epsabs=1e-12)[0]
            prev = yi
        out[i] = acc
    return out


def gr_survival(n: int, regions: Sequence[tuple[float, float]], h_star: float) -> float:
    """``P(#events >= n) = exp(-h_star * sum_{r<=n} sigma_r / m_r)``.

    ``regions`` lists ``(m_r, sigma_r)`` in visiting order.
    """
    if n < 0:
        raise DomainError("need n >= 0")
    if n > len(regions):
        raise DomainError(f"n={n} exceeds the {len(regions)} regions given")
    if h_star < 0:
        raise DomainError("need h_star >= 0")
    total = 0.0
    for m, sigma in regions[:n]:
        if m <= 0:
            raise DomainError("magnitudes must be > 0")
        total += sigma / m
    return math.exp(-h_star * total)


def gr_power_law(n: int, mean_magnitude: float, h_star: float = math.log(10.0)) -> float:
    """``exp(-h_star n mbar)``; equals ``10^{-n mbar}`` at ``h_star = ln 10``."""
    if h_star == math.log(10.0):
        return 10.0 ** (-n * mean_magnitude)
    return math.exp(-h_star * n * mean_magnitude)


def mean_tau0(x: float, mu: float) -> float:
    """Mean hitting time of 0 from ``x``: ``x/|mu|`` for ``mu < 0``.

    For ``mu > 0`` the hitting time is infinite with probability
    ``1 - exp(-mu x)`` and the truncated mean ``(x/mu) exp(-mu x)`` is returned
    (see :func:`truncated_mean_tau0_pos`).  ``mu == 0`` has infinite mean.
    """
    if x <= 0:
        raise DomainError("need x > 0")
    if mu == 0:
        return math.inf
    if mu < 0:
        return x / -mu
    return truncated_mean_tau0_pos(x, mu)


def truncated_mean_tau0_pos(x: float, mu: float) -> float:
    """``E[H_x ; x < T_mu] = (x/mu) exp(-mu x)`` for ``mu > 0``."""
    if x < 0 or mu <= 0:
        raise DomainError("need x >= 0 and mu > 0")
    return x / mu * math.exp(-mu * x)


def conditional_mean_tau0_pos(x: float, mu: float) -> float:
    """``E[H_x | x < T_mu] = x/mu`` (``H`` and ``T_mu`` are independent)."""
    if x < 0 or mu <= 0:
        raise DomainError("need x >= 0 and mu > 0")
    return x / mu


def laplace_H(lam: float, ell: float, mu: float) -> float:
    """``E[exp(-lam H_ell)] = exp(-ell (sqrt(lam + mu^2/4) - |mu|/2))``."""
    if lam < 0 or ell < 0:
        raise DomainError("need lam >= 0 and ell >= 0")
    a = abs(mu)
    return math.exp(-ell * lam / (math.sqrt(lam + a * a / 4.0) + a / 2.0)) if lam else 1.0


def hitting_density(z, ell: float, mu: float):
    """Density of ``H_ell``: ``(ell/z) exp(-(ell - |mu| z)^2 / 4z) / sqrt(4 pi z)``."""
    z = np.asarray(z, dtype=float)
    a = abs(mu)
    zs = np.where(z > 0, z, 1.0)
    out = np.where(z > 0, ell / zs * np.exp(-(ell - a * zs) ** 2 / (4.0 * zs))
                   / np.sqrt(4.0 * math.pi * zs), 0.0)
    return out if out.ndim else float(out)


def hitting_cdf(z, ell: float, mu: float):
    """CDF of ``H_ell`` (inverse Gaussian, or Levy when ``mu == 0``)."""
    z = np.asarray(z, dtype=float)
    a = abs(mu)
    zs = np.where(z > 0, z, 1.0)
    if a == 0:
        out = special.erfc(ell / (2.0 * np.sqrt(zs)))
    else:
        r = np.sqrt(zs)
        first = special.ndtr((a * zs - ell) / (np.sqrt(2.0) * r))
        log_second = a * ell + special.log_ndtr(-(a * zs + ell) / (np.sqrt(2.0) * r))
        out = first + np.exp(log_second)
    out = np.where(z > 0, np.clip(out, 0.0, 1.0), 0.0)
    return out if out.ndim else float(out)


def tauE_density(z, m_r: float, sigma_r: float, method: str = "closed"):
    """Density of the accumulation time ``H(h)`` with ``h ~ Exp(mean m_r / sigma_r)``.

    ``method="quad"`` integrates the mixture over ``h`` numerically;
    ``"closed"`` uses the Gaussian integral in ``h`` in closed form.
    """
    if m_r <= 0 or sigma_r <= 0:
        raise DomainError("need m_r > 0 and sigma_r > 0")
    a = sigma_r / m_r
    if method == "quad":
        def one(zv):
            if zv <= 0:
                return 0.0
            f = lambda h: float(hitting_density(zv, h, m_r)) * a * math.exp(-a * h)  # noqa: E731
            val, err = integrate.quad(f, 0.0, math.inf, epsabs=QUAD_EPSABS, limit=200)
            if err > 1e-7 * max(1.0, val):
                raise QuadratureError(f"tauE quadrature at z={zv}: error {err:g}")
            return val
        out = np.vectorize(one, otypes=[float])(z)
        return out if out.ndim else float(out)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    z = np.asarray(z, dtype=float)
    zs = np.where(z > 0, z, 1.0)
    b = zs * (m_r - 2.0 * a)
    root = 2.0 * np.sqrt(zs)
    # int_0^inf h exp(-(h-b)^2/4z) dh, then the constant exp(z a (a - m))
    # folded in; erfcx keeps the large-|b| tail finite
    gauss = 2.0 * zs * np.exp(-b * b / (4.0 * zs) + zs * a * (a - m_r))
    lin = b * np.sqrt(math.pi * zs) * _exp_erfc(-b / root, zs * a * (a - m_r))
    out = np.where(z > 0, a / (zs * np.sqrt(4.0 * math.pi * zs)) * (gauss + lin), 0.0)
    return out if out.ndim else float(out)


def _exp_erfc(u, logscale):
    """``exp(logscale) * erfc(u)`` evaluated without overflow."""
    u = np.asarray(u, dtype=float)
    pos = special.erfcx(np.maximum(u, 0.0))
    with np.errstate(over="ignore", invalid="ignore"):
        big = np.where(u > 0, np.exp(logscale - u * u) * pos, np.exp(logscale) * special.erfc(u))
    return big


def tauE_cdf(z, m_r: float, sigma_r: float):
    """CDF of the accumulation time, by integrating :func:`tauE_density` between sorted points."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    order = np.argsort(z)
    out = np.empty_like(z)
    acc, prev = 0.0, 0.0
    f = lambda u: float(tauE_density(u, m_r, sigma_r))  # noqa: E731
    for i in order:
        zi = max(z[i], 0.0)
        if zi > prev:
            acc += integrate.quad(f, prev, zi, epsabs=1e-12, limit=200)[0]
            prev = zi
        out[i] = min(acc, 1.0)
    return out
