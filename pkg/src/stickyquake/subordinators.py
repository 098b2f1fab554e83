"""Exact samplers for the subordinators driving holding times and jumps.

Three Bernstein symbols are supported:

* :class:`TemperedSymbol` -- ``Phi(lam) = sqrt(lam + theta) - sqrt(theta)`` with
  ``theta = (mu_abs / 2)**2``.  ``H_l`` is inverse Gaussian; ``mu_abs = 0`` is
  the one-sided 1/2-stable (Levy) law.
* :data:`IDENTITY` -- ``Phi(lam) = lam``, i.e. ``H_t = t``.
* the exponential compound-Poisson jump law, through :class:`JumpKernel`.

All samplers take a ``numpy.random.Generator`` and accept either scalar or
array levels.  Time is measured with the convention that the driving
Brownian motion has generator ``u'' + mu u'`` (variance ``2t``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class TemperedSymbol:
    """Tempered 1/2-stable symbol, parameterized by the drift magnitude ``|mu|``."""

    mu_abs: float

    def __post_init__(self):
        if not (self.mu_abs >= 0 and math.isfinite(self.mu_abs)):
            raise DomainError(f"mu_abs must be finite and >= 0, got {self.mu_abs}")

    @classmethod
    def from_theta(cls, theta: float) -> "TemperedSymbol":
        if theta < 0:
            raise DomainError("theta must be >= 0")
        return cls(2.0 * math.sqrt(theta))

    @property
    def theta(self) -> float:
        return (self.mu_abs / 2.0) ** 2

    def __call__(self, lam):
        return phi_eval(self, lam)

    def derivative_at_zero(self) -> float:
        """``Phi'(0) = 1 / mu_abs``; infinite for the untempered stable law."""
        return math.inf if self.mu_abs == 0 else 1.0 / self.mu_abs


@dataclass(frozen=True)
class IdentitySymbol:
    """``Phi(lam) = lam``: the subordinator is pure drift, ``H_t = t``."""

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0):
            raise DomainError("lambda must be >= 0")
        return lam if lam.ndim else float(lam)

    def derivative_at_zero(self) -> float:
        return 1.0


IDENTITY = IdentitySymbol()

Symbol = Union[TemperedSymbol, IdentitySymbol]


@dataclass(frozen=True)
class JumpKernel:
    """Exponential boundary-jump law with mean ``eta_eps``."""

    eta_eps: float

    def __post_init__(self):
        if not self.eta_eps > 0:
            raise DomainError("eta_eps must be > 0")

    def survival(self, z):
        """``P(J > z) = exp(-z / eta_eps)``."""
        z = np.asarray(z, dtype=float)
        return np.where(z <= 0, 1.0, np.exp(-np.maximum(z, 0.0) / self.eta_eps))

    def symbol(self, lam):
        """Laplace exponent ``lam / (lam + 1/eta_eps)`` of the compound-Poisson subordinator."""
        lam = np.asarray(lam, dtype=float)
        return lam / (lam + 1.0 / self.eta_eps)


def phi_eval(sym: TemperedSymbol, lam):
    """Evaluate ``sqrt(lam + theta) - sqrt(theta)``.

    Written as ``lam / (sqrt(lam + theta) + sqrt(theta))`` to avoid
    cancellation for small ``lam``.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(np.isnan(lam_arr)):
        raise DomainError("lambda must be >= 0")
    theta = sym.theta
    root = np.sqrt(lam_arr + theta) + math.sqrt(theta)
    out = np.divide(lam_arr, root, out=np.zeros_like(lam_arr), where=root > 0)
    return out if out.ndim else float(out)


def _inverse_gaussian(mean, shape, rng: np.random.Generator, size):
    """Michael-Schucany-Haas transformation: one normal and one uniform per draw."""
    nu = rng.standard_normal(size)
    u = rng.random(size)
    y = nu * nu
    my = mean * y
    # smaller root computed as mean**2 / larger root to avoid cancellation
    big = mean * (1.0 + (my + np.sqrt(my * (4.0 * shape + my))) / (2.0 * shape))
    small = mean * mean / big
    return np.where(u <= mean / (mean + small), small, big)


def _levels(level, size):
    lv = np.asarray(level, dtype=float)
    if size is not None:
        lv = np.broadcast_to(lv, size)
    return lv


def sample_H(sym: Symbol, level, rng: np.random.Generator, size=None):
    """Draw ``H_level`` for the subordinator with symbol ``sym``.

    For the tempered symbol this is inverse Gaussian with density
    ``(l/z) exp(-(l - mu z)^2 / (4z)) / sqrt(4 pi z)``, i.e. mean ``l/mu`` and
    shape ``l^2/2``.  ``mu_abs == 0`` gives ``l^2 / (2 Z^2)`` with ``Z`` standard
    normal.  Level zero returns zero.
    """
    lv = _levels(level, size)
    if np.any(lv < 0) or np.any(np.isnan(lv)):
        raise DomainError("level must be >= 0")
    shape = lv.shape
    if isinstance(sym, IdentitySymbol):
        out = lv.astype(float, copy=True)
    elif sym.mu_abs == 0:
        z = rng.standard_normal(shape)
        with np.errstate(divide="ignore"):
            out = np.where(lv > 0, lv * lv / (2.0 * z * z), 0.0)
    else:
        safe = np.where(lv > 0, lv, 1.0)
        draw = _inverse_gaussian(safe / sym.mu_abs, 0.5 * safe * safe, rng, shape)
        out = np.where(lv > 0, draw, 0.0)
    return out if out.ndim else float(out)


def sample_H_killed(sym: TemperedSymbol, level, rng: np.random.Generator, size=None):
    """Killed subordinator: ``H_level`` if ``level < T``, else ``inf``, with ``T ~ Exp(rate mu_abs)``."""
    lv = _levels(level, size)
    if sym.mu_abs == 0:
        return sample_H(sym, lv, rng)
    kill = rng.exponential(1.0 / sym.mu_abs, lv.shape)
    h = np.asarray(sample_H(sym, lv, rng), dtype=float)
    out = np.where(lv < kill, h, np.inf)
    return out if out.ndim else float(out)


def sample_boundary_jump(kern: JumpKernel, rng: np.random.Generator, size=None):
    """Restart level after a boundary hit; exponential with mean ``eta_eps``.

    By memorylessness this is also the overshoot of the exponential
    compound-Poisson subordinator over any level.
    """
    out = rng.exponential(kern.eta_eps, size)
    return out if np.ndim(out) else float(out)


def sample_holding(sym: Symbol, eta: float, rng: np.random.Generator, size=None):
    """Holding time ``H(e)`` with ``e ~ Exp(mean eta)``."""
    if eta < 0:
        raise DomainError("eta must be >= 0")
    if eta == 0:
        return np.zeros(size) if size is not None else 0.0
    e = rng.exponential(eta, size)
    return sample_H(sym, e, rng)


def sample_inverse_subordinator(sym: TemperedSymbol, t: float, rng: np.random.Generator,
                                size: int, ds: float = 1e-4, kill_rate: float = 0.0):
    """Approximate draws of ``L_t = inf{s : H_s > t}`` by grid inversion.

    ``H`` is built from independent inverse-Gaussian increments over the grid
    ``s_k = k ds`` and ``L_t`` is the first grid point where ``H`` exceeds ``t``
    (bias at most ``ds``).  With ``kill_rate > 0`` the result is
    ``min(L_t, T)`` with an independent ``T ~ Exp(kill_rate)``.
    """
    if t < 0 or ds <= 0:
        raise DomainError("need t >= 0 and ds > 0")
    out = np.empty(size)
    h = np.zeros(size)
    s = np.zeros(size)
    active = np.arange(size)
    chunk = 256
    while active.size:
        inc = sample_H(sym, ds, rng, size=(active.size, chunk))
        path = h[active, None] + np.cumsum(inc, axis=1)
        over = path > t
        done = over.any(axis=1)
        first = np.argmax(over, axis=1)
        idx = active[done]
        out[idx] = s[idx] + (first[done] + 1) * ds
        keep = ~done
        h[active[keep]] = path[keep, -1]
        s[active[keep]] += chunk * ds
        active = active[keep]
    if kill_rate > 0:
        out = np.minimum(out, rng.exponential(1.0 / kill_rate, size))
    return out


def sample_tempered(level, mu_abs, rng: np.random.Generator):
    """``H_level`` for arrays of levels and positive drift magnitudes (elementwise)."""
    lv, ma = np.broadcast_arrays(np.asarray(level, dtype=float), np.asarray(mu_abs, dtype=float))
    if np.any(lv < 0) or np.any(~(ma > 0)):
        raise DomainError("need level >= 0 and mu_abs > 0")
    safe = np.where(lv > 0, lv, 1.0)
    draw = _inverse_gaussian(safe / ma, 0.5 * safe * safe, rng, lv.shape)
    return np.where(lv > 0, draw, 0.0)
