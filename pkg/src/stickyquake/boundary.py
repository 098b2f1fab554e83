"""Boundary-decorated processes built on the reflected motion.

Edge process
    Reflected motion with drift ``v`` on ``[0, ell]``, stopped at ``ell`` and
    possibly killed elastically.  The boundary point is visited at the marks
    of a Poisson process of rate ``visit_rate`` in the local-time scale; at
    every mark the path is held at 0 for an independent ``H^Phi(e)``,
    ``e ~ Exp(mean eta_eps)``.  Real time is diffusive time plus the holding
    intervals, which realizes the inverse of ``V_t = t + (holding up to gamma_t)``
    without any numerical inversion.

Vertex process
    Motion with drift ``-m`` run down to 0, then thrown to an exponential level
    ``J`` (absorbed if ``J < h_star``) where it is held for a ``Psi``-holding time
    before running down again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rdbm
from .errors import DomainError
from .subordinators import (IDENTITY, JumpKernel, Symbol, TemperedSymbol, sample_boundary_jump,
                            sample_H, sample_holding)


@dataclass(frozen=True)
class EdgeProcessParams:
    """Drift ``v``, length ``ell``, stickiness ``eta_eps``, holding symbol ``phi``, elastic ``c``."""

    v: float
    ell: float
    eta_eps: float
    phi: Symbol = IDENTITY
    c: float = 0.0
    visit_rate: float = 1.0

    def __post_init__(self):
        if not self.v >= 0:
            raise DomainError("v must be >= 0")
        if not self.ell > 0:
            raise DomainError("ell must be > 0")
        if not self.eta_eps >= 0:
            raise DomainError("eta_eps must be >= 0")
        if not self.c >= 0:
            raise DomainError("c must be >= 0")
        if not self.visit_rate >= 0:
            raise DomainError("visit_rate must be >= 0")

    @classmethod
    def from_region(cls, region, ell: float, **kw) -> "EdgeProcessParams":
        return cls(v=region.v, ell=ell, eta_eps=region.eta_eps,
                   phi=TemperedSymbol(region.m), c=region.c, **kw)

    @property
    def mean_holding(self) -> float:
        return self.eta_eps * self.phi.derivative_at_zero()


@dataclass(frozen=True)
class VertexProcessParams:
    """Magnitude ``m`` (drift ``-m``), post-jump stickiness ``eta_nu`` with symbol ``psi``,
    jump kernel and absorption threshold ``h_star``."""

    m: float
    eta_nu: float
    jump: JumpKernel
    psi: Symbol = IDENTITY
    h_star: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError("m must be > 0 (drift is -m)")
        if not self.eta_nu >= 0:
            raise DomainError("eta_nu must be >= 0")
        if not self.h_star >= 0:
            raise DomainError("h_star must be >= 0")


def _marks(gamma_end: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Local-time levels of the boundary visits below ``gamma_end``."""
    if rate == 0 or gamma_end <= 0:
        return np.empty(0)
    out = []
    g = rng.exponential(1.0 / rate)
    while g < gamma_end:
        out.append(g)
        g += rng.exponential(1.0 / rate)
    return np.array(out)


def simulate_edge(params: EdgeProcessParams, x0: float, t_max: float, rng: np.random.Generator,
                  dt: float = 1e-3) -> rdbm.PathSample:
    """One sticky edge path on the grid, with holding intervals inserted at boundary visits.

    The returned path carries ``info`` entries ``diffusive_time``,
    ``total_holding``, ``n_visits`` and ``holdings``; real time equals
    diffusive time plus total holding.
    """
    if not 0 <= x0 < params.ell:
        raise DomainError("need 0 <= x0 < ell")
    kill = rdbm.elastic_thresholds(params.c, rng, 1)
    res, t, v, g = rdbm.run_batch(rng, 1, x0, params.v, dt, t_max, stop_level=params.ell,
                                  kill_at=kill, record=True)
    code = int(res.cause[0])
    marks = _marks(float(res.gamma[0]), params.visit_rate, rng) if params.eta_eps > 0 else np.empty(0)
    holds = np.asarray(sample_holding(params.phi, params.eta_eps, rng, size=marks.size), dtype=float)
    at = np.searchsorted(g, marks, side="left")

    times, vals, gam, hold = [], [], [], []
    shift, lo = 0.0, 0
    for i, h in zip(at, holds):
        times.append(t[lo:i] + shift)
        vals.append(v[lo:i])
        gam.append(g[lo:i])
        hold.append(np.zeros(max(i - lo, 0), dtype=bool))
        times.append(np.array([t[i] + shift, t[i] + shift + h]))
        vals.append(np.zeros(2))
        gam.append(np.array([g[i], g[i]]))
        hold.append(np.ones(2, dtype=bool))
        shift += h
        lo = max(lo, i + 1)
    times.append(t[lo:] + shift)
    vals.append(v[lo:])
    gam.append(g[lo:])
    hold.append(np.zeros(len(t) - lo, dtype=bool))
    times, vals, gam, hold = (np.concatenate(a) for a in (times, vals, gam, hold))

    end = float(res.time[0]) + shift
    cause = rdbm.CAUSE_NAMES[code]
    if end > t_max:
        keep = times <= t_max
        times, vals, gam, hold = times[keep], vals[keep], gam[keep], hold[keep]
        end, cause, code = t_max, "HORIZON", rdbm.HORIZON
    n = len(times)
    return rdbm.PathSample(
        times=times, values=vals, local_time=gam,
        killed_at=end if code == rdbm.KILLED else None,
        stopped_at=end if code == rdbm.HIT_LEVEL else None,
        stop_cause=cause,
        holding=hold, jump=np.zeros(n, dtype=bool), level_after_jump=np.full(n, np.nan),
        info={"diffusive_time": float(res.time[0]), "total_holding": shift,
              "n_visits": int(marks.size), "holdings": holds},
    )


@dataclass
class EdgeBatch:
    """Exit data for many independent edge paths."""

    time: np.ndarray
    cause: np.ndarray
    gamma: np.ndarray
    diffusive_time: np.ndarray
    n_visits: np.ndarray
    holdings: np.ndarray = field(repr=False)


def edge_exit_batch(params: EdgeProcessParams, x0: float, n: int, rng: np.random.Generator,
                    dt: float = 1e-3, t_max: float = math.inf) -> EdgeBatch:
    """Exit times of ``n`` edge paths (``t_max`` bounds the diffusive clock).

    Given the local time at exit the number of boundary visits is Poisson and
    the holdings are independent, so they are drawn after the diffusive run.
    """
    if not 0 <= x0 < params.ell:
        raise DomainError("need 0 <= x0 < ell")
    kill = rdbm.elastic_thresholds(params.c, rng, n)
    res = rdbm.run_batch(rng, n, x0, params.v, dt, t_max, stop_level=params.ell, kill_at=kill)
    if params.eta_eps > 0 and params.visit_rate > 0:
        counts = rng.poisson(params.visit_rate * res.gamma)
    else:
        counts = np.zeros(n, dtype=np.int64)
    holds = np.asarray(sample_holding(params.phi, params.eta_eps, rng, size=int(counts.sum())),
                       dtype=float)
    owner = np.repeat(np.arange(n), counts)
    total = np.bincount(owner, weights=holds, minlength=n)
    return EdgeBatch(time=res.time + total, cause=res.cause, gamma=res.gamma,
                     diffusive_time=res.time, n_visits=counts, holdings=holds)


def sticky_extra_batch(x0: float, ell: float, mu: float, eta: float, delta: int, n: int,
                       rng: np.random.Generator, dt: float = 1e-3):
    """Exit time with and without a continuous sticky delay at 0.

    Uses the time change ``V_t = t + eta(delta) gamma_t`` with
    ``eta(1) = eta`` and ``eta(0) = eta / (1 + eta mu)``.  Returns
    ``(tau, extra)`` where ``tau`` is the plain exit time and ``extra`` the
    additional time spent at 0.
    """
    if delta not in (0, 1):
        raise DomainError("delta must be 0 or 1")
    if not 0 <= x0 < ell:
        raise DomainError("need 0 <= x0 < ell")
    if eta < 0:
        raise DomainError("eta must be >= 0")
    eff = eta if delta == 1 else eta / (1.0 + eta * mu)
    res = rdbm.run_batch(rng, n, x0, mu, dt, math.inf, stop_level=ell)
    return res.time, eff * res.gamma


@dataclass
class VertexRun:
    """Excursion log of one vertex path (and the grid path in path mode)."""

    hit_times: list = field(default_factory=list)
    accumulation: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    holdings: list = field(default_factory=list)
    absorbed_at: Optional[float] = None
    end_time: float = 0.0
    path: Optional[rdbm.PathSample] = None

    @property
    def n_excursions(self) -> int:
        return len(self.accumulation)


def simulate_vertex(params: VertexProcessParams, h0: float, t_max: float,
                    rng: np.random.Generator, mode: str = "fast", dt: float = 1e-3,
                    max_excursions: Optional[int] = None) -> VertexRun:
    """Run the jump-and-hold vertex process from level ``h0``.

    ``mode="fast"`` draws each descent time exactly (inverse Gaussian);
    ``mode="path"`` simulates the descents on the grid and keeps the path.
    The run stops at absorption, at ``t_max`` or after ``max_excursions``
    completed descents.
    """
    if not h0 > 0:
        raise DomainError("h0 must be > 0")
    if mode not in ("fast", "path"):
        raise DomainError(f"unknown mode {mode!r}")
    if not math.isfinite(t_max) and max_excursions is None and params.h_star == 0:
        raise DomainError("unbounded run: give a finite t_max or max_excursions")
    sym = TemperedSymbol(params.m)
    run = VertexRun()
    segs_t, segs_x, segs_hold, segs_jump, segs_lvl = [], [], [], [], []
    t, level = 0.0, float(h0)
    while True:
        if mode == "fast":
            tau = float(sample_H(sym, level, rng))
        else:
            res, pt, px, _ = rdbm.run_batch(rng, 1, level, -params.m, dt, t_max - t,
                                            stop_at_zero=True, record=True)
            tau = float(res.time[0]) if res.cause[0] == rdbm.HIT_ZERO else math.inf
            segs_t.append(pt + t)
            segs_x.append(px)
            k = len(pt)
            segs_hold.append(np.zeros(k, dtype=bool))
            segs_jump.append(np.zeros(k, dtype=bool))
            segs_lvl.append(np.full(k, np.nan))
        if t + tau >= t_max:
            t = t_max
            break
        t += tau
        run.hit_times.append(t)
        run.accumulation.append(tau)
        jump = sample_boundary_jump(params.jump, rng)
        run.jumps.append(jump)
        if jump < params.h_star:
            run.absorbed_at = t
            break
        hold = float(sample_holding(params.psi, params.eta_nu, rng))
        run.holdings.append(hold)
        if mode == "path":
            segs_t.append(np.array([t, t + hold]))
            segs_x.append(np.array([jump, jump]))
            segs_hold.append(np.array([True, True]))
            segs_jump.append(np.array([True, False]))
            segs_lvl.append(np.array([jump, np.nan]))
        t += hold
        level = jump
        if max_excursions is not None and run.n_excursions >= max_excursions:
            break
        if t >= t_max:
            t = t_max
            break
    run.end_time = t
    if mode == "path":
        times = np.concatenate(segs_t)
        n = len(times)
        cause = "ABSORBED" if run.absorbed_at is not None else "HORIZON"
        run.path = rdbm.PathSample(
            times=times, values=np.concatenate(segs_x), local_time=np.zeros(n),
            stopped_at=run.absorbed_at, stop_cause=cause,
            holding=np.concatenate(segs_hold), jump=np.concatenate(segs_jump),
            level_after_jump=np.concatenate(segs_lvl),
            info={"n_excursions": run.n_excursions},
        )
    return run


def scale_transform(path: rdbm.PathSample, h: float, k: float) -> rdbm.PathSample:
    """Map positions to ``h exp(-k x)``; times and flags are unchanged."""
    return replace(path, values=h * np.exp(-k * np.asarray(path.values, dtype=float)))
