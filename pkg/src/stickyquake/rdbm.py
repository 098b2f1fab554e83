"""Reflected drifted Brownian motion on the half-line.

The free motion has generator ``u'' + mu u'`` so a step of length ``dt`` adds
``mu dt + sqrt(2 dt) xi``.  Reflection at 0 uses the Skorokhod map applied to
the exact minimum of the Brownian bridge over each step: for a free step from
``a`` to ``b`` the minimum is sampled as

    (a + b - sqrt((b - a)^2 - 4 dt log U)) / 2,

so the pair (position, local time) is exact in law at grid times.  Level
crossings above the current position use the bridge crossing probability
``exp(-(l - X_k)(l - X_{k+1}) / dt)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .subordinators import TemperedSymbol, sample_H, sample_H_killed

HORIZON, HIT_LEVEL, HIT_ZERO, KILLED, ESCAPED = range(5)
CAUSE_NAMES = {
    HORIZON: "HORIZON",
    HIT_LEVEL: "HIT_LEVEL",
    HIT_ZERO: "HIT_ZERO",
    KILLED: "ELASTIC_KILL",
    ESCAPED: "ESCAPED",
}

_CELLS = 2 ** 20


@dataclass(frozen=True)
class RdbmParams:
    """Drift ``mu``, elastic coefficient ``c``, step ``dt`` and horizon ``t_max``."""

    mu: float
    c: float = 0.0
    dt: float = 1e-3
    t_max: float = 10.0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")
        if not self.c >= 0:
            raise DomainError("c must be >= 0")
        if not self.dt > 0:
            raise DomainError("dt must be > 0")
        if not self.dt <= self.t_max:
            raise DomainError("need dt <= t_max")


@dataclass
class PathSample:
    """A grid trajectory with its local time and termination data.

    ``holding``, ``jump`` and ``level_after_jump`` are filled by the boundary
    processes; plain paths leave them as ``None``.
    """

    times: np.ndarray
    values: np.ndarray
    local_time: np.ndarray
    killed_at: Optional[float] = None
    stopped_at: Optional[float] = None
    stop_cause: str = "HORIZON"
    holding: Optional[np.ndarray] = None
    jump: Optional[np.ndarray] = None
    level_after_jump: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def flags(self) -> list[str]:
        out = [""] * len(self.times)
        if len(out):
            out[-1] = self.stop_cause
        return out

    def to_csv(self, dest=None) -> str:
        """Write columns ``t, x, gamma, flags`` (plus boundary columns when present)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        extra = self.holding is not None
        head = ["t", "x", "gamma", "flags"]
        if extra:
            head += ["holding_flag", "jump_flag", "level_after_jump"]
        w.writerow(head)
        flags = self.flags()
        for i in range(len(self.times)):
            row = [repr(float(self.times[i])), repr(float(self.values[i])),
                   repr(float(self.local_time[i])), flags[i]]
            if extra:
                lvl = self.level_after_jump[i]
                row += [int(self.holding[i]), int(self.jump[i]),
                        "" if np.isnan(lvl) else repr(float(lvl))]
            w.writerow(row)
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


@dataclass
class BatchResult:
    """Terminal state of a batch of paths."""

    time: np.ndarray
    cause: np.ndarray
    gamma: np.ndarray
    x: np.ndarray
    functional: Optional[np.ndarray] = None


def _per_path(v, n, name):
    a = np.asarray(v, dtype=float)
    if a.ndim and a.shape != (n,):
        raise DomainError(f"{name} must be scalar or of length {n}")
    return np.broadcast_to(a, (n,)).copy()


def run_batch(rng: np.random.Generator, n: int, x0, mu, dt: float, t_max, *,
              stop_level=None, stop_at_zero: bool = False, escape_level=None,
              kill_at=None, bridge: bool = True, lam: float = 0.0, weight_rate=None,
              record: bool = False):
    """Simulate ``n`` independent paths until their first terminal event.

    Parameters
    ----------
    x0, mu, t_max, stop_level, kill_at
        Scalars or length-``n`` arrays.  ``kill_at`` is a local-time threshold:
        a path is killed at the first grid time with ``gamma >= kill_at``.
    stop_at_zero
        Stop at the first time the free path reaches 0 (detected exactly from
        the bridge minimum) instead of reflecting.
    escape_level
        Stop with cause ``ESCAPED`` once the position is at or above it.
    lam, weight_rate
        When ``weight_rate`` is given, also return the trapezoid integral of
        ``exp(-lam t - weight_rate gamma_t)`` up to the terminal time.
    record
        Return the full grid trajectory as well (requires ``n == 1``).

    Returns
    -------
    BatchResult, or ``(BatchResult, times, values, local_time)`` when recording.
    Terminal times are stamped at the end of the step in which the event is
    detected, capped at ``t_max``.
    """
    if dt <= 0:
        raise DomainError("dt must be > 0")
    if record and n != 1:
        raise DomainError("record needs a single path")
    x = _per_path(x0, n, "x0")
    if np.any(x < 0):
        raise DomainError("x0 must be >= 0")
    mu = _per_path(mu, n, "mu")
    tmax = _per_path(t_max, n, "t_max")
    if np.any(tmax < 0):
        raise DomainError("t_max must be >= 0")
    with np.errstate(over="ignore", invalid="ignore"):
        lim = np.where(np.isfinite(tmax), np.ceil(tmax / dt - 1e-9), 2.0 ** 62).astype(np.int64)
    level = None if stop_level is None else _per_path(stop_level, n, "stop_level")
    kill = None if kill_at is None else _per_path(kill_at, n, "kill_at")
    weighted = weight_rate is not None

    time = np.zeros(n)
    cause = np.full(n, HORIZON, dtype=np.int8)
    gamma = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    func = np.zeros(n) if weighted else None

    start = lim > 0
    if level is not None:
        hit = start & (x >= level)
        cause[hit] = HIT_LEVEL
        start &= ~hit
    if stop_at_zero:
        hit = start & (x <= 0)
        cause[hit] = HIT_ZERO
        start &= ~hit
    if kill is not None:
        hit = start & (kill <= 0)
        cause[hit] = KILLED
        start &= ~hit
    active = np.flatnonzero(start)
    sq = math.sqrt(2.0 * dt)
    rec_t, rec_x, rec_g = [np.zeros(1)], [x[:1].copy()], [np.zeros(1)]

    while active.size:
        m = active.size
        k = max(16, min(1024, _CELLS // m))
        xa = x[active]
        ga = gamma[active]
        free = xa[:, None] + np.cumsum(mu[active, None] * dt + sq * rng.standard_normal((m, k)), axis=1)
        prev = np.empty_like(free)
        prev[:, 0] = xa
        prev[:, 1:] = free[:, :-1]
        d = free - prev
        low = 0.5 * (prev + free - np.sqrt(d * d - 4.0 * dt * np.log1p(-rng.random((m, k)))))
        idx = steps[active, None] + np.arange(1, k + 1)
        if stop_at_zero:
            pos, gam = free, np.broadcast_to(ga[:, None], free.shape)
            ev_zero = low <= 0
        else:
            reg = np.maximum.accumulate(np.maximum(-low, 0.0), axis=1)
            pos = free + reg
            gam = ga[:, None] + reg
            ev_zero = None
        masks = []
        if ev_zero is not None:
            masks.append((HIT_ZERO, ev_zero))
        if kill is not None:
            masks.append((KILLED, gam >= kill[active, None]))
        if level is not None:
            lv = level[active, None]
            cross = pos >= lv
            if bridge:
                pprev = np.empty_like(pos)
                pprev[:, 0] = xa
                pprev[:, 1:] = pos[:, :-1]
                with np.errstate(over="ignore"):
                    pc = np.exp(-(lv - pprev) * (lv - pos) / dt)
                cross |= rng.random((m, k)) < pc
            masks.append((HIT_LEVEL, cross))
        if escape_level is not None:
            masks.append((ESCAPED, pos >= escape_level))
        masks.append((HORIZON, idx >= lim[active, None]))

        ev = masks[0][1].copy()
        for _, mk in masks[1:]:
            ev |= mk
        done = ev.any(axis=1)
        first = np.where(done, np.argmax(ev, axis=1), k - 1)
        rows = np.arange(m)

        if weighted:
            t_grid = idx * dt
            w = np.exp(-lam * t_grid - weight_rate * gam)
            w0 = np.exp(-lam * steps[active] * dt - weight_rate * ga)
            wprev = np.empty_like(w)
            wprev[:, 0] = w0
            wprev[:, 1:] = w[:, :-1]
            acc = np.cumsum(0.5 * dt * (wprev + w), axis=1)
            func[active] += acc[rows, first]

        if record:
            j = first[0] + 1
            rec_t.append(idx[0, :j] * dt)
            rec_x.append(pos[0, :j].copy())
            rec_g.append(np.array(gam[0, :j]))

        end_pos = pos[rows, first]
        end_gam = gam[rows, first]
        c_first = np.full(m, HORIZON, dtype=np.int8)
        assigned = np.zeros(m, dtype=bool)
        for code, mk in masks:
            hit = done & ~assigned & mk[rows, first]
            c_first[hit] = code
            assigned |= hit

        fin = active[done]
        time[fin] = np.minimum(idx[rows, first][done] * dt, tmax[fin])
        cause[fin] = c_first[done]
        x[fin] = end_pos[done]
        gamma[fin] = end_gam[done]
        if stop_at_zero:
            x[fin[c_first[done] == HIT_ZERO]] = 0.0
        if level is not None:
            lvl_hit = fin[c_first[done] == HIT_LEVEL]
            x[lvl_hit] = level[lvl_hit]

        keep = active[~done]
        x[keep] = pos[~done, -1]
        gamma[keep] = gam[~done, -1]
        steps[keep] += k
        active = keep

    res = BatchResult(time=time, cause=cause, gamma=gamma, x=x, functional=func)
    if record:
        t = np.concatenate(rec_t)
        v = np.concatenate(rec_x)
        g = np.concatenate(rec_g)
        t[-1] = time[0]
        v[-1] = x[0]
        return res, t, v, g
    return res


def elastic_thresholds(c: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """Local-time kill levels ``Exp(1)/c`` (``inf`` when ``c == 0``)."""
    if c < 0:
        raise DomainError("c must be >= 0")
    if c == 0:
        return np.full(n, np.inf)
    # a tiny c overflows to inf, which is the right limit
    with np.errstate(over="ignore"):
        return rng.exponential(1.0, n) / c


def simulate_path(params: RdbmParams, x0: float, stop_level: Optional[float],
                  rng: np.random.Generator, *, stop_at_zero: bool = False,
                  bridge: bool = True) -> PathSample:
    """Simulate one reflected path on the grid ``0, dt, 2 dt, ...`` up to ``t_max``.

    Stops at the first crossing of ``stop_level`` (if given), at the elastic
    kill (``gamma`` above an ``Exp(1)/c`` threshold) or at the horizon.
    """
    if x0 < 0:
        raise DomainError("x0 must be >= 0")
    if stop_level is not None and stop_level <= 0:
        raise DomainError("stop_level must be > 0")
    kill = elastic_thresholds(params.c, rng, 1)
    res, t, v, g = run_batch(rng, 1, x0, params.mu, params.dt, params.t_max,
                             stop_level=stop_level, stop_at_zero=stop_at_zero,
                             kill_at=kill, bridge=bridge, record=True)
    code = int(res.cause[0])
    end = float(res.time[0])
    return PathSample(
        times=t, values=v, local_time=g,
        killed_at=end if code == KILLED else None,
        stopped_at=end if code in (HIT_LEVEL, HIT_ZERO) else None,
        stop_cause=CAUSE_NAMES[code],
        info={"mu": params.mu, "c": params.c, "dt": params.dt},
    )


def sample_tau0_exact(x, mu: float, rng: np.random.Generator, size=None):
    """Exact draw of the first hitting time of 0 from ``x`` (``inf`` if never hit).

    Inverse Gaussian for ``mu <= 0``; for ``mu > 0`` the killed variant with
    kill rate ``mu``.
    """
    if np.any(np.asarray(x) <= 0):
        raise DomainError("x must be > 0")
    sym = TemperedSymbol(abs(mu))
    if mu <= 0:
        return sample_H(sym, x, rng, size)
    return sample_H_killed(sym, x, rng, size)


def pathwise_tau0(x: float, mu: float, n: int, rng: np.random.Generator, dt: float,
                  t_max: float = math.inf, escape_level=None) -> BatchResult:
    """First hitting times of 0 along simulated free paths."""
    if x <= 0:
        raise DomainError("x must be > 0")
    return run_batch(rng, n, x, mu, dt, t_max, stop_at_zero=True, escape_level=escape_level)


def local_time_at(t: float, mu: float, n: int, rng: np.random.Generator, dt: float,
                  x0: float = 0.0) -> np.ndarray:
    """``gamma_t`` for ``n`` reflected paths started at ``x0``."""
    return run_batch(rng, n, x0, mu, dt, t).gamma


def resolvent_functional_samples(x: float, ell: float, mu: float, c: float, lam: float,
                                 n_paths: int, rng: np.random.Generator, dt: float = 1e-3,
                                 weight_rate: Optional[float] = None) -> np.ndarray:
    """Per-path ``int_0^{tau_ell} exp(-lam t - k gamma_t) dt`` with ``k = c + mu/2`` by default."""
    if not 0 <= x < ell:
        raise DomainError("need 0 <= x < ell")
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    k = c + mu / 2.0 if weight_rate is None else weight_rate
    res = run_batch(rng, n_paths, x, mu, dt, math.inf, stop_level=ell, lam=lam, weight_rate=k)
    return res.functional


def resolvent_functional_mc(x: float, ell: float, mu: float, c: float, lam: float,
                            n_paths: int, rng: np.random.Generator, dt: float = 1e-3,
                            weight_rate: Optional[float] = None) -> float:
    """Monte Carlo mean of :func:`resolvent_functional_samples`."""
    return float(np.mean(resolvent_functional_samples(x, ell, mu, c, lam, n_paths, rng, dt,
                                                      weight_rate)))
