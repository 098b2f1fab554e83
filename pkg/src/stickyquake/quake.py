"""Event-level earthquake simulator: accumulation at centers, waves along edges.

Each wave is one :class:`EventRecord`.  In the region where a catalog
currently sits, a level ``h ~ Exp(mean m/sigma)`` is accumulated over the
exact time ``H^Phi(h)`` (inverse Gaussian, mean ``h/m``) and then released.
On entering a region a release below ``h_star`` absorbs the catalog.  The
released wave runs on a selected edge until it reaches the far end (switch to
the neighboring region), returns to the center (a boundary visit, starting
the next accumulation in the same region), is killed elastically, or meets
the horizon.

The number of seismic events of a catalog is the number of region entries
followed by a release, i.e. the number of visited star graphs.

Catalogs are simulated in blocks of fixed size, each block drawing from its
own counter-based stream, and within a block all live catalogs advance by one
wave per round.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import rdbm
from .errors import DomainError
from .graph import Network, WaveOptions
from .region import Region
from .rng import BLOCK_SIZE, map_blocks
from .subordinators import sample_tempered

__all__ = ["Region", "EventRecord", "Catalog", "simulate_quake", "simulate_catalogs",
           "run_waves", "empirical_gr_curve", "gr_curve_rows", "catalog_summary"]

SWITCH_REGION, RETURN_VERTEX, ABSORBED, ELASTIC_KILL, HORIZON, EXITED_NETWORK = range(6)
TERMINALS = ("SWITCH_REGION", "RETURN_VERTEX", "ABSORBED", "ELASTIC_KILL", "HORIZON",
             "EXITED_NETWORK")
FINAL = {ABSORBED, ELASTIC_KILL, HORIZON, EXITED_NETWORK}


@dataclass(frozen=True)
class EventRecord:
    """One wave: accumulation in ``region``, release of ``jump_level``, propagation ``tau_W``.

    ``entry`` marks the first wave after entering a region and ``released``
    whether the accumulated level was actually released.  ``edge`` is ``-1``
    when no edge was selected.
    """

    i: int
    region: int
    tau_E: float
    jump_level: float
    tau_W: float
    cumulative_t: float
    terminal: str
    edge: int = -1
    entry: bool = False
    released: bool = True


@dataclass
class Catalog:
    events: list
    h_star: float
    seed: Optional[int] = None
    config_digest: str = ""

    def __post_init__(self):
        finals = [e for e in self.events if e.terminal in {TERMINALS[k] for k in FINAL}]
        if len(finals) > 1 or (finals and self.events[-1] is not finals[0]):
            raise DomainError("only the last event may be terminal")

    @property
    def n_events(self) -> int:
        """Number of visited regions with a release."""
        return sum(1 for e in self.events if e.entry and e.released)

    @property
    def lifetime(self) -> float:
        return self.events[-1].cumulative_t if self.events else 0.0

    @property
    def terminal(self) -> Optional[str]:
        return self.events[-1].terminal if self.events else None


@dataclass
class WaveLog:
    """Flat arrays of all waves of a batch, ordered by (catalog, wave index)."""

    cat: np.ndarray
    i: np.ndarray
    region: np.ndarray
    edge: np.ndarray
    tau_E: np.ndarray
    level: np.ndarray
    tau_W: np.ndarray
    t_end: np.ndarray
    terminal: np.ndarray
    entry: np.ndarray
    released: np.ndarray
    n: int = 0
    end_time: np.ndarray = field(default=None)
    final: np.ndarray = field(default=None)
    n_events: np.ndarray = field(default=None)

    @classmethod
    def concat(cls, logs: Sequence["WaveLog"]) -> "WaveLog":
        off = 0
        parts = []
        for lg in logs:
            parts.append((lg, off))
            off += lg.n
        names = ["cat", "i", "region", "edge", "tau_E", "level", "tau_W", "t_end",
                 "terminal", "entry", "released"]
        kw = {}
        for nm in names:
            kw[nm] = np.concatenate([getattr(lg, nm) + o if nm == "cat" else getattr(lg, nm)
                                     for lg, o in parts]) if parts else np.empty(0)
        for nm in ["end_time", "final", "n_events"]:
            kw[nm] = np.concatenate([getattr(lg, nm) for lg, _ in parts])
        return cls(n=off, **kw)


class _Topology:
    """Network flattened into arrays indexed by star position."""

    def __init__(self, net: Network):
        self.ids = sorted(net.stars)
        self.pos = {s: k for k, s in enumerate(self.ids)}
        regs = [net.regions[s] for s in self.ids]
        self.m = np.array([r.m for r in regs])
        self.sigma = np.array([r.sigma for r in regs])
        self.v = np.array([r.v for r in regs])
        self.c = np.array([r.c for r in regs])
        self.region_id = np.array([r.id for r in regs])
        self.edge_ids, self.rates, self.nbr, self.length = [], [], [], []
        for s in self.ids:
            st = net.stars[s]
            self.edge_ids.append(np.array(st.edge_ids, dtype=np.int64))
            self.rates.append(st.rates)
            nb = [net.neighbor(s, e) for e in st.edge_ids]
            self.nbr.append(np.array([-1 if x is None else self.pos[x] for x in nb], dtype=np.int64))
            self.length.append(np.array([e.length for e in st.edges]))
        self.root = self.pos[net.root]


def _run_block(topo: _Topology, opts: WaveOptions, t_max: float, rng: np.random.Generator,
               size: int) -> WaveLog:
    star = np.full(size, topo.root, dtype=np.int64)
    t = np.zeros(size)
    came = np.full(size, -1, dtype=np.int64)
    entry = np.ones(size, dtype=bool)
    first = np.ones(size, dtype=bool)
    alive = np.ones(size, dtype=bool) if t_max > 0 else np.zeros(size, dtype=bool)
    count = np.zeros(size, dtype=np.int64)
    final = np.full(size, HORIZON, dtype=np.int64)
    wave_no = np.zeros(size, dtype=np.int64)
    visited = np.zeros((size, len(topo.ids)), dtype=bool)
    visited[:, topo.root] = True
    rate = opts.effective_return_rate
    rows = []

    while alive.any():
        a = np.flatnonzero(alive)
        sa = star[a]
        m, sig = topo.m[sa], topo.sigma[sa]
        hold = ~first[a] | opts.hold_first
        h = rng.exponential(1.0, a.size) * (m / sig)
        if opts.h0 is not None:
            h = np.where(first[a], opts.h0, h)
        tau_e = np.where(hold, sample_tempered(h, m, rng), 0.0)
        level = np.where(hold, h, np.nan)
        hz = t[a] + tau_e >= t_max
        tau_e = np.where(hz, t_max - t[a], tau_e)
        t[a] += tau_e
        check = hold & (entry[a] | opts.absorb_on_return)
        absorbed = ~hz & check & (h < opts.h_star)
        released = hold & ~hz & ~absorbed
        count[a] += entry[a] & released

        term = np.full(a.size, -1, dtype=np.int64)
        term[hz] = HORIZON
        term[absorbed] = ABSORBED
        edge = np.full(a.size, -1, dtype=np.int64)
        tau_w = np.zeros(a.size)

        go = np.flatnonzero(term < 0)
        u = rng.random(go.size)
        pick = np.full(go.size, -1, dtype=np.int64)
        for j, g in enumerate(go):
            s = sa[g]
            ok = topo.rates[s] > 0
            nb = topo.nbr[s]
            if not opts.allow_backtrack:
                ok &= ~((nb >= 0) & (nb == came[a[g]]))
            if opts.one_visit_per_region:
                ok &= ~((nb >= 0) & visited[a[g], np.maximum(nb, 0)])
            if not ok.any():
                continue
            p = np.cumsum(np.where(ok, topo.rates[s], 0.0))
            pick[j] = min(int(np.searchsorted(p / p[-1], u[j], side="right")), len(p) - 1)
        stuck = go[pick < 0]
        term[stuck] = EXITED_NETWORK
        go, pick = go[pick >= 0], pick[pick >= 0]

        if go.size:
            gs = sa[go]
            ell = np.array([topo.length[s][k] for s, k in zip(gs, pick)])
            nbr = np.array([topo.nbr[s][k] for s, k in zip(gs, pick)], dtype=np.int64)
            edge[go] = [topo.edge_ids[s][k] for s, k in zip(gs, pick)]
            v = topo.v[gs].copy()
            if opts.velocity_factor is not None:
                lv = level[go]
                has = ~np.isnan(lv)
                v[has] *= np.asarray(opts.velocity_factor(lv[has]), dtype=float)
            mark = rng.exponential(1.0, go.size) / rate if rate > 0 else np.full(go.size, np.inf)
            cg = topo.c[gs]
            with np.errstate(divide="ignore"):
                elastic = np.where(cg > 0, rng.exponential(1.0, go.size) / np.where(cg > 0, cg, 1.0),
                                   np.inf)
            res = rdbm.run_batch(rng, go.size, 0.0, v, opts.dt, t_max - t[a[go]], stop_level=ell,
                                 kill_at=np.minimum(mark, elastic))
            tau_w[go] = res.time
            t[a[go]] += res.time
            out = np.full(go.size, HORIZON, dtype=np.int64)
            lvl_hit = res.cause == rdbm.HIT_LEVEL
            out[lvl_hit & (nbr < 0)] = EXITED_NETWORK
            sw = lvl_hit & (nbr >= 0)
            out[sw] = SWITCH_REGION
            killed = res.cause == rdbm.KILLED
            out[killed & (mark <= elastic)] = RETURN_VERTEX
            out[killed & (mark > elastic)] = ELASTIC_KILL
            term[go] = out
            ids = a[go]
            came[ids[sw]] = gs[sw]
            star[ids[sw]] = nbr[sw]
            visited[ids[sw], nbr[sw]] = True

        rows.append((a, wave_no[a].copy(), topo.region_id[sa], edge, tau_e, level, tau_w,
                     t[a].copy(), term, entry[a].copy(), released))
        wave_no[a] += 1
        first[a] = False
        entry[a] = term == SWITCH_REGION
        done = np.isin(term, list(FINAL))
        final[a[done]] = term[done]
        alive[a[done]] = False

    if rows:
        cols = [np.concatenate(c) for c in zip(*rows)]
        order = np.lexsort((cols[1], cols[0]))
        cols = [c[order] for c in cols]
    else:
        cols = [np.empty(0, dtype=np.int64)] * 3 + [np.empty(0, dtype=np.int64)] + \
               [np.empty(0)] * 4 + [np.empty(0, dtype=np.int64)] + [np.empty(0, dtype=bool)] * 2
    return WaveLog(*cols, n=size, end_time=t, final=final, n_events=count)


def run_waves(net: Network, n: int, seed: int, opts: WaveOptions, t_max: float = math.inf,
              tag="quake", threads: Optional[int] = None, block: int = BLOCK_SIZE) -> WaveLog:
    """Simulate ``n`` independent catalogs and return all their waves as flat arrays."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if not t_max >= 0:
        raise DomainError("t_max must be >= 0")
    if not math.isfinite(t_max) and opts.h_star == 0:
        term_possible = any(r.c > 0 for r in net.regions.values()) or \
            any(net.neighbor(s, e) is None for s, st in net.stars.items() for e in st.edge_ids)
        if not term_possible and not opts.one_visit_per_region:
            raise DomainError("catalogs can never end: set t_max, h_star > 0, c > 0 or a boundary")
    topo = _Topology(net)
    logs = map_blocks(lambda rng, size: _run_block(topo, opts, t_max, rng, size), n, seed, tag,
                      threads=threads, block=block)
    return WaveLog.concat(logs)


def catalogs_from_log(log: WaveLog, h_star: float, seed=None, digest: str = "") -> list[Catalog]:
    bounds = np.searchsorted(log.cat, np.arange(log.n + 1))
    out = []
    for c in range(log.n):
        lo, hi = bounds[c], bounds[c + 1]
        cum = np.cumsum(log.tau_E[lo:hi] + log.tau_W[lo:hi])
        ev = [EventRecord(int(log.i[j]), int(log.region[j]), float(log.tau_E[j]),
                          float(log.level[j]), float(log.tau_W[j]), float(cum[j - lo]),
                          TERMINALS[int(log.terminal[j])], int(log.edge[j]), bool(log.entry[j]),
                          bool(log.released[j]))
              for j in range(lo, hi)]
        out.append(Catalog(ev, h_star, seed, digest))
    return out


def simulate_catalogs(net: Network, n: int, seed: int, opts: WaveOptions,
                      t_max: float = math.inf, threads: Optional[int] = None,
                      digest: str = "") -> list[Catalog]:
    log = run_waves(net, n, seed, opts, t_max, threads=threads)
    return catalogs_from_log(log, opts.h_star, seed, digest)


def simulate_quake(net: Network, h0: Optional[float], t_max: float, rng: np.random.Generator,
                   opts: WaveOptions = WaveOptions()) -> Catalog:
    """One catalog started at the root center (``h0=None`` draws the first level)."""
    if h0 is not None and not h0 > 0:
        raise DomainError("h0 must be > 0")
    o = replace(opts, h0=h0)
    log = _run_block(_Topology(net), o, t_max, rng, 1)
    return catalogs_from_log(log, o.h_star)[0]


def empirical_gr_curve(catalogs) -> list[tuple[int, float]]:
    """``(n, fraction of catalogs with at least n events)`` for ``n = 0 .. max``."""
    counts = np.array([c.n_events for c in catalogs] if not isinstance(catalogs, np.ndarray)
                      else catalogs)
    if counts.size == 0:
        raise DomainError("no catalogs")
    hist = np.bincount(counts)
    surv = np.cumsum(hist[::-1])[::-1] / counts.size
    return [(n, float(s)) for n, s in enumerate(surv)]


def gr_curve_rows(counts: np.ndarray, visit_order: Sequence[tuple[float, float]],
                  h_star: float) -> list[tuple[int, float, float, float]]:
    """Rows ``(n, empirical, analytic, std_error)`` for ``n = 0 .. len(visit_order)``.

    ``visit_order`` lists ``(m, sigma)`` of the regions in the order a catalog
    enters them.
    """
    from .analytics import gr_survival

    counts = np.asarray(counts)
    if counts.size == 0:
        raise DomainError("no catalogs")
    rows = []
    for n in range(len(visit_order) + 1):
        p = float(np.mean(counts >= n))
        rows.append((n, p, gr_survival(n, visit_order, h_star), math.sqrt(p * (1 - p) / counts.size)))
    return rows


def catalog_summary(catalog: Catalog) -> dict:
    """Per-region counts and mean times, terminal histogram and lifetime."""
    per = {}
    for e in catalog.events:
        d = per.setdefault(e.region, {"waves": 0, "tau_E": [], "tau_W": []})
        d["waves"] += 1
        d["tau_E"].append(e.tau_E)
        d["tau_W"].append(e.tau_W)
    regions = {str(r): {"waves": d["waves"], "mean_tau_E": float(np.mean(d["tau_E"])),
                        "mean_tau_W": float(np.mean(d["tau_W"]))} for r, d in sorted(per.items())}
    return {
        "n_waves": len(catalog.events),
        "n_events": catalog.n_events,
        "regions": regions,
        "terminals": dict(sorted(Counter(e.terminal for e in catalog.events).items())),
        "lifetime": catalog.lifetime,
    }


CATALOG_COLUMNS = ["catalog", "i", "region", "tau_E", "jump_level", "tau_W", "cumulative_t",
                   "terminal"]


def catalogs_csv(catalogs: Sequence[Catalog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CATALOG_COLUMNS)
    for k, cat in enumerate(catalogs):
        for e in cat.events:
            w.writerow([k, e.i, e.region, repr(e.tau_E),
                        "" if math.isnan(e.jump_level) else repr(e.jump_level),
                        repr(e.tau_W), repr(e.cumulative_t), e.terminal])
    return buf.getvalue()


def summary_json(catalogs: Sequence[Catalog]) -> str:
    counts = np.array([c.n_events for c in catalogs]) if catalogs else np.zeros(0, dtype=int)
    term = Counter(c.terminal for c in catalogs if c.terminal)
    out = {
        "n_catalogs": len(catalogs),
        "mean_events": float(counts.mean()) if counts.size else 0.0,
        "terminals": dict(sorted(term.items())),
        "gr_curve": empirical_gr_curve(counts) if counts.size else [],
    }
    return json.dumps(out, indent=2, sort_keys=True)
