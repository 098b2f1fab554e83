"""Metric graphs made of star graphs, and the graph process on them.

A network is a tree of stars.  Every star has a center vertex, a list of
edges with lengths and selection rates, and a region carrying the physical
parameters.  The far end of an edge is either the center of a neighboring
star (``adjacency``) or a boundary vertex of the network.

The graph process alternates between a vertex program at a center
(accumulation, release, possible absorption) and a wave on one selected edge
(sticky reflected motion with the region's velocity).  A wave ends on reaching
the far end of its edge, on a boundary visit (return to the center), on an
elastic kill, or at the horizon.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import rdbm
from .errors import DomainError
from .region import Region
from .subordinators import TemperedSymbol, sample_H

AT_VERTEX = None


@dataclass(frozen=True)
class Edge:
    id: int
    length: float
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise DomainError(f"edge {self.id}: length must be > 0")
        if not 0 <= self.rate <= 1:
            raise DomainError(f"edge {self.id}: rate must be in [0, 1]")


@dataclass(frozen=True)
class StarGraph:
    """A center vertex with its incident edges; rates must sum to 1."""

    vertex_id: int
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise DomainError(f"star {self.vertex_id}: duplicate edge ids")
        if self.edges and abs(sum(e.rate for e in self.edges) - 1.0) > 1e-9:
            raise DomainError(f"star {self.vertex_id}: rates must sum to 1")

    @classmethod
    def uniform(cls, vertex_id: int, lengths: Sequence[float], ids: Optional[Sequence[int]] = None):
        """Star with uniform selection rates ``1/|E|``."""
        ids = list(range(len(lengths))) if ids is None else list(ids)
        r = 1.0 / len(lengths) if lengths else 1.0
        return cls(vertex_id, tuple(Edge(i, float(ln), r) for i, ln in zip(ids, lengths)))

    @property
    def rates(self) -> np.ndarray:
        return np.array([e.rate for e in self.edges])

    @property
    def edge_ids(self) -> list[int]:
        return [e.id for e in self.edges]

    def edge(self, edge_id: int) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise DomainError(f"star {self.vertex_id} has no edge {edge_id}")


@dataclass(frozen=True)
class GraphPosition:
    """Point ``(edge, radial)`` of a star; ``edge_id is None`` means the center."""

    star_id: int
    edge_id: Optional[int] = AT_VERTEX
    radial: float = 0.0

    def __post_init__(self):
        if (self.edge_id is AT_VERTEX) != (self.radial == 0):
            raise DomainError("radial must be 0 exactly at the vertex")


@dataclass
class Network:
    """Stars glued along edges; ``adjacency[(star, edge)]`` is the neighbor star."""

    stars: dict
    adjacency: dict
    regions: dict
    root: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self, strict_magnitudes: bool = False) -> None:
        if self.root not in self.stars:
            raise DomainError(f"root {self.root} is not a star")
        for sid, st in self.stars.items():
            if st.vertex_id != sid:
                raise DomainError(f"star key {sid} does not match vertex id {st.vertex_id}")
            if sid not in self.regions:
                raise DomainError(f"star {sid} has no region")
        for (sid, eid), to in self.adjacency.items():
            if sid not in self.stars:
                raise DomainError(f"adjacency from unknown star {sid}")
            self.stars[sid].edge(eid)
            if to not in self.stars:
                raise DomainError(f"adjacency ({sid}, {eid}) points to unknown star {to}")
            if to == sid:
                raise DomainError(f"edge ({sid}, {eid}) loops back to its own center")
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            s = queue.popleft()
            for e in self.stars[s].edges:
                to = self.adjacency.get((s, e.id))
                if to is not None and to not in seen:
                    seen.add(to)
                    queue.append(to)
        if seen != set(self.stars):
            raise DomainError(f"stars {sorted(set(self.stars) - seen)} unreachable from root")
        if strict_magnitudes:
            m_root = self.regions[self.root].m
            bad = [s for s, r in self.regions.items() if r.m > m_root]
            if bad:
                raise DomainError(f"regions at stars {bad} exceed the root magnitude")

    def neighbor(self, star_id: int, edge_id: int) -> Optional[int]:
        return self.adjacency.get((star_id, edge_id))

    def region(self, star_id: int) -> Region:
        return self.regions[star_id]

    def check_position(self, pos: GraphPosition) -> None:
        if pos.star_id not in self.stars:
            raise DomainError(f"unknown star {pos.star_id}")
        if pos.edge_id is not AT_VERTEX:
            e = self.stars[pos.star_id].edge(pos.edge_id)
            if not 0 < pos.radial < e.length:
                raise DomainError("radial position must lie strictly inside the edge")

    @property
    def n_vertices(self) -> int:
        """Centers plus boundary vertices (dangling edge ends)."""
        dangling = sum(1 for s, st in self.stars.items() for e in st.edges
                       if (s, e.id) not in self.adjacency)
        return len(self.stars) + dangling

    @property
    def n_internal(self) -> int:
        """Branching centers: the root and every center with more than one edge."""
        return sum(1 for s, st in self.stars.items() if s == self.root or len(st.edges) > 1)

    def to_dict(self) -> dict:
        return {
            "stars": [
                {"id": sid,
                 "edges": [{"id": e.id, "length": e.length, "rate": e.rate} for e in st.edges],
                 "region": self.regions[sid].to_dict()}
                for sid, st in sorted(self.stars.items())
            ],
            "adjacency": [{"star": s, "edge": e, "to": t}
                          for (s, e), t in sorted(self.adjacency.items())],
            "root": self.root,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        unknown = set(d) - {"stars", "adjacency", "root"}
        if unknown:
            raise DomainError(f"unknown network keys: {sorted(unknown)}")
        stars, regions = {}, {}
        for s in d["stars"]:
            sid = int(s["id"])
            edges = s.get("edges", [])
            n = len(edges)
            stars[sid] = StarGraph(sid, tuple(
                Edge(int(e["id"]), float(e["length"]), float(e.get("rate", 1.0 / n))) for e in edges))
            reg = dict(s["region"])
            reg.setdefault("id", sid)
            regions[sid] = Region.from_dict(reg)
        adjacency = {(int(a["star"]), int(a["edge"])): int(a["to"]) for a in d.get("adjacency", [])}
        return cls(stars, adjacency, regions, int(d.get("root", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def select_edge(star: StarGraph, rng: np.random.Generator, exclude: Sequence[int] = ()) -> int:
    """Draw an edge id with probabilities ``rates`` (renormalized after ``exclude``)."""
    cand = [e for e in star.edges if e.id not in exclude and e.rate > 0]
    if not cand:
        raise DomainError(f"star {star.vertex_id} has no selectable edge")
    p = np.array([e.rate for e in cand])
    i = int(np.searchsorted(np.cumsum(p) / p.sum(), rng.random(), side="right"))
    return cand[min(i, len(cand) - 1)].id


def single_star(n_edges: int, region: Region, ell: float = 1.0) -> Network:
    """One star whose edges all end at boundary vertices."""
    st = StarGraph.uniform(0, [ell] * n_edges)
    return Network({0: st}, {}, {0: region}, 0)


RegionTemplate = Union[Region, Callable[[int, int], Region]]


def build_k_ary_network(k: int, depth: int, region_template: RegionTemplate,
                        ell: float = 1.0) -> Network:
    """Complete ``k``-ary tree of ``depth`` levels where every vertex is a star center.

    Vertices are numbered breadth first from the root ``0``.  The root has
    ``k`` edges; inner vertices have their parent edge (id 0) and ``k`` child
    edges; leaves have only the parent edge.  ``region_template`` is a Region
    (copied with the vertex id) or ``f(vertex_id, level) -> Region``.
    """
    if k < 1 or depth < 1:
        raise DomainError("need k >= 1 and depth >= 1")

    def region_for(vid, level):
        if callable(region_template):
            return region_template(vid, level)
        r = region_template
        return Region(vid, r.m, r.v, r.sigma, r.c)

    stars, adjacency, regions = {}, {}, {}
    level_of = {0: 0}
    parent = {0: None}
    nxt = 1
    order = [0]
    for vid in order:
        lvl = level_of[vid]
        lengths, ids = [], []
        if parent[vid] is not None:
            ids.append(0)
            lengths.append(ell)
            adjacency[(vid, 0)] = parent[vid]
        if lvl < depth:
            for j in range(k):
                eid = j if parent[vid] is None else j + 1
                ids.append(eid)
                lengths.append(ell)
                child = nxt
                nxt += 1
                parent[child] = vid
                level_of[child] = lvl + 1
                adjacency[(vid, eid)] = child
                order.append(child)
        stars[vid] = StarGraph.uniform(vid, lengths, ids)
        regions[vid] = region_for(vid, lvl)
    return Network(stars, adjacency, regions, 0)


@dataclass(frozen=True)
class WaveOptions:
    """Rules shared by the graph process and the earthquake simulator.

    Attributes
    ----------
    h_star : absorption threshold on the released level.
    h0 : released level of the very first accumulation (``None``: random).
    hold_first : run the vertex program before the first wave.
    allow_backtrack : a wave may leave along the edge it arrived on.
    one_visit_per_region : never re-enter a region and never return to a center.
    absorb_on_return : also test for absorption after returns to the same center.
    return_rate : boundary visits per unit of local time on an edge.
    velocity_factor : optional ``f(level)`` scaling the wave velocity.
    dt : time step of the edge diffusion.
    """

    h_star: float = 0.0
    h0: Optional[float] = None
    hold_first: bool = True
    allow_backtrack: bool = True
    one_visit_per_region: bool = False
    absorb_on_return: bool = False
    return_rate: float = 1.0
    velocity_factor: Optional[Callable] = None
    dt: float = 1e-3

    def __post_init__(self):
        if not self.h_star >= 0:
            raise DomainError("h_star must be >= 0")
        if self.h0 is not None and not self.h0 > 0:
            raise DomainError("h0 must be > 0")
        if not self.return_rate >= 0:
            raise DomainError("return_rate must be >= 0")
        if not self.dt > 0:
            raise DomainError("dt must be > 0")

    @property
    def effective_return_rate(self) -> float:
        return 0.0 if self.one_visit_per_region else self.return_rate


# event codes of the visit log
ACCUMULATE, RELEASE, DEPART, RETURN, SWITCH, ABSORB, KILL, EXIT, HORIZON, START = (
    "ACCUMULATE", "RELEASE", "DEPART", "RETURN", "SWITCH", "ABSORBED", "ELASTIC_KILL",
    "EXITED_NETWORK", "HORIZON", "START")


@dataclass
class QTrajectory:
    """Grid trajectory of the graph process and its visit log."""

    times: np.ndarray
    stars: np.ndarray
    edges: np.ndarray
    radial: np.ndarray
    log: list = field(default_factory=list)
    terminal: str = HORIZON
    end_time: float = 0.0
    accumulations: list = field(default_factory=list)
    selected_edges: list = field(default_factory=list)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "star", "edge_or_vertex", "radial", "event_code"])
        for t, s, e, r, code in self.log:
            w.writerow([repr(float(t)), s, "vertex" if e is None else e, repr(float(r)), code])
        return buf.getvalue()

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "star", "edge", "radial"])
        for t, s, e, r in zip(self.times, self.stars, self.edges, self.radial):
            w.writerow([repr(float(t)), int(s), "vertex" if e < 0 else int(e), repr(float(r))])
        return buf.getvalue()


def _candidates(net: Network, star: int, came_from: Optional[int], visited: set,
                opts: WaveOptions) -> list[int]:
    out = []
    for e in net.stars[star].edges:
        if e.rate == 0:
            continue
        to = net.neighbor(star, e.id)
        if not opts.allow_backtrack and to is not None and to == came_from:
            continue
        if opts.one_visit_per_region and to is not None and to in visited:
            continue
        out.append(e.id)
    return out


def simulate_Q(net: Network, start: GraphPosition, t_max: float, rng: np.random.Generator,
               opts: WaveOptions = WaveOptions(hold_first=False)) -> QTrajectory:
    """Simulate one trajectory of the graph process, keeping the full grid path."""
    net.check_position(start)
    if not t_max >= 0:
        raise DomainError("t_max must be >= 0")
    tt, ss, ee, rr = [np.zeros(1)], [np.array([start.star_id])], \
        [np.array([-1 if start.edge_id is None else start.edge_id])], [np.array([start.radial])]
    traj = QTrajectory(np.empty(0), np.empty(0), np.empty(0), np.empty(0))
    log = traj.log
    log.append((0.0, start.star_id, start.edge_id, start.radial, START))

    t = 0.0
    star = start.star_id
    came_from = None
    visited = {star}
    entry = True
    first = True
    level = math.nan
    pending_edge = start.edge_id
    x0 = start.radial

    def add(tv, sv, ev, rv):
        tt.append(np.atleast_1d(tv))
        n = len(tt[-1])
        ss.append(np.full(n, sv))
        ee.append(np.full(n, ev))
        rr.append(np.atleast_1d(rv))

    while True:
        reg = net.regions[star]
        if pending_edge is None:
            if opts.hold_first or not first:
                h = opts.h0 if (first and opts.h0 is not None) else rng.exponential(reg.eta_eps)
                tau = float(sample_H(TemperedSymbol(reg.m), h, rng))
                log.append((t, star, None, 0.0, ACCUMULATE))
                traj.accumulations.append(tau)
                if t + tau >= t_max:
                    t = t_max
                    add(t, star, -1, 0.0)
                    traj.terminal = HORIZON
                    break
                t += tau
                add(t, star, -1, 0.0)
                if (entry or opts.absorb_on_return) and h < opts.h_star:
                    log.append((t, star, None, 0.0, ABSORB))
                    traj.terminal = ABSORB
                    break
                log.append((t, star, None, 0.0, RELEASE))
                level = h
            cand = _candidates(net, star, came_from, visited, opts)
            if not cand:
                log.append((t, star, None, 0.0, EXIT))
                traj.terminal = EXIT
                break
            eid = select_edge(net.stars[star], rng,
                              exclude=[e for e in net.stars[star].edge_ids if e not in cand])
            x0 = 0.0
        else:
            eid = pending_edge
            pending_edge = None
        traj.selected_edges.append(eid)
        first = False
        entry = False
        edge = net.stars[star].edge(eid)
        v = reg.v
        if opts.velocity_factor is not None and not math.isnan(level):
            v *= float(opts.velocity_factor(level))
        rate = opts.effective_return_rate
        mark = rng.exponential(1.0) / rate if rate > 0 else math.inf
        elastic = float(rdbm.elastic_thresholds(reg.c, rng, 1)[0])
        log.append((t, star, eid, x0, DEPART))
        res, pt, px, _ = rdbm.run_batch(rng, 1, x0, v, opts.dt, t_max - t, stop_level=edge.length,
                                        kill_at=min(mark, elastic), record=True)
        add(t + pt[1:], star, eid, px[1:])
        t += float(res.time[0])
        code = int(res.cause[0])
        if code == rdbm.HIT_LEVEL:
            to = net.neighbor(star, eid)
            if to is None:
                log.append((t, star, eid, edge.length, EXIT))
                traj.terminal = EXIT
                break
            log.append((t, to, None, 0.0, SWITCH))
            add(t, to, -1, 0.0)
            came_from, star = star, to
            visited.add(star)
            entry = True
        elif code == rdbm.KILLED and mark <= elastic:
            log.append((t, star, None, 0.0, RETURN))
            add(t, star, -1, 0.0)
        elif code == rdbm.KILLED:
            log.append((t, star, eid, float(res.x[0]), KILL))
            traj.terminal = KILL
            break
        else:
            log.append((t, star, eid, float(res.x[0]), HORIZON))
            traj.terminal = HORIZON
            break
    traj.times = np.concatenate(tt)
    traj.stars = np.concatenate(ss)
    traj.edges = np.concatenate(ee)
    traj.radial = np.concatenate(rr)
    traj.end_time = t
    return traj
