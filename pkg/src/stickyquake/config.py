"""Run configuration: a JSON document validated against a fixed schema.

Unknown keys are rejected at every level.  ``digest()`` hashes the resolved
configuration (after command-line overrides) and is embedded in every output.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError, DomainError
from .graph import Network, StarGraph, WaveOptions, build_k_ary_network
from .region import Region

H_STAR_DEFAULT = math.log(10.0)


@dataclass
class NetworkConfig:
    kind: str = "k_ary"
    k: int = 1
    depth: int = 1
    edges: int = 3
    ell: float = 1.0
    rates: Optional[list] = None
    graph: Optional[dict] = None


@dataclass
class ModelConfig:
    x0: float = 0.0
    mu: float = 1.0
    c: float = 0.0
    stop_level: Optional[float] = 1.0
    eta_eps: float = 0.5
    phi: str = "identity"
    phi_mu: Optional[float] = None
    m: float = 1.0
    eta_nu: float = 1.0
    psi: str = "identity"
    h0: Optional[float] = None
    h_star: float = H_STAR_DEFAULT
    regions: list = field(default_factory=lambda: [
        {"id": 0, "m": 1.0, "v": 1.0, "sigma": 1.0, "c": 0.0},
        {"id": 1, "m": 2.0, "v": 1.0, "sigma": 4.0, "c": 0.0},
    ])
    network: NetworkConfig = field(default_factory=NetworkConfig)
    allow_backtrack: bool = True
    one_visit_per_region: bool = False
    absorb_on_return: bool = False
    hold_first: bool = True
    return_rate: float = 1.0
    strict_magnitudes: bool = False


@dataclass
class ValidationConfig:
    z_threshold: float = 3.0
    ks_alpha: float = 0.01


@dataclass
class FaultInjection:
    flip_drift: bool = False


@dataclass
class OutputConfig:
    dir: str = "out"


@dataclass
class RunConfig:
    seed: int = 20240611
    n_paths: int = 10_000
    n_catalogs: int = 10_000
    dt: float = 1e-3
    t_max: Optional[float] = 50.0
    threads: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    fault_injection: FaultInjection = field(default_factory=FaultInjection)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def horizon(self) -> float:
        return math.inf if self.t_max is None else float(self.t_max)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        """Hash of everything that can change results (not threads or output paths)."""
        data = self.to_dict()
        data.pop("threads")
        data.pop("output")
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def wave_options(self) -> WaveOptions:
        m = self.model
        return WaveOptions(h_star=m.h_star, h0=m.h0, hold_first=m.hold_first,
                           allow_backtrack=m.allow_backtrack,
                           one_visit_per_region=m.one_visit_per_region,
                           absorb_on_return=m.absorb_on_return, return_rate=m.return_rate,
                           dt=self.dt)

    def regions(self) -> list[Region]:
        try:
            return [Region.from_dict(r) for r in self.model.regions]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model.regions: {exc}") from exc

    def network(self) -> Network:
        """Build the network described by ``model.network``."""
        nc = self.model.network
        regs = self.regions()
        try:
            if nc.kind == "graph":
                if nc.graph is None:
                    raise ConfigError("model.network.graph is required for kind 'graph'")
                net = Network.from_dict(nc.graph)
            elif nc.kind == "star":
                st = StarGraph.uniform(0, [nc.ell] * nc.edges)
                if nc.rates is not None:
                    st = _with_rates(st, nc.rates)
                r = regs[0]
                net = Network({0: st}, {}, {0: Region(0, r.m, r.v, r.sigma, r.c)}, 0)
            elif nc.kind == "k_ary":
                n_vert = sum(nc.k ** d for d in range(nc.depth + 1))
                if len(regs) == n_vert:
                    pick = lambda v, lvl: _relabel(regs[v], v)  # noqa: E731
                elif len(regs) == nc.depth + 1:
                    pick = lambda v, lvl: _relabel(regs[lvl], v)  # noqa: E731
                elif len(regs) == 1:
                    pick = lambda v, lvl: _relabel(regs[0], v)  # noqa: E731
                else:
                    raise ConfigError(
                        f"model.regions: need 1, depth+1 = {nc.depth + 1} or {n_vert} regions, "
                        f"got {len(regs)}")
                net = build_k_ary_network(nc.k, nc.depth, pick, nc.ell)
                if nc.rates is not None:
                    net.stars[0] = _with_rates(net.stars[0], nc.rates)
            else:
                raise ConfigError(f"model.network.kind must be k_ary, star or graph, got {nc.kind!r}")
            net.validate(strict_magnitudes=self.model.strict_magnitudes)
        except DomainError as exc:
            raise ConfigError(f"model.network: {exc}") from exc
        return net

    def visit_order(self) -> list[tuple[float, float]]:
        """``(m, sigma)`` of the regions in configuration order."""
        return [(r.m, r.sigma) for r in self.regions()]


def _relabel(r: Region, vid: int) -> Region:
    return Region(vid, r.m, r.v, r.sigma, r.c)


def _with_rates(st: StarGraph, rates) -> StarGraph:
    from .graph import Edge

    if len(rates) != len(st.edges):
        raise ConfigError(f"model.network.rates: expected {len(st.edges)} values")
    return StarGraph(st.vertex_id, tuple(Edge(e.id, e.length, float(p))
                                         for e, p in zip(st.edges, rates)))


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {unknown}")
    kw = {}
    for key, val in data.items():
        f = names[key]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kw[key] = _build(sub, val, f"{path}.{key}" if path else key)
        else:
            kw[key] = val
    return cls(**kw)


_NUM = (int, float)


def _check(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2 ** 64, "seed must be a 64-bit unsigned integer")
    for k in ("n_paths", "n_catalogs", "threads"):
        v = getattr(cfg, k)
        need(isinstance(v, int) and not isinstance(v, bool) and v >= (1 if k == "threads" else 0),
             f"{k} must be a nonnegative integer" + (" >= 1" if k == "threads" else ""))
    need(isinstance(cfg.dt, _NUM) and cfg.dt > 0, "dt must be > 0")
    need(cfg.t_max is None or (isinstance(cfg.t_max, _NUM) and cfg.t_max >= 0),
         "t_max must be >= 0 or null (no horizon)")
    m = cfg.model
    need(isinstance(m.x0, _NUM) and m.x0 >= 0, "model.x0 must be >= 0")
    need(isinstance(m.mu, _NUM) and math.isfinite(m.mu), "model.mu must be finite")
    need(isinstance(m.c, _NUM) and m.c >= 0, "model.c must be >= 0")
    need(m.stop_level is None or (isinstance(m.stop_level, _NUM) and m.stop_level > 0),
         "model.stop_level must be > 0 or null")
    need(isinstance(m.eta_eps, _NUM) and m.eta_eps >= 0, "model.eta_eps must be >= 0")
    need(m.phi in ("identity", "tempered"), "model.phi must be 'identity' or 'tempered'")
    need(m.psi in ("identity", "tempered"), "model.psi must be 'identity' or 'tempered'")
    need(m.phi_mu is None or (isinstance(m.phi_mu, _NUM) and m.phi_mu >= 0),
         "model.phi_mu must be >= 0")
    need(isinstance(m.m, _NUM) and m.m > 0, "model.m must be > 0")
    need(isinstance(m.eta_nu, _NUM) and m.eta_nu >= 0, "model.eta_nu must be >= 0")
    need(m.h0 is None or (isinstance(m.h0, _NUM) and m.h0 > 0), "model.h0 must be > 0 or null")
    need(isinstance(m.h_star, _NUM) and m.h_star >= 0, "model.h_star must be >= 0")
    need(isinstance(m.return_rate, _NUM) and m.return_rate >= 0, "model.return_rate must be >= 0")
    need(isinstance(m.regions, list) and m.regions, "model.regions must be a nonempty list")
    nc = m.network
    need(isinstance(nc.k, int) and nc.k >= 1, "model.network.k must be >= 1")
    need(isinstance(nc.depth, int) and nc.depth >= 1, "model.network.depth must be >= 1")
    need(isinstance(nc.edges, int) and nc.edges >= 1, "model.network.edges must be >= 1")
    need(isinstance(nc.ell, _NUM) and nc.ell > 0, "model.network.ell must be > 0")
    v = cfg.validation
    need(isinstance(v.z_threshold, _NUM) and v.z_threshold > 0, "validation.z_threshold must be > 0")
    need(isinstance(v.ks_alpha, _NUM) and 0 < v.ks_alpha < 1, "validation.ks_alpha must be in (0, 1)")
    cfg.regions()
    cfg.network()


def from_dict(data: dict) -> RunConfig:
    try:
        cfg = _build(RunConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _check(cfg)
    return cfg


def load(path: Optional[str]) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(data)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    data = cfg.to_dict()
    for k, v in kw.items():
        if v is not None:
            data[k] = v
    return from_dict(data)


KEY_HELP = """\
configuration keys (JSON; unknown keys are rejected):
  seed                      64-bit seed of all random streams
  n_paths                   paths for simulate rdbm/edge/graph and validation budgets
  n_catalogs                catalogs for simulate quake and gr-curve
  dt                        time step of the diffusion
  t_max                     horizon (null: none)
  threads                   worker threads (output does not depend on it)
  model.x0                  start position of rdbm/edge paths
  model.mu                  drift of rdbm paths (edge drift for simulate edge)
  model.c                   elastic coefficient
  model.stop_level          Dirichlet level of rdbm/edge paths (null: none)
  model.eta_eps             stickiness of the edge process
  model.phi                 holding symbol of the edge process: identity | tempered
  model.phi_mu              |mu| of the tempered holding symbol (default: model.m)
  model.m                   magnitude of the vertex process (drift -m)
  model.eta_nu              holding parameter of the vertex process
  model.psi                 holding symbol of the vertex process: identity | tempered
  model.h0                  first accumulated level (null: random)
  model.h_star              absorption threshold (default ln 10)
  model.regions             list of {id, m, v, sigma, c}
  model.network.kind        k_ary | star | graph
  model.network.k           branching of the k_ary tree
  model.network.depth       depth of the k_ary tree
  model.network.edges       number of edges of a star
  model.network.ell         edge length
  model.network.rates       selection rates at the root star (default uniform)
  model.network.graph       explicit network {stars, adjacency, root} for kind graph
  model.allow_backtrack     waves may leave along the edge they arrived on
  model.one_visit_per_region  each region is visited at most once, no returns
  model.absorb_on_return    test absorption after every return to a center
  model.hold_first          start with an accumulation at the root
  model.return_rate         boundary visits per unit of local time
  model.strict_magnitudes   reject regions with m above the root magnitude
  validation.z_threshold    |z| above which a mean check fails
  validation.ks_alpha       KS significance level
  fault_injection.flip_drift  simulate with the opposite drift (negative control)
  output.dir                output directory (overridden by --out)
"""
