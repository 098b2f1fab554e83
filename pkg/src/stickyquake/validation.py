"""Oracle checks: simulation output against the closed forms.

Every check draws from its own tagged stream under the given seed and is
split into fixed-size blocks, so reports do not depend on the thread count.
``flip_drift`` simulates the half-line motion with the opposite drift while
comparing against the original oracle (a negative control); edge and graph
checks, whose velocities must be nonnegative, ignore it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import analytics as A
from . import boundary, graph, quake, rdbm
from .harness import (KS_ALPHA, Z_THRESHOLD, OracleReport, compare_mean,
                      compare_proportion, ks_one_sample, ks_report, ks_two_sample, mean_se)
from .region import Region
from .rng import map_blocks, parallel_samples
from .subordinators import (IDENTITY, JumpKernel, TemperedSymbol, sample_boundary_jump, sample_H,
                            sample_H_killed, sample_holding, sample_inverse_subordinator)


@dataclass(frozen=True)
class Budget:
    seed: int = 1
    n: int = 10_000
    dt: float = 1e-3
    threads: Optional[int] = None
    z: float = Z_THRESHOLD
    alpha: float = KS_ALPHA
    flip_drift: bool = False

    def sim_mu(self, mu: float) -> float:
        return -mu if self.flip_drift else mu


def _draw(b: Budget, tag, fn, n=None):
    return parallel_samples(fn, b.n if n is None else n, b.seed, tag, threads=b.threads)


# ---------------------------------------------------------------- subordinators

def check_subordinators(b: Budget) -> list[OracleReport]:
    out = []
    sym = TemperedSymbol(2.0)
    h = _draw(b, "H-mean", lambda r, s: sample_H(sym, 1.0, r, size=s))
    out.append(compare_mean("subordinators.H_mean", h, 0.5, b.z, level=1.0, mu=2.0))
    for lam in (0.5, 1.0, 2.0, 4.0):
        out.append(compare_mean(f"subordinators.H_laplace[lam={lam}]", np.exp(-lam * h),
                                A.laplace_H(lam, 1.0, 2.0), b.z))
    killed = _draw(b, "H-killed", lambda r, s: sample_H_killed(TemperedSymbol(1.0), 1.0, r, size=s))
    out.append(compare_proportion("subordinators.killed_finite", np.isfinite(killed),
                                  math.exp(-1.0), b.z, level=1.0, mu=1.0))
    e = _draw(b, "hold-id", lambda r, s: sample_holding(IDENTITY, 3.0, r, size=s))
    d, p = ks_one_sample(e, lambda z: -np.expm1(-np.maximum(z, 0) / 3.0))
    out.append(ks_report("subordinators.holding_identity_ks", d, p, e.size, b.alpha, eta=3.0))
    reg = Region(0, 2.0, 1.0, 4.0)
    hp = _draw(b, "hold-phi", lambda r, s: sample_holding(TemperedSymbol(reg.m), reg.eta_eps, r, s))
    out.append(compare_mean("subordinators.holding_phi_mean", hp, 1.0 / reg.sigma, b.z,
                            m=reg.m, sigma=reg.sigma))
    j = _draw(b, "jump", lambda r, s: sample_boundary_jump(JumpKernel(reg.eta_eps), r, s))
    h_star = math.log(10.0)
    out.append(compare_proportion("subordinators.jump_exceeds_h_star", j > h_star,
                                  math.exp(-h_star * reg.sigma / reg.m), b.z))
    return out


# ---------------------------------------------------------------- rdbm

def exit_times(b: Budget, x: float, mu: float, ell: float, dt: float, n: int, tag) -> np.ndarray:
    return _draw(b, tag, lambda r, s: rdbm.run_batch(r, s, x, mu, dt, math.inf,
                                                     stop_level=ell).time, n)


def check_exit_mean(b: Budget, x=0.0, mu=1.0, ell=1.0, dt=None, n=None) -> OracleReport:
    dt = b.dt if dt is None else dt
    tau = exit_times(b, x, b.sim_mu(mu), ell, dt, n or b.n, ("exit", dt))
    return compare_mean("rdbm.mean_exit", tau, A.mean_tau_ell(x, ell, mu), b.z,
                        x=x, mu=mu, ell=ell, dt=dt)


def check_exit_shrinkage(b: Budget, x=0.0, mu=1.0, ell=1.0, dt_fine=1e-4, ratio=10,
                         n=None, tau_fine=None) -> OracleReport:
    """Bias growth from ``dt_fine`` to ``ratio * dt_fine`` on coupled paths.

    The coarse scheme observes the same path only at every ``ratio``-th grid
    time, so its exit time is the end of the coarse step containing the fine
    one.  Both schemes stamp exits at step ends, so their biases are
    nonnegative up to the (much smaller) bridge error and
    ``bias_coarse = bias_fine + D`` with ``D = E[tau_coarse - tau_fine]``.
    The check passes when ``D`` is positive at the z threshold.
    """
    if tau_fine is None:
        tau_fine = exit_times(b, x, b.sim_mu(mu), ell, dt_fine, n or b.n, ("exit", dt_fine))
    j = np.rint(tau_fine / dt_fine).astype(np.int64)
    coarse = -(-j // ratio) * ratio * dt_fine
    diff = coarse - j * dt_fine
    d, se, _ = mean_se(diff)
    oracle = A.mean_tau_ell(x, ell, mu)
    bf = float(np.mean(tau_fine)) - oracle
    z = d / se if se > 0 else math.inf
    rep = OracleReport("rdbm.exit_bias_shrinks", 0.0, d, se, diff.size, z,
                       "PASS" if z > b.z else "FAIL", b.z, "shrinkage",
                       {"dt_fine": dt_fine, "dt_coarse": ratio * dt_fine,
                        "bias_fine": bf, "bias_coarse": bf + d})
    return rep


def check_tau0_law(b: Budget, x=1.0, mu=-1.0, dt=None, n=None,
                   horizon=200.0) -> list[OracleReport]:
    dt = b.dt if dt is None else dt
    n = n or b.n
    res = _draw(b, ("tau0-path", dt), lambda r, s: rdbm.pathwise_tau0(
        x, b.sim_mu(mu), s, r, dt, t_max=horizon).time, n)
    exact = _draw(b, "tau0-exact", lambda r, s: rdbm.sample_tau0_exact(x, mu, r, size=s), n)
    d, p = ks_two_sample(res, exact)
    return [ks_report("rdbm.tau0_pathwise_vs_exact_ks", d, p, n, b.alpha, x=x, mu=mu, dt=dt),
            compare_mean("rdbm.tau0_mean", res, A.mean_tau0(x, mu), b.z, x=x, mu=mu, dt=dt,
                         horizon=horizon)]


def hitting_tail(x: float, mu: float, t: float) -> float:
    """``P(t < tau_0 < inf)`` from the first-passage density."""
    f = lambda s: x / math.sqrt(4 * math.pi * s ** 3) * math.exp(-(x + mu * s) ** 2 / (4 * s))  # noqa: E731
    return integrate.quad(f, t, math.inf)[0]


def check_tau0_finite(b: Budget, x=1.0, mu=1.0, n=None, dt=1e-2, horizon=100.0,
                      escape=12.0) -> OracleReport:
    """``P(tau_0 < inf)`` from paths stopped at 0, at ``escape`` or at ``horizon``.

    Hitting 0 is detected from the exact step minimum, so the estimate is
    exact for any ``dt`` apart from the truncation: a path at ``escape``
    still reaches 0 with probability ``exp(-mu escape)`` and paths alive at the
    horizon are counted as not hitting.
    """
    n = n or b.n
    cause = _draw(b, ("tau0-finite", dt), lambda r, s: rdbm.pathwise_tau0(
        x, b.sim_mu(mu), s, r, dt, t_max=horizon, escape_level=escape).cause, n)
    trunc = math.exp(-mu * escape) + hitting_tail(x, mu, horizon)
    return compare_proportion("rdbm.tau0_finite_probability", cause == rdbm.HIT_ZERO,
                              math.exp(-mu * x), b.z, x=x, mu=mu, dt=dt, horizon=horizon,
                              escape_level=escape, truncation_bound=trunc,
                              undecided=int(np.sum(cause == rdbm.HORIZON)))


def check_local_time(b: Budget, t=1.0, mu=-1.0, n=None, dt=None, ds=1e-3) -> list[OracleReport]:
    dt = b.dt if dt is None else dt
    n = n or b.n
    g = _draw(b, ("gamma", mu, dt), lambda r, s: rdbm.local_time_at(t, b.sim_mu(mu), s, r, dt), n)
    sym = TemperedSymbol(abs(mu))
    kill = mu if mu > 0 else 0.0
    inv = _draw(b, ("inverse-sub", mu, ds), lambda r, s: sample_inverse_subordinator(
        sym, t, r, s, ds=ds, kill_rate=kill), n)
    d, p = ks_two_sample(g, inv)
    out = [ks_report(f"rdbm.local_time_vs_inverse_subordinator_ks[mu={mu}]", d, p, n, b.alpha,
                     t=t, mu=mu, dt=dt, ds=ds)]
    d1, p1 = ks_one_sample(g, lambda s: local_time_cdf(s, t, mu))
    out.append(ks_report(f"rdbm.local_time_exact_cdf_ks[mu={mu}]", d1, p1, n, b.alpha, t=t, mu=mu,
                         dt=dt))
    return out


def local_time_cdf(s, t: float, mu: float):
    """``P(gamma_t <= s) = 1 - P(H_s < t) P(T > s)`` with ``T ~ Exp(max(mu, 0))``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s)
    for i, sv in enumerate(s):
        if sv <= 0:
            out[i] = 0.0
            continue
        keep = A.hitting_cdf(t, sv, mu) * (math.exp(-mu * sv) if mu > 0 else 1.0)
        out[i] = 1.0 - keep
    return out


def check_kernel(b: Budget, t=0.5, x=0.3, mu=0.7, c=0.4, n_survivors=None, dt=None):
    dt = b.dt if dt is None else dt
    target = n_survivors or b.n
    z_surv = A.survival_probability(t, x, mu, c)
    n = int(math.ceil(target / z_surv * 1.05)) + 200

    def run(r, s):
        kill = rdbm.elastic_thresholds(c, r, s)
        res = rdbm.run_batch(r, s, x, b.sim_mu(mu), dt, t, kill_at=kill)
        return res.cause, res.x
    cause, pos = _draw(b, ("kernel", dt), run, n)
    alive = cause == rdbm.HORIZON
    y = pos[alive][:target]
    d, p = ks_one_sample(y, lambda q: A.transition_cdf(t, x, q, mu, c) / z_surv)
    return [ks_report("rdbm.kernel_conditional_ks", d, p, y.size, b.alpha, t=t, x=x, mu=mu, c=c,
                      dt=dt),
            compare_proportion("rdbm.elastic_survival", alive, z_surv, b.z, t=t, x=x, mu=mu,
                               c=c, dt=dt)]


def check_resolvent(b: Budget, lam=1.0, c=1.0, mu=1.0, ell=1.0, x=0.0, n=None, dt=None,
                    oracle: str = "bvp") -> OracleReport:
    """Weighted functional with weight ``exp(-lam t - (c + mu/2) gamma_t)``.

    ``oracle="bvp"`` compares with the exact two-point solution, ``"closed_form"``
    with :func:`analytics.resolvent_closed_form`.
    """
    dt = b.dt if dt is None else dt
    k = c + mu / 2.0
    f = _draw(b, ("resolvent", dt), lambda r, s: rdbm.resolvent_functional_samples(
        x, ell, b.sim_mu(mu), c, lam, s, r, dt, weight_rate=k), n or b.n)
    bvp = A.resolvent_bvp(lam, x, ell, mu, k)
    closed = A.resolvent_closed_form(lam, x, ell, mu, c)
    val = bvp if oracle == "bvp" else closed
    return compare_mean(f"rdbm.resolvent_{oracle}", f, val, b.z, lam=lam, c=c, mu=mu, ell=ell,
                        x=x, dt=dt, weight_rate=k, bvp=bvp, closed_form=closed)


def check_rdbm(b: Budget) -> list[OracleReport]:
    out = [check_exit_mean(b)]
    out += check_tau0_law(b)
    out.append(check_tau0_finite(b))
    out += check_local_time(b, mu=-1.0)
    out += check_local_time(b, mu=1.0)
    out += check_kernel(b)
    out.append(check_resolvent(b))
    return out


# ---------------------------------------------------------------- boundary

def check_sticky_extra(b: Budget, delta=1, x=0.0, mu=1.0, ell=1.0, eta=0.5, n=None, dt=None):
    dt = b.dt if dt is None else dt
    extra = _draw(b, ("sticky", delta, dt), lambda r, s: boundary.sticky_extra_batch(
        x, ell, b.sim_mu(mu), eta, delta, s, r, dt)[1], n or b.n)
    return compare_mean(f"boundary.sticky_extra[delta={delta}]", extra,
                        A.mean_sticky_extra(x, ell, mu, eta, delta), b.z,
                        x=x, mu=mu, ell=ell, eta=eta, dt=dt)


def _edge_batch(b: Budget, params, x0, n, tag, dt):
    def run(r, s):
        eb = boundary.edge_exit_batch(params, x0, s, r, dt)
        return eb.time, eb.holdings
    # holdings have variable length per block
    res = map_blocks(run, n, b.seed, tag, threads=b.threads)
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


def check_edge_mean(b: Budget, eta, phi=IDENTITY, x=0.0, mu=1.0, ell=1.0, n=None, dt=None):
    dt = b.dt if dt is None else dt
    p = boundary.EdgeProcessParams(v=mu, ell=ell, eta_eps=eta, phi=phi)
    t, _ = _edge_batch(b, p, x, n or b.n, ("edge-mean", eta, str(phi), dt), dt)
    pp0 = phi.derivative_at_zero()
    return compare_mean(f"boundary.edge_mean_exit[eta={eta},phi={_phi_name(phi)}]", t,
                        A.mean_exit_sticky_general(x, ell, mu, eta, pp0), b.z,
                        x=x, mu=mu, ell=ell, eta=eta, dt=dt,
                        verbatim=A.mean_exit_sticky(x, ell, mu, eta))


def _phi_name(phi):
    return "identity" if phi is IDENTITY else f"tempered({phi.mu_abs:g})"


def check_holdings(b: Budget, n_hold=None, dt=None, region=Region(0, 2.0, 1.0, 4.0), ell=1.0):
    dt = b.dt if dt is None else dt
    target = n_hold or b.n
    out = []
    # identity symbol: holdings are exponential with mean eta
    eta = 1.0
    p = boundary.EdgeProcessParams(v=region.v, ell=ell, eta_eps=eta, phi=IDENTITY)
    visits = A.expected_local_time_at_exit(0.0, ell, region.v)
    n_paths = int(target / visits * 1.2) + 100
    _, hold = _edge_batch(b, p, 0.0, n_paths, ("hold-id", dt), dt)
    hold = hold[:target]
    d, pv = ks_one_sample(hold, lambda z: -np.expm1(-np.maximum(z, 0) / eta))
    out.append(ks_report("boundary.holding_identity_ks", d, pv, hold.size, b.alpha, eta=eta))
    # tempered symbol of the region
    p = boundary.EdgeProcessParams.from_region(region, ell)
    _, hold = _edge_batch(b, p, 0.0, n_paths, ("hold-phi", dt), dt)
    hold = hold[:target]
    ref = _draw(b, "hold-phi-ref", lambda r, s: sample_holding(TemperedSymbol(region.m),
                                                                region.eta_eps, r, s), hold.size)
    d, pv = ks_two_sample(hold, ref)
    out.append(ks_report("boundary.holding_phi_ks", d, pv, hold.size, b.alpha, m=region.m,
                         sigma=region.sigma))
    out.append(compare_mean("boundary.holding_phi_mean", hold, region.mean_accumulation, b.z,
                            m=region.m, sigma=region.sigma))
    return out


def check_vertex(b: Budget, m=1.0, h0=1.0, n=None, dt=None):
    dt = b.dt if dt is None else dt
    n = n or b.n
    out = []
    path = _draw(b, ("vertex-path", dt), lambda r, s: rdbm.pathwise_tau0(
        h0, -b.sim_mu(m), s, r, dt, t_max=200.0).time, n)
    exact = _draw(b, "vertex-exact", lambda r, s: sample_H(TemperedSymbol(m), h0, r, size=s), n)
    d, p = ks_two_sample(path, exact)
    out.append(ks_report("boundary.vertex_accumulation_ks", d, p, n, b.alpha, m=m, h0=h0, dt=dt))
    eta, h_star = 0.5, 0.3
    params = boundary.VertexProcessParams(m=m, eta_nu=1.0, jump=JumpKernel(eta), h_star=h_star)

    def excursions(r, s):
        return np.array([boundary.simulate_vertex(params, h0, math.inf, r, max_excursions=4)
                         .n_excursions for _ in range(s)])
    k = _draw(b, "vertex-excursions", excursions, min(n, 20_000))
    q = math.exp(-h_star / eta)
    out.append(compare_proportion("boundary.vertex_absorb_first_hit", k == 1, 1 - q, b.z,
                                  eta=eta, h_star=h_star))
    out.append(compare_proportion("boundary.vertex_third_excursion", k >= 3, q * q, b.z,
                                  eta=eta, h_star=h_star))
    return out


def check_boundary(b: Budget) -> list[OracleReport]:
    out = [check_sticky_extra(b, 1), check_sticky_extra(b, 0)]
    for eta in (0.0, 0.5, 1.0):
        out.append(check_edge_mean(b, eta))
    out.append(check_edge_mean(b, 0.5, TemperedSymbol(2.0)))
    out += check_holdings(b)
    out += check_vertex(b)
    return out


# ---------------------------------------------------------------- graph

def check_graph(b: Budget, n_edges=3, region=Region(0, 1.0, 1.0, 2.0), ell=1.0, n=None,
                dt=None) -> list[OracleReport]:
    dt = b.dt if dt is None else dt
    n = n or b.n
    net = graph.single_star(n_edges, region, ell)
    opts = graph.WaveOptions(hold_first=False, dt=dt)
    log = quake.run_waves(net, n, b.seed, opts, tag="graph-q", threads=b.threads)
    params = boundary.EdgeProcessParams.from_region(region, ell)
    edge_t, _ = _edge_batch(b, params, 0.0, n, ("graph-edge", dt), dt)
    d, p = ks_two_sample(log.end_time, edge_t)
    out = [ks_report("graph.Q_exit_vs_edge_ks", d, p, n, b.alpha, n_edges=n_edges, dt=dt)]
    out.append(compare_mean("graph.Q_mean_exit", log.end_time,
                            A.mean_exit_sticky_general(0.0, ell, region.v, region.eta_eps,
                                                       1.0 / region.m), b.z, dt=dt))
    chosen = log.edge[log.edge >= 0]
    for e in range(n_edges):
        out.append(compare_proportion(f"graph.edge_frequency[{e}]", chosen == e, 1.0 / n_edges, b.z))
    return out


# ---------------------------------------------------------------- quake

GR_REGIONS = (Region(0, 1.0, 1.0, 1.0), Region(1, 2.0, 1.0, 4.0))


def gr_network(regions=GR_REGIONS, ell=1.0) -> graph.Network:
    return graph.build_k_ary_network(1, 1, lambda v, _: regions[v], ell)


def check_gr(b: Budget, n=None, h_star=math.log(10.0), dt=None, opts=None):
    dt = b.dt if dt is None else dt
    n = n or b.n
    net = gr_network()
    opts = opts or graph.WaveOptions(h_star=h_star, dt=dt)
    log = quake.run_waves(net, n, b.seed, opts, tag="gr", threads=b.threads)
    order = [(r.m, r.sigma) for r in GR_REGIONS]
    rows = quake.gr_curve_rows(log.n_events, order, h_star)
    out = []
    for k, emp, ana, _ in rows[1:]:
        out.append(compare_proportion(f"quake.gr_survival[n={k}]", log.n_events >= k, ana, b.z,
                                      power_law=10.0 ** (-sum(m for m, _ in order[:k]))))
    out[-1].metadata["gr_curve"] = [list(r) for r in rows]
    return out, log


def check_quake(b: Budget) -> list[OracleReport]:
    out, log = check_gr(b)
    # accumulation times of all released waves in the root region
    reg = GR_REGIONS[0]
    opts = graph.WaveOptions(h_star=0.0, dt=b.dt, one_visit_per_region=False)
    net = graph.single_star(2, reg)
    lg = quake.run_waves(net, b.n, b.seed, opts, tag="tauE", threads=b.threads)
    te = lg.tau_E[lg.released]
    out.append(compare_mean("quake.mean_tau_E", te, reg.mean_accumulation, b.z, m=reg.m,
                            sigma=reg.sigma))
    sample = te[:b.n]
    d, p = ks_one_sample(sample, lambda z: A.tauE_cdf(z, reg.m, reg.sigma))
    out.append(ks_report("quake.tau_E_ks", d, p, sample.size, b.alpha, m=reg.m, sigma=reg.sigma))
    return out


SUITES = {
    "subordinators": check_subordinators,
    "rdbm": check_rdbm,
    "boundary": check_boundary,
    "graph": check_graph,
    "quake": check_quake,
}


def run_suite(name: str, b: Budget) -> list[OracleReport]:
    if name == "all":
        out = []
        for k in SUITES:
            out += SUITES[k](b)
        return out
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](b)
