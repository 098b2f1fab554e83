"""Command-line entry point: ``simulate``, ``validate`` and ``gr-curve``.

Exit codes: 0 success (all checks pass), 1 validation failure, 2 configuration
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import boundary, config, graph, quake, rdbm, validation
from .errors import ConfigError
from .harness import reports_json
from .rng import BLOCK_SIZE, map_blocks, set_default_threads, stream
from .subordinators import IDENTITY, JumpKernel, TemperedSymbol

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
KINDS = ("rdbm", "edge", "vertex", "graph", "quake")
SUITES = tuple(validation.SUITES) + ("all",)


def _csv(header, rows, digest: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write(out: str, name: str, text: str) -> str:
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _path_csv(path: rdbm.PathSample, digest: str) -> str:
    return f"# config_digest={digest}\n" + path.to_csv()


def _symbol(name: str, mu_abs: float):
    return IDENTITY if name == "identity" else TemperedSymbol(mu_abs)


def _batch(cfg, tag, fn):
    return map_blocks(fn, cfg.n_paths, cfg.seed, tag, threads=cfg.threads)


def sim_rdbm(cfg, out, digest):
    m = cfg.model
    horizon = cfg.horizon
    if horizon == 0 or cfg.n_paths == 0:
        _write(out, "paths.csv", _csv(["path", "time", "cause", "gamma", "x"], [], digest))
        _write(out, "summary.json", _json({"config_digest": digest, "n_paths": 0}))
        return "0 paths"

    def run(r, s):
        kill = rdbm.elastic_thresholds(m.c, r, s)
        return rdbm.run_batch(r, s, m.x0, m.mu, cfg.dt, horizon, stop_level=m.stop_level,
                              kill_at=kill)
    res = _batch(cfg, "sim-rdbm", run)
    t = np.concatenate([x.time for x in res])
    c = np.concatenate([x.cause for x in res])
    g = np.concatenate([x.gamma for x in res])
    xs = np.concatenate([x.x for x in res])
    rows = ((i, t[i], rdbm.CAUSE_NAMES[int(c[i])], g[i], xs[i]) for i in range(t.size))
    _write(out, "paths.csv", _csv(["path", "time", "cause", "gamma", "x"], rows, digest))
    params = rdbm.RdbmParams(m.mu, m.c, min(cfg.dt, horizon), horizon if math.isfinite(horizon) else 1e9)
    p0 = rdbm.simulate_path(params, m.x0, m.stop_level, stream(cfg.seed, "sim-rdbm-path"))
    _write(out, "path_0.csv", _path_csv(p0, digest))
    counts = {rdbm.CAUSE_NAMES[k]: int(np.sum(c == k)) for k in sorted(set(c.tolist()))}
    summary = {"config_digest": digest, "n_paths": int(t.size), "mean_time": float(t.mean()),
               "mean_gamma": float(g.mean()), "causes": counts}
    _write(out, "summary.json", _json(summary))
    return f"{t.size} paths, mean time {t.mean():.6g}"


def sim_edge(cfg, out, digest):
    m = cfg.model
    if m.stop_level is None:
        raise ConfigError("simulate edge needs model.stop_level (the edge length)")
    if m.mu < 0:
        raise ConfigError("simulate edge needs model.mu >= 0 (the edge velocity)")
    if m.x0 >= m.stop_level:
        raise ConfigError("simulate edge needs model.x0 < model.stop_level")
    phi = _symbol(m.phi, m.phi_mu if m.phi_mu is not None else m.m)
    params = boundary.EdgeProcessParams(v=m.mu, ell=m.stop_level, eta_eps=m.eta_eps, phi=phi,
                                        c=m.c, visit_rate=m.return_rate)
    header = ["path", "time", "cause", "diffusive_time", "n_visits"]
    if cfg.horizon == 0 or cfg.n_paths == 0:
        _write(out, "exits.csv", _csv(header, [], digest))
        _write(out, "summary.json", _json({"config_digest": digest, "n_paths": 0}))
        return "0 paths"
    res = _batch(cfg, "sim-edge", lambda r, s: boundary.edge_exit_batch(params, m.x0, s, r, cfg.dt,
                                                                       cfg.horizon))
    t = np.concatenate([x.time for x in res])
    c = np.concatenate([x.cause for x in res])
    d = np.concatenate([x.diffusive_time for x in res])
    nv = np.concatenate([x.n_visits for x in res])
    rows = ((i, t[i], rdbm.CAUSE_NAMES[int(c[i])], d[i], nv[i]) for i in range(t.size))
    _write(out, "exits.csv", _csv(header, rows, digest))
    p0 = boundary.simulate_edge(params, m.x0, cfg.horizon, stream(cfg.seed, "sim-edge-path"),
                                cfg.dt)
    _write(out, "path_0.csv", _path_csv(p0, digest))
    summary = {"config_digest": digest, "n_paths": int(t.size), "mean_exit_time": float(t.mean()),
               "mean_diffusive_time": float(d.mean()), "mean_visits": float(nv.mean())}
    _write(out, "summary.json", _json(summary))
    return f"{t.size} paths, mean exit time {t.mean():.6g}"


def sim_vertex(cfg, out, digest):
    m = cfg.model
    if m.eta_eps <= 0:
        raise ConfigError("simulate vertex needs model.eta_eps > 0 (mean jump)")
    psi = _symbol(m.psi, m.phi_mu if m.phi_mu is not None else m.m)
    params = boundary.VertexProcessParams(m=m.m, eta_nu=m.eta_nu, jump=JumpKernel(m.eta_eps),
                                          psi=psi, h_star=m.h_star)
    h0 = m.h0 if m.h0 is not None else 1.0
    header = ["path", "n_excursions", "absorbed_at", "end_time"]
    if cfg.horizon == 0 or cfg.n_paths == 0:
        _write(out, "excursions.csv", _csv(header, [], digest))
        _write(out, "summary.json", _json({"config_digest": digest, "n_paths": 0}))
        return "0 paths"
    if not math.isfinite(cfg.horizon) and m.h_star == 0:
        raise ConfigError("simulate vertex needs t_max or h_star > 0")

    def run(r, s):
        runs = [boundary.simulate_vertex(params, h0, cfg.horizon, r) for _ in range(s)]
        return [(v.n_excursions, v.absorbed_at, v.end_time) for v in runs]
    res = [row for blk in _batch(cfg, "sim-vertex", run) for row in blk]
    rows = ((i, k, "" if a is None else a, e) for i, (k, a, e) in enumerate(res))
    _write(out, "excursions.csv", _csv(header, rows, digest))
    v0 = boundary.simulate_vertex(params, h0, cfg.horizon, stream(cfg.seed, "sim-vertex-path"),
                                  mode="path", dt=cfg.dt)
    _write(out, "path_0.csv", _path_csv(v0.path, digest))
    ks = np.array([r[0] for r in res])
    summary = {"config_digest": digest, "n_paths": len(res),
               "mean_excursions": float(ks.mean()),
               "absorbed_fraction": float(np.mean([r[1] is not None for r in res]))}
    _write(out, "summary.json", _json(summary))
    return f"{len(res)} vertex paths, mean excursions {ks.mean():.4g}"


def sim_graph(cfg, out, digest):
    net = cfg.network()
    opts = cfg.wave_options()
    header = ["path", "end_time", "terminal", "n_waves"]
    if cfg.horizon == 0 or cfg.n_paths == 0:
        _write(out, "exits.csv", _csv(header, [], digest))
        _write(out, "summary.json", _json({"config_digest": digest, "n_paths": 0}))
        return "0 paths"
    log = quake.run_waves(net, cfg.n_paths, cfg.seed, opts, cfg.horizon, tag="sim-graph",
                          threads=cfg.threads)
    waves = np.bincount(log.cat, minlength=log.n)
    rows = ((i, log.end_time[i], quake.TERMINALS[int(log.final[i])], waves[i]) for i in range(log.n))
    _write(out, "exits.csv", _csv(header, rows, digest))
    traj = graph.simulate_Q(net, graph.GraphPosition(net.root), cfg.horizon,
                            stream(cfg.seed, "sim-graph-path"), opts)
    _write(out, "trajectory.csv", f"# config_digest={digest}\n" + traj.trajectory_csv())
    _write(out, "visits.csv", f"# config_digest={digest}\n" + traj.log_csv())
    term = {quake.TERMINALS[k]: int(np.sum(log.final == k)) for k in sorted(set(log.final.tolist()))}
    summary = {"config_digest": digest, "n_paths": log.n,
               "mean_end_time": float(log.end_time.mean()), "terminals": term}
    _write(out, "summary.json", _json(summary))
    return f"{log.n} graph paths, mean end time {log.end_time.mean():.6g}"


def _catalogs(cfg, digest, tag="sim-quake"):
    net = cfg.network()
    log = quake.run_waves(net, cfg.n_catalogs, cfg.seed, cfg.wave_options(), cfg.horizon, tag=tag,
                          threads=cfg.threads)
    return log, quake.catalogs_from_log(log, cfg.model.h_star, cfg.seed, digest)


def sim_quake(cfg, out, digest):
    if cfg.horizon == 0 or cfg.n_catalogs == 0:
        _write(out, "catalogs.csv", f"# config_digest={digest}\n" + quake.catalogs_csv([]))
        _write(out, "summary.json", _json({"config_digest": digest, "n_catalogs": 0}))
        return "0 catalogs"
    _, cats = _catalogs(cfg, digest)
    _write(out, "catalogs.csv", f"# config_digest={digest}\n" + quake.catalogs_csv(cats))
    summary = json.loads(quake.summary_json(cats))
    summary["config_digest"] = digest
    summary["regions"] = sorted({e.region for c in cats for e in c.events})
    _write(out, "summary.json", _json(summary))
    return f"{len(cats)} catalogs, mean events {summary['mean_events']:.4g}"


SIMULATORS = {"rdbm": sim_rdbm, "edge": sim_edge, "vertex": sim_vertex, "graph": sim_graph,
              "quake": sim_quake}


def gr_rows_csv(rows, digest):
    return _csv(["n", "empirical_survival", "analytic_survival"],
                ((n, e, a) for n, e, a, *_ in rows), digest)


def cmd_gr_curve(cfg, out, digest):
    if cfg.horizon == 0 or cfg.n_catalogs == 0:
        rows = [(0, 1.0, 1.0)]
    else:
        log, _ = _catalogs(cfg, digest, tag="gr-curve")
        rows = quake.gr_curve_rows(log.n_events, cfg.visit_order(), cfg.model.h_star)
    path = _write(out, "gr_curve.csv", gr_rows_csv(rows, digest))
    return f"gr curve with {len(rows)} rows -> {path}"


def cmd_validate(cfg, suite, out, digest):
    b = validation.Budget(seed=cfg.seed, n=cfg.n_paths, dt=cfg.dt, threads=cfg.threads,
                          z=cfg.validation.z_threshold, alpha=cfg.validation.ks_alpha,
                          flip_drift=cfg.fault_injection.flip_drift)
    reports = validation.run_suite(suite, b)
    for r in reports:
        print(r.line())
    doc = reports_json(reports, {"suite": suite, "seed": cfg.seed, "config_digest": digest})
    _write(out, f"validate_{suite}.json", doc)
    if suite in ("quake", "all"):
        gr = next(r for r in reversed(reports) if "gr_curve" in r.metadata)
        _write(out, "gr_curve.csv", gr_rows_csv(gr.metadata["gr_curve"], digest))
    n_fail = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return n_fail == 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="override the configuration seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--paths", type=int, help="number of paths (and of catalogs)")

    p = argparse.ArgumentParser(
        prog="stickyquake",
        description="Sticky and non-local boundary diffusions on metric graphs: "
                    "simulation, oracle validation and Gutenberg-Richter curves.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=config.KEY_HELP + "\nexit codes: 0 ok, 1 validation failure, 2 config error, "
                                  "3 runtime error")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate paths or catalogs",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=config.KEY_HELP)
    s.add_argument("kind", choices=KINDS)
    v = sub.add_parser("validate", parents=[common], help="run oracle checks",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=config.KEY_HELP)
    v.add_argument("suite", choices=SUITES)
    sub.add_parser("gr-curve", parents=[common], help="write the Gutenberg-Richter curve",
                   formatter_class=argparse.RawDescriptionHelpFormatter, epilog=config.KEY_HELP)
    return p


def resolve(args) -> config.RunConfig:
    cfg = config.load(args.config)
    over = {"seed": args.seed, "threads": args.threads, "dt": args.dt}
    if args.paths is not None:
        over["n_paths"] = args.paths
        over["n_catalogs"] = args.paths
    return config.with_overrides(cfg, **over)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output.dir
    digest = cfg.digest()
    set_default_threads(cfg.threads)
    try:
        if args.command == "simulate":
            msg = SIMULATORS[args.kind](cfg, out, digest)
            print(f"simulate {args.kind}: {msg} [digest {digest}, seed {cfg.seed}] -> {out}")
            return EXIT_OK
        if args.command == "gr-curve":
            msg = cmd_gr_curve(cfg, out, digest)
            print(f"{msg} [digest {digest}, seed {cfg.seed}]")
            return EXIT_OK
        ok = cmd_validate(cfg, args.suite, out, digest)
        return EXIT_OK if ok else EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
