"""Command line entry point.

    mdpsim <subcommand> --config FILE [--seed N] [--threads N] [--out DIR]

Exit status: 0 on success, 2 on invalid configuration, 3 when a
verification subcommand finds a statistical failure. Diagnostics go to
standard error; results are CSV files in the output directory.
"""

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .chain_algebra import diffusion_theta, drift_theta, solve_poisson
from .config import load_config
from .env import ChainSpec, realize, stationary_dist
from .errors import MdpsimError
from .homogenize import homogenize
from .martingale import tail_table, verify_decomposition
from .mdp import mdp_scan, negligibility_scan
from .sde import (SimulationParams, cell_resolving_dt, cell_resolving_h_beta, simulate_euler,
                  simulate_timechange)

log = logging.getLogger("mdpsim")

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 2, 3

SCAN_COLUMNS = ["epsilon", "kappa", "eta", "estimator", "n", "p_hat", "stderr", "neg_rate",
                "predicted_rate", "regime_flag"]
TAIL_COLUMNS = ["r", "q", "K", "n", "freq", "ucl99", "bound", "violated"]


def fmt(v):
    """Serialize one CSV cell; floats keep 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def render_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_result(out_dir, name, cfg, subcommand, body):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = (f"# mdpsim {__version__}\n# subcommand {subcommand}\n"
              f"# config_sha256 {cfg.digest}\n# seed {cfg.seed}\n")
    path = out_dir / name
    path.write_text(header + body)
    log.info("wrote %s", path)
    return path


def _dt_rule(cfg):
    sim = cfg.simulation
    T = sim["T"]
    base = sim["dt"] if sim["dt"] is not None else 1e-4 * T
    if not sim["cells"]:
        return lambda eps: base
    env = cfg.environment
    smax = float(np.abs(env.states if isinstance(env, ChainSpec) else env.sigma).max())
    return lambda eps: cell_resolving_dt(eps, sim["kappa"], smax, T, sim["cells"], cap=base)


def _require_chain(cfg, what):
    if not cfg.is_chain:
        raise MdpsimError(f"{what} needs a chain environment")


def cmd_homogenize(cfg, args):
    env = cfg.environment
    co = homogenize(env)
    rows = [{"name": "b_eff", "index": "", "value": co.b_eff},
            {"name": "a_eff", "index": "", "value": co.a_eff}]
    if cfg.is_chain:
        pi = stationary_dist(env)
        rows += [{"name": "pi", "index": i, "value": v} for i, v in enumerate(pi)]
        for label, theta in (("drift", drift_theta(env, pi)), ("diffusion", diffusion_theta(env, pi))):
            dec = solve_poisson(env, theta, pi)
            rows += [{"name": f"f_{label}", "index": i, "value": v} for i, v in enumerate(theta.values)]
            rows += [{"name": f"h_{label}", "index": i, "value": v} for i, v in enumerate(dec.h)]
            rows.append({"name": f"K_{label}", "index": "", "value": dec.K})
            rows += [{"name": f"m_{label}", "index": i, "value": v} for i, v in enumerate(dec.m)]
    else:
        rows.append({"name": "quad_error", "index": "", "value": co.quad_error})
    write_result(args.out, "homogenize.csv", cfg, "homogenize",
                 render_csv(["name", "index", "value"], rows))
    return EXIT_OK


def cmd_simulate(cfg, args):
    sim, scan = cfg.simulation, cfg.scan
    dt_for = _dt_rule(cfg)
    rows = []
    for idx, eps in enumerate(sorted(sim["epsilon"], reverse=True)):
        shared = None
        if cfg.is_chain and sim["quenched"]:
            shared = realize(cfg.environment, (cfg.seed, idx, _rng.ENV))
        for rep in range(scan["replicas"]):
            env = shared if shared is not None else cfg.environment
            if sim["scheme"] == "euler":
                p = SimulationParams(eps, sim["kappa"], sim["x0"], sim["T"], dt=dt_for(eps),
                                     seed=(cfg.seed, idx, rep))
                path = simulate_euler(p, env, with_drift=True)
            else:
                # the output grid needs no cell resolution; the auxiliary step does
                h_beta = cell_resolving_h_beta(eps, sim["cells"]) if sim["cells"] else None
                dt = sim["dt"] if sim["dt"] is not None else 1e-4 * sim["T"]
                p = SimulationParams(eps, sim["kappa"], sim["x0"], sim["T"], dt=dt,
                                     h_beta=h_beta, seed=(cfg.seed, idx, rep))
                path = simulate_timechange(p, env, with_drift=True)
            for t, x in zip(path.times, path.values):
                rows.append({"epsilon": eps, "replica": rep, "scheme": sim["scheme"], "t": t, "x": x})
    write_result(args.out, "simulate.csv", cfg, "simulate",
                 render_csv(["epsilon", "replica", "scheme", "t", "x"], rows))
    return EXIT_OK


def cmd_verify_decomposition(cfg, args):
    _require_chain(cfg, "verify-decomposition")
    env, scan = cfg.environment, cfg.scan
    rows, ok = [], True
    for label, theta in (("drift", drift_theta(env)), ("diffusion", diffusion_theta(env))):
        chk = verify_decomposition(env, theta, scan["U"], scan["replicas"],
                                   (cfg.seed, 1 if label == "drift" else 2), args.threads)
        ok &= chk.ok
        rows.append({"observable": label, "n": chk.n, "U": chk.U, "K": chk.K,
                     "max_identity_residual": chk.max_identity_residual,
                     "max_jump": chk.max_jump, "mean_M": chk.mean_M, "mean_M_se": chk.mean_M_se,
                     "var_M_over_U": chk.var_M_over_U, "var_se": chk.var_se,
                     "qv_rate": chk.qv_rate, "ok": chk.ok})
        if not chk.ok:
            print(f"verify-decomposition: {label} check failed: {chk}", file=sys.stderr)
    cols = ["observable", "n", "U", "K", "max_identity_residual", "max_jump", "mean_M",
            "mean_M_se", "var_M_over_U", "var_se", "qv_rate", "ok"]
    write_result(args.out, "verify-decomposition.csv", cfg, "verify-decomposition",
                 render_csv(cols, rows))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_tail_bounds(cfg, args):
    _require_chain(cfg, "tail-bounds")
    env, scan = cfg.environment, cfg.scan
    theta = drift_theta(env) if scan["which"] == "drift" else diffusion_theta(env)
    table = tail_table(env, theta, scan["U"], scan["r"], scan["q"], scan["replicas"],
                       cfg.seed, args.threads)
    rows = [vars(t) for t in table]
    for t in table:
        if t.violated:
            print(f"tail-bounds: bound violated at r={t.r}, q={t.q}", file=sys.stderr)
    write_result(args.out, "tail-bounds.csv", cfg, "tail-bounds", render_csv(TAIL_COLUMNS, rows))
    return EXIT_CHECK if any(t.violated for t in table) else EXIT_OK


def _scan_rows(res):
    return [vars(r) for r in res.rows]


def cmd_mdp_scan(cfg, args):
    sim, scan = cfg.simulation, cfg.scan
    res = mdp_scan(cfg.environment, sim["epsilon"], sim["kappa"], scan["eta"], sim["T"],
                   sim["x0"], _dt_rule(cfg), scan["estimator"], scan["replicas"], cfg.seed,
                   tilt=scan["tilt"], threads=args.threads)
    if res.consistency and not res.consistency["overlap"]:
        print("mdp-scan: tilted and crude estimates disagree at the largest epsilon",
              file=sys.stderr)
    for r in res.rows:
        if not r.usable:
            print(f"mdp-scan: no exits observed at epsilon={r.epsilon}; row unusable",
                  file=sys.stderr)
    write_result(args.out, "mdp-scan.csv", cfg, "mdp-scan", render_csv(SCAN_COLUMNS, _scan_rows(res)))
    return EXIT_OK


def cmd_negligibility_scan(cfg, args):
    sim, scan = cfg.simulation, cfg.scan
    res = negligibility_scan(cfg.environment, sim["epsilon"], sim["kappa"], scan["eta"], sim["T"],
                             sim["x0"], _dt_rule(cfg), scan["which"], scan["replicas"], cfg.seed,
                             threads=args.threads)
    write_result(args.out, "negligibility-scan.csv", cfg, "negligibility-scan",
                 render_csv(SCAN_COLUMNS, _scan_rows(res)))
    return EXIT_OK


COMMANDS = {
    "homogenize": cmd_homogenize,
    "simulate": cmd_simulate,
    "verify-decomposition": cmd_verify_decomposition,
    "tail-bounds": cmd_tail_bounds,
    "mdp-scan": cmd_mdp_scan,
    "negligibility-scan": cmd_negligibility_scan,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="mdpsim", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON experiment file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    seed = args.seed
    if seed is None and os.environ.get("MDPSIM_SEED"):
        seed = int(os.environ["MDPSIM_SEED"])
    if args.threads is None and os.environ.get("MDPSIM_THREADS"):
        args.threads = int(os.environ["MDPSIM_THREADS"])
    try:
        cfg = load_config(args.config, seed)
        if args.out is None:
            args.out = cfg.output["paths"]
        return COMMANDS[args.subcommand](cfg, args)
    except MdpsimError as exc:
        print(f"mdpsim: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
