"""Command line interface: subcommand dispatch, CSV emission, exit codes.

Exit code contract: 0 on success / all properties pass, 1 when a verified
property fails, 2 for invalid configuration, capability errors or usage
errors.  All CSV output is deterministic for fixed (config, seed): header row
always present, floats rendered with %.12g.  Schemas are versioned in the
README (currently v1).
"""

import argparse
import csv
import os
import sys

import numpy as np

from .config import RunConfig
from .errors import PropertyViolation, VoljumpError
from .pastform import bound_constant, make_past_context, v_past
from .resolvents import resolvent_first_kind, resolvent_second_kind
from .riccati import comparison_check, envelope_bounds, solve
from .simulate import (
    forward_mean_curve,
    make_forward_context,
    mc_transform,
    simulate_paths,
    v_forward,
)
from .verify import run_suite

USAGE_SUBCOMMANDS = ("riccati", "resolvent", "simulate", "transform", "pastcheck", "verify")


def _fmt(x):
    if isinstance(x, complex):
        raise TypeError("split complex values into columns before writing")
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise VoljumpError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_riccati(cfg, outdir):
    grid = cfg.grid()
    model = cfg.model(grid)
    f = cfg.test_function(grid)
    sol = solve(model, f, grid)
    env = envelope_bounds(model, f, grid)
    comparison_check(model, sol)
    rows = zip(grid.nodes, sol.psi.real, sol.psi.imag, sol.psi_bar,
               sol.phi.real, sol.phi.imag, env.lower, env.upper)
    path = write_csv(os.path.join(outdir, "riccati.csv"),
                     ["t", "re_psi", "im_psi", "psi_bar", "re_phi", "im_phi",
                      "lower_envelope", "upper_envelope"], rows)
    print(f"wrote {path}")
    return 0


def cmd_resolvent(cfg, outdir):
    grid = cfg.grid()
    kernel = cfg.kernel()
    res = resolvent_first_kind(kernel, grid)
    atom_flag = np.zeros(grid.n + 1, dtype=int)
    atom_flag[0] = 1 if res.atom > 0.0 else 0
    rows = zip(grid.nodes, res.density_nodes, atom_flag)
    path = write_csv(os.path.join(outdir, "resolvent_first_kind.csv"),
                     ["t", "density", "atom_flag"], rows)
    print(f"wrote {path}  (atom={res.atom:.12g}, provenance={res.provenance}, "
          f"identity_residual={res.identity_residual:.3e})")
    rsk = resolvent_second_kind(kernel, cfg._float("model.b"), grid)
    rows = zip(grid.nodes, rsk.r_nodes, rsk.e_nodes)
    path = write_csv(os.path.join(outdir, "resolvent_second_kind.csv"),
                     ["t", "second_kind", "canonical"], rows)
    print(f"wrote {path}  (residual={rsk.residual:.3e})")
    return 0


def cmd_simulate(cfg, outdir):
    grid = cfg.grid()
    model = cfg.model(grid)
    n_paths, seed, block = cfg.mc_settings()
    ens = simulate_paths(model, grid, n_paths, seed, block)
    mean_curve = ens.X.mean(axis=0)
    theory = forward_mean_curve(model, grid)
    rows = zip(grid.nodes, mean_curve, theory)
    path = write_csv(os.path.join(outdir, "forward_mean.csv"),
                     ["t", "mc_mean", "theory_mean"], rows)
    print(f"wrote {path}  (paths={n_paths}, clipped_fraction={ens.clipped_fraction:.3e})")
    return 0


def cmd_transform(cfg, outdir):
    grid = cfg.grid()
    model = cfg.model(grid)
    f = cfg.test_function(grid)
    n_paths, seed, block = cfg.mc_settings()
    rep = mc_transform(model, f, grid, n_paths, seed,
                       checkpoints=cfg.checkpoints(),
                       slack=cfg._float("tolerances.mc_slack"), block_size=block)
    write_csv(os.path.join(outdir, "transform_summary.csv"),
              ["re_estimate", "im_estimate", "stderr", "re_theory", "im_theory",
               "gap", "tolerance", "passed"],
              [(rep.estimate.real, rep.estimate.imag, rep.stderr, rep.theory.real,
                rep.theory.imag, rep.gap, rep.tolerance, rep.passed)])
    flat_rows = [(r.t, r.estimate.real, r.estimate.imag, r.stderr, r.gap,
                  r.tolerance, r.passed) for r in rep.flatness]
    flat_rows += [(r.t, r.estimate.real, r.estimate.imag, r.stderr, r.gap,
                   r.tolerance, r.passed) for r in rep.flatness_bar]
    write_csv(os.path.join(outdir, "transform_flatness.csv"),
              ["t", "re_estimate", "im_estimate", "stderr", "gap", "tolerance",
               "passed"], flat_rows)
    print(f"estimate={rep.estimate:.6f} theory={rep.theory:.6f} "
          f"gap={rep.gap:.3e} tol={rep.tolerance:.3e}")
    return 0 if rep.all_passed else 1


def cmd_pastcheck(cfg, outdir):
    grid = cfg.grid()
    model = cfg.model(grid)
    f = cfg.test_function(grid)
    n_paths, seed, block = cfg.mc_settings()
    sol = solve(model, f, grid)
    res = resolvent_first_kind(model.kernel, grid)
    cps = [int(round(c * grid.n)) for c in cfg.checkpoints()]
    pctx = make_past_context(model, f, sol, res, cps, grid)
    fctx = make_forward_context(model, f, sol, grid)
    ens = simulate_paths(model, grid, min(n_paths, 1000), seed, block)
    consts = bound_constant(model, sol, res, grid)
    tol = cfg._float("tolerances.two_formula")
    bound_slack = cfg._float("tolerances.bound_slack")
    rows = []
    worst_gap = 0.0
    bound_ok = True
    for i in cps:
        v = v_past(ens, pctx, i)
        vb = v_past(ens, pctx, i, real_system=True)
        vf = v_forward(ens, fctx, i)
        gap = float(np.max(np.abs(v - vf)))
        worst_gap = max(worst_gap, gap)
        log_ratio = v.real - np.log(consts.c) - vb
        bound_ok &= bool(np.all(log_ratio <= np.log1p(bound_slack)))
        for p in range(ens.n_paths):
            rows.append((grid.nodes[i], v[p].real, v[p].imag, vb[p],
                         np.exp(v[p].real), consts.c * np.exp(vb[p])))
    write_csv(os.path.join(outdir, "pastcheck.csv"),
              ["t", "re_v", "im_v", "v_bar", "abs_exp_v", "bound"], rows)
    print(f"two-formula max gap {worst_gap:.3e} (tol {tol:.1e}); "
          f"bound constant C={consts.c:.6g}; bound {'ok' if bound_ok else 'VIOLATED'}")
    return 0 if (worst_gap <= tol and bound_ok) else 1


def cmd_verify(cfg, outdir):
    reports = run_suite(cfg, log=print)
    rows = [(r.claim, r.status, r.magnitude, r.tolerance, r.runtime) for r in reports]
    path = write_csv(os.path.join(outdir, "verify_report.csv"),
                     ["claim", "status", "magnitude", "tolerance", "runtime_s"], rows)
    failed = [r for r in reports if r.failed]
    print(f"wrote {path}: {len(reports) - len(failed)}/{len(reports)} claims passed")
    return 1 if failed else 0


_COMMANDS = {
    "riccati": cmd_riccati,
    "resolvent": cmd_resolvent,
    "simulate": cmd_simulate,
    "transform": cmd_transform,
    "pastcheck": cmd_pastcheck,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voljump",
        description="Volterra square-root processes with jumps: solvers, "
                    "simulation and property verification.")
    sub = parser.add_subparsers(dest="command", metavar="|".join(USAGE_SUBCOMMANDS))
    for name in USAGE_SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", dest="overrides",
                       help="override a config key (repeatable)")
        p.add_argument("--output-dir", default=None,
                       help="output directory (default: output.dir key or "
                            "VOLJUMP_OUTPUT_DIR)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker count hint; results are worker-count independent")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize others
        return 2 if exc.code not in (0,) else 0
    if not args.command:
        parser.print_usage()
        return 2
    try:
        overrides = _parse_overrides(args.overrides)
        if args.workers is not None:
            overrides["mc.workers"] = str(args.workers)
        cfg = RunConfig.from_file(args.config, overrides)
        outdir = args.output_dir or cfg.output_dir()
        return _COMMANDS[args.command](cfg, outdir)
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return 1
    except VoljumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
