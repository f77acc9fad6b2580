"""Command-line front end.

Every subcommand writes CSV (header row plus one record per grid point or
state) or JSON (``{"meta": ..., "records": [...]}``).  For CSV the metadata
goes to ``<out>.meta.json`` next to the output file, or to stderr as a
``# meta`` line when writing to stdout.  ``--figure PATH`` additionally
renders a static plot.

Exit codes: 0 success, 1 a checked property was violated, 2 usage or
domain error.
"""

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from rbessel import __version__, bessel_diffusion, interval_kernels, plotting, radial_chain, sphere_walk
from rbessel.errors import DomainError
from rbessel.specfun import phi0

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class Result:
    def __init__(self, columns, records, passed=True, summary=None, figure=None):
        self.columns = columns
        self.records = records
        self.passed = passed
        self.summary = summary or {}
        self.figure = figure


def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _csv_field(v):
    v = _num(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _json_safe(v):
    v = _num(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _render(result, meta, fmt):
    if fmt == "json":
        records = [{c: _json_safe(r[c]) for c in result.columns} for r in result.records]
        return json.dumps({"meta": _json_safe(meta), "records": records}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(result.columns)
    for r in result.records:
        writer.writerow([_csv_field(r[c]) for c in result.columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument helpers


def parse_grid(text):
    """``"0.1,0.2,0.3"`` or ``"start:stop:num"`` (inclusive, evenly spaced)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected start:stop:num")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise argparse.ArgumentTypeError("grid needs at least one point")
        return [float(v) for v in np.linspace(a, b, n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def seed_type(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _start_point(d, text):
    if text is None:
        return None
    vals = parse_grid(text)
    if len(vals) == 1:
        return int(vals[0])
    if len(vals) != d:
        raise DomainError(f"start point needs {d} coordinates")
    return sphere_walk.SpherePoint.from_coords(vals)


# ---------------------------------------------------------------------------
# subcommands


def cmd_loop_check(a):
    spec = radial_chain.ChainSpec(a.d, a.N)
    rep = radial_chain.check_loop_property(spec, exact=a.exact)
    records = [
        {"m": r.m, "loop_product": r.loop_product, "closed_form": r.closed_form, "diff": r.diff}
        for r in rep.records
    ]
    summary = {"reflection_loop": _num(rep.reflection_loop),
               "violations": [list(map(_num, v)) for v in rep.violations]}

    def fig(path):
        plotting.series(path, [r["m"] for r in records],
                        {"loop product": [_num(r["loop_product"]) for r in records]},
                        "m", "p(1,m,m+1) p(1,m+1,m)", f"d={a.d}, N={a.N}")

    return Result(["m", "loop_product", "closed_form", "diff"], records, rep.passed, summary, fig)


def cmd_diag_monotone(a):
    spec = radial_chain.ChainSpec(a.d, a.N)
    rep = radial_chain.check_diagonal_monotone(spec, a.n, exact=a.exact)
    violations = list(rep.violations)
    if a.all_n:
        violations = radial_chain.sweep_diagonal_monotone(spec, a.n, exact=a.exact)
    records = [{"m": m, "p_nmm": v} for m, v in zip(spec.states, rep.diagonal)]
    summary = {"violations": [list(map(_num, v)) for v in violations], "ties": rep.ties}

    def fig(path):
        plotting.series(path, list(spec.states), {f"n={a.n}": [_num(v) for v in rep.diagonal]},
                        "m", "p_N(n,m,m)", f"d={a.d}, N={a.N}")

    return Result(["m", "p_nmm"], records, not violations, summary, fig)


def cmd_shift_monotone(a):
    spec = radial_chain.ChainSpec(a.d, a.N)
    rep = radial_chain.check_shift_monotone(spec, a.n, exact=a.exact)
    records = [{"m": m, "m_prime": mp, "p": p, "lhs": lhs, "rhs": rhs}
               for m, mp, p, lhs, rhs in rep.violations]
    return Result(["m", "m_prime", "p", "lhs", "rhs"], records, rep.passed,
                  {"checked": rep.checked, "violations": len(rep.violations)})


def cmd_kernel_row(a):
    spec = radial_chain.ChainSpec(a.d, a.N)
    row = radial_chain.kernel_row(spec, a.n, a.m0, exact=a.exact)
    records = [{"state": m, "probability": v, "exact": str(v) if a.exact else ""}
               for m, v in row.as_dict(nonzero=True).items()]
    columns = ["state", "probability"] + (["exact"] if a.exact else [])

    def fig(path):
        plotting.series(path, list(row.states), {f"n={a.n}": row.to_numpy()},
                        "state", "probability", f"d={a.d}, N={a.N}, m0={a.m0}")

    return Result(columns, records, True, {"total": _num(row.total())}, fig)


def cmd_local_time(a):
    spec = radial_chain.ChainSpec(a.d, a.N)
    horizon = a.N * a.N if a.horizon is None else a.horizon
    values, numerators = radial_chain.local_time_profile(spec, horizon, exact=a.exact)
    tol = 0 if a.exact else radial_chain.FLOAT_TOL
    bad = [spec.lo + i for i in range(len(values) - 1) if numerators[i] > numerators[i + 1] + tol]
    records = [{"y": y, "expected_visits": v} for y, v in zip(spec.states, values)]
    if a.y is not None:
        records = [r for r in records if r["y"] == spec.check_state(a.y)]

    def fig(path):
        plotting.series(path, list(spec.states), {"E^y(L_y)": [_num(v) for v in values]},
                        "y", "expected visits", f"d={a.d}, N={a.N}, horizon={horizon}")

    return Result(["y", "expected_visits"], records, not bad,
                  {"horizon": horizon, "violations": bad}, fig)


def cmd_local_time_scaling(a):
    fit = radial_chain.local_time_scaling(a.d, a.N_list, a.method)
    records = [{"N": N, "expected_visits": v} for N, v in zip(fit.N_list, fit.expected_visits)]
    summary = {"slope": fit.slope, "intercept": fit.intercept}

    def fig(path):
        plotting.series(path, list(fit.N_list),
                        {"E^N(L_N)": list(fit.expected_visits),
                         f"fit slope {fit.slope:.3f}": [math.exp(fit.intercept) * N**fit.slope
                                                        for N in fit.N_list]},
                        "N", "expected visits to N", f"d={a.d}", logx=True, logy=True)

    return Result(["N", "expected_visits"], records, fit.slope < 2.0, summary, fig)


def cmd_sphere_simulate(a):
    cfg = sphere_walk.WalkConfig(a.d, a.N, a.steps, a.paths, a.seed, a.threads)
    X, m = sphere_walk.simulate(cfg, _start_point(a.d, a.start))
    cols = ["path", "norm"] + [f"x{i + 1}" for i in range(a.d)]
    records = [dict(zip(cols, [i, int(m[i])] + [float(v) for v in X[i]])) for i in range(len(m))]

    def fig(path):
        states = np.arange(m.min(), m.max() + 1)
        freq = np.bincount(m - m.min()) / len(m)
        plotting.series(path, states, {"|X_n|": freq}, "norm", "frequency",
                        f"d={a.d}, N={a.N}, n={a.steps}")

    return Result(cols, records, True, {}, fig)


def cmd_radial_law_check(a):
    cfg = sphere_walk.WalkConfig(a.d, a.N, a.n, a.paths, a.seed, a.threads)
    rep = sphere_walk.radial_law_check(cfg, a.n, _start_point(a.d, a.start))
    probs = [e / cfg.paths for e in rep.expected]
    records = [{"state": s, "observed": int(o), "expected_count": e, "probability": p}
               for s, o, e, p in zip(rep.states, rep.observed, rep.expected, probs)]
    summary = {"chi2": rep.chi2, "dof": rep.dof, "pvalue": rep.pvalue, "alpha": rep.alpha}

    def fig(path):
        plotting.bars(path, rep.states, [o / cfg.paths for o in rep.observed], probs,
                      "state", "probability", f"d={a.d}, N={a.N}, n={a.n}")

    return Result(["state", "observed", "expected_count", "probability"], records,
                  rep.passed, summary, fig)


def cmd_generator_check(a):
    x = sphere_walk.SpherePoint.from_coords(parse_grid(a.x))
    rep = sphere_walk.generator_check(a.f, x, a.N, a.samples, a.seed, a.threads)
    records = [{"function": rep.function, "N": rep.N, "estimate": rep.estimate,
                "target": rep.target, "stderr": rep.stderr, "slack": rep.slack,
                "passed": rep.passed}]
    return Result(["function", "N", "estimate", "target", "stderr", "slack", "passed"],
                  records, rep.passed, {"x": x.coords.tolist()})


def cmd_free_kernel_2d(a):
    records = [{"rho": rho, "q": bessel_diffusion.free_kernel_2d(a.t, a.r, rho)} for rho in a.rho]
    summary = {}
    if a.diagonal_scaling:
        summary["phi0_check"] = phi0(a.r / math.sqrt(a.t))

    def fig(path):
        plotting.series(path, a.rho, {f"q({a.t},{a.r},rho)": [r["q"] for r in records]},
                        "rho", "q", marker="")

    return Result(["rho", "q"], records, True, summary, fig)


def _estimate_records(est, targets=None):
    out = []
    for i, r in enumerate(est.r_grid):
        rec = {"r": r, "density": est.density[i], "stderr": est.stderr[i]}
        if targets is not None:
            rec["target"] = targets[i]
        out.append(rec)
    return out


def cmd_estimate_diagonal(a):
    cfg = bessel_diffusion.DiffusionConfig(a.d, a.t, a.dt, a.paths, a.seed, a.threads)
    est = bessel_diffusion.estimate_diagonal(cfg, a.grid, a.epsilon)
    summary = {"epsilon": est.epsilon, "dt": cfg.dt, "paths": est.paths_used}

    def fig(path):
        plotting.estimates(path, est.r_grid, est.density, est.stderr,
                           title=f"d={a.d}, t={a.t}, eps={est.epsilon}")

    return Result(["r", "density", "stderr"], _estimate_records(est), True, summary, fig)


def cmd_counterexample_2d(a):
    rep = bessel_diffusion.counterexample_2d(a.t, a.paths, a.seed, a.epsilon, a.dt, a.threads)
    est = rep.estimate
    records = _estimate_records(est, list(rep.targets))
    for rec, w in zip(records, rep.window_targets):
        rec["window_target"] = w
    summary = {"verdict": rep.verdict, "margin_sigma": rep.margin_sigma,
               "phi0": [phi0(1.0), phi0(2.0)], "dt": est.config.dt}

    def fig(path):
        plotting.estimates(path, est.r_grid, est.density, est.stderr, list(rep.targets),
                           title=f"d=2, t={a.t}: {rep.verdict}")

    return Result(["r", "density", "stderr", "target", "window_target"], records,
                  rep.confirmed, summary, fig)


def cmd_monotonicity_probe(a):
    rep = bessel_diffusion.monotonicity_probe(a.d, a.t, a.grid, a.paths, a.seed, a.epsilon,
                                              a.dt, a.threads)
    est = rep.estimate
    summary = {"violations": [list(v) for v in rep.violations], "epsilon": est.epsilon,
               "dt": est.config.dt}

    def fig(path):
        plotting.estimates(path, est.r_grid, est.density, est.stderr,
                           title=f"d={a.d}, t={a.t}")

    return Result(["r", "density", "stderr"], _estimate_records(est), rep.passed, summary, fig)


def _interval_grid(points):
    return np.linspace(0.0, 1.0, points)


def cmd_interval_kernel(a):
    x = _interval_grid(a.points)
    K = interval_kernels.truncation(a.t) if a.K is None else a.K
    neu = np.atleast_1d(interval_kernels.neumann_diag(a.t, x, K))
    dir_ = np.atleast_1d(interval_kernels.dirichlet_diag(a.t, x, K))
    records = [{"x": xi, "neumann": n, "dirichlet": d} for xi, n, d in zip(x, neu, dir_)]

    def fig(path):
        plotting.series(path, x, {"Neumann": neu, "Dirichlet": dir_}, "x", "p(t,x,x)",
                        f"t={a.t}", marker="")

    return Result(["x", "neumann", "dirichlet"], records, True,
                  {"K": K, "c_t": interval_kernels.c_t(a.t, K)}, fig)


def cmd_interval_identity(a):
    x = _interval_grid(a.points)
    K = interval_kernels.truncation(a.t) if a.K is None else a.K
    ident = interval_kernels.sum_identity_check(a.t, x, K)
    deriv = interval_kernels.derivative_relation_check(a.t, x[1:-1], K)
    dn = interval_kernels.SeriesKernel(a.t, K, "neumann").diag_derivative(x)
    dd = interval_kernels.SeriesKernel(a.t, K, "dirichlet").diag_derivative(x)
    records = [{"x": xi, "sum": n + d, "c_t": ident.constant, "diff": n + d - ident.constant,
                "d_neumann": gn, "d_dirichlet": gd}
               for xi, n, d, gn, gd in zip(x, ident.neumann, ident.dirichlet, dn, dd)]
    summary = {"K": K, "max_identity_error": ident.max_error,
               "max_derivative_sum": deriv.identity_error, "max_fd_error": deriv.fd_error}

    def fig(path):
        plotting.series(path, x, {"p^N + p^D - C_t": [r["diff"] for r in records]},
                        "x", "residual", f"t={a.t}", marker="")

    return Result(["x", "sum", "c_t", "diff", "d_neumann", "d_dirichlet"], records,
                  ident.passed and deriv.passed, summary, fig)


# ---------------------------------------------------------------------------
# parser


def _common(p, seeded=False, threaded=False):
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--figure", default=None, help="also render a figure to this path")
    if seeded:
        p.add_argument("--seed", type=seed_type, default=0)
    if threaded:
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: machine parallelism); results do not depend on it")


def build_parser():
    parser = argparse.ArgumentParser(prog="rbessel", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def chain(name, handler, help, **extra):
        p = sub.add_parser(name, help=help)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--exact", action="store_true", help="exact rational arithmetic")
        for flag, kw in extra.items():
            p.add_argument(flag, **kw)
        _common(p)
        p.set_defaults(handler=handler)
        return p

    chain("loop-check", cmd_loop_check, "loop products of the radial walk")
    p = chain("diag-monotone", cmd_diag_monotone, "monotonicity of p_N(n,m,m) in m",
              **{"--n": dict(type=int, required=True)})
    p.add_argument("--all-n", action="store_true", help="check every step count up to n")
    chain("shift-monotone", cmd_shift_monotone, "p_N(n,m,m') <= p_N(n,m+p,m'+p)",
          **{"--n": dict(type=int, required=True)})
    chain("kernel-row", cmd_kernel_row, "n-step kernel row from m0",
          **{"--n": dict(type=int, required=True), "--m0": dict(type=int, required=True)})
    chain("local-time", cmd_local_time, "expected local times E^y(L_y)",
          **{"--horizon": dict(type=int, default=None), "--y": dict(type=int, default=None)})

    p = sub.add_parser("local-time-scaling", help="log-log slope of E^N(L_N^{N^2})")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N-list", dest="N_list", type=parse_ints, default=[16, 32, 64, 128])
    p.add_argument("--method", choices=["lstsq", "theil-sen"], default="lstsq")
    _common(p)
    p.set_defaults(handler=cmd_local_time_scaling)

    def walk(name, handler, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--paths", type=int, default=10_000)
        p.add_argument("--start", default=None, help="start norm or comma-separated coordinates")
        _common(p, seeded=True, threaded=True)
        p.set_defaults(handler=handler)
        return p

    walk("sphere-simulate", cmd_sphere_simulate, "simulate the sphere walk").add_argument(
        "--steps", type=int, required=True)
    walk("radial-law-check", cmd_radial_law_check, "chi-square of |X_n| against the exact row"
         ).add_argument("--n", type=int, required=True)

    p = sub.add_parser("generator-check", help="one-step generator estimate")
    p.add_argument("--f", choices=sorted(sphere_walk.CATALOG), default="coord_quadratic")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", required=True, help="comma-separated lattice point")
    p.add_argument("--samples", type=int, default=1_000_000)
    _common(p, seeded=True, threaded=True)
    p.set_defaults(handler=cmd_generator_check)

    p = sub.add_parser("free-kernel-2d", help="free 2-D Bessel transition density")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--rho", type=parse_grid, required=True, help="grid of rho values")
    p.add_argument("--diagonal-scaling", action="store_true",
                   help="also report Phi0(r / sqrt(t))")
    _common(p)
    p.set_defaults(handler=cmd_free_kernel_2d)

    def diffusion(name, handler, help, d_default=None, grid=True):
        p = sub.add_parser(name, help=help)
        if d_default is None:
            p.add_argument("--d", type=int, required=True)
        p.add_argument("--t", type=float, required=True)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--paths", type=int, default=100_000)
        p.add_argument("--epsilon", type=float, default=None)
        if grid:
            p.add_argument("--grid", type=parse_grid, required=True)
        _common(p, seeded=True, threaded=True)
        p.set_defaults(handler=handler)
        return p

    diffusion("estimate-diagonal", cmd_estimate_diagonal, "window estimate of p(t,r,r)")
    p = diffusion("counterexample-2d", cmd_counterexample_2d, "d=2 non-monotonicity",
                  d_default=2, grid=False)
    p.set_defaults(epsilon=0.01, paths=200_000)
    diffusion("monotonicity-probe", cmd_monotonicity_probe, "d>=3 monotonicity probe")

    for name, handler in (("interval-kernel", cmd_interval_kernel),
                          ("interval-identity", cmd_interval_identity)):
        p = sub.add_parser(name, help="interval Neumann/Dirichlet diagonals")
        p.add_argument("--t", type=float, required=True)
        p.add_argument("--points", type=int, default=101)
        p.add_argument("--K", type=int, default=None)
        _common(p)
        p.set_defaults(handler=handler)
    return parser


_NOT_PARAMS = {"handler", "format", "out", "figure", "threads"}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        result = args.handler(args)
    except (DomainError, ValueError) as exc:
        print(f"rbessel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_PARAMS}
    meta = {"subcommand": args.command, "version": __version__, "params": params,
            "passed": result.passed, **result.summary}
    text = _render(result, meta, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        if args.format == "csv":
            with open(args.out + ".meta.json", "w") as fh:
                fh.write(json.dumps(_json_safe(meta), indent=2) + "\n")
    else:
        sys.stdout.write(text)
        if args.format == "csv":
            print("# meta " + json.dumps(_json_safe(meta)), file=sys.stderr)
    if args.figure and result.figure is not None:
        result.figure(args.figure)
    if not result.passed:
        print(f"rbessel {args.command}: property violated", file=sys.stderr)
        for v in result.summary.get("violations", []) or []:
            print(f"  {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
