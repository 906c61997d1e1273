"""Command-line surface: solve, profile, blowup, verify, plot.

Every command is deterministic given its configuration: outputs embed the
effective configuration, floats are written with 17 significant digits,
and nothing derived from the clock or the environment lands in a file.

Exit codes: 0 success, 1 usage or I/O error, 2 solver non-convergence,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import blowup as blowup_mod
from . import functionals, quadforms, quadrature, solver
from .errors import DegenerateFitError, DomainError, ParseError
from .fields import GridSpec, ScalarField, load_field, save_field

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf"]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _parse_floats(text: str, count: int | None = None, label: str = "value"):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ValueError(f"could not parse {label} list {text!r}") from exc
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} comma-separated {label}s, got {text!r}")
    return vals


def _parse_preset(spec_text: str):
    """Preset -> (closed form or None for zero).

    zero | halfspace:ex,ey | quadratic:a11,a12,a22 | perturbed:a11,a12,a22,c
    """
    name, _, rest = spec_text.partition(":")
    if name == "zero":
        return None
    if name == "halfspace":
        e = _parse_floats(rest, 2, "direction component")
        return solver.halfspace_solution(e)
    if name == "quadratic":
        a11, a12, a22 = _parse_floats(rest, 3, "matrix entry")
        return solver.polynomial_solution([[a11, a12], [a12, a22]])
    if name == "perturbed":
        a11, a12, a22, c = _parse_floats(rest, 4, "parameter")
        return solver.perturbed_singular_solution([[a11, a12], [a12, a22]], c)
    raise ValueError(f"unknown preset {name!r}")


def _parse_form(spec_text: str) -> quadforms.QuadraticForm:
    """Form spec -> trace-one form.  iso | bt:i0,j0,t | quad:a11,a12,a22"""
    name, _, rest = spec_text.partition(":")
    if name == "iso":
        return quadforms.q_form([[0.5, 0.0], [0.0, 0.5]])
    if name == "bt":
        i0, j0, t = _parse_floats(rest, 3, "family parameter")
        return quadforms.bt_family(2, int(i0), int(j0), t)
    if name == "quad":
        a11, a12, a22 = _parse_floats(rest, 3, "matrix entry")
        return quadforms.q_form([[a11, a12], [a12, a22]])
    raise ValueError(f"unknown form spec {spec_text!r}")


def _apply_config(args: argparse.Namespace, parser_dests: set) -> None:
    """Merge a JSON config file under explicit flags; unknown keys rejected."""
    if not getattr(args, "config", None):
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in loaded.items():
        dest = key.replace("-", "_")
        if dest not in parser_dests:
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _effective_config(args: argparse.Namespace, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def _field_from_args(args) -> ScalarField:
    if getattr(args, "infile", None):
        return load_field(args.infile)
    if getattr(args, "preset", None):
        analytic = _parse_preset(args.preset)
        n = args.N if args.N is not None else 256
        radius = args.radius if args.radius is not None else 1.0
        grid = GridSpec.centered(n, radius)
        if analytic is None:
            return ScalarField(spec=grid, values=np.zeros((n, n)), c11_bound=0.0)
        x, y = grid.node_mesh()
        pts = np.stack([x.reshape(-1), y.reshape(-1)], axis=-1)
        vals = analytic.values_at(pts).reshape(x.shape)
        return ScalarField(spec=grid, values=vals, c11_bound=analytic.c11_bound)
    raise ValueError("either --in or --preset is required")


def _rules_from_args(args) -> quadrature.QuadratureRules:
    angular = args.angular_nodes if args.angular_nodes is not None else 1024
    panels = args.radial_panels if args.radial_panels is not None else 64
    return quadrature.default_rules(angular_nodes=angular, radial_panels=panels)


# ---------------------------------------------------------------------------
# solve

def cmd_solve(args) -> int:
    n = args.N if args.N is not None else 256
    radius = args.radius if args.radius is not None else 1.0
    grid = GridSpec.centered(n, radius)
    if args.infile:
        boundary = load_field(args.infile)
    elif args.preset:
        analytic = _parse_preset(args.preset)
        if analytic is None:
            boundary = lambda pts: np.zeros(len(pts))  # noqa: E731
        else:
            boundary = analytic
    else:
        raise ValueError("either --preset or --in boundary data is required")
    params = solver.SolveParams(
        grid=grid,
        gradient_threshold=args.tau,
        relaxation_factor=args.omega if args.omega is not None else 1.7,
        max_outer_iterations=args.max_iterations if args.max_iterations is not None else 200,
        engine=args.engine if args.engine is not None else "direct",
    )
    result = solver.solve(boundary, args.init if args.init is not None else "harmonic",
                          params)
    if args.out:
        save_field(result.field, args.out)
    config = _effective_config(args, ["N", "radius", "tau", "preset", "infile",
                                      "omega", "engine", "init", "out"])
    log = {
        "command": "solve",
        "config": config,
        "converged": result.converged,
        "outer_iterations": result.outer_iterations,
        "mask_flip_history": result.mask_flip_history,
        "residual_sup": result.residual_norm,
        "residual_l2": result.residual_l2,
        "threshold": params.threshold(),
    }
    text = json.dumps(log, sort_keys=True, indent=2)
    if args.log:
        with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if not result.converged:
        print("solve did not converge within the iteration budget", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# profile

def cmd_profile(args) -> int:
    field = _field_from_args(args)
    rules = _rules_from_args(args)
    center = np.array(_parse_floats(args.center, 2, "center coordinate")) \
        if args.center else np.zeros(2)
    if args.radii:
        radii = np.array(_parse_floats(args.radii, label="radius"))
    else:
        radii = np.arange(0.1, 0.85, 0.1) * field.spec.domain_radius
    wprof = functionals.weiss_profile(field, center, radii, rules)
    form_specs = args.forms or []
    forms = {spec_text: _parse_form(spec_text) for spec_text in form_specs}
    mprof = functionals.monneau_profile(field, center, radii, forms, rules) \
        if forms else None

    config = _effective_config(args, ["N", "radius", "tau", "preset", "infile",
                                      "center", "radii", "forms",
                                      "angular_nodes", "radial_panels"])
    buf = io.StringIO()
    buf.write("# fblab profile\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    buf.write(f"# threshold: {_fmt(args.tau) if args.tau else 'default'}\n")
    buf.write(f"# rules: angular={rules.sphere.node_count} "
              f"radial={rules.ball.radial_node_count}\n")
    for flag in wprof.flags:
        buf.write(f"# flag: {flag}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["r", "W", "dWdr_fd", "dWdr_bound"] + [f"M[{k}]" for k in forms]
    writer.writerow(header)
    slopes = np.diff(wprof.weiss_values) / np.diff(wprof.radii)
    for k, r in enumerate(radii):
        row = [_fmt(r), _fmt(wprof.weiss_values[k]),
               _fmt(slopes[k]) if k < len(slopes) else "NA",
               _fmt(wprof.derivative_bound_rhs[k])]
        if mprof is not None:
            row += [_fmt(mprof.monneau_values[k2][k]) for k2 in forms]
        writer.writerow(row)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# blowup

def cmd_blowup(args) -> int:
    field = _field_from_args(args)
    rules = _rules_from_args(args)
    center = np.array(_parse_floats(args.center, 2, "center coordinate")) \
        if args.center else np.zeros(2)
    if args.radii:
        radii = np.array(_parse_floats(args.radii, label="radius"))
    else:
        radii = np.array([0.4, 0.2, 0.1, 0.05]) * field.spec.domain_radius
    report = blowup_mod.uniqueness_report(field, center, radii, rules)
    config = _effective_config(args, ["N", "radius", "preset", "infile", "center",
                                      "radii", "angular_nodes", "radial_panels"])
    payload = {
        "command": "blowup",
        "config": config,
        "center": list(report.center),
        "radii": list(report.radii),
        "fits": [
            {"r": float(r), "matrix": [list(row) for row in f.matrix],
             "residual": float(res)}
            for r, f, res in zip(report.radii, report.fitted_forms,
                                 report.fit_residuals)
        ],
        "pairwise_distances": list(report.pairwise_distances),
        "limit_matrix": [list(row) for row in report.limit_form.matrix],
        "remainder_curve": list(report.remainder_curve),
        "halfspace": {"direction": list(report.halfspace_direction),
                      "residual": float(report.halfspace_residual)},
        "classification": report.classification,
        "hypothesis_ok": report.hypothesis_ok,
        "rules": {"angular_nodes": rules.sphere.node_count,
                  "radial_nodes": rules.ball.radial_node_count},
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# verify

def _verify_rows(only: str | None, seed: int):
    """Yield (check, metric, value, bound) rows for the identity suite."""
    rows = []

    def want(name):
        return only is None or only == name

    if want("moments"):
        rep = quadrature.moment_identity_check(
            quadrature.circle_rule(2048), quadrature.disk_rule(angular_nodes=2048))
        rows.append(("moments", "x1^4 identity residual", rep.residual_x4, 1e-10))
        rows.append(("moments", "cross identity residual", rep.residual_cross, 1e-10))
        rows.append(("moments", "moment gap vs pi/2", abs(rep.moment_gap - math.pi / 2), 1e-10))

    if want("alpha"):
        rule = quadrature.disk_rule()
        base = quadforms.alpha_n(2, rule)
        rows.append(("alpha", "deviation from pi/8", abs(base - math.pi / 8), 1e-8))
        rng = np.random.default_rng(seed)
        spread = 0.0
        for _ in range(5):
            a11 = rng.uniform(0.0, 1.0)
            b = rng.uniform(-0.3, 0.3)
            form = quadforms.q_form([[a11, b], [b, 1.0 - a11]])
            spread = max(spread, abs(quadforms.alpha_n(2, rule, form) - base))
        rows.append(("alpha", "reference-form spread", spread, 1e-10))

    rules = quadrature.default_rules()
    grid = GridSpec.centered(512, 1.0)
    need_fields = any(want(n) for n in
                      ("weiss-constancy", "weiss-monotonicity",
                       "monneau-monotonicity", "scaling", "decomposition",
                       "blowup"))
    if need_fields:
        qfield = solver.make_polynomial_field([[0.6, 0.0], [0.0, 0.4]], grid)
        hfield = solver.make_halfspace_field([1.0, 0.0], grid)
        pfield = solver.make_perturbed_singular_field(
            [[0.7, 0.0], [0.0, 0.3]], 0.05, grid)
        origin = np.zeros(2)

    if want("weiss-constancy"):
        radii = np.arange(0.1, 0.95, 0.1)
        wq = functionals.weiss_profile(qfield, origin, radii, rules).weiss_values
        wh = functionals.weiss_profile(hfield, origin, radii, rules).weiss_values
        rows.append(("weiss-constancy", "quadratic spread", float(wq.max() - wq.min()), 2e-3))
        rows.append(("weiss-constancy", "quadratic vs pi/8",
                     float(np.max(np.abs(wq - math.pi / 8))), 2e-3))
        rows.append(("weiss-constancy", "half-space spread", float(wh.max() - wh.min()), 2e-3))
        rows.append(("weiss-constancy", "half-space vs pi/16",
                     float(np.max(np.abs(wh - math.pi / 16))), 2e-3))
        rows.append(("weiss-constancy", "energy gap pi/8 - W_half",
                     float(math.pi / 8 - wh.max()), (math.pi / 16, None)))

    if want("weiss-monotonicity"):
        radii = np.arange(0.05, 0.81, 0.05)
        prof = functionals.weiss_profile(pfield, origin, radii, rules)
        slopes = np.diff(prof.weiss_values) / np.diff(prof.radii)
        rows.append(("weiss-monotonicity", "min FD slope", -float(slopes.min()), 1e-3))
        gap = slopes - prof.derivative_bound_rhs[:-1]
        rows.append(("weiss-monotonicity", "min slope minus bound", -float(gap.min()), 1e-2))

    if want("monneau-monotonicity"):
        radii = np.arange(0.05, 0.81, 0.05)
        panel = {f"bt:1,2,{t}": quadforms.bt_family(2, 1, 2, t)
                 for t in (-0.5, 0.0, 0.5)}
        panel.update({f"bt:2,1,{t}": quadforms.bt_family(2, 1, 2, -t)
                      for t in (-0.5, 0.0, 0.5)})
        panel["iso"] = quadforms.q_form([[0.5, 0.0], [0.0, 0.5]])
        prof = functionals.monneau_profile(pfield, origin, radii, panel, rules)
        rows.append(("monneau-monotonicity", "min FD slope",
                     -float(prof.min_slope_monneau), 1e-3))
        dec = functionals.monneau_decomposition_check(
            pfield, origin, 0.3, quadforms.bt_family(2, 1, 2, 0.0), rules)
        rows.append(("monneau-monotonicity", "min w*(lap-1)",
                     -dec.min_w_delta_w, 1e-6))

    if want("scaling"):
        worst = 0.0
        for fld in (qfield, hfield, pfield):
            for r, s in ((0.5, 0.6), (0.25, 0.8)):
                worst = max(worst, functionals.scaling_identity_check(
                    fld, origin, r, s, rules))
        rows.append(("scaling", "max identity residual", worst, 1e-3))

    if want("decomposition"):
        dec = functionals.monneau_decomposition_check(
            pfield, origin, 0.3, quadforms.bt_family(2, 1, 2, 0.0), rules)
        rows.append(("decomposition", "identity residual", dec.residual, 5e-3))

    if want("matching"):
        rule = quadrature.circle_rule(2048)
        a = np.diag([0.75, 0.25])
        at = np.diag([0.25, 0.75])
        f_vals = [blowup_mod.matching_f(a, at, 1, 2, t, rule) for t in (-0.5, 0.0, 0.5)]
        collinearity = abs(f_vals[0] - 2.0 * f_vals[1] + f_vals[2])
        rows.append(("matching", "affine collinearity", collinearity, 1e-10))
        df = blowup_mod.matching_df(a, at, 1, 2, rule)
        rows.append(("matching", "slope vs pi/2", abs(df - math.pi / 2), 1e-6))
        rng = np.random.default_rng(seed)
        disagreements = 0
        for k in range(100):
            if k < 10:
                m = _random_trace_one(rng)
                pair = (m, m.copy())
            else:
                pair = (_random_trace_one(rng), _random_trace_one(rng))
            equal, _ = blowup_mod.verify_uniqueness_algebra(pair[0], pair[1], rule)
            close = quadforms.frobenius_distance(pair[0], pair[1]) <= 1e-8
            disagreements += int(equal != close)
        rows.append(("matching", "algebra/frobenius disagreements",
                     float(disagreements), 0.5))

    if want("blowup"):
        radii = [0.4, 0.2, 0.1, 0.05]
        rep = blowup_mod.uniqueness_report(pfield, origin, radii, rules)
        rows.append(("blowup", "perturbed classified singular",
                     0.0 if rep.classification == "singular" else 1.0, 0.5))
        decreasing = bool(np.all(np.diff(rep.remainder_curve) < 0.0))
        rows.append(("blowup", "remainder curve decreasing",
                     0.0 if decreasing else 1.0, 0.5))
        rep_h = blowup_mod.uniqueness_report(hfield, origin, radii, rules)
        rows.append(("blowup", "half-space classified regular",
                     0.0 if rep_h.classification == "regular" else 1.0, 0.5))

    return rows


def _random_trace_one(rng) -> np.ndarray:
    a11 = rng.uniform(-0.5, 1.5)
    b = rng.uniform(-1.0, 1.0)
    return np.array([[a11, b], [b, 1.0 - a11]])


KNOWN_CHECKS = ("moments", "alpha", "weiss-constancy", "weiss-monotonicity",
                "monneau-monotonicity", "scaling", "decomposition", "matching",
                "blowup")


def cmd_verify(args) -> int:
    only = args.only
    if only is not None and only not in KNOWN_CHECKS:
        raise ValueError(f"unknown check {only!r}; known: {', '.join(KNOWN_CHECKS)}")
    seed = args.seed if args.seed is not None else 0
    scale = args.tolerance_scale if args.tolerance_scale is not None else 1.0
    rows = _verify_rows(only, seed)
    failures = []
    print(f"{'check':<22} {'metric':<34} {'value':>13} {'bound':>13}  status")
    for check, metric, value, bound in rows:
        if isinstance(bound, tuple):  # lower-bound style check
            lo = bound[0] * scale
            ok = value >= lo
            bound_text = f">={lo:.3g}"
        else:
            tol = bound * scale
            ok = value <= tol
            bound_text = f"{tol:.3g}"
        status = "pass" if ok else "FAIL"
        if not ok:
            failures.append(f"{check}: {metric}")
        print(f"{check:<22} {metric:<34} {value:>13.4e} {bound_text:>13}  {status}")
    if failures:
        print("failed checks: " + "; ".join(failures), file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# plot

def cmd_plot(args) -> int:
    if not args.infile:
        raise ValueError("--in CSV path is required")
    with open(args.infile, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    table = list(reader)
    if len(table) < 2:
        raise ValueError("CSV has no data rows")
    header, data_rows = table[0], table[1:]
    cols = len(header)
    series = [[] for _ in range(cols)]
    for row in data_rows:
        if len(row) != cols:
            raise ValueError("ragged CSV row")
        for k, cell in enumerate(row):
            series[k].append(float("nan") if cell == "NA" else float(cell))
    svg = _render_svg(header, [np.array(s) for s in series])
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return 0


def _render_svg(header, series) -> str:
    x = series[0]
    ys = series[1:]
    finite_y = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([])
    if finite_y.size == 0:
        raise ValueError("no finite data to plot")
    x_lo, x_hi = float(np.nanmin(x)), float(np.nanmax(x))
    y_lo, y_hi = float(finite_y.min()), float(finite_y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    left, right, top, bottom = 70.0, 770.0, 30.0, 500.0

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * (right - left)

    def sy(v):
        return bottom - (v - y_lo) / (y_hi - y_lo) * (bottom - top)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 560">',
        '<rect width="800" height="560" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for k in range(5):
        fx = x_lo + (x_hi - x_lo) * k / 4.0
        fy = y_lo + (y_hi - y_lo) * k / 4.0
        px, py = sx(fx), sy(fy)
        parts.append(f'<line x1="{px:.2f}" y1="{bottom}" x2="{px:.2f}" '
                     f'y2="{bottom + 5}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{px:.2f}" y="{bottom + 20}" font-size="12" '
                     f'text-anchor="middle">{fx:.6g}</text>')
        parts.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" '
                     f'y2="{py:.2f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{left - 8}" y="{py + 4:.2f}" font-size="12" '
                     f'text-anchor="end">{fy:.6g}</text>')
    parts.append(f'<text x="{(left + right) / 2:.2f}" y="545" font-size="13" '
                 f'text-anchor="middle">{header[0]}</text>')
    for j, y in enumerate(ys):
        color = _PALETTE[j % len(_PALETTE)]
        ok = np.isfinite(y) & np.isfinite(x)
        pts = " ".join(f"{sx(xv):.3f},{sy(yv):.3f}"
                       for xv, yv in zip(x[ok], y[ok]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{right - 6}" y="{top + 16 * (j + 1):.2f}" '
                     f'font-size="12" text-anchor="end" fill="{color}">'
                     f'{header[j + 1]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# parser plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fblab",
        description="Numerical laboratory for a gradient-activated obstacle problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--N", type=int, help="nodes per grid side")
        p.add_argument("--radius", type=float, help="disk radius")
        p.add_argument("--tau", type=float, help="gradient threshold")
        p.add_argument("--angular-nodes", type=int, dest="angular_nodes")
        p.add_argument("--radial-panels", type=int, dest="radial_panels")
        p.add_argument("--center", help="analysis center 'x,y'")
        p.add_argument("--radii", help="comma-separated radius panel")
        p.add_argument("--forms", nargs="+", help="form specs (iso | bt:i,j,t | quad:a,b,c)")
        p.add_argument("--preset", help="field preset name:params")
        p.add_argument("--in", dest="infile", help="input file path")
        p.add_argument("--out", help="output file path")
        p.add_argument("--seed", type=int, help="seed for randomized checks")

    p_solve = sub.add_parser("solve", help="solve the activated Poisson problem")
    common(p_solve)
    p_solve.add_argument("--omega", type=float, help="relaxation factor in (0,2)")
    p_solve.add_argument("--engine", choices=["direct", "sor"])
    p_solve.add_argument("--init", choices=["zero", "harmonic"])
    p_solve.add_argument("--max-iterations", type=int, dest="max_iterations")
    p_solve.add_argument("--log", help="write the iteration log JSON here")
    p_solve.set_defaults(func=cmd_solve)

    p_profile = sub.add_parser("profile", help="Weiss/Monneau radial profiles to CSV")
    common(p_profile)
    p_profile.set_defaults(func=cmd_profile)

    p_blowup = sub.add_parser("blowup", help="blowup uniqueness report to JSON")
    common(p_blowup)
    p_blowup.set_defaults(func=cmd_blowup)

    p_verify = sub.add_parser("verify", help="run the built-in identity suite")
    common(p_verify)
    p_verify.add_argument("--only", help="run a single named check")
    p_verify.add_argument("--tolerance-scale", type=float, dest="tolerance_scale",
                          help="scale every tolerance (test hook)")
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="render a profile CSV as an SVG chart")
    common(p_plot)
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    dests = set(vars(args))
    try:
        _apply_config(args, dests)
        return args.func(args)
    except (ValueError, DomainError, ParseError, DegenerateFitError,
            OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
