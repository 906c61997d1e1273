"""Scale-normalized energy diagnostics around a center point.

*   ``weiss``: W(r) = r^{-(n+2)} int_{B_r} (|grad u|^2 + 2(u - u0)) dx
    - 2 r^{-(n+3)} int_{dB_r} (u - u0)^2, the energy whose monotonicity in
    r measures how far u is from being 2-homogeneous about the center.
    It is constant exactly on 2-homogeneous fields.
*   ``monneau``: M(r, q) = r^{-(n+3)} int_{dB_r} (u - u0 - q)^2 against a
    candidate trace-one form q; nondecreasing in r when the center is
    singular, the max-principle condition holds, and q is nonnegative.
*   supporting identities: the rescaling u_r(x) = (u(center + r x) - u0)/r^2
    satisfies W(rs, u) = W(s, u_r) and M(r, u, q) = M(1, u_r, q); the
    decomposition check verifies W(r) - W(0+) against its bulk + sphere
    representation with the discrete Laplacian standing in for Delta u.

Monotonicity is a continuum statement; the profile helpers report
forward-difference slopes so callers can assert them up to quadrature
and interpolation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import DomainError
from .fields import (
    AnalyticField,
    GridSpec,
    ScalarField,
    coincidence_mask,
    default_threshold,
    laplacian_field,
    value_at,
    values_at,
    gradients_at,
)
from .quadforms import QuadraticForm, eval_form, grad_form
from .quadrature import QuadratureRules, ball_integral, sphere_integral

MIN_RADIUS_CELLS = 4       # single evaluations need r >= 4h
LIMIT_RADII_CELLS = (8, 12, 16)  # extrapolation stencil for W(0+)


@dataclass
class RadialProfile:
    """Sampled r -> (W, derivative bound, M per candidate form)."""

    center: np.ndarray
    radii: np.ndarray
    weiss_values: np.ndarray
    derivative_bound_rhs: np.ndarray
    monneau_values: dict = dataclass_field(default_factory=dict)
    min_slope_weiss: float = float("nan")
    min_slope_monneau: float = float("nan")
    hypothesis_ok: bool | None = None
    worst_hypothesis_violation: float | None = None
    center_status: str | None = None
    flags: list = dataclass_field(default_factory=list)


def _dim(field) -> int:
    return field.spec.dim if isinstance(field, ScalarField) else field.dim


def _check_radius(field, center, r: float, minimum_cells: int = MIN_RADIUS_CELLS):
    if not (r > 0.0):
        raise ValueError(f"radius must be positive, got {r}")
    if isinstance(field, ScalarField):
        spec = field.spec
        h = spec.spacing
        if r < minimum_cells * h * (1.0 - 1e-12):
            raise DomainError(
                f"radius {r:.6g} below the reliable minimum {minimum_cells}h = "
                f"{minimum_cells * h:.6g}"
            )
        c = np.asarray(center, dtype=float)
        reach = float(np.hypot(*(c - spec.center))) + r
        if reach > spec.interior_margin() + 1e-12:
            raise DomainError(
                f"sphere of radius {r:.6g} about {tuple(c)} leaves the valid disk"
            )


def rescale(field, center, r: float, out_grid: GridSpec | None = None):
    """Parabolic rescaling u_r(x) = (u(center + r x) - u(center)) / r^2.

    Grid fields are resampled onto ``out_grid``; closed forms come back as
    closed forms.  The rescaling leaves second derivatives unchanged, so
    the regularity bound is carried over.
    """
    center = np.asarray(center, dtype=float)
    if not (r > 0.0):
        raise ValueError(f"rescaling radius must be positive, got {r}")
    u0 = value_at(field, center)
    if isinstance(field, AnalyticField):
        def val(pts):
            return (field.values_at(center[None, :] + r * pts) - u0) / r**2

        def grad(pts):
            return field.gradients_at(center[None, :] + r * pts) / r

        return AnalyticField(val, grad, dim=field.dim, c11_bound=field.c11_bound)

    if out_grid is None:
        raise ValueError("out_grid is required when rescaling a grid field")
    spec = field.spec
    shift = float(np.hypot(*(center - spec.center)))
    if shift + r * out_grid.domain_radius > spec.interior_margin() + 1e-12:
        raise DomainError("rescaled window leaves the valid disk")
    x, y = out_grid.node_mesh()
    inside = out_grid.inside_disk()
    pts = np.stack([x[inside], y[inside]], axis=-1)
    vals = np.full(x.shape, np.nan)
    vals[inside] = (values_at(field, center[None, :] + r * pts) - u0) / r**2
    return ScalarField(spec=out_grid, values=vals, c11_bound=field.c11_bound)


def weiss(field, center, r: float, rules: QuadratureRules) -> float:
    """The scale-normalized energy W(r) about ``center``."""
    _check_radius(field, center, r)
    center = np.asarray(center, dtype=float)
    u0 = value_at(field, center)
    n = _dim(field)

    def bulk(pts):
        g = field.gradients_at(pts)
        return g[:, 0] ** 2 + g[:, 1] ** 2 + 2.0 * (field.values_at(pts) - u0)

    def surf(pts):
        return (field.values_at(pts) - u0) ** 2

    vol = ball_integral(bulk, center, r, rules.ball)
    sph = sphere_integral(surf, center, r, rules.sphere)
    return vol / r ** (n + 2) - 2.0 * sph / r ** (n + 3)


def weiss_derivative_bound(field, center, r: float, rules: QuadratureRules) -> float:
    """Lower bound for dW/dr: the normalized defect of 2-homogeneity.

    2 r^{-(n+4)} int_{dB_r} |y . grad u - 2 (u - u0)|^2 over the sphere,
    with y relative to the center.  Vanishes identically on 2-homogeneous
    fields by the Euler identity.
    """
    _check_radius(field, center, r)
    center = np.asarray(center, dtype=float)
    u0 = value_at(field, center)
    n = _dim(field)

    def defect(pts):
        y = pts - center[None, :]
        g = field.gradients_at(pts)
        e = y[:, 0] * g[:, 0] + y[:, 1] * g[:, 1] - 2.0 * (field.values_at(pts) - u0)
        return e**2

    return 2.0 * sphere_integral(defect, center, r, rules.sphere) / r ** (n + 4)


def monneau(field, center, r: float, q: QuadraticForm, rules: QuadratureRules) -> float:
    """M(r, u, q): normalized sphere distance between u - u0 and the form q."""
    if not q.in_Q:
        raise ValueError("candidate form must have trace one")
    _check_radius(field, center, r)
    center = np.asarray(center, dtype=float)
    u0 = value_at(field, center)
    n = _dim(field)

    def w2(pts):
        w = field.values_at(pts) - u0 - eval_form(q, pts - center[None, :])
        return w**2

    return sphere_integral(w2, center, r, rules.sphere) / r ** (n + 3)


def hypothesis_check(field: ScalarField, center, tau: float | None = None):
    """Is u <= u(center) on the detected coincidence set?

    Returns (ok, worst violation); the tolerance scales with the threshold
    and the regularity bound because near-threshold nodes may carry values
    of size M*tau^2 above the center value without violating the continuum
    condition.
    """
    if not isinstance(field, ScalarField):
        raise TypeError("hypothesis_check needs a grid field")
    if tau is None:
        tau = default_threshold(field)
    center = np.asarray(center, dtype=float)
    u0 = value_at(field, center)
    mask = coincidence_mask(field, tau)
    scale = field.c11_bound if field.c11_bound is not None else 1.0
    if not np.any(mask.flags):
        return True, 0.0
    worst = float(np.max(field.values[mask.flags] - u0))
    return worst <= 10.0 * tau * scale, worst


def center_status(field: ScalarField, center, tau: float | None = None) -> str:
    """Classify the center for profile bookkeeping.

    "nonstationary" if the gradient there exceeds the threshold,
    "coincidence-interior" if a small ball around it is fully masked,
    otherwise "free-boundary-candidate".
    """
    if tau is None:
        tau = default_threshold(field)
    center = np.asarray(center, dtype=float)
    g = field.gradients_at(center[None, :])[0]
    if float(np.hypot(*g)) > tau:
        return "nonstationary"
    mask = coincidence_mask(field, tau)
    x, y = field.spec.node_mesh()
    dist = np.hypot(x - center[0], y - center[1])
    nearby = (dist <= 8.0 * field.spec.spacing) & field.spec.inside_disk()
    if np.any(nearby) and np.count_nonzero(mask.flags & nearby) >= 0.9 * np.count_nonzero(nearby):
        return "coincidence-interior"
    return "free-boundary-candidate"


def _min_slope(radii: np.ndarray, values: np.ndarray) -> float:
    if len(radii) < 2:
        return float("nan")
    return float(np.min(np.diff(values) / np.diff(radii)))


def _validate_radii(field, radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a nonempty 1-d sequence")
    if np.any(np.diff(radii) <= 0.0):
        raise ValueError("radii must be strictly increasing")
    return radii


def weiss_profile(field, center, radii, rules: QuadratureRules) -> RadialProfile:
    """W and its derivative lower bound sampled on an increasing radius panel."""
    radii = _validate_radii(field, radii)
    center = np.asarray(center, dtype=float)
    w = np.array([weiss(field, center, r, rules) for r in radii])
    rhs = np.array([weiss_derivative_bound(field, center, r, rules) for r in radii])
    prof = RadialProfile(center=center, radii=radii, weiss_values=w,
                         derivative_bound_rhs=rhs,
                         min_slope_weiss=_min_slope(radii, w))
    _annotate(prof, field, center)
    return prof


def monneau_profile(field, center, radii, forms, rules: QuadratureRules) -> RadialProfile:
    """M sampled per candidate form; forms may be a dict id -> form or a list."""
    radii = _validate_radii(field, radii)
    center = np.asarray(center, dtype=float)
    if not isinstance(forms, dict):
        forms = {f"form{k}": q for k, q in enumerate(forms)}
    values = {
        label: np.array([monneau(field, center, r, q, rules) for r in radii])
        for label, q in forms.items()
    }
    slopes = [_min_slope(radii, v) for v in values.values()]
    prof = RadialProfile(center=center, radii=radii,
                         weiss_values=np.full(radii.shape, np.nan),
                         derivative_bound_rhs=np.full(radii.shape, np.nan),
                         monneau_values=values,
                         min_slope_monneau=float(np.min(slopes)) if slopes else float("nan"))
    _annotate(prof, field, center)
    return prof


def _annotate(prof: RadialProfile, field, center):
    if not isinstance(field, ScalarField):
        return
    ok, worst = hypothesis_check(field, center)
    prof.hypothesis_ok = ok
    prof.worst_hypothesis_violation = worst
    prof.center_status = center_status(field, center)
    if not ok:
        prof.flags.append("max-principle condition violated on coincidence set")
    if prof.center_status != "free-boundary-candidate":
        prof.flags.append("center not singular")


def weiss_limit_estimate(field: ScalarField, center, rules: QuadratureRules) -> float:
    """W(0+) by quadratic extrapolation from the smallest reliable radii.

    Samples at 8h, 12h, 16h and extrapolates the interpolating parabola to
    r = 0; exact whenever W(r) is a quadratic polynomial in r, which covers
    the manufactured corpus.
    """
    if not isinstance(field, ScalarField):
        raise TypeError("weiss_limit_estimate needs a grid field")
    h = field.spec.spacing
    radii = [k * h for k in LIMIT_RADII_CELLS]
    center = np.asarray(center, dtype=float)
    reach = float(np.hypot(*(center - field.spec.center))) + radii[-1]
    if reach > field.spec.interior_margin():
        raise DomainError("grid too small for the limit-estimate radii")
    w = [weiss(field, center, r, rules) for r in radii]
    # Lagrange extrapolation to 0 from abscissae (8, 12, 16)h
    return 6.0 * w[0] - 8.0 * w[1] + 3.0 * w[2]


@dataclass
class DecompositionReport:
    """Both sides of the bulk + sphere representation of W(r) - W(0+)."""

    residual: float
    lhs: float
    rhs: float
    rhs_bulk: float
    rhs_sphere: float
    w0_estimate: float
    min_w_delta_w: float


def monneau_decomposition_check(field: ScalarField, center, r: float,
                                q: QuadraticForm, rules: QuadratureRules) -> DecompositionReport:
    """Check W(r) - W(0+) = r^{-(n+2)} int_{B_r} (-w Dw) + r^{-(n+3)} int_{dB_r} w (y.grad w - 2w).

    Here w = u - u(center) - q and Dw is the discrete Laplacian of u minus
    one, interpolated between nodes.  Also reports min over nodes in B_r of
    w*Dw, the sign mechanism that makes M monotone for nonnegative q under
    the max-principle condition.
    """
    if not isinstance(field, ScalarField):
        raise TypeError("monneau_decomposition_check needs a grid field")
    if not q.in_Q:
        raise ValueError("candidate form must have trace one")
    _check_radius(field, center, r)
    center = np.asarray(center, dtype=float)
    n = field.spec.dim
    u0 = value_at(field, center)
    lap = laplacian_field(field)

    def w_of(pts):
        return field.values_at(pts) - u0 - eval_form(q, pts - center[None, :])

    def bulk(pts):
        return -w_of(pts) * (lap.values_at(pts) - 1.0)

    def sphere_term(pts):
        y = pts - center[None, :]
        w = w_of(pts)
        gw = field.gradients_at(pts) - grad_form(q, y)
        return w * (y[:, 0] * gw[:, 0] + y[:, 1] * gw[:, 1] - 2.0 * w)

    w0 = weiss_limit_estimate(field, center, rules)
    lhs = weiss(field, center, r, rules) - w0
    rhs_bulk = ball_integral(bulk, center, r, rules.ball) / r ** (n + 2)
    rhs_sphere = sphere_integral(sphere_term, center, r, rules.sphere) / r ** (n + 3)
    rhs = rhs_bulk + rhs_sphere

    # nodal sign report inside B_r
    x, y = field.spec.node_mesh()
    dist = np.hypot(x - center[0], y - center[1])
    ok = np.isfinite(lap.values) & (dist <= r)
    w_nodes = (field.values[ok] - u0
               - eval_form(q, np.stack([x[ok] - center[0], y[ok] - center[1]], axis=-1)))
    wdw = w_nodes * (lap.values[ok] - 1.0)
    min_wdw = float(np.min(wdw)) if wdw.size else float("nan")

    return DecompositionReport(residual=abs(lhs - rhs), lhs=lhs, rhs=rhs,
                               rhs_bulk=rhs_bulk, rhs_sphere=rhs_sphere,
                               w0_estimate=w0, min_w_delta_w=min_wdw)


def scaling_identity_check(field, center, r: float, s: float,
                           rules: QuadratureRules) -> float:
    """|W(r*s, u) - W(s, u_r)|: zero in the continuum for any r, s."""
    if not (r > 0.0 and s > 0.0):
        raise ValueError("r and s must be positive")
    center = np.asarray(center, dtype=float)
    w_direct = weiss(field, center, r * s, rules)
    if isinstance(field, ScalarField):
        out_grid = GridSpec.centered(field.spec.cells_per_side, 1.15 * s)
        ur = rescale(field, center, r, out_grid)
    else:
        ur = rescale(field, center, r)
    w_rescaled = weiss(ur, np.zeros(2), s, rules)
    return abs(w_direct - w_rescaled)
