"""Blowup fitting at a center, uniqueness across scales, and the matching algebra.

``fit_quadratic`` least-squares fits the rescaled field on two shells
against trace-one quadratic forms; ``fit_halfspace`` fits the half-space
profile over directions.  ``uniqueness_report`` runs the quadratic fit
down a radius panel, tracks the Frobenius drift of the fitted matrices,
measures the normalized remainder sup |u - u0 - q0| / r^2, and
classifies the center by model comparison.

``matching_f`` / ``matching_df`` / ``verify_uniqueness_algebra`` are the
finite rendering of the two-candidate matching argument: for candidate
matrices A, At with equal (unit) trace, f(t) integrates
(x.(A-At)x)(x.(A+At-2B^t)x) over the unit sphere with the diagonal
family B^t; f is affine in t with slope (lam_i0 - lam_j0) times the
positive moment gap, so all slopes vanish exactly when A = At.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError
from .fields import ScalarField, value_at
from .functionals import _check_radius, hypothesis_check
from .quadforms import QuadraticForm, bt_family, eval_form, frobenius_distance
from .quadrature import QuadratureRules, SphereRule, circle_rule, sphere_monomial_moment

FIT_SHELLS = (1.0, 0.5)
RESIDUAL_CAP = 0.02          # absolute residual cap for a confident classification
DOMINANCE = 0.5              # the winning model must be at least twice as good
_DEGENERATE_RMS = 1e-12


@dataclass
class BlowupReport:
    center: np.ndarray
    radii: np.ndarray
    fitted_forms: list
    fit_residuals: np.ndarray
    pairwise_distances: np.ndarray
    limit_form: QuadraticForm
    remainder_curve: np.ndarray
    halfspace_direction: np.ndarray
    halfspace_residual: float
    classification: str
    hypothesis_ok: bool


def _shell_points_and_data(field, center, r: float, rule: SphereRule):
    """Rescaled-field samples on the two fit shells, plus the shell coordinates."""
    center = np.asarray(center, dtype=float)
    u0 = value_at(field, center)
    xs = np.concatenate([s * rule.nodes for s in FIT_SHELLS], axis=0)
    pts = center[None, :] + r * xs
    data = (field.values_at(pts) - u0) / r**2
    return xs, data


def fit_quadratic(field, center, r: float, rules: QuadratureRules):
    """LSQ fit of the rescaled field by x.Bx/2 with trace(B) = 1.

    The trace constraint is eliminated by writing B as identity/2 plus a
    trace-free symmetric part, so every fitted matrix has unit trace by
    construction.  Returns (form, relative RMS misfit on the fit nodes).
    """
    _check_radius(field, center, r, minimum_cells=8)
    xs, data = _shell_points_and_data(field, center, r, rules.sphere)
    rms = float(np.sqrt(np.mean(data**2)))
    if rms < _DEGENERATE_RMS:
        raise DegenerateFitError(
            "field is flat around the center; quadratic fit is degenerate"
        )
    base = 0.25 * (xs[:, 0] ** 2 + xs[:, 1] ** 2)       # identity/2 part
    basis = np.stack(
        [0.5 * (xs[:, 0] ** 2 - xs[:, 1] ** 2), xs[:, 0] * xs[:, 1]], axis=-1
    )
    coef, *_ = np.linalg.lstsq(basis, data - base, rcond=None)
    a, b = float(coef[0]), float(coef[1])
    matrix = np.array([[0.5 + a, b], [b, 0.5 - a]])
    matrix[1, 1] = 1.0 - matrix[0, 0]  # exact unit trace
    form = QuadraticForm(dim=2, matrix=matrix)
    misfit = data - base - basis @ coef
    residual = float(np.sqrt(np.mean(misfit**2)) / rms)
    return form, residual


def fit_halfspace(field, center, r: float, rules: QuadratureRules,
                  sweep: int = 1024):
    """Best-direction fit of the half-space profile (max(x.e,0))^2 / 2.

    Coarse sweep over ``sweep`` directions followed by golden-section
    refinement of the RMS misfit.  Returns (unit direction, relative RMS).
    """
    _check_radius(field, center, r, minimum_cells=8)
    xs, data = _shell_points_and_data(field, center, r, rules.sphere)
    rms = float(np.sqrt(np.mean(data**2)))
    if rms < _DEGENERATE_RMS:
        raise DegenerateFitError(
            "field is flat around the center; half-space fit is degenerate"
        )

    def misfit(phi_arr):
        e = np.stack([np.cos(phi_arr), np.sin(phi_arr)], axis=-1)
        proj = np.maximum(xs @ e.T, 0.0)             # (nodes, angles)
        return np.sqrt(np.mean((0.5 * proj**2 - data[:, None]) ** 2, axis=0))

    phis = 2.0 * np.pi * np.arange(sweep) / sweep
    vals = misfit(phis)
    k = int(np.argmin(vals))
    lo = phis[k] - 2.0 * np.pi / sweep
    hi = phis[k] + 2.0 * np.pi / sweep
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - golden * (b - a)
    x2 = a + golden * (b - a)
    f1, f2 = misfit(np.array([x1]))[0], misfit(np.array([x2]))[0]
    for _ in range(80):
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - golden * (b - a)
            f1 = misfit(np.array([x1]))[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + golden * (b - a)
            f2 = misfit(np.array([x2]))[0]
    phi = 0.5 * (a + b)
    direction = np.array([np.cos(phi), np.sin(phi)])
    return direction, float(misfit(np.array([phi]))[0] / rms)


def uniqueness_report(field, center, radii, rules: QuadratureRules) -> BlowupReport:
    """Fit down a decreasing radius panel and certify a single limit form.

    The limit form is the smallest-radius fit; the remainder curve is
    sup over the fit shells of |u - u0 - q0| / r^2 per radius.  The center
    classifies as singular/regular only when one model dominates the other
    by a factor of two and beats the absolute residual cap.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 2:
        raise ValueError("need a panel of at least two radii")
    if np.any(np.diff(radii) >= 0.0):
        raise ValueError("radii must be strictly decreasing")
    center = np.asarray(center, dtype=float)
    if isinstance(field, ScalarField):
        hyp_ok, _ = hypothesis_check(field, center)
    else:
        hyp_ok = True

    forms = []
    residuals = []
    for r in radii:
        form, res = fit_quadratic(field, center, r, rules)
        forms.append(form)
        residuals.append(res)
    pairwise = np.array([
        frobenius_distance(forms[k], forms[k + 1]) for k in range(len(forms) - 1)
    ])
    limit = forms[-1]

    u0 = value_at(field, center)
    remainder = []
    for r in radii:
        xs, _ = _shell_points_and_data(field, center, r, rules.sphere)
        pts = center[None, :] + r * xs
        dev = field.values_at(pts) - u0 - eval_form(limit, pts - center[None, :])
        remainder.append(float(np.max(np.abs(dev)) / r**2))
    remainder = np.array(remainder)

    direction, hs_res = fit_halfspace(field, center, float(radii[-1]), rules)
    q_res = residuals[-1]
    if q_res <= min(RESIDUAL_CAP, DOMINANCE * hs_res):
        classification = "singular"
    elif hs_res <= min(RESIDUAL_CAP, DOMINANCE * q_res):
        classification = "regular"
    else:
        classification = "unresolved"

    return BlowupReport(center=center, radii=radii, fitted_forms=forms,
                        fit_residuals=np.array(residuals),
                        pairwise_distances=pairwise, limit_form=limit,
                        remainder_curve=remainder,
                        halfspace_direction=direction, halfspace_residual=hs_res,
                        classification=classification, hypothesis_ok=bool(hyp_ok))


# ---------------------------------------------------------------------------
# matching algebra for two candidate limits

def _check_candidates(a: np.ndarray, at: np.ndarray):
    for m in (a, at):
        if m.shape != a.shape or m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("candidates must be square matrices of equal shape")
        if abs(float(np.trace(m)) - 1.0) > 1e-12:
            raise ValueError(f"candidate trace must be 1, got {np.trace(m)!r}")
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise ValueError("candidates must be symmetric")


def matching_f(a, at, i0: int, j0: int, t: float, rule: SphereRule) -> float:
    """f(t) = int_{dB_1} (x.(A-At)x)(x.(A+At-2B^t)x) with the diagonal family.

    Vanishes for every t whenever both candidates arise as limits at the
    same center; affine in t for fixed candidates.
    """
    a = np.asarray(a, dtype=float)
    at = np.asarray(at, dtype=float)
    _check_candidates(a, at)
    bt = bt_family(a.shape[0], i0, j0, t).matrix
    xs = rule.nodes
    first = np.einsum("mi,ij,mj->m", xs, a - at, xs)
    second = np.einsum("mi,ij,mj->m", xs, a + at - 2.0 * bt, xs)
    return float(rule.weights @ (first * second))


def matching_df(a, at, i0: int, j0: int, rule: SphereRule) -> float:
    """df/dt = (lam_i0 - lam_j0) * (x1^4 moment - x1^2 x2^2 moment).

    Requires A - At diagonal (rotate to its eigenbasis first); the moment
    gap is strictly positive, so a zero derivative pins the two eigenvalues
    together.
    """
    a = np.asarray(a, dtype=float)
    at = np.asarray(at, dtype=float)
    _check_candidates(a, at)
    d = a - at
    off = d - np.diag(np.diag(d))
    if np.max(np.abs(off)) > 1e-10:
        raise ValueError(
            "A - At is not diagonal; diagonalize (rotate coordinates) first"
        )
    if not (1 <= i0 < j0 <= a.shape[0]):
        raise ValueError(f"need 1 <= i0 < j0 <= dim, got ({i0}, {j0})")
    gap = (sphere_monomial_moment(rule, (4, 0))
           - sphere_monomial_moment(rule, (2, 2)))
    return float((d[i0 - 1, i0 - 1] - d[j0 - 1, j0 - 1]) * gap)


def verify_uniqueness_algebra(a, at, rule: SphereRule | None = None):
    """All pairwise eigenvalue gaps of A - At vanish iff A = At.

    Diagonalizes A - At, evaluates the matching derivative for every index
    pair, and reports (equal, max |derivative|).  With equal traces the
    gaps vanishing forces every eigenvalue to zero, hence equality in
    Frobenius norm.
    """
    a = np.asarray(a, dtype=float)
    at = np.asarray(at, dtype=float)
    _check_candidates(a, at)
    if rule is None:
        rule = circle_rule(1024)
    d = a - at
    _, vecs = np.linalg.eigh(d)
    a_rot = vecs.T @ a @ vecs
    at_rot = vecs.T @ at @ vecs
    # rotation preserves traces but not bitwise; re-snap within tolerance
    a_rot = a_rot - np.eye(a.shape[0]) * (np.trace(a_rot) - 1.0) / a.shape[0]
    at_rot = at_rot - np.eye(a.shape[0]) * (np.trace(at_rot) - 1.0) / a.shape[0]
    diff = a_rot - at_rot
    diff = np.diag(np.diag(diff))  # strip rotation round-off
    a_rot = at_rot + diff
    gaps = [
        abs(matching_df(a_rot, at_rot, i0, j0, rule))
        for i0 in range(1, a.shape[0])
        for j0 in range(i0 + 1, a.shape[0] + 1)
    ]
    max_gap = float(max(gaps))
    equal = max_gap <= 1e-8
    if equal:
        assert frobenius_distance(a, at) <= 1e-8, (
            "zero eigenvalue gaps must force matrix equality"
        )
    return equal, max_gap
