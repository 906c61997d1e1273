"""Trace-one quadratic forms q = x.Ax/2 and the diagonal separating family.

A form belongs to the admissible class Q when its Hessian trace is one
(unit Laplacian); the nonnegative subclass additionally has no negative
eigenvalue.  The one-parameter diagonal family b_{i0,i0} = (1-t)/2,
b_{j0,j0} = (1+t)/2 sweeps the nonnegative class and is what the
uniqueness algebra in `blowup` differentiates in t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import BallRule, ball_integral, disk_rule

TRACE_TOL = 1e-12
EIG_TOL = 1e-12


@dataclass(frozen=True)
class QuadraticForm:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        if np.max(np.abs(m - m.T)) > TRACE_TOL:
            raise ValueError("matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def in_Q(self) -> bool:
        return abs(self.trace - 1.0) <= TRACE_TOL


def q_form(matrix) -> QuadraticForm:
    """Construct a form in Q; rejects (never renormalizes) off-trace input.

    Inputs within the trace tolerance get the last diagonal entry snapped
    so the stored trace is exactly one.
    """
    m = np.array(matrix, dtype=float)
    n = m.shape[0]
    tr = float(np.trace(m))
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace must be 1 for membership in Q, got {tr!r}")
    m = 0.5 * (m + m.T)
    m[n - 1, n - 1] = 1.0 - float(np.trace(m[: n - 1, : n - 1]))
    return QuadraticForm(dim=n, matrix=m)


def _as_points(x, dim):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != dim:
        raise ValueError(f"point dimension {pts.shape[-1]} does not match form dim {dim}")
    return pts, single

def eval_form(q: QuadraticForm, x):
    """q(x) = x.Ax/2, vectorized over an (M, dim) array."""
    pts, single = _as_points(x, q.dim)
    vals = 0.5 * np.einsum("mi,ij,mj->m", pts, q.matrix, pts)
    return float(vals[0]) if single else vals


def grad_form(q: QuadraticForm, x):
    """grad q = Ax, vectorized over an (M, dim) array."""
    pts, single = _as_points(x, q.dim)
    g = pts @ q.matrix
    return g[0] if single else g


def is_in_Qplus(q: QuadraticForm) -> bool:
    """Nonnegative class: trace one and smallest eigenvalue >= -1e-12."""
    if not q.in_Q:
        raise ValueError("form is not in Q (trace differs from 1)")
    return float(np.linalg.eigvalsh(q.matrix)[0]) >= -EIG_TOL


def bt_family(dim: int, i0: int, j0: int, t: float) -> QuadraticForm:
    """Diagonal family with entries (1-t)/2 at i0 and (1+t)/2 at j0 (1-based).

    Always lands in the nonnegative class for t in (-1, 1).
    """
    if not (1 <= i0 < j0 <= dim):
        raise ValueError(f"need 1 <= i0 < j0 <= dim, got ({i0}, {j0}) with dim {dim}")
    if not (-1.0 < t < 1.0):
        raise ValueError(f"t must lie in (-1, 1), got {t}")
    m = np.zeros((dim, dim))
    m[i0 - 1, i0 - 1] = 0.5 * (1.0 - t)
    m[j0 - 1, j0 - 1] = 1.0 - m[i0 - 1, i0 - 1]  # exact trace one
    return QuadraticForm(dim=dim, matrix=m)


def alpha_n(dim: int, rule: BallRule | None = None,
            form: QuadraticForm | None = None) -> float:
    """Integral of a trace-one form over the unit ball.

    The value is a dimensional constant, independent of which form in Q
    is integrated (cross moments cancel, diagonal moments are equal);
    pi/8 in the plane.
    """
    if dim != 2:
        raise ValueError("only dim=2 is built")
    if rule is None:
        rule = disk_rule()
    if form is None:
        m = np.zeros((dim, dim))
        m[0, 0] = 1.0
        form = q_form(m)
    if form.dim != dim or not form.in_Q:
        raise ValueError("reference form must be a trace-one form of matching dim")
    return ball_integral(lambda pts: eval_form(form, pts), np.zeros(dim), 1.0, rule)


def frobenius_distance(a, b) -> float:
    """Frobenius norm of the difference of two matrices or forms."""
    ma = a.matrix if isinstance(a, QuadraticForm) else np.asarray(a, dtype=float)
    mb = b.matrix if isinstance(b, QuadraticForm) else np.asarray(b, dtype=float)
    if ma.shape != mb.shape:
        raise ValueError(f"shape mismatch: {ma.shape} vs {mb.shape}")
    return float(np.linalg.norm(ma - mb, ord="fro"))
