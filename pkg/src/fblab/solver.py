"""Grid solver for the gradient-activated Poisson problem and its test corpus.

The continuous problem is Delta u = 1 on {|grad u| > 0} with Dirichlet
data on the disk edge.  The discrete scheme is a damped fixed-point
iteration: threshold the centered-difference gradient to get the active
mask, solve the linear Poisson problem with that mask as right-hand
side, blend with the previous iterate, and repeat until the mask is
stable and the discrete residual is below tolerance.

Linear sub-solves default to a sparse direct factorization (built once
per solve, since the matrix never changes); a red-black SOR engine with
the same contract is available for cross-checking.

The corpus constructors at the bottom produce closed-form solutions used
as ground truth everywhere: trace-one quadratics, half-space profiles,
and a quadratic plus a small harmonic cubic whose gradient vanishes only
at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError
from .fields import (
    AnalyticField,
    GridSpec,
    ScalarField,
    discrete_gradient,
    discrete_laplacian,
)


@dataclass
class SolveParams:
    grid: GridSpec
    gradient_threshold: float | None = None  # default: half a cell (0.5*h)
    linear_tolerance: float = 1e-8
    mask_stability_window: int = 3
    max_outer_iterations: int = 200
    relaxation_factor: float = 1.7
    engine: str = "direct"

    def __post_init__(self):
        if self.gradient_threshold is not None and not (self.gradient_threshold > 0.0):
            raise ValueError("gradient_threshold must be positive")
        if not (self.linear_tolerance > 0.0):
            raise ValueError("linear_tolerance must be positive")
        if self.mask_stability_window < 1:
            raise ValueError("mask_stability_window must be at least 1")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")
        if not (0.0 < self.relaxation_factor < 2.0):
            raise ValueError("relaxation_factor must lie in (0, 2)")
        if self.engine not in ("direct", "sor"):
            raise ValueError(f"unknown engine {self.engine!r}")

    def threshold(self) -> float:
        if self.gradient_threshold is not None:
            return self.gradient_threshold
        return 0.5 * self.grid.spacing


@dataclass
class SolveResult:
    field: ScalarField
    residual_norm: float
    outer_iterations: int
    mask_flip_history: list
    converged: bool
    residual_l2: float = float("nan")


@dataclass
class ResidualReport:
    """Pointwise |Delta_h u - chi| away from the disk edge and mask interface."""

    values: np.ndarray
    sup_norm: float
    l2_norm: float
    included_nodes: int


def residual(field: ScalarField, tau: float) -> ResidualReport:
    """Discrete residual of the activated Poisson equation.

    Excludes a 2-cell band at the disk edge and a 2-cell band around the
    mask's set boundary, where the characteristic function is not grid
    resolvable.
    """
    if not (tau > 0.0):
        raise ValueError(f"tau must be positive, got {tau}")
    spec = field.spec
    if spec.cells_per_side < 16:
        raise ValueError("grid too coarse for a residual check")
    h = spec.spacing
    lap = discrete_laplacian(field)
    gx, gy = discrete_gradient(field)
    gmag = np.hypot(gx, gy)
    computable = np.isfinite(lap) & np.isfinite(gmag)

    chi = np.zeros_like(lap, dtype=bool)
    chi[computable] = gmag[computable] > tau
    raw = np.abs(lap - chi.astype(float))

    # mask interface: computable nodes whose flag differs from a computable neighbor
    interface = np.zeros_like(chi)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb_chi = np.roll(chi, shift, axis=axis)
        nb_ok = np.roll(computable, shift, axis=axis)
        interface |= computable & nb_ok & (chi != nb_chi)
    band = ndi.binary_dilation(interface, structure=np.ones((3, 3), dtype=bool),
                               iterations=2)

    x, y = spec.node_mesh()
    c = spec.center
    dist = np.hypot(x - c[0], y - c[1])
    included = computable & ~band & (dist <= spec.domain_radius - 2.0 * h)

    values = np.full_like(raw, np.nan)
    values[included] = raw[included]
    count = int(np.count_nonzero(included))
    sup = float(np.max(raw[included])) if count else float("nan")
    l2 = float(np.sqrt(np.sum(raw[included] ** 2) * h**spec.dim)) if count else float("nan")
    return ResidualReport(values=values, sup_norm=sup, l2_norm=l2, included_nodes=count)


# ---------------------------------------------------------------------------
# linear Poisson sub-solver on the grid disk

class _DiskPoisson:
    """Dirichlet Poisson problem on the nodes at least 2h inside the disk.

    Nodes between the solve region and the circle carry the boundary data;
    their values are folded into the right-hand side.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n = spec.cells_per_side
        x, y = spec.node_mesh()
        c = spec.center
        dist = np.hypot(x - c[0], y - c[1])
        inside = spec.inside_disk()
        self.interior = inside & (dist <= spec.domain_radius - 2.0 * spec.spacing)
        self.ring = inside & ~self.interior
        self.index = np.full((n, n), -1, dtype=np.int64)
        self.index[self.interior] = np.arange(np.count_nonzero(self.interior))
        self.n_unknowns = int(np.count_nonzero(self.interior))
        self._lu = None

    def _assemble(self):
        n = self.spec.cells_per_side
        ii, jj = np.nonzero(self.interior)
        rows = [self.index[ii, jj]]
        cols = [self.index[ii, jj]]
        data = [np.full(ii.size, -4.0)]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            neighbor_interior = self.interior[ni, nj]
            rows.append(self.index[ii, jj][neighbor_interior])
            cols.append(self.index[ni, nj][neighbor_interior])
            data.append(np.ones(np.count_nonzero(neighbor_interior)))
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_unknowns, self.n_unknowns),
        )
        self._lu = spla.splu(mat.tocsc())

    def rhs(self, source: np.ndarray, boundary: np.ndarray) -> np.ndarray:
        """b for (sum of neighbors - 4u) = h^2 * source, boundary folded in."""
        h2 = self.spec.spacing**2
        ii, jj = np.nonzero(self.interior)
        b = h2 * source[ii, jj]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            on_ring = self.ring[ni, nj]
            b[on_ring] -= boundary[ni[on_ring], nj[on_ring]]
        return b

    def solve_direct(self, source, boundary) -> np.ndarray:
        if self._lu is None:
            self._assemble()
        sol = self._lu.solve(self.rhs(source, boundary))
        out = np.array(boundary)
        out[self.interior] = sol
        return out

    def solve_sor(self, source, boundary, start, omega, tol,
                  max_sweeps: int = 200_000) -> np.ndarray:
        """Red-black successive over-relaxation to a sup-norm defect <= tol."""
        h2 = self.spec.spacing**2
        u = np.array(start)
        u[self.ring] = boundary[self.ring]
        u[~(self.interior | self.ring)] = 0.0  # outside disk, never read
        n = self.spec.cells_per_side
        ij = np.add.outer(np.arange(n), np.arange(n))
        colors = [(self.interior & (ij % 2 == 0)), (self.interior & (ij % 2 == 1))]
        f = h2 * source
        for _ in range(max_sweeps):
            for color in colors:
                nb = (np.roll(u, 1, 0) + np.roll(u, -1, 0)
                      + np.roll(u, 1, 1) + np.roll(u, -1, 1))
                u[color] += omega * 0.25 * (nb[color] - 4.0 * u[color] - f[color])
            nb = (np.roll(u, 1, 0) + np.roll(u, -1, 0)
                  + np.roll(u, 1, 1) + np.roll(u, -1, 1))
            defect = np.abs(nb - 4.0 * u - f)[self.interior] / h2
            if defect.max() <= tol:
                break
        out = np.array(boundary)
        out[self.interior] = u[self.interior]
        return out


def _obstacle_warm_start(poisson: _DiskPoisson, bvals: np.ndarray,
                         tol: float, start: np.ndarray | None = None,
                         max_sweeps: int | None = None) -> np.ndarray:
    """Projected SOR for the floor-constrained Poisson problem.

    Minimizes the convex energy sum(|grad v|^2/2 + v) over grid functions
    with v >= floor (floor = smallest boundary value) and the given
    Dirichlet data.  Its unique minimizer satisfies Delta_h v = 1 off the
    contact set and v = floor, grad v = 0 on it, which is the
    maximal-coincidence branch of the activated problem; it serves as a
    globally convergent initial iterate for the mask fixed-point loop.
    """
    spec = poisson.spec
    h2 = spec.spacing**2
    n = spec.cells_per_side
    floor = float(np.min(bvals[poisson.ring])) if np.any(poisson.ring) else 0.0
    v = np.array(bvals) if start is None else np.array(start)
    v[poisson.interior] = np.maximum(v[poisson.interior], floor)
    v[poisson.ring] = bvals[poisson.ring]
    v[~(poisson.interior | poisson.ring)] = 0.0
    ij = np.add.outer(np.arange(n), np.arange(n))
    colors = [(poisson.interior & (ij % 2 == 0)), (poisson.interior & (ij % 2 == 1))]
    omega = 2.0 / (1.0 + math.sin(math.pi / n))
    if max_sweeps is None:
        max_sweeps = 40 * n
    for sweep in range(max_sweeps):
        for color in colors:
            nb = (np.roll(v, 1, 0) + np.roll(v, -1, 0)
                  + np.roll(v, 1, 1) + np.roll(v, -1, 1))
            upd = v[color] + omega * 0.25 * (nb[color] - 4.0 * v[color] - h2)
            v[color] = np.maximum(upd, floor)
        if sweep % 8 == 7:
            nb = (np.roll(v, 1, 0) + np.roll(v, -1, 0)
                  + np.roll(v, 1, 1) + np.roll(v, -1, 1))
            defect = (nb - 4.0 * v - h2) / h2
            inactive = poisson.interior & (v > floor + 1e-13)
            worst = np.max(np.abs(defect[inactive])) if np.any(inactive) else 0.0
            if worst <= max(tol, 1e-10):
                break
    out = np.array(bvals)
    out[poisson.interior] = v[poisson.interior]
    return out


def _boundary_values(boundary, spec: GridSpec) -> np.ndarray:
    """Boundary data sampled at every disk node (only ring values are used)."""
    x, y = spec.node_mesh()
    inside = spec.inside_disk()
    pts = np.stack([x[inside], y[inside]], axis=-1)
    if isinstance(boundary, ScalarField):
        if boundary.spec != spec:
            raise ValueError("boundary trace field must live on the solve grid")
        vals = np.where(inside, boundary.values, 0.0)
    else:
        if isinstance(boundary, AnalyticField):
            sampled = boundary.values_at(pts)
        else:
            sampled = np.asarray(boundary(pts), dtype=float)
        vals = np.zeros_like(x)
        vals[inside] = sampled
    if not np.all(np.isfinite(vals[inside])):
        raise ValueError("non-finite boundary data")
    return vals


def solve(boundary, init, params: SolveParams) -> SolveResult:
    """Damped fixed-point iteration for the activated Poisson problem.

    ``boundary`` is an evaluator (callable on (M,2) points), AnalyticField,
    or a ScalarField on the same grid.  ``init`` is "zero", "harmonic"
    (harmonic extension of the boundary data), or a ScalarField.
    Returns converged=False instead of raising when the outer iteration
    budget runs out.
    """
    spec = params.grid
    tau = params.threshold()
    omega = params.relaxation_factor
    poisson = _DiskPoisson(spec)
    bvals = _boundary_values(boundary, spec)
    zeros = np.zeros_like(bvals)

    def linear_solve(source, current):
        if params.engine == "direct":
            return poisson.solve_direct(source, bvals)
        return poisson.solve_sor(source, bvals, current, omega,
                                 params.linear_tolerance)

    if isinstance(init, ScalarField):
        if init.spec != spec:
            raise ValueError("init field must live on the solve grid")
        u = np.where(spec.inside_disk(), init.values, 0.0)
        u[poisson.ring] = bvals[poisson.ring]
    elif init in ("zero", "harmonic"):
        # Cold starts land in the basin of the everywhere-active Poisson
        # solution, one of many discrete fixed points.  A projected
        # obstacle sweep selects the maximal-coincidence branch first;
        # the mask iteration below then refines it at the requested
        # threshold.
        u = np.array(bvals)
        u[poisson.interior] = 0.0
        if init == "harmonic":
            u = linear_solve(zeros, u)
        u = _obstacle_warm_start(poisson, bvals, params.linear_tolerance, start=u)
    else:
        raise ValueError(f"unknown init {init!r}")

    def current_mask(uu):
        gx = np.zeros_like(uu)
        gy = np.zeros_like(uu)
        gx[1:-1, :] = (uu[2:, :] - uu[:-2, :]) / (2.0 * spec.spacing)
        gy[:, 1:-1] = (uu[:, 2:] - uu[:, :-2]) / (2.0 * spec.spacing)
        return poisson.interior & (np.hypot(gx, gy) > tau)

    # Anti-chatter bookkeeping.  Marginal nodes (gradient within noise of
    # the threshold) can flip indefinitely because every flip perturbs the
    # next solve; a node flipping 3 iterations in a row, or 4 times in the
    # last 8, is frozen to its majority value, with the freeze doubling on
    # repeat offenders so the damped blend can settle underneath.
    flips_in_a_row = np.zeros_like(poisson.interior, dtype=np.int64)
    freeze_left = np.zeros_like(flips_in_a_row)
    freeze_count = np.zeros_like(flips_in_a_row)
    frozen_value = np.zeros_like(poisson.interior)
    recent_masks = []
    recent_flips = []

    mask = current_mask(u)
    stable_streak = 0
    flip_history = []
    res_sup = float("inf")
    res_l2 = float("nan")
    iterations = 0
    converged = False

    for iterations in range(1, params.max_outer_iterations + 1):
        proposed = current_mask(u)
        active = np.where(freeze_left > 0, frozen_value, proposed)

        flipped = active != mask
        flips = int(np.count_nonzero(flipped))
        flip_history.append(flips)
        flips_in_a_row = np.where(flipped, flips_in_a_row + 1, 0)
        recent_masks.append(active)
        recent_flips.append(flipped)
        if len(recent_masks) > 8:
            recent_masks.pop(0)
            recent_flips.pop(0)
        window_flips = np.sum(recent_flips, axis=0)
        trigger = ((flips_in_a_row >= 3) | (window_flips >= 4)) & (freeze_left == 0)
        if np.any(trigger) and len(recent_masks) >= 3:
            majority = np.sum(recent_masks, axis=0) * 2 >= len(recent_masks)
            frozen_value = np.where(trigger, majority, frozen_value)
            freeze_count = np.where(trigger, freeze_count + 1, freeze_count)
            duration = np.minimum(5 * 2 ** np.maximum(freeze_count - 1, 0), 40)
            freeze_left = np.where(trigger, duration, freeze_left)
            flips_in_a_row = np.where(trigger, 0, flips_in_a_row)
            active = np.where(freeze_left > 0, frozen_value, active)
        freeze_left = np.maximum(freeze_left - 1, 0)

        stable_streak = stable_streak + 1 if flips == 0 else 0
        mask = active

        v = linear_solve(mask.astype(float), u)
        u = (1.0 - omega) * u + omega * v
        u[poisson.ring] = bvals[poisson.ring]

        trial = ScalarField(spec=spec, values=_disk_values(spec, u))
        rep = residual(trial, tau)
        res_sup, res_l2 = rep.sup_norm, rep.l2_norm
        if stable_streak >= params.mask_stability_window and res_sup <= params.linear_tolerance:
            converged = True
            break

    out = ScalarField(spec=spec, values=_disk_values(spec, u),
                      c11_bound=_measured_c11(spec, u))
    return SolveResult(field=out, residual_norm=res_sup,
                       outer_iterations=iterations,
                       mask_flip_history=flip_history, converged=converged,
                       residual_l2=res_l2)


def _disk_values(spec: GridSpec, u: np.ndarray) -> np.ndarray:
    vals = np.array(u)
    vals[~spec.inside_disk()] = np.nan
    return vals


def _measured_c11(spec: GridSpec, u: np.ndarray) -> float:
    vals = _disk_values(spec, u)
    h = spec.spacing
    dxx = (vals[2:, :] - 2 * vals[1:-1, :] + vals[:-2, :]) / h**2
    dyy = (vals[:, 2:] - 2 * vals[:, 1:-1] + vals[:, :-2]) / h**2
    dxy = (vals[2:, 2:] + vals[:-2, :-2] - vals[2:, :-2] - vals[:-2, 2:]) / (4 * h**2)
    worst = max(np.nanmax(np.abs(dxx), initial=0.0),
                np.nanmax(np.abs(dyy), initial=0.0),
                np.nanmax(np.abs(dxy), initial=0.0))
    return float(worst * (1.0 + 1e-9))


# ---------------------------------------------------------------------------
# manufactured-solution corpus

def polynomial_solution(matrix) -> AnalyticField:
    """Closed form q(x) = x.Ax/2 for a symmetric trace-one matrix."""
    a = _corpus_matrix(matrix)
    lam = np.linalg.eigvalsh(a)

    def val(pts):
        return 0.5 * np.einsum("mi,ij,mj->m", pts, a, pts)

    def grad(pts):
        return pts @ a

    return AnalyticField(val, grad, dim=2, c11_bound=float(np.max(np.abs(lam))))


def halfspace_solution(direction) -> AnalyticField:
    """Closed form (max(x.e, 0))^2 / 2 for a unit direction e."""
    e = np.asarray(direction, dtype=float)
    norm = float(np.hypot(*e))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("direction must be a nonzero vector")
    e = e / norm

    def val(pts):
        t = pts @ e
        return 0.5 * np.maximum(t, 0.0) ** 2

    def grad(pts):
        t = np.maximum(pts @ e, 0.0)
        return t[:, None] * e[None, :]

    return AnalyticField(val, grad, dim=2, c11_bound=1.0)


def perturbed_singular_solution(matrix, c: float, radius: float = 1.0) -> AnalyticField:
    """Quadratic q plus c*(x1^3 - 3 x1 x2^2): gradient vanishes only at 0.

    Requires A positive definite with trace one and 3|c|*radius below the
    smallest eigenvalue, which keeps the gradient nonzero on the punctured
    disk of that radius; the cubic is harmonic so the unit-Laplacian
    equation still holds.
    """
    a = _corpus_matrix(matrix)
    lam = np.linalg.eigvalsh(a)
    if lam[0] <= 0.0:
        raise ValueError("matrix must be positive definite")
    if 3.0 * abs(c) * radius >= lam[0]:
        raise ValueError(
            f"c={c} too large: gradient may vanish away from the origin "
            f"(need 3|c|R < {lam[0]:.6g})"
        )
    c = float(c)

    def val(pts):
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * np.einsum("mi,ij,mj->m", pts, a, pts) + c * (x**3 - 3.0 * x * y**2)

    def grad(pts):
        x, y = pts[:, 0], pts[:, 1]
        g = pts @ a
        g = g + c * np.stack([3.0 * x**2 - 3.0 * y**2, -6.0 * x * y], axis=-1)
        return g

    return AnalyticField(val, grad, dim=2,
                         c11_bound=float(lam[-1] + 6.0 * abs(c) * radius))


def _corpus_matrix(matrix) -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError("matrix must be symmetric")
    if abs(np.trace(a) - 1.0) > 1e-12:
        raise ValueError(f"trace must be 1, got {np.trace(a)!r}")
    return 0.5 * (a + a.T)


def _sample(analytic: AnalyticField, grid: GridSpec) -> np.ndarray:
    x, y = grid.node_mesh()
    pts = np.stack([x.reshape(-1), y.reshape(-1)], axis=-1)
    return analytic.values_at(pts).reshape(x.shape)


def make_polynomial_field(matrix, grid: GridSpec) -> ScalarField:
    """Exact samples of x.Ax/2; the coincidence set is the kernel of A."""
    analytic = polynomial_solution(matrix)
    return ScalarField(spec=grid, values=_sample(analytic, grid),
                       c11_bound=analytic.c11_bound)


def make_halfspace_field(direction, grid: GridSpec) -> ScalarField:
    """Exact samples of the half-space profile (max(x.e,0))^2 / 2."""
    analytic = halfspace_solution(direction)
    return ScalarField(spec=grid, values=_sample(analytic, grid),
                       c11_bound=analytic.c11_bound)


def make_perturbed_singular_field(matrix, c: float, grid: GridSpec) -> ScalarField:
    """Samples of the perturbed quadratic; checks the gradient bound on nodes."""
    analytic = perturbed_singular_solution(matrix, c, radius=grid.domain_radius)
    field = ScalarField(spec=grid, values=_sample(analytic, grid),
                        c11_bound=analytic.c11_bound)
    # numerical belt-and-suspenders on top of the analytic bound
    x, y = grid.node_mesh()
    inside = grid.inside_disk()
    pts = np.stack([x[inside], y[inside]], axis=-1)
    r = np.hypot(pts[:, 0], pts[:, 1])
    off_origin = r >= grid.spacing
    g = analytic.gradients_at(pts[off_origin])
    if g.size and np.min(np.hypot(g[:, 0], g[:, 1])) <= 0.0:
        raise ValueError("gradient vanishes away from the origin on the grid")
    return field
