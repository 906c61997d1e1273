"""Scalar fields sampled on uniform grids covering disk domains.

The grid is node centered and covers the bounding square of a disk of
radius ``domain_radius``; nodes outside the disk are invalid (stored as
NaN) and never enter any computation.  Point evaluation uses a 4x4
tensor-product cubic Lagrange stencil, which reproduces polynomials of
total degree three exactly, together with their gradients.  Near the
circular edge the stencil is shifted (never shrunk) so that it only
touches valid nodes; evaluation points must stay two cells inside the
disk edge.

Discrete differentiation (centered gradient, 5-point Laplacian) lives
here as well, since the solver and the diagnostic functionals both need
it on the same grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DomainError, ParseError

# Evaluation points must sit this many cells inside the disk edge so the
# 4x4 stencil can be placed on valid nodes.
EDGE_MARGIN_CELLS = 2

_GEOM_EPS = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a node-centered square grid covering a disk.

    ``cells_per_side`` counts nodes per side (the standard centered layout
    has spacing ``2*domain_radius/(cells_per_side - 1)``).  ``origin`` is
    the coordinate of the corner node; the analysis center sits at the
    middle of the covered square.
    """

    dim: int
    cells_per_side: int
    spacing: float
    origin: tuple
    domain_radius: float

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError(f"only dim=2 grids are supported, got dim={self.dim}")
        if self.cells_per_side < 16:
            raise ValueError(f"grid too coarse: N={self.cells_per_side} < 16")
        if not (self.spacing > 0.0 and math.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not (self.domain_radius > 0.0 and math.isfinite(self.domain_radius)):
            raise ValueError(f"domain_radius must be positive, got {self.domain_radius}")
        if len(self.origin) != self.dim:
            raise ValueError("origin has wrong length")
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        half = 0.5 * self.spacing * (self.cells_per_side - 1)
        if half < self.domain_radius - _GEOM_EPS * max(1.0, self.domain_radius):
            raise ValueError("grid does not cover the disk of radius domain_radius")

    @classmethod
    def centered(cls, cells_per_side: int, radius: float, dim: int = 2) -> "GridSpec":
        """Standard layout: square [-radius, radius]^dim, analysis center at 0."""
        n = int(cells_per_side)
        h = 2.0 * float(radius) / (n - 1)
        return cls(dim=dim, cells_per_side=n, spacing=h,
                   origin=(-float(radius),) * dim, domain_radius=float(radius))

    @property
    def center(self) -> np.ndarray:
        half = 0.5 * self.spacing * (self.cells_per_side - 1)
        return np.asarray(self.origin, dtype=float) + half

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing * np.arange(self.cells_per_side)

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def inside_disk(self) -> np.ndarray:
        """Boolean node mask of the valid disk (read-only, cached)."""
        return _disk_mask(self)

    def interior_margin(self) -> float:
        """Largest |p - center| at which point evaluation is allowed."""
        return self.domain_radius - EDGE_MARGIN_CELLS * self.spacing


@lru_cache(maxsize=128)
def _disk_mask(spec: GridSpec) -> np.ndarray:
    x, y = spec.node_mesh()
    c = spec.center
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2
    mask = r2 <= spec.domain_radius**2 * (1.0 + 4.0 * _GEOM_EPS)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=128)
def _interp_tables(spec: GridSpec):
    """Per-row valid spans and clamp bounds for stencil placement.

    Rows are indexed along axis 0.  ``jlo4``/``jhi4`` give, for a stencil
    base row ``i``, the intersection of the column spans of rows i..i+3;
    the disk geometry makes spans unimodal, so the intersection of four
    in-band rows always holds at least four columns.
    """
    n = spec.cells_per_side
    mask = _disk_mask(spec)
    jlo = np.full(n, n, dtype=np.int64)
    jhi = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        idx = np.nonzero(mask[i])[0]
        if idx.size:
            jlo[i] = idx[0]
            jhi[i] = idx[-1]
    span_ok = (jhi - jlo) >= 3
    band = np.nonzero(span_ok)[0]
    if band.size < 4:
        raise ValueError("disk too small for a 4x4 interpolation stencil")
    i_lo, i_hi = int(band[0]), int(band[-1])
    # sliding extrema over 4 consecutive rows
    jlo4 = np.maximum.reduce([jlo[k : n - 3 + k] for k in range(4)])
    jhi4 = np.minimum.reduce([jhi[k : n - 3 + k] for k in range(4)])
    return i_lo, i_hi, jlo4, jhi4


@dataclass
class ScalarField:
    """Field values on a GridSpec; NaN outside the disk, finite inside.

    Instances are immutable after construction: the value array is marked
    read-only, so all operations are pure reads and thread-safe.
    """

    spec: GridSpec
    values: np.ndarray
    c11_bound: float | None = None

    def __post_init__(self):
        n = self.spec.cells_per_side
        vals = np.array(self.values, dtype=float)
        if vals.shape == (n * n,):
            vals = vals.reshape(n, n)
        if vals.shape != (n, n):
            raise ValueError(f"values shape {vals.shape} does not match grid {n}x{n}")
        inside = self.spec.inside_disk()
        if not np.all(np.isfinite(vals[inside])):
            raise ValueError("non-finite values at nodes inside the domain disk")
        vals[~inside] = np.nan
        vals.setflags(write=False)
        self.values = vals
        if self.c11_bound is not None:
            self.c11_bound = float(self.c11_bound)
            _check_second_differences(self.spec, vals, self.c11_bound)

    # Thin evaluation surface shared with AnalyticField, so the
    # functionals can treat grid fields and closed forms alike.
    def value_at(self, point) -> float:
        return value_at(self, point)

    def values_at(self, points) -> np.ndarray:
        return values_at(self, points)

    def gradients_at(self, points) -> np.ndarray:
        return gradients_at(self, points)


class AnalyticField:
    """Closed-form field with the same evaluation surface as ScalarField.

    Used for manufactured solutions and quadrature oracles; evaluation
    never touches a grid, so there is no domain restriction.
    """

    def __init__(self, value_fn, gradient_fn, dim: int = 2, c11_bound: float | None = None):
        self.dim = dim
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self.c11_bound = c11_bound

    def value_at(self, point) -> float:
        return float(self._value_fn(np.asarray(point, dtype=float)[None, :])[0])

    def values_at(self, points) -> np.ndarray:
        return np.asarray(self._value_fn(np.asarray(points, dtype=float)), dtype=float)

    def gradients_at(self, points) -> np.ndarray:
        return np.asarray(self._gradient_fn(np.asarray(points, dtype=float)), dtype=float)


@dataclass
class CoincidenceMask:
    """Nodes where the interpolant gradient is at or below a threshold."""

    spec: GridSpec
    flags: np.ndarray
    threshold: float


def _check_second_differences(spec: GridSpec, vals: np.ndarray, bound: float):
    # Guards order-of-magnitude declaration bugs only: cubic resampling
    # across a curvature jump overshoots the continuum bound by a bounded
    # factor (about 1.15 measured), so the slack is multiplicative plus O(h).
    h = spec.spacing
    slack = 0.35 * bound + 32.0 * h * max(1.0, bound)
    dxx = (vals[2:, :] - 2.0 * vals[1:-1, :] + vals[:-2, :]) / h**2
    dyy = (vals[:, 2:] - 2.0 * vals[:, 1:-1] + vals[:, :-2]) / h**2
    dxy = (vals[2:, 2:] + vals[:-2, :-2] - vals[2:, :-2] - vals[:-2, 2:]) / (4.0 * h**2)
    worst = max(
        np.nanmax(np.abs(dxx), initial=0.0),
        np.nanmax(np.abs(dyy), initial=0.0),
        np.nanmax(np.abs(dxy), initial=0.0),
    )
    if worst > bound + slack:
        raise ValueError(
            f"second differences reach {worst:.6g}, above declared bound {bound:.6g}"
        )


def default_threshold(field: ScalarField) -> float:
    """Default gradient threshold for coincidence detection: h*(1+M)."""
    m = field.c11_bound if field.c11_bound is not None else 0.0
    return field.spec.spacing * (1.0 + m)


# ---------------------------------------------------------------------------
# interpolation

# cubic Lagrange weights on stencil offsets (-1, 0, 1, 2), local coordinate s


def _lagrange_weights(s: np.ndarray) -> np.ndarray:
    w = np.empty(s.shape + (4,))
    w[..., 0] = -s * (s - 1.0) * (s - 2.0) / 6.0
    w[..., 1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
    w[..., 2] = -(s + 1.0) * s * (s - 2.0) / 2.0
    w[..., 3] = (s + 1.0) * s * (s - 1.0) / 6.0
    return w


def _lagrange_dweights(s: np.ndarray) -> np.ndarray:
    w = np.empty(s.shape + (4,))
    w[..., 0] = -(3.0 * s * s - 6.0 * s + 2.0) / 6.0
    w[..., 1] = (3.0 * s * s - 4.0 * s - 1.0) / 2.0
    w[..., 2] = -(3.0 * s * s - 2.0 * s - 2.0) / 2.0
    w[..., 3] = (3.0 * s * s - 1.0) / 6.0
    return w


def _stencil_setup(spec: GridSpec, pts: np.ndarray):
    c = spec.center
    h = spec.spacing
    dist = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    limit = spec.interior_margin() * (1.0 + 1e-12) + 1e-15
    if np.any(dist > limit):
        worst = float(dist.max())
        raise DomainError(
            f"evaluation point at distance {worst:.6g} from center; "
            f"must stay within {spec.interior_margin():.6g} "
            f"(2 cells inside the disk edge)"
        )
    i_lo, i_hi, jlo4, jhi4 = _interp_tables(spec)
    t0 = (pts[:, 0] - spec.origin[0]) / h
    t1 = (pts[:, 1] - spec.origin[1]) / h
    ib = np.clip(np.floor(t0).astype(np.int64) - 1, i_lo, i_hi - 3)
    jb = np.clip(np.floor(t1).astype(np.int64) - 1, jlo4[ib], jhi4[ib] - 3)
    sx = t0 - (ib + 1.0)
    sy = t1 - (jb + 1.0)
    return ib, jb, sx, sy


def _gather(field: ScalarField, ib: np.ndarray, jb: np.ndarray) -> np.ndarray:
    off = np.arange(4)
    return field.values[ib[:, None, None] + off[None, :, None],
                        jb[:, None, None] + off[None, None, :]]


def values_at(field: ScalarField, points) -> np.ndarray:
    """Interpolated values at an (M, 2) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ib, jb, sx, sy = _stencil_setup(field.spec, pts)
    block = _gather(field, ib, jb)
    wx = _lagrange_weights(sx)
    wy = _lagrange_weights(sy)
    return np.einsum("mi,mij,mj->m", wx, block, wy)


def gradients_at(field: ScalarField, points) -> np.ndarray:
    """Gradient of the interpolant at an (M, 2) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ib, jb, sx, sy = _stencil_setup(field.spec, pts)
    block = _gather(field, ib, jb)
    wx, wy = _lagrange_weights(sx), _lagrange_weights(sy)
    dwx, dwy = _lagrange_dweights(sx), _lagrange_dweights(sy)
    h = field.spec.spacing
    gx = np.einsum("mi,mij,mj->m", dwx, block, wy) / h
    gy = np.einsum("mi,mij,mj->m", wx, block, dwy) / h
    return np.stack([gx, gy], axis=-1)


def value_at(field, point) -> float:
    """Interpolated value at a single point (exact at nodes and on cubics)."""
    if isinstance(field, AnalyticField):
        return field.value_at(point)
    return float(values_at(field, np.asarray(point, dtype=float)[None, :])[0])


def gradient_at(field, point) -> np.ndarray:
    """Gradient of the interpolant at a single point."""
    if isinstance(field, AnalyticField):
        return field.gradients_at(np.asarray(point, dtype=float)[None, :])[0]
    return gradients_at(field, np.asarray(point, dtype=float)[None, :])[0]


# ---------------------------------------------------------------------------
# coincidence detection

def coincidence_mask(field: ScalarField, threshold: float) -> CoincidenceMask:
    """Flag valid nodes where |grad u| <= threshold.

    Nodes closer than two cells to the disk edge cannot host the
    interpolation stencil and are reported as False.
    """
    if not (threshold > 0.0):
        raise ValueError(f"threshold must be positive, got {threshold}")
    spec = field.spec
    n = spec.cells_per_side
    x, y = spec.node_mesh()
    c = spec.center
    dist = np.hypot(x - c[0], y - c[1])
    eligible = dist <= spec.interior_margin() * (1.0 + 1e-12)
    flags = np.zeros((n, n), dtype=bool)
    pts = np.stack([x[eligible], y[eligible]], axis=-1)
    if pts.size:
        g = gradients_at(field, pts)
        flags[eligible] = np.hypot(g[:, 0], g[:, 1]) <= threshold
    return CoincidenceMask(spec=spec, flags=flags, threshold=float(threshold))


# ---------------------------------------------------------------------------
# recentring

def recenter(field: ScalarField, center, radius: float,
             cells_per_side: int | None = None) -> ScalarField:
    """Translate the analysis center: sample x -> u(center + x) on a fresh grid.

    The ball of the given radius about ``center`` must stay two cells inside
    the source disk so every sample is interpolable.
    """
    center = np.asarray(center, dtype=float)
    src = field.spec
    shift = float(np.hypot(*(center - src.center)))
    if shift + radius > src.interior_margin() + _GEOM_EPS:
        raise DomainError(
            f"ball of radius {radius} about {tuple(center)} leaves the valid disk"
        )
    n = cells_per_side or src.cells_per_side
    out = GridSpec.centered(n, radius)
    x, y = out.node_mesh()
    inside = out.inside_disk()
    pts = np.stack([x[inside] + center[0], y[inside] + center[1]], axis=-1)
    vals = np.full((n, n), np.nan)
    vals[inside] = values_at(field, pts)
    return ScalarField(spec=out, values=vals, c11_bound=field.c11_bound)


# ---------------------------------------------------------------------------
# discrete differentiation on the grid

def discrete_gradient(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference gradient arrays; NaN where a neighbor is invalid."""
    v = field.values
    h = field.spec.spacing
    gx = np.full_like(v, np.nan)
    gy = np.full_like(v, np.nan)
    gx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * h)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
    return gx, gy


def discrete_laplacian(field: ScalarField) -> np.ndarray:
    """5-point Laplacian array; NaN where the stencil leaves the disk."""
    v = field.values
    h = field.spec.spacing
    lap = np.full_like(v, np.nan)
    lap[1:-1, 1:-1] = (
        v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2]
        - 4.0 * v[1:-1, 1:-1]
    ) / h**2
    return lap


def laplacian_field(field: ScalarField) -> ScalarField:
    """Discrete Laplacian repackaged as a field on a slightly smaller disk.

    The declared radius shrinks by two cells so the result satisfies the
    finite-inside-the-disk invariant wherever its own spec claims validity.
    """
    spec = field.spec
    lap = discrete_laplacian(field)
    shrunk = replace(spec, domain_radius=spec.domain_radius - 2.0 * spec.spacing)
    return ScalarField(spec=shrunk, values=lap, c11_bound=None)


# ---------------------------------------------------------------------------
# file format (NFD: text, line oriented, LF, ASCII)

def save_field(field: ScalarField, path) -> None:
    """Write a field file; 17 significant digits, NA at invalid nodes."""
    spec = field.spec
    lines = [
        "NFD 1",
        f"dim={spec.dim}",
        f"N={spec.cells_per_side}",
        f"h={spec.spacing:.17g}",
        "origin=" + ",".join(f"{x:.17g}" for x in spec.origin),
        f"radius={spec.domain_radius:.17g}",
        "c11=" + ("NA" if field.c11_bound is None else f"{field.c11_bound:.17g}"),
    ]
    flat = field.values.reshape(-1)
    finite = np.isfinite(flat)
    body = [f"{v:.17g}" if ok else "NA" for v, ok in zip(flat, finite)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines + body))
        fh.write("\n")


def _parse_kv(line: str, key: str) -> str:
    prefix = key + "="
    if not line.startswith(prefix):
        raise ParseError(f"expected '{key}=...' line, got {line!r}")
    return line[len(prefix):]


def load_field(path) -> ScalarField:
    """Read a field file written by save_field; round-trip is value-identical."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 7:
        raise ParseError("field file truncated: missing header")
    if lines[0] != "NFD 1":
        raise ParseError(f"bad magic/version line {lines[0]!r}")
    try:
        dim = int(_parse_kv(lines[1], "dim"))
        n = int(_parse_kv(lines[2], "N"))
        h = float(_parse_kv(lines[3], "h"))
        origin = tuple(float(t) for t in _parse_kv(lines[4], "origin").split(","))
        radius = float(_parse_kv(lines[5], "radius"))
        c11_text = _parse_kv(lines[6], "c11")
        c11 = None if c11_text == "NA" else float(c11_text)
    except (ValueError, ParseError) as exc:
        raise ParseError(f"malformed header: {exc}") from exc
    if dim != 2:
        raise ParseError(f"dimension mismatch: file has dim={dim}, expected 2")
    if len(origin) != dim:
        raise ParseError("origin length does not match dim")
    try:
        spec = GridSpec(dim=dim, cells_per_side=n, spacing=h,
                        origin=origin, domain_radius=radius)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    body = lines[7:]
    if len(body) != n * n:
        raise ParseError(f"expected {n * n} value lines, found {len(body)}")
    vals = np.empty(n * n)
    for k, text in enumerate(body):
        if text == "NA":
            vals[k] = np.nan
        else:
            try:
                vals[k] = float(text)
            except ValueError as exc:
                raise ParseError(f"bad value on line {8 + k}: {text!r}") from exc
            if not math.isfinite(vals[k]):
                raise ParseError(f"non-finite value on line {8 + k}: {text!r}")
    try:
        return ScalarField(spec=spec, values=vals.reshape(n, n), c11_bound=c11)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
