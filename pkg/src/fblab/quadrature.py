"""Quadrature over spheres and balls centered anywhere in the plane.

The circle rule is a uniform trapezoid rule built by octant reflection,
so the node multiset is exactly symmetric under coordinate swaps and
sign flips: odd monomial moments cancel pairwise and the x1^4 / x2^4
moments agree bit for bit.  Ball integrals compose the circle rule with
a panelled Gauss-Legendre rule in the radius.

Evaluators are vectorized callables mapping an (M, dim) point array to M
values; ScalarField / AnalyticField evaluation methods plug in directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SphereRule:
    """Nodes (unit vectors) and positive weights summing to |S^{dim-1}|."""

    dim: int
    node_count: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class BallRule:
    """Radial Gauss-Legendre nodes on (0, 1) paired with a sphere rule."""

    dim: int
    radial_node_count: int
    sphere_rule: SphereRule
    radial_nodes: np.ndarray
    radial_weights: np.ndarray


@dataclass(frozen=True)
class QuadratureRules:
    """The (sphere, ball) pair threaded through every functional."""

    sphere: SphereRule
    ball: BallRule


def circle_rule(node_count: int = 1024) -> SphereRule:
    """Uniform trapezoid rule on the unit circle, octant symmetrized.

    ``node_count`` must be a multiple of 8 so the node set closes under
    reflections about both axes and the diagonal.
    """
    k = int(node_count)
    if k < 8 or k % 8 != 0:
        raise ValueError(f"node_count must be a positive multiple of 8, got {k}")
    m = k // 8
    theta = 2.0 * math.pi * np.arange(1, m) / k
    c, s = np.cos(theta), np.sin(theta)
    octants = [
        np.stack([c, s], axis=-1),
        np.stack([s, c], axis=-1),
        np.stack([-s, c], axis=-1),
        np.stack([-c, s], axis=-1),
        np.stack([-c, -s], axis=-1),
        np.stack([-s, -c], axis=-1),
        np.stack([s, -c], axis=-1),
        np.stack([c, -s], axis=-1),
    ]
    d = math.cos(math.pi / 4.0)
    axes = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    diags = np.array([[d, d], [-d, d], [-d, -d], [d, -d]])
    nodes = np.concatenate([axes, diags] + octants, axis=0)
    weights = np.full(k, 2.0 * math.pi / k)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereRule(dim=2, node_count=k, nodes=nodes, weights=weights)


def disk_rule(angular_nodes: int = 1024, radial_panels: int = 64,
              panel_order: int = 4, sphere_rule: SphereRule | None = None) -> BallRule:
    """Composite Gauss-Legendre in radius times a circle rule."""
    panels = int(radial_panels)
    order = int(panel_order)
    if panels < 1 or order < 1:
        raise ValueError("radial_panels and panel_order must be at least 1")
    base_x, base_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a, b = edges[:-1], edges[1:]
    nodes = (0.5 * (b - a)[:, None] * (base_x[None, :] + 1.0) + a[:, None]).reshape(-1)
    weights = (0.5 * (b - a)[:, None] * base_w[None, :]).reshape(-1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    sph = sphere_rule if sphere_rule is not None else circle_rule(angular_nodes)
    return BallRule(dim=2, radial_node_count=nodes.size, sphere_rule=sph,
                    radial_nodes=nodes, radial_weights=weights)


def default_rules(angular_nodes: int = 1024, radial_panels: int = 64,
                  panel_order: int = 4) -> QuadratureRules:
    sph = circle_rule(angular_nodes)
    return QuadratureRules(sphere=sph,
                           ball=disk_rule(radial_panels=radial_panels,
                                          panel_order=panel_order, sphere_rule=sph))


def sphere_integral(f, center, r: float, rule: SphereRule) -> float:
    """Integral of f over the sphere of radius r about center.

    Includes the surface-measure factor r^{dim-1}; a grid-field evaluator
    raises DomainError if the sphere leaves its valid region.
    """
    if not (r > 0.0):
        raise ValueError(f"radius must be positive, got {r}")
    center = np.asarray(center, dtype=float)
    pts = center[None, :] + r * rule.nodes
    vals = np.asarray(f(pts), dtype=float)
    return float(r ** (rule.dim - 1) * (rule.weights @ vals))


def ball_integral(f, center, r: float, rule: BallRule) -> float:
    """Integral of f over the ball of radius r about center.

    Written as r^dim * int_0^1 rho^{dim-1} (sphere integral at radius
    rho*r) drho with the panelled radial rule.
    """
    if not (r > 0.0):
        raise ValueError(f"radius must be positive, got {r}")
    center = np.asarray(center, dtype=float)
    sph = rule.sphere_rule
    # points: (radial, angular, dim) flattened to one evaluator call
    radii = r * rule.radial_nodes
    pts = center[None, None, :] + radii[:, None, None] * sph.nodes[None, :, :]
    vals = np.asarray(f(pts.reshape(-1, rule.dim)), dtype=float)
    vals = vals.reshape(rule.radial_node_count, sph.node_count)
    ang = vals @ sph.weights
    jac = rule.radial_nodes ** (rule.dim - 1)
    return float(r**rule.dim * np.dot(rule.radial_weights * jac, ang))


def sphere_monomial_moment(rule: SphereRule, powers) -> float:
    """Moment of x1^p1 * x2^p2 over the unit sphere, exactly summed.

    Uses math.fsum so symmetric node multisets produce identical moments
    regardless of node order.
    """
    p = tuple(int(q) for q in powers)
    vals = np.prod(rule.nodes ** np.asarray(p, dtype=float), axis=1)
    return math.fsum(rule.weights * vals)


def ball_monomial_moment(rule: BallRule, powers) -> float:
    """Moment of a monomial over the unit ball via the composed rule."""
    p = tuple(int(q) for q in powers)
    ang = sphere_monomial_moment(rule.sphere_rule, p)
    k = sum(p)
    jac = rule.radial_nodes ** (k + rule.dim - 1)
    return math.fsum(rule.radial_weights * jac) * ang


@dataclass(frozen=True)
class MomentIdentityReport:
    """Sphere fourth moments against the ball second moment.

    The divergence-theorem identities say the x1^4 sphere moment equals
    3x the ball x1^2 moment and the x1^2 x2^2 sphere moment equals it
    exactly; their difference (the quantity that separates eigenvalues
    in the matching argument) is strictly positive.
    """

    dim: int
    sphere_x4: float
    sphere_x2y2: float
    ball_x2: float
    residual_x4: float
    residual_cross: float
    moment_gap: float


def moment_identity_check(sphere_rule: SphereRule, ball_rule: BallRule) -> MomentIdentityReport:
    m4 = sphere_monomial_moment(sphere_rule, (4, 0))
    m22 = sphere_monomial_moment(sphere_rule, (2, 2))
    b2 = ball_monomial_moment(ball_rule, (2, 0))
    return MomentIdentityReport(
        dim=sphere_rule.dim,
        sphere_x4=m4,
        sphere_x2y2=m22,
        ball_x2=b2,
        residual_x4=abs(m4 - 3.0 * b2),
        residual_cross=abs(m22 - b2),
        moment_gap=m4 - m22,
    )
