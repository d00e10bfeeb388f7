"""Gauss-map correspondence with de Sitter space.

The exterior unit normals of a strictly convex hypersurface in
hyperbolic space sweep out a spacelike hypersurface in de Sitter space.
We store its time-reflected copy: eigentime is negated at construction
(one light-cone switch, recorded in LIGHT_CONE_SWITCHED), so duals of
convex bodies around the chart center are graphs u* < 0 over the
sphere, rising toward the equatorial slice {tau = 0} as the primal
shrinks.

Principal curvatures invert under the map and the second fundamental
forms agree nodewise; verify_duality measures both statements, plus the
extremum exchange u_max = -u*_min, directly on the primal
parametrization (derivatives of the dual profile are obtained by the
chain rule through the matching angle, keeping every comparison at the
stencil's own convergence order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hgeom import GraphGeometry, HyperbolicGraph, embed_arrays, geometry_of
from .sphere_grid import (
    CircleGrid,
    SphereGrid,
    make_grid,
    refine_extremum,
    resample_monotone,
)

__all__ = [
    "DualityBrokenError",
    "CausalityError",
    "LIGHT_CONE_SWITCHED",
    "DeSitterGraph",
    "DualPair",
    "gauss_dual",
    "desitter_geometry",
    "dual_to_primal",
    "DualityReport",
    "verify_duality",
]

# The one global sign convention: stored de Sitter graphs have their
# eigentime negated relative to the raw Gauss image.  Downstream code
# (dual flow speeds, recovered primals) must consult this flag rather
# than re-deriving signs.
LIGHT_CONE_SWITCHED = True


class DualityBrokenError(RuntimeError):
    """Gauss image failed to be a graph (primal not strictly convex)."""


class CausalityError(RuntimeError):
    """A stored profile violates the spacelike gradient bound."""


@dataclass(frozen=True)
class DeSitterGraph:
    """Spacelike radial graph tau = u_star(xi) in de Sitter space.

    Stored in the switched convention: u_star < 0, and the spacelike
    bound |D u_star| = |u_star'| / cosh u_star < 1 must hold.
    """

    grid: SphereGrid
    u_star: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.u_star, dtype=float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"profile shape {v.shape} does not match grid m={self.grid.m}")
        if not np.all(np.isfinite(v)):
            raise ValueError("eigentime profile must be finite")
        if not np.all(v < 0.0):
            raise ValueError("stored duals lie below the equatorial slice (u_star < 0)")
        object.__setattr__(self, "u_star", v)
        slope = np.abs(self.grid.d1(v)) / np.cosh(v)
        if slope.max() >= 1.0:
            j = int(np.argmax(slope))
            raise CausalityError(
                f"graph is not spacelike: |D u_star| = {slope.max():.6f} at node {j}"
            )

    @property
    def n(self) -> int:
        return self.grid.n


@dataclass(frozen=True)
class DualPair:
    """A primal graph, its dual, and the per-node matching angle."""

    primal: HyperbolicGraph
    dual: DeSitterGraph
    matching: np.ndarray
    u_star_nodes: np.ndarray


def _dual_angles(g: HyperbolicGraph, nu: np.ndarray) -> np.ndarray:
    """Direction angle of each normal's spatial part, unwrapped."""
    sin_part = nu[:, 1]
    axis_part = nu[:, -1]
    ang = np.arctan2(sin_part, axis_part)
    if isinstance(g.grid, CircleGrid):
        ang = np.unwrap(ang)
    return ang


def _even_extend(x: np.ndarray, y: np.ndarray):
    """Mirror sample triples about both poles and insert pole values.

    Mirroring alone leaves a cell with exactly equal endpoint values
    straddling each pole, whose zero secant slope would force the
    shape-preserving resampler to first order there.  Fitting the even
    quartic a + b s^2 + c s^4 in the pole offset s through the three
    nearest samples supplies the missing pole value and keeps the
    resampler at full accuracy.
    """

    def pole_value(xs, ys, pole):
        s2 = (xs - pole) ** 2
        s2 = s2 / s2.max()
        coef = np.linalg.solve(np.vander(s2, 3, increasing=True), ys)
        return coef[0]

    y_lo = pole_value(x[:3], y[:3], 0.0)
    y_hi = pole_value(x[-3:], y[-3:], math.pi)
    xx = np.concatenate([-x[2::-1], [0.0], x, [math.pi], 2.0 * math.pi - x[:-4:-1]])
    yy = np.concatenate([y[2::-1], [y_lo], y, [y_hi], y[:-4:-1]])
    return xx, yy


def gauss_dual(g: HyperbolicGraph) -> DualPair:
    """Dual spacelike graph swept by the exterior normals.

    The dual point is the normal itself; its eigentime arcsinh(nu^0)
    is negated (light-cone switch) and read as a graph over the
    direction of the spatial part.  The scattered graph samples are
    brought onto the uniform grid by monotone resampling.
    """
    geo = geometry_of(g)
    if not geo.convex:
        raise DualityBrokenError("primal graph is not strictly convex")
    X, nu = embed_arrays(g)
    u_star = -np.arcsinh(nu[:, 0])
    ang = _dual_angles(g, nu)
    if not np.all(np.diff(ang) > 0.0):
        j = int(np.argmin(np.diff(ang)))
        raise DualityBrokenError(
            f"dual angles fail to increase at node {j} (grid too coarse or convexity lost)"
        )
    grid = g.grid
    if isinstance(grid, CircleGrid):
        per = 2.0 * math.pi
        x = np.concatenate([ang[-3:] - per, ang, ang[:3] + per])
        y = np.concatenate([u_star[-3:], u_star, u_star[:3]])
    else:
        x, y = _even_extend(ang, u_star)
    u_star_grid = resample_monotone(x, y, grid.theta)
    dual = DeSitterGraph(make_grid(g.n, grid.m), u_star_grid)
    return DualPair(primal=g, dual=dual, matching=ang, u_star_nodes=u_star)


def desitter_geometry(d: DeSitterGraph, F=None) -> GraphGeometry:
    """Metric factor and principal curvatures of a stored spacelike graph.

    With psi' = u*'/cosh u* the graph factor is v~^2 = 1 - psi'^2 and
    the shape operator diagonal (past-directed normal, switched
    convention) reads

        kappa_profile = -(psi''/v~^2 + sinh u*) / (v~ cosh u*),
        kappa_angular = -(sinh u* + cot(theta) psi') / (v~ cosh u*).

    The GraphGeometry container is reused with u = u_star, v = v~ and
    chi = v~/cosh u*.
    """
    grid = d.grid
    t = d.u_star
    st, ct = np.sinh(t), np.cosh(t)
    t_th = grid.d1(t)
    t_thth = grid.d2(t)
    psi_th = t_th / ct
    if np.abs(psi_th).max() >= 1.0:
        j = int(np.argmax(np.abs(psi_th)))
        raise CausalityError(f"spacelike bound violated at node {j}")
    psi_thth = t_thth / ct - t_th * t_th * st / (ct * ct)
    v = np.sqrt(1.0 - psi_th * psi_th)
    k_prof = -(psi_thth / (v * v) + st) / (v * ct)
    if d.n == 1:
        kappa = k_prof[:, None]
    else:
        cot = np.cos(grid.theta) / np.sin(grid.theta)
        k_ang = -(st + cot * psi_th) / (v * ct)
        kappa = np.concatenate(
            [k_prof[:, None], np.repeat(k_ang[:, None], d.n - 1, axis=1)], axis=1
        )
    H = kappa.sum(axis=1)
    normA2 = (kappa * kappa).sum(axis=1)
    convex = bool(np.all(kappa > 0.0))
    F_value = None
    if F is not None and convex:
        F_value = np.asarray(F.value(kappa))
    return GraphGeometry(
        u=t,
        u_th=t_th,
        phi_th=psi_th,
        v=v,
        kappa=kappa,
        H=H,
        normA2=normA2,
        chi=v / ct,
        convex=convex,
        horoconvex=bool(np.all(kappa >= 1.0)),
        F_value=F_value,
    )


def dual_to_primal(d: DeSitterGraph) -> HyperbolicGraph:
    """Recover the hyperbolic surface whose Gauss image is the stored dual.

    The past-directed unit normal of the stored graph, with the light
    cone switched back, is a point of H^{n+1}; reading those points as
    a radial graph undoes the Gauss map.
    """
    grid = d.grid
    t = d.u_star
    t_th = grid.d1(t)
    psi_th = t_th / np.cosh(t)
    v = np.sqrt(1.0 - psi_th * psi_th)
    st, ct = np.sin(grid.theta), np.cos(grid.theta)
    P0 = np.cosh(t) / v
    P_sin = -(np.sinh(t) * st + psi_th * ct) / v
    P_axis = -(np.sinh(t) * ct - psi_th * st) / v
    u = np.arccosh(np.clip(P0, 1.0, None))
    ang = np.arctan2(P_sin, P_axis)
    if isinstance(grid, CircleGrid):
        ang = np.unwrap(ang)
    if not np.all(np.diff(ang) > 0.0):
        j = int(np.argmin(np.diff(ang)))
        raise DualityBrokenError(f"recovered angles fail to increase at node {j}")
    if isinstance(grid, CircleGrid):
        per = 2.0 * math.pi
        x = np.concatenate([ang[-3:] - per, ang, ang[:3] + per])
        y = np.concatenate([u[-3:], u, u[:3]])
    else:
        x, y = _even_extend(ang, u)
    u_grid = resample_monotone(x, y, grid.theta)
    return HyperbolicGraph(make_grid(d.n, grid.m), u_grid)


@dataclass(frozen=True)
class DualityReport:
    """Maximal deviations from the three duality identities."""

    max_kappa_product_error: float
    max_h_mismatch: float
    relation_u_ustar_error: float

    def worst(self) -> float:
        return max(
            self.max_kappa_product_error,
            self.max_h_mismatch,
            self.relation_u_ustar_error,
        )


def verify_duality(pair: DualPair) -> DualityReport:
    """Measure kappa~ * kappa = 1, h~ = h, and the extremum exchange.

    All quantities are evaluated at the primal nodes.  Dual derivatives
    with respect to the dual angle are produced by the chain rule
    through the matching function (whose deviation from the identity is
    an odd profile), so no interpolation enters and every error decays
    at the stencil order.  The second fundamental forms are compared as
    tensors fed with the same parameter vector, i.e. the dual profile
    entry picks up the squared angle derivative.
    """
    g = pair.primal
    grid = g.grid
    geo = geometry_of(g)
    us = pair.u_star_nodes
    w = pair.matching - grid.theta
    a = 1.0 + grid.d1(w, parity=-1)
    a_th = grid.d2(w, parity=-1)
    us_th = grid.d1(us)
    us_thth = grid.d2(us)
    dus = us_th / a
    ddus = (us_thth * a - us_th * a_th) / (a * a * a)
    st_us, ct_us = np.sinh(us), np.cosh(us)
    psi = dus / ct_us
    psi_d = ddus / ct_us - dus * dus * st_us / (ct_us * ct_us)
    vt2 = 1.0 - psi * psi
    vt = np.sqrt(vt2)
    kt_prof = -(psi_d / vt2 + st_us) / (vt * ct_us)
    su, v = np.sinh(g.u), geo.v
    prod_err = np.abs(kt_prof * geo.kappa[:, 0] - 1.0)
    h_mis = np.abs(
        geo.kappa[:, 0] * v * v * su * su - kt_prof * vt2 * ct_us * ct_us * a * a
    )
    if g.n >= 2:
        cot_t = np.cos(pair.matching) / np.sin(pair.matching)
        kt_ang = -(st_us + cot_t * psi) / (vt * ct_us)
        prod_err = np.maximum(prod_err, np.abs(kt_ang * geo.kappa[:, 1] - 1.0))
        h_ang_mis = np.abs(
            geo.kappa[:, 1] * su * su * np.sin(grid.theta) ** 2
            - kt_ang * ct_us * ct_us * np.sin(pair.matching) ** 2
        )
        h_mis = np.maximum(h_mis, h_ang_mis)
    _, u_max = refine_extremum(grid, g.u, "max")
    _, u_min = refine_extremum(grid, g.u, "min")
    _, us_max = refine_extremum(grid, us, "max")
    _, us_min = refine_extremum(grid, us, "min")
    rel = max(abs(u_max + us_min), abs(u_min + us_max))
    return DualityReport(
        max_kappa_product_error=float(prod_err.max()),
        max_h_mismatch=float(h_mis.max()),
        relation_u_ustar_error=float(rel),
    )
