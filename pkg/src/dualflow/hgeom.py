"""Radial graphs over geodesic spheres in hyperbolic space.

A closed convex hypersurface containing the chart center is written as
{(u(xi), xi)} in polar coordinates, with u the geodesic distance from
the center.  All geometry reduces to the meridian profile u(theta):
the warped metric cosh-sinh factors make the shape operator diagonal
in the (theta, angular) frame, so principal curvatures are read off
without any eigen-decomposition.

Computations run on the profile's grid; the Minkowski embedding into
R^{n+1,1} (time coordinate first, rotation axis last among the spatial
slots) is exposed both for cross-validation and as the carrier of the
Gauss map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere_grid import CircleGrid, SphereGrid, refine_extremum

__all__ = [
    "minkowski_inner",
    "MinkowskiPoint",
    "HyperbolicGraph",
    "GraphGeometry",
    "geometry_of",
    "embed",
    "embed_arrays",
    "EuclideanComparison",
    "euclidean_compare",
    "InballResult",
    "inradius_circumradius",
]


def minkowski_inner(x, y):
    """<x, y> = -x0 y0 + sum of spatial products, on the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + (x[..., 1:] * y[..., 1:]).sum(axis=-1)


@dataclass(frozen=True)
class MinkowskiPoint:
    """A point of H^{n+1} (<x,x> = -1) or of de Sitter space (<x,x> = +1)."""

    coords: np.ndarray
    causal_type: str

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 3:
            raise ValueError("need a flat coordinate vector in R^{n+1,1}")
        object.__setattr__(self, "coords", c)
        target = {"hyperbolic": -1.0, "desitter": 1.0}.get(self.causal_type)
        if target is None:
            raise ValueError(f"unknown causal type {self.causal_type!r}")
        q = float(minkowski_inner(c, c))
        if abs(q - target) > 1e-10:
            raise ValueError(
                f"{self.causal_type} point has <x,x> = {q!r}, off by {abs(q - target):.3e}"
            )


@dataclass(frozen=True)
class HyperbolicGraph:
    """Geodesic radial profile of a closed hypersurface around the center."""

    grid: SphereGrid
    u: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.u, dtype=float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"profile shape {v.shape} does not match grid m={self.grid.m}")
        if not np.all(np.isfinite(v)) or not np.all(v > 0.0):
            raise ValueError("radial profile must be finite and positive")
        object.__setattr__(self, "u", v)

    @property
    def n(self) -> int:
        return self.grid.n


@dataclass(frozen=True)
class GraphGeometry:
    """Pointwise first/second fundamental data of a hyperbolic graph.

    kappa holds one row per node: column 0 the profile curvature, the
    remaining n-1 columns the (repeated) angular curvature.  chi is the
    gradient-to-radius ratio v/sinh u, kept as a diagnostic field.
    """

    u: np.ndarray
    u_th: np.ndarray
    phi_th: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    H: np.ndarray
    normA2: np.ndarray
    chi: np.ndarray
    convex: bool
    horoconvex: bool
    F_value: np.ndarray | None = None

    @property
    def kappa_min(self) -> np.ndarray:
        return self.kappa.min(axis=1)

    @property
    def kappa_max(self) -> np.ndarray:
        return self.kappa.max(axis=1)


def geometry_of(g: HyperbolicGraph, F=None) -> GraphGeometry:
    """Metric factor, principal curvatures and curvature invariants.

    With the warped radial metric the graph slope is phi' = u'/sinh u
    and v^2 = 1 + phi'^2; the diagonal shape operator entries are

        kappa_profile = (cosh u - phi''/v^2) / (v sinh u),
        kappa_angular = (cosh u - cot(theta) phi') / (v sinh u).

    Non-convex output is legal: callers read the convex flag.  When a
    curvature function F is supplied its nodewise values are attached
    (F is only evaluated if the graph is strictly convex).
    """
    grid = g.grid
    u = g.u
    su, cu = np.sinh(u), np.cosh(u)
    u_th = grid.d1(u)
    u_thth = grid.d2(u)
    phi_th = u_th / su
    phi_thth = u_thth / su - u_th * u_th * cu / (su * su)
    v = np.sqrt(1.0 + phi_th * phi_th)
    k_prof = (cu - phi_thth / (v * v)) / (v * su)
    if g.n == 1:
        kappa = k_prof[:, None]
    else:
        cot = np.cos(grid.theta) / np.sin(grid.theta)
        k_ang = (cu - cot * phi_th) / (v * su)
        kappa = np.concatenate(
            [k_prof[:, None], np.repeat(k_ang[:, None], g.n - 1, axis=1)], axis=1
        )
    H = kappa.sum(axis=1)
    normA2 = (kappa * kappa).sum(axis=1)
    convex = bool(np.all(kappa > 0.0))
    horoconvex = bool(np.all(kappa >= 1.0))
    F_value = None
    if F is not None and convex:
        F_value = np.asarray(F.value(kappa))
    return GraphGeometry(
        u=u,
        u_th=u_th,
        phi_th=phi_th,
        v=v,
        kappa=kappa,
        H=H,
        normA2=normA2,
        chi=v / su,
        convex=convex,
        horoconvex=horoconvex,
        F_value=F_value,
    )


def _omega(theta: np.ndarray, n: int) -> np.ndarray:
    """Unit direction on S^n, meridian plane in slots (0, last)."""
    theta = np.asarray(theta, dtype=float)
    w = np.zeros(theta.shape + (n + 1,))
    w[..., 0] = np.sin(theta)
    w[..., -1] = np.cos(theta)
    return w


def _omega_prime(theta: np.ndarray, n: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    w = np.zeros(theta.shape + (n + 1,))
    w[..., 0] = np.cos(theta)
    w[..., -1] = -np.sin(theta)
    return w


def embed_arrays(g: HyperbolicGraph):
    """All node positions and exterior unit normals as (m, n+2) arrays.

    X = (cosh u, sinh u * omega); the normal is the unit combination of
    the radial frame vector and the meridian tangent orthogonal to the
    graph, nu = (E_rho - phi' E_theta)/v, which has time component
    sinh(u)/v.
    """
    geo = geometry_of(g)
    u, v, phi_th = g.u, geo.v, geo.phi_th
    m, n = g.grid.m, g.n
    om = _omega(g.grid.theta, n)
    omp = _omega_prime(g.grid.theta, n)
    X = np.empty((m, n + 2))
    X[:, 0] = np.cosh(u)
    X[:, 1:] = np.sinh(u)[:, None] * om
    nu = np.empty((m, n + 2))
    nu[:, 0] = np.sinh(u) / v
    nu[:, 1:] = (np.cosh(u)[:, None] * om - phi_th[:, None] * omp) / v[:, None]
    return X, nu


def embed(g: HyperbolicGraph, j: int):
    """Embedding of node j: (position in H^{n+1}, normal in de Sitter space)."""
    X, nu = embed_arrays(g)
    j = int(j)
    if not 0 <= j < g.grid.m:
        raise IndexError(f"node {j} outside grid of {g.grid.m} nodes")
    return (
        MinkowskiPoint(X[j], "hyperbolic"),
        MinkowskiPoint(nu[j], "desitter"),
    )


@dataclass(frozen=True)
class EuclideanComparison:
    """Beltrami-image geometry next to the hyperbolic one, per node.

    r is the Euclidean radius tanh u of the image graph, v_e its graph
    factor, h_ratio the ratio of Euclidean to hyperbolic second
    fundamental form diagonal entries (columns: profile direction, then
    angular when n >= 2).
    """

    r: np.ndarray
    v_e: np.ndarray
    h_ratio: np.ndarray


def euclidean_compare(g: HyperbolicGraph) -> EuclideanComparison:
    """Geometry of the Beltrami image, computed independently.

    The image of the graph under the Beltrami map is the Euclidean
    radial graph r = tanh u in the unit ball.  Its curvature entries
    come from the flat polar-graph formulas (same structure as the
    hyperbolic ones with trivial warping), not from any conversion
    identity, so the returned ratios provide a genuine cross-check of
    the comparison inequalities.
    """
    grid = g.grid
    geo = geometry_of(g)
    r = np.tanh(g.u)
    assert np.all(r < 1.0)
    r_th = grid.d1(r)
    r_thth = grid.d2(r)
    pe = r_th / r
    pe_th = r_thth / r - (r_th / r) ** 2
    v_e = np.sqrt(1.0 + pe * pe)
    ke_prof = (1.0 - pe_th / (v_e * v_e)) / (v_e * r)
    # tensor entries: hyperbolic h_thth = kappa * v^2 sinh^2 u, Euclidean
    # h_thth = kappa_e * v_e^2 r^2; angular slots carry sin^2 theta on
    # both sides, which cancels in the ratio
    ratio_prof = (ke_prof * v_e * v_e * r * r) / (
        geo.kappa[:, 0] * geo.v * geo.v * np.sinh(g.u) ** 2
    )
    if g.n == 1:
        h_ratio = ratio_prof[:, None]
    else:
        cot = np.cos(grid.theta) / np.sin(grid.theta)
        ke_ang = (1.0 - cot * pe) / (v_e * r)
        ratio_ang = (ke_ang * r * r) / (geo.kappa[:, 1] * np.sinh(g.u) ** 2)
        h_ratio = np.stack([ratio_prof, ratio_ang], axis=1)
    return EuclideanComparison(r=r, v_e=v_e, h_ratio=h_ratio)


@dataclass(frozen=True)
class InballResult:
    """Axis-centered inball and circumball radii and the inball offset."""

    rho_minus: float
    rho_plus: float
    center_offset: float
    dense_fallback: bool = False


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_opt(f, lo: float, hi: float, sign: float, tol: float = 1e-9):
    """Golden-section optimizer; sign +1 maximizes, -1 minimizes."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = sign * f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _distance_profile(g: HyperbolicGraph, s: float) -> np.ndarray:
    """Geodesic distance from the axis point at offset s to every node."""
    u = g.u
    ct = np.cos(g.grid.theta)
    coshd = np.cosh(u) * math.cosh(s) - np.sinh(u) * ct * math.sinh(s)
    return np.arccosh(np.clip(coshd, 1.0, None))


def inradius_circumradius(g: HyperbolicGraph) -> InballResult:
    """Largest inscribed and smallest enclosing balls centered on the axis.

    Searches the axis offset with golden sections inside the interval
    cut out by the surface's two axis crossings; the extreme distance
    over nodes is refined below grid resolution by local interpolation.
    A non-unimodal search (detected against a coarse scan) falls back
    to a dense scan and flags the result.
    """
    grid = g.grid
    if isinstance(grid, CircleGrid):
        j_pi = int(np.argmin(np.abs(grid.theta - math.pi)))
        lo, hi = -float(g.u[j_pi]), float(g.u[0])
    else:
        lo, hi = -float(g.u[-1]), float(g.u[0])
    lo += 1e-9
    hi -= 1e-9

    def rho_in(s):
        return refine_extremum(grid, _distance_profile(g, s), "min")[1]

    def rho_out(s):
        return refine_extremum(grid, _distance_profile(g, s), "max")[1]

    s_in, r_in = _golden_opt(rho_in, lo, hi, +1.0)
    s_out, r_out = _golden_opt(rho_out, lo, hi, -1.0)

    # guard against multimodal offset profiles
    scan = np.linspace(lo, hi, 41)
    best_in = max(rho_in(s) for s in scan)
    best_out = min(rho_out(s) for s in scan)
    fallback = best_in > r_in + 1e-7 or best_out < r_out - 1e-7
    if fallback:
        scan = np.linspace(lo, hi, 2001)
        vals_in = np.array([rho_in(s) for s in scan])
        vals_out = np.array([rho_out(s) for s in scan])
        i, j = int(np.argmax(vals_in)), int(np.argmin(vals_out))
        s_in, r_in = float(scan[i]), float(vals_in[i])
        r_out = float(vals_out[j])
    return InballResult(
        rho_minus=float(r_in),
        rho_plus=float(r_out),
        center_offset=float(s_in),
        dense_fallback=bool(fallback),
    )
