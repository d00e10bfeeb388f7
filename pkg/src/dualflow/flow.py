"""Time integration of the contracting flow and its de Sitter dual.

The primal evolution moves a convex hypersurface along its exterior
normal with speed F(kappa); in graph form du/dt = -F v.  The dual
surface of normals expands, in the switched convention du*/dt =
+v~ / F~(kappa~), rising toward the equatorial slice.  Both flows share
one explicit RK4 stepper with a parabolic step-size bound; geodesic
spheres solve the primal flow in closed form and serve as the exact
reference and as extinction-time barriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import curvfn
from .curvfn import CurvatureFunction, make_function
from .dualmap import CausalityError, DeSitterGraph, desitter_geometry
from .hgeom import GraphGeometry, HyperbolicGraph, geometry_of
from .sphere_grid import CircleGrid, SphereGrid, make_grid, resample_monotone

__all__ = [
    "ConvexityError",
    "StiffnessError",
    "FlowConfig",
    "FlowState",
    "FlowTrajectory",
    "SphericalSolution",
    "spherical_theta",
    "spherical_T_star",
    "make_initial",
    "scalar_rhs",
    "step",
    "run_flow",
    "dual_scalar_rhs",
    "dual_step",
    "DualFlowState",
    "run_dual_flow",
    "TstarEstimate",
    "estimate_Tstar",
    "estimate_Tstar_dual",
    "RescaledRecord",
    "rescale",
]


class ConvexityError(RuntimeError):
    """A principal curvature left the positive cone during stepping."""


class StiffnessError(RuntimeError):
    """Step-size control fell below dt_min (surface near extinction)."""


@dataclass(frozen=True)
class FlowConfig:
    """One experiment: speed function, grid, initial datum, stepping knobs."""

    F: str
    n: int
    m: int
    initial: str
    initial_params: tuple = ()
    cfl: float = 0.2
    u_stop: float = 0.02
    dt_min: float = 1e-12
    record_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if self.u_stop <= 0.0:
            raise ValueError("u_stop must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        object.__setattr__(self, "initial_params", tuple(float(p) for p in self.initial_params))


@dataclass(frozen=True)
class FlowState:
    t: float
    u: np.ndarray
    geometry: GraphGeometry
    dt_last: float


@dataclass
class FlowTrajectory:
    """Recorded states of one run plus the extinction-time estimate.

    failure is None for a clean stop at u_stop, otherwise the name of
    the abort ("convexity", "stiffness", "causality") and the states
    hold the partial run.
    """

    config: FlowConfig
    states: list = field(default_factory=list)
    T_star_estimate: float | None = None
    Tstar_warn: bool = False
    failure: str | None = None
    steps_taken: int = 0

    @property
    def grid(self) -> SphereGrid:
        return make_grid(self.config.n, self.config.m)


# ----------------------------------------------------------------------
# geodesic spheres: the closed-form solution
# ----------------------------------------------------------------------

def spherical_T_star(r0: float) -> float:
    """Extinction time of the geodesic sphere of radius r0."""
    if r0 <= 0.0:
        raise ValueError("sphere radius must be positive")
    return math.log(math.cosh(r0))


def spherical_theta(t, r0: float):
    """Radius of the shrinking geodesic sphere, cosh T = cosh(r0) e^{-t}.

    Any normalized speed gives the same spherical evolution: on an
    umbilic sphere F(coth r, ..) = coth r by homogeneity.
    """
    T = spherical_T_star(r0)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr >= T):
        raise ValueError(f"time outside [0, T*) with T* = {T!r}")
    out = np.arccosh(np.cosh(r0) * np.exp(-t_arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SphericalSolution:
    r0: float
    T_star: float

    @classmethod
    def from_r0(cls, r0: float) -> "SphericalSolution":
        return cls(r0=float(r0), T_star=spherical_T_star(r0))

    def theta(self, t):
        return spherical_theta(t, self.r0)


# ----------------------------------------------------------------------
# initial data
# ----------------------------------------------------------------------

def _ellipsoid_profile(grid: SphereGrid, a: float, b: float) -> np.ndarray:
    """Beltrami preimage of the ellipsoid with Euclidean semi-axes (a, b).

    Built from the Euclidean support function h(p) = sqrt(b^2 cos^2 p +
    a^2 sin^2 p) (p the normal angle from the axis, b the on-axis
    semi-axis): the boundary point is h p^ + h' p^perp, re-read as a
    radial graph and lifted by u = artanh r.  Keeping a, b < 1 keeps
    the body inside the Beltrami ball.
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError("ellipsoid semi-axes must lie in (0, 1)")
    top = 2.0 * math.pi if isinstance(grid, CircleGrid) else math.pi
    p = np.linspace(-0.3, top + 0.3, 8 * grid.m)
    hs = np.sqrt(b * b * np.cos(p) ** 2 + a * a * np.sin(p) ** 2)
    hs_p = (a * a - b * b) * np.sin(p) * np.cos(p) / hs
    x_axis = hs * np.cos(p) - hs_p * np.sin(p)
    x_sin = hs * np.sin(p) + hs_p * np.cos(p)
    r = np.hypot(x_axis, x_sin)
    ang = np.unwrap(np.arctan2(x_sin, x_axis))
    u = np.arctanh(r)
    keep = np.diff(ang) > 0
    keep = np.concatenate([[True], keep])
    return resample_monotone(ang[keep], u[keep], grid.theta)


def make_initial(name: str, params, grid: SphereGrid, seed: int = 0) -> np.ndarray:
    """Build a named initial profile on the grid.

    sphere [r0]; perturbed_sphere [r0, a, k] giving r0 + a cos(k theta)
    (any integer k keeps the right pole parity); ellipsoid [a, b];
    random_fourier [r0, amp, kmax] with seeded coefficients, resampled
    until strictly convex.
    """
    params = tuple(float(p) for p in params)
    if name == "sphere":
        (r0,) = params
        if r0 <= 0:
            raise ValueError("sphere radius must be positive")
        return np.full(grid.m, r0)
    if name == "perturbed_sphere":
        r0, a, k = params
        ki = int(round(k))
        if ki != k or ki < 1:
            raise ValueError("perturbation frequency must be a positive integer")
        u = r0 + a * np.cos(ki * grid.theta)
        if u.min() <= 0:
            raise ValueError("perturbation exceeds the radius")
        return u
    if name == "ellipsoid":
        a, b = params
        return _ellipsoid_profile(grid, a, b)
    if name == "random_fourier":
        r0, amp, kmax = params
        kmax = int(kmax)
        if kmax < 1 or amp < 0 or r0 <= 0:
            raise ValueError("random_fourier needs r0 > 0, amp >= 0, kmax >= 1")
        rng = np.random.default_rng(seed)
        circle = isinstance(grid, CircleGrid)
        for _ in range(64):
            coef = rng.normal(size=kmax) / np.arange(1, kmax + 1) ** 2
            u = r0 + 0.0 * grid.theta
            for k, c in enumerate(coef, start=1):
                u = u + amp * c * np.cos(k * grid.theta)
                if circle:
                    u = u + amp * rng.normal() / k**2 * np.sin(k * grid.theta)
            if u.min() > 0.05:
                g = HyperbolicGraph(grid, u)
                if geometry_of(g).convex:
                    return u
        raise ValueError("could not draw a convex random profile; lower amp")
    raise ValueError(f"unknown initial datum {name!r}")


# ----------------------------------------------------------------------
# primal flow
# ----------------------------------------------------------------------

def scalar_rhs(g: HyperbolicGraph, F: CurvatureFunction) -> np.ndarray:
    """Graph form of the normal speed: du/dt = -F(kappa) v."""
    geo = geometry_of(g)
    return -np.asarray(F.value(geo.kappa)) * geo.v


def _rhs_or_raise(grid: SphereGrid, u: np.ndarray, F: CurvatureFunction) -> np.ndarray:
    if u.min() <= 0.0:
        raise ConvexityError(f"radius collapsed at node {int(np.argmin(u))}")
    geo = geometry_of(HyperbolicGraph(grid, u))
    if not geo.convex:
        j = int(np.argmin(geo.kappa.min(axis=1)))
        raise ConvexityError(f"convexity lost at node {j}")
    return -np.asarray(F.value(geo.kappa)) * geo.v


def step(state: FlowState, F: CurvatureFunction, cfl: float,
         grid: SphereGrid, dt_min: float = 1e-12, dt_cap: float | None = None) -> FlowState:
    """One RK4 update with the parabolic step bound.

    dt = cfl (h sinh u_min)^2 / max_nodes(sum_i F_i), optionally capped
    (used to land exactly on requested output times).
    """
    geo = state.geometry
    S = np.asarray(F.gradient(geo.kappa)).sum(axis=-1).max()
    dt = cfl * (grid.h * math.sinh(state.u.min())) ** 2 / S
    if dt < dt_min:
        raise StiffnessError(f"dt = {dt:.3e} below dt_min = {dt_min:.3e}")
    # snap onto the cap so requested output times are landed exactly; a
    # cap below dt_min is a landing, not stiffness
    if dt_cap is not None and dt > dt_cap - 1e-13:
        dt = dt_cap
    u = state.u
    k1 = _rhs_or_raise(grid, u, F)
    k2 = _rhs_or_raise(grid, u + 0.5 * dt * k1, F)
    k3 = _rhs_or_raise(grid, u + 0.5 * dt * k2, F)
    k4 = _rhs_or_raise(grid, u + dt * k3, F)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if u_new.min() <= 0.0:
        raise ConvexityError(f"radius collapsed at node {int(np.argmin(u_new))}")
    geo_new = geometry_of(HyperbolicGraph(grid, u_new), F)
    if not geo_new.convex:
        j = int(np.argmin(geo_new.kappa.min(axis=1)))
        raise ConvexityError(f"convexity lost at node {j}")
    return FlowState(t=state.t + dt, u=u_new, geometry=geo_new, dt_last=dt)


def run_flow(config: FlowConfig, t_targets=(), t_stop: float | None = None) -> FlowTrajectory:
    """Integrate until u_max < u_stop, recording along the way.

    t_targets are landed on exactly (dt is clipped, never enlarged) and
    their states are always recorded, on top of the every-record_every
    cadence and the final state.  t_stop ends the run early at that
    flow time (it is landed on exactly too).  A surface extinguishing
    away from the origin can never shrink inside the stop ball; once
    u_min falls below a quarter of u_stop with u_max still above it the
    run aborts with failure "convexity" instead of stalling.
    """
    grid = make_grid(config.n, config.m)
    F = make_function(config.F, config.n)
    u0 = make_initial(config.initial, config.initial_params, grid, config.seed)
    geo0 = geometry_of(HyperbolicGraph(grid, u0), F)
    if not geo0.convex:
        raise ConvexityError("initial datum is not strictly convex")
    state = FlowState(t=0.0, u=u0, geometry=geo0, dt_last=0.0)
    traj = FlowTrajectory(config=config, states=[state])
    targets = sorted(float(t) for t in t_targets)
    if t_stop is not None:
        targets.append(float(t_stop))
        targets.sort()
    k_target = 0
    steps = 0
    while state.u.max() >= config.u_stop:
        if t_stop is not None and state.t >= t_stop - 1e-13:
            break
        cap = None
        while k_target < len(targets) and targets[k_target] <= state.t + 1e-15:
            k_target += 1
        if k_target < len(targets):
            cap = targets[k_target] - state.t
        try:
            state = step(state, F, config.cfl, grid, config.dt_min, cap)
        except StiffnessError:
            traj.failure = "stiffness"
            break
        except ConvexityError:
            traj.failure = "convexity"
            break
        steps += 1
        hit_target = k_target < len(targets) and abs(state.t - targets[k_target]) < 1e-13
        if steps % config.record_every == 0 or hit_target:
            traj.states.append(state)
        if state.u.min() < 0.25 * config.u_stop <= state.u.max():
            # extinction point sits away from the origin (e.g. a k=1 mode
            # in the initial datum): the near-side radius collapses while
            # the far side stays above u_stop, so the loop could only
            # grind dt -> 0 forever; abort as a graph degeneration
            if traj.states[-1] is not state:
                traj.states.append(state)
            traj.failure = "convexity"
            break
    traj.steps_taken = steps
    if traj.states[-1] is not state and traj.failure is None:
        traj.states.append(state)
    if traj.failure is None and sum(s.u.max() < 0.1 for s in traj.states) >= 3:
        est = estimate_Tstar(traj)
        traj.T_star_estimate = est.value
        traj.Tstar_warn = est.warn
    return traj


# ----------------------------------------------------------------------
# dual flow
# ----------------------------------------------------------------------

def dual_scalar_rhs(d: DeSitterGraph, F_dual: CurvatureFunction):
    """Expanding speed of the stored dual graph: du*/dt = +v~ / F~(kappa~).

    In the switched light-cone convention the dual surfaces rise toward
    the equatorial slice, so the sign is positive; on slices this
    reproduces d(-Theta)/dt = +coth Theta, mirroring the primal
    spherical solution.
    """
    geo = desitter_geometry(d)
    if not geo.convex:
        j = int(np.argmin(geo.kappa.min(axis=1)))
        raise ConvexityError(f"dual convexity lost at node {j}")
    return geo.v / np.asarray(F_dual.value(geo.kappa)), geo


def dual_step(t: float, d: DeSitterGraph, F_dual: CurvatureFunction, cfl: float,
              dt_min: float = 1e-12, dt_cap: float | None = None):
    """RK4 update of the dual graph with its own parabolic bound.

    The linearized diffusion coefficient is sum_i F~_i / (F~^2 v~^2
    cosh^2 u*), hence dt = cfl (h min(v~ cosh u*))^2 / max(sum F~_i / F~^2).
    """
    grid = d.grid
    rhs0, geo0 = dual_scalar_rhs(d, F_dual)
    Fv = np.asarray(F_dual.value(geo0.kappa))
    S = (np.asarray(F_dual.gradient(geo0.kappa)).sum(axis=-1) / (Fv * Fv)).max()
    scale = (geo0.v * np.cosh(d.u_star)).min()
    dt = cfl * (grid.h * scale) ** 2 / S
    if dt < dt_min:
        raise StiffnessError(f"dual dt = {dt:.3e} below dt_min = {dt_min:.3e}")
    if dt_cap is not None and dt > dt_cap - 1e-13:
        dt = dt_cap

    def rhs(us):
        if us.max() >= 0.0:
            raise CausalityError("dual graph crossed the equatorial slice mid-step")
        r, _ = dual_scalar_rhs(DeSitterGraph(grid, us), F_dual)
        return r

    us = d.u_star
    k1 = rhs0
    k2 = rhs(us + 0.5 * dt * k1)
    k3 = rhs(us + 0.5 * dt * k2)
    k4 = rhs(us + dt * k3)
    us_new = us + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return t + dt, DeSitterGraph(grid, us_new), dt


@dataclass(frozen=True)
class DualFlowState:
    t: float
    u_star: np.ndarray
    geometry: GraphGeometry
    dt_last: float


def run_dual_flow(config: FlowConfig, initial: DeSitterGraph, t_targets=(),
                  t_stop: float | None = None) -> FlowTrajectory:
    """Integrate the expanding dual until |u*|_max < u_stop.

    config.F names the PRIMAL speed; the dual runs under its inverse.
    The trajectory's states hold DualFlowState records.
    """
    F_dual = curvfn.invert(make_function(config.F, config.n))
    d = initial
    t = 0.0
    traj = FlowTrajectory(config=config,
                          states=[DualFlowState(0.0, d.u_star, desitter_geometry(d), 0.0)])
    targets = sorted(float(x) for x in t_targets)
    if t_stop is not None:
        targets.append(float(t_stop))
        targets.sort()
    k_target = 0
    steps = 0
    recorded = True
    while (-d.u_star.min()) >= config.u_stop:
        if t_stop is not None and t >= t_stop - 1e-13:
            break
        cap = None
        while k_target < len(targets) and targets[k_target] <= t + 1e-15:
            k_target += 1
        if k_target < len(targets):
            cap = targets[k_target] - t
        try:
            t, d, dt = dual_step(t, d, F_dual, config.cfl, config.dt_min, cap)
        except StiffnessError:
            traj.failure = "stiffness"
            break
        except (CausalityError, ValueError):
            traj.failure = "causality"
            break
        except ConvexityError:
            traj.failure = "convexity"
            break
        steps += 1
        hit_target = k_target < len(targets) and abs(t - targets[k_target]) < 1e-13
        recorded = steps % config.record_every == 0 or hit_target
        if recorded:
            traj.states.append(DualFlowState(t, d.u_star, desitter_geometry(d), dt))
    traj.steps_taken = steps
    if not recorded and traj.failure is None:
        traj.states.append(DualFlowState(t, d.u_star, desitter_geometry(d), dt))
    return traj


# ----------------------------------------------------------------------
# extinction time and rescaling
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TstarEstimate:
    value: float
    spread: float
    warn: bool

    def __float__(self):
        return self.value


def _sphere_mean(grid: SphereGrid, f: np.ndarray) -> float:
    return grid.integrate(f) / grid.integrate(np.ones_like(f))


def _aitken_tail(a: np.ndarray) -> TstarEstimate:
    acc = a
    d2 = a[2:] - 2.0 * a[1:-1] + a[:-2]
    if np.all(np.abs(d2) > 1e-14):
        acc = a[2:] - (a[2:] - a[1:-1]) ** 2 / d2
    value = float(acc[-1])
    spread = float(a[-3:].max() - a[-3:].min())
    return TstarEstimate(value=value, spread=spread, warn=bool(spread > 1e-3))


def estimate_Tstar(traj: FlowTrajectory) -> TstarEstimate:
    """Extrapolate T* from t + ln cosh(mean radius) on the late records.

    On spheres the expression is exact at every time.  In general the
    last few records (u_max < 0.1) give a sequence converging fast
    enough for one Aitken acceleration; its spread over the tail is
    returned, with a warning flag above 1e-3.
    """
    grid = traj.grid
    tail = [s for s in traj.states if s.u.max() < 0.1][-8:]
    if len(tail) < 3:
        raise ValueError("trajectory never reached u_max < 0.1 on enough records")
    a = np.array([s.t + math.log(math.cosh(_sphere_mean(grid, s.u))) for s in tail])
    return _aitken_tail(a)


def estimate_Tstar_dual(traj: FlowTrajectory) -> TstarEstimate:
    """Extinction estimate from a dual run: |u*| plays the role of u."""
    grid = traj.grid
    tail = [s for s in traj.states if -s.u_star.min() < 0.1][-8:]
    if len(tail) < 3:
        raise ValueError("dual trajectory never reached |u*|_max < 0.1 on enough records")
    a = np.array([s.t + math.log(math.cosh(_sphere_mean(grid, -s.u_star))) for s in tail])
    return _aitken_tail(a)


@dataclass(frozen=True)
class RescaledRecord:
    """One record in barrier-normalized variables.

    norm_h1/norm_h2 are discrete Sobolev-style seminorms of u~ (surface
    integrals of squared first/second parameter derivatives); they are
    reported, not asserted against any bound.
    """

    t: float
    tau: float
    Theta: float
    u_tilde: np.ndarray
    kappa_scaled: np.ndarray
    F_tilde: np.ndarray | None
    w: np.ndarray | None
    norm_h1: float
    norm_h2: float


def rescale(traj: FlowTrajectory, T_star: float, duals=None) -> list:
    """Normalize recorded states by the spherical barrier with time T_star.

    Theta(t) is the sphere radius extinguishing at T_star; tau = -ln
    Theta, u~ = u/Theta, kappa is scaled by Theta.  When duals (stored
    DeSitterGraph per record, or None entries) are supplied, w = u*/Theta.
    """
    last_t = traj.states[-1].t
    if T_star <= last_t:
        raise ValueError(f"T_star = {T_star!r} must exceed the last recorded t = {last_t!r}")
    grid = traj.grid
    r0_eff = math.acosh(math.exp(T_star))
    out = []
    for i, s in enumerate(traj.states):
        Theta = spherical_theta(s.t, r0_eff)
        u_t = s.u / Theta
        du = grid.d1(u_t)
        ddu = grid.d2(u_t)
        w = None
        if duals is not None and duals[i] is not None:
            w = duals[i].u_star / Theta
        out.append(
            RescaledRecord(
                t=s.t,
                tau=-math.log(Theta),
                Theta=Theta,
                u_tilde=u_t,
                kappa_scaled=s.geometry.kappa * Theta,
                F_tilde=None if s.geometry.F_value is None else s.geometry.F_value * Theta,
                w=w,
                norm_h1=math.sqrt(max(grid.integrate(du * du), 0.0)),
                norm_h2=math.sqrt(max(grid.integrate(ddu * ddu), 0.0)),
            )
        )
    return out
