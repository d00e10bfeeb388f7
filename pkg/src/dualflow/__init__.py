"""Contracting curvature flows in hyperbolic space and their de Sitter duals.

The package simulates rotationally symmetric convex hypersurfaces in
hyperbolic space contracting by a speed built from the principal
curvatures, maps them through the Gauss map to expanding spacelike
surfaces in de Sitter space, and cross-checks the two evolutions
against each other and against closed-form solutions.

Modules:
    curvfn       symmetric curvature functions and their derivatives
    sphere_grid  collocation grids on the sphere and stencil calculus
    hgeom        graphical hypersurfaces over a geodesic sphere
    dualmap      the Gauss-map correspondence with de Sitter space
    flow         time integration of the primal and dual flows
    diagnostics  pinching, barrier and convergence monitors
    cli          command line front end
"""

from . import curvfn, diagnostics, dualmap, flow, hgeom, sphere_grid

__version__ = "0.1.0"

__all__ = [
    "curvfn",
    "sphere_grid",
    "hgeom",
    "dualmap",
    "flow",
    "diagnostics",
    "__version__",
]
