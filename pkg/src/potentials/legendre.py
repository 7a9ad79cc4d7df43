"""
legendre.py - Discrete Legendre-Fenchel transforms and symplectic potentials.

- guillemin_potential: canonical symplectic potential of a polyhedron
- legendre_transform: L(f)(x) = max_nodes (<x, xi> - f(xi))
  1D by a monotone slope scan, 2D by chunked brute force
- moment_image: hull of the discrete gradient image
- potential_from_symplectic: inverse transform with a boundary-behaviour spot check
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull

from src.geometry.lattice import feasible_points
from src.integrals.quadrature import truncate
from src.potentials.grid import Grid, GridFunction
from src.utils.errors import BoundaryBehaviorViolated, GridError, NotConvex, OnBoundary
from src.utils.logger import setup_logger

logger = setup_logger("legendre")

CHUNK = 512
BOUNDARY_LAYER = 2
BOUNDARY_FACTOR = 10.0


def _other_tag(tag):
    return "x" if tag == "xi" else "xi"


# ---------------- Guillemin potential ----------------
def facet_slacks(polyhedron, x):
    """l_i(x) + a_i for every facet, shape (..., d)"""
    pts = np.asarray(x, dtype=float)
    if polyhedron.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    return pts @ polyhedron.normal_array.T + polyhedron.offset_array


def guillemin_potential(polyhedron, x):
    """u_P(x) = 1/2 sum_i (l_i(x) + a_i) log(l_i(x) + a_i)"""
    slack = facet_slacks(polyhedron, x)
    if np.any(slack <= 0):
        raise OnBoundary(f"x = {x} is not strictly inside the polyhedron")
    return 0.5 * np.sum(slack * np.log(slack), axis=-1)


# ---------------- Transforms ----------------
def _check_convex(f):
    if f.dim == 1:
        xi = f.grid.axes()[0][f.mask]
        vals = f.values[f.mask]
        slopes = np.diff(vals) / np.diff(xi)
        tol = 1e-10 * max(1.0, float(np.abs(slopes).max())) if slopes.size else 0.0
        if slopes.size > 1 and np.diff(slopes).min() < -tol:
            raise NotConvex("discrete slopes decrease somewhere on the grid")
        return xi, vals, slopes
    if not f.is_convex():
        raise NotConvex("discrete hessian has a negative eigenvalue")
    return None


@dataclass(frozen=True)
class MomentImage:
    """Hull of the discrete gradient image with an h-dependent margin"""
    lower: np.ndarray
    upper: np.ndarray
    margin: float
    hull: ConvexHull = None

    def contains(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if self.hull is None:
            y = pts.reshape(-1)
            return (y >= self.lower[0] - self.margin) & (y <= self.upper[0] + self.margin)
        eq = self.hull.equations
        return np.all(pts @ eq[:, :-1].T + eq[:, -1] <= self.margin, axis=1)


def moment_image(f):
    """Convex hull of the central-difference gradients over interior nodes"""
    if f.domain_tag != "xi":
        raise GridError("moment_image expects a potential on the xi side")
    _check_convex(f)
    inner = f.interior_mask()
    grads = f.gradient()[inner]
    curvature = np.abs(f.hessian()[inner]).max() if inner.any() else 0.0
    margin = float(max(f.spacing) * curvature)
    hull = ConvexHull(grads) if f.dim == 2 else None
    return MomentImage(grads.min(axis=0), grads.max(axis=0), margin, hull)


def default_output_grid(f, spacing=None):
    """Uniform grid over the gradient hull shrunk by one spacing, plus its mask"""
    image = moment_image(f) if f.domain_tag == "xi" else _gradient_box(f)
    h = np.asarray(spacing if spacing is not None else f.spacing, dtype=float)
    lo = image.lower + h
    hi = image.upper - h
    if np.any(hi < lo):
        raise GridError("gradient image is too narrow for the output spacing")
    grid = Grid.covering(lo, hi, h)
    if f.dim == 1:
        return grid, None
    nodes = grid.nodes()
    eq = image.hull.equations
    # Shrink the hull by one spacing as well
    inside = np.all(nodes @ eq[:, :-1].T + eq[:, -1] <= -float(h.max()), axis=-1)
    return grid, inside


def _gradient_box(f):
    inner = f.interior_mask()
    grads = f.gradient()[inner]
    hull = ConvexHull(grads) if f.dim == 2 else None
    return MomentImage(grads.min(axis=0), grads.max(axis=0), 0.0, hull)


def legendre_transform(f, grid=None, spacing=None, mask=None):
    """Discrete conjugate max_nodes (<x, xi> - f(xi)) on an output grid"""
    scan = _check_convex(f)
    if grid is None:
        grid, mask = default_output_grid(f, spacing)

    if f.dim == 1:
        xi, vals, slopes = scan
        x = grid.axes()[0]
        # Maximiser index is monotone in x
        idx = np.searchsorted(slopes, x, side="left")
        out = x * xi[idx] - vals[idx]
        return GridFunction(grid, out, _other_tag(f.domain_tag), mask)

    xi = f.valid_nodes()
    vals = f.valid_values()
    nodes = grid.nodes().reshape(-1, 2)
    keep = np.ones(len(nodes), bool) if mask is None else np.asarray(mask).reshape(-1)
    out = np.full(len(nodes), np.nan)
    targets = np.flatnonzero(keep)
    for start in range(0, len(targets), CHUNK):
        rows = targets[start:start + CHUNK]
        out[rows] = np.max(nodes[rows] @ xi.T - vals[None, :], axis=1)
    logger.debug(f"2D transform: {len(targets)} output nodes x {len(xi)} input nodes")
    return GridFunction(grid, out.reshape(grid.shape), _other_tag(f.domain_tag),
                        None if mask is None else keep.reshape(grid.shape))


def _min_facet_slack(polyhedron, f):
    nodes = f.nodes()
    slack = facet_slacks(polyhedron, nodes)
    return slack.min(axis=-1)


def potential_from_symplectic(u, polyhedron=None, grid=None, spacing=None):
    """Inverse Legendre transform of a symplectic potential, checking u - u_P near the boundary"""
    if u.domain_tag != "x":
        raise GridError("potential_from_symplectic expects a polytope-side function")
    _check_convex(u)
    if polyhedron is not None:
        check_boundary_behavior(u, polyhedron)
    return legendre_transform(u, grid=grid, spacing=spacing)


def check_boundary_behavior(u, polyhedron):
    """u - u_P and its first difference must stay bounded up to the facets"""
    h = max(u.spacing)
    nodes = u.nodes()
    slack = np.where(u.mask, _min_facet_slack(polyhedron, u), np.nan)
    inside = u.mask & (slack > 0)
    diff = np.full(u.grid.shape, np.nan)
    diff[inside] = u.values[inside] - guillemin_potential(polyhedron, nodes[inside])

    slopes = []
    for axis in range(u.dim):
        d = np.abs(np.diff(diff, axis=axis)) / u.spacing[axis]
        # Attribute each difference to the node nearer the boundary
        s = np.minimum(np.delete(slack, -1, axis=axis), np.delete(slack, 0, axis=axis))
        slopes.append((d, s))

    layer = BOUNDARY_LAYER * h
    near = [d[(s <= layer) & np.isfinite(d)] for d, s in slopes]
    far = [d[(s > 4 * layer) & np.isfinite(d)] for d, s in slopes]
    near = np.concatenate(near) if near else np.array([])
    far = np.concatenate(far) if far else np.array([])
    if near.size == 0:
        return
    bound = BOUNDARY_FACTOR * (1.0 + (far.max() if far.size else 0.0))
    if near.max() > bound or not np.all(np.isfinite(diff[inside])):
        raise BoundaryBehaviorViolated(
            f"first difference of u - u_P reaches {near.max():.3g} near the boundary (bound {bound:.3g})"
        )


# ---------------- Growth and sampling ----------------
def growth_constant(f):
    """Smallest C >= 1 with f(xi) >= |xi|/C - C on every valid node"""
    xi = f.valid_nodes()
    radius = np.abs(xi) if f.dim == 1 else np.linalg.norm(xi, axis=-1)
    vals = f.valid_values()

    def gap(C):
        return float(np.min(vals - radius / C + C))

    if gap(1.0) >= 0:
        return 1.0
    upper = 2.0
    while gap(upper) < 0:
        upper *= 2.0
    return brentq(gap, 1.0, upper, xtol=1e-12)


def truncated_box(polyhedron, truncation):
    """Bounding box of P cut at <w, x> <= truncation along recession rays"""
    points = feasible_points(truncate(polyhedron, truncation), polyhedron.dim)
    pts = np.array([[float(c) for c in p] for p in points])
    return pts.min(axis=0), pts.max(axis=0)


def sample_on_polyhedron(polyhedron, fn, spacing, truncation=20.0):
    """Sample fn on grid nodes strictly inside (truncated) P; other nodes are masked"""
    lo, hi = truncated_box(polyhedron, truncation)
    grid = Grid.covering(lo, hi, spacing)
    nodes = grid.nodes()
    mask = np.all(facet_slacks(polyhedron, nodes) > 1e-12, axis=-1)
    return GridFunction.on_grid(fn, grid, "x", mask)
