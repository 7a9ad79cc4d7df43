"""
quadrature.py - Independent midpoint oracle for int_P exp(-<b, x>) dx.

Unbounded polyhedra are truncated by <w, x> <= R for every recession
generator w. Axis-0 slices of the truncated polytope are mapped onto uniform
midpoint grids; the outer axis is split into panels at vertex coordinates so the
slice endpoints are linear on each panel. One Richardson level (N, 2N cells)
removes the h^2 term, and the R/2 truncation gives an a-posteriori tail estimate.
"""

import math
from dataclasses import dataclass

import numpy as np
from sympy import Rational

from src.geometry.lattice import HalfSpace, feasible_points
from src.integrals.exp_integrals import as_vector, converges
from src.utils.errors import Divergent, IntegralError, TruncationTooSmall
from src.utils.logger import setup_logger

logger = setup_logger("quadrature")

CHUNK_ROWS = 256


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    tail_estimate: float
    cells: int


def truncate(polyhedron, radius):
    """Halfspaces of P plus <-w, x> >= -R for every recession generator w"""
    R = Rational(repr(float(radius)))
    extra = [HalfSpace(tuple(-c for c in w), R) for w in polyhedron.recession_rays]
    return tuple(polyhedron.halfspaces) + tuple(extra)


def _float_system(halfspaces, dim):
    normals = np.array([h.normal for h in halfspaces], dtype=float)
    offsets = np.array([float(h.offset) for h in halfspaces])
    points = feasible_points(halfspaces, dim)
    if not points:
        raise IntegralError("truncated polyhedron is empty")
    vertices = np.array([[float(c) for c in p] for p in points])
    return normals, offsets, vertices


def _slice_bounds(normals, offsets, y, vertices):
    """Axis-0 interval [lo(y), hi(y)] of the 2D polytope at height y"""
    lo = np.full_like(y, vertices[:, 0].min())
    hi = np.full_like(y, vertices[:, 0].max())
    for (n0, n1), a in zip(normals, offsets):
        if n0 == 0.0:
            continue
        bound = (-a - n1 * y) / n0
        if n0 > 0:
            lo = np.maximum(lo, bound)
        else:
            hi = np.minimum(hi, bound)
    return lo, hi


def _midpoint_1d(lo, hi, b, cells):
    h = (hi - lo) / cells
    x = lo + h * (np.arange(cells) + 0.5)
    return h * math.fsum(np.exp(-b[0] * x))


def _midpoint_2d(normals, offsets, vertices, b, cells, refine=1):
    ys = np.unique(vertices[:, 1])
    total = ys[-1] - ys[0]
    partials = []
    t = (np.arange(refine * cells) + 0.5) / (refine * cells)
    for y0, y1 in zip(ys[:-1], ys[1:]):
        # Panel counts scale exactly with refine so Richardson sees h and h/2
        m = refine * max(1, math.ceil(cells * (y1 - y0) / total))
        hy = (y1 - y0) / m
        y_mid = y0 + hy * (np.arange(m) + 0.5)
        lo, hi = _slice_bounds(normals, offsets, y_mid, vertices)
        width = np.maximum(hi - lo, 0.0)
        for start in range(0, m, CHUNK_ROWS):
            sl = slice(start, start + CHUNK_ROWS)
            x = lo[sl, None] + width[sl, None] * t[None, :]
            f = np.exp(-b[0] * x - b[1] * y_mid[sl, None])
            partials.append(hy * float(np.sum(f.sum(axis=1) * width[sl] / len(t))))
    return math.fsum(partials)


def _richardson(halfspaces, dim, b, cells):
    normals, offsets, vertices = _float_system(halfspaces, dim)
    if dim == 1:
        lo, hi = vertices[:, 0].min(), vertices[:, 0].max()
        coarse = _midpoint_1d(lo, hi, b, cells)
        fine = _midpoint_1d(lo, hi, b, 2 * cells)
    elif dim == 2:
        coarse = _midpoint_2d(normals, offsets, vertices, b, cells)
        fine = _midpoint_2d(normals, offsets, vertices, b, cells, refine=2)
    else:
        raise IntegralError("the quadrature oracle handles n <= 2")
    return (4.0 * fine - coarse) / 3.0


def quadrature_oracle(polyhedron, b, truncation=60.0, cells_per_axis=2000, tol=1e-6):
    """Midpoint tensor quadrature of exp(-<b,x>) over P truncated at <w,x> <= R"""
    vec = as_vector(b, polyhedron.dim)
    if not converges(polyhedron, vec):
        raise Divergent(f"int_P exp(-<b,x>) diverges at b = {vec}")

    if polyhedron.is_bounded:
        value = _richardson(polyhedron.halfspaces, polyhedron.dim, vec, cells_per_axis)
        return QuadratureResult(value, 0.0, cells_per_axis)

    value = _richardson(truncate(polyhedron, truncation), polyhedron.dim, vec, cells_per_axis)
    half = _richardson(truncate(polyhedron, truncation / 2), polyhedron.dim, vec, cells_per_axis)
    rate = min(float(np.dot(vec, w)) / float(np.dot(w, w)) for w in polyhedron.recession_rays)
    q = math.exp(-rate * truncation / 2)
    tail = abs(value - half) * q / (1.0 - q)
    logger.debug(f"oracle at b = {vec}: {value:.17g} (tail {tail:.3g})")
    if abs(value) > 0 and tail / abs(value) > tol:
        raise TruncationTooSmall(f"tail estimate {tail:.3g} exceeds tolerance at R = {truncation}")
    return QuadratureResult(value, tail, cells_per_axis)
