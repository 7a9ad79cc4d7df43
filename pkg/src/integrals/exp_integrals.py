"""
exp_integrals.py - Exponential integrals over rational polyhedra.

Evaluates  V(b) = int_P exp(-<b, x>) dx  together with its gradient
-int_P x exp(-<b, x>) dx and hessian int_P x x^T exp(-<b, x>) dx.

- brion_eval: vertex-cone sum, exact at generic b
- perturbed_eval: symmetric averages of brion_eval around non-generic b,
  Richardson-extrapolated in the perturbation size
- cubature_eval: collapsed Gauss-Legendre rule on a triangulation (bounded P only)
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import Delaunay

from src.utils.errors import Divergent, IntegralError, NonGeneric
from src.utils.logger import setup_logger

logger = setup_logger("exp_integrals")

GENERICITY_EPS = 1e-9
SINGULARITY_DELTA = 1e-4
# Brion hessian terms grow like pairing^-3, so shifted pairings must stay O(delta)
FRAME_CLEARANCE = 0.25
CUBATURE_ORDER = 16


@dataclass(frozen=True)
class ExpIntegralResult:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    convergent: bool = True
    method: str = "brion"

    def scaled(self, factor):
        return ExpIntegralResult(
            self.value * factor, self.gradient * factor, self.hessian * factor,
            self.convergent, self.method,
        )


def as_vector(b, dim):
    """Float n-vector view of a vector field parameter"""
    vec = np.atleast_1d(np.asarray(b, dtype=float))
    if vec.shape != (dim,):
        raise IntegralError(f"b has shape {vec.shape}, expected ({dim},)")
    if not np.all(np.isfinite(vec)):
        raise IntegralError(f"b = {vec} is not finite")
    return vec


@lru_cache(maxsize=64)
def vertex_tables(polyhedron):
    """Float arrays (points (V,n), edges (V,n,n) with edges[v, i] = e_i, |det| (V,))"""
    points = np.array([v.float_point for v in polyhedron.vertices])
    edges = np.array([v.float_edges for v in polyhedron.vertices])
    dets = np.array([abs(float(v.determinant)) for v in polyhedron.vertices])
    return points, edges, dets


def converges(polyhedron, b):
    """True iff <b, w> > 0 on every recession generator (vacuous when bounded)"""
    vec = as_vector(b, polyhedron.dim)
    return all(float(np.dot(vec, w)) > 0 for w in polyhedron.recession_rays)


def edge_pairings(polyhedron, b):
    _, edges, _ = vertex_tables(polyhedron)
    return edges @ as_vector(b, polyhedron.dim)


def is_generic(polyhedron, b, eps=None):
    vec = as_vector(b, polyhedron.dim)
    if eps is None:
        eps = GENERICITY_EPS * np.linalg.norm(vec)
    return bool(np.all(np.abs(edge_pairings(polyhedron, vec)) > eps))


# ---------------- Brion ----------------
def brion_eval(polyhedron, b):
    """Sum of vertex-cone contributions |det E| exp(-<b,v>) / prod <b,e_i>"""
    vec = as_vector(b, polyhedron.dim)
    if not converges(polyhedron, vec):
        raise Divergent(f"int_P exp(-<b,x>) diverges at b = {vec}")
    points, edges, dets = vertex_tables(polyhedron)
    pair = edges @ vec
    eps = GENERICITY_EPS * np.linalg.norm(vec)
    if np.any(np.abs(pair) <= eps):
        raise NonGeneric(f"b = {vec} is orthogonal to an edge direction")

    terms = dets * np.exp(-points @ vec) / np.prod(pair, axis=1)
    scaled_edges = edges / pair[:, :, None]
    centers = points + scaled_edges.sum(axis=1)
    value = float(terms.sum())
    gradient = -(terms[:, None] * centers).sum(axis=0)
    outer = centers[:, :, None] * centers[:, None, :] + np.einsum("vik,vil->vkl", scaled_edges, scaled_edges)
    hessian = (terms[:, None, None] * outer).sum(axis=0)
    hessian = 0.5 * (hessian + hessian.T)
    return ExpIntegralResult(value, gradient, hessian, True, "brion")


# ---------------- Perturbation ----------------
def _frames(dim):
    """Coordinate frame first, then fixed generic orthonormal frames"""
    yield np.eye(dim)
    if dim == 2:
        c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
        yield np.array([[c, -s], [s, c]])
    rng = np.random.default_rng(20240607)
    for _ in range(16):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        yield q


def _symmetric_average(polyhedron, b, delta, frame):
    values = []
    for k in range(polyhedron.dim):
        for sign in (1.0, -1.0):
            values.append(brion_eval(polyhedron, b + sign * delta * frame[:, k]))
    n = len(values)
    return (
        sum(r.value for r in values) / n,
        sum(r.gradient for r in values) / n,
        sum(r.hessian for r in values) / n,
    )


def perturbed_eval(polyhedron, b):
    """Brion evaluation at possibly non-generic b via symmetric perturbation"""
    vec = as_vector(b, polyhedron.dim)
    if not converges(polyhedron, vec):
        raise Divergent(f"int_P exp(-<b,x>) diverges at b = {vec}")
    delta = SINGULARITY_DELTA * (1.0 + np.linalg.norm(vec))
    _, edges, _ = vertex_tables(polyhedron)

    for frame in _frames(polyhedron.dim):
        # Every shifted point keeps each edge pairing at least FRAME_CLEARANCE times its shift
        if all(np.all(np.abs(edges @ (vec + s * d * frame[:, k])) >= FRAME_CLEARANCE * d)
               for k in range(polyhedron.dim) for s in (1.0, -1.0) for d in (delta, delta / 2)):
            break
    else:
        raise NonGeneric(f"no generic perturbation frame around b = {vec}")

    coarse = _symmetric_average(polyhedron, vec, delta, frame)
    fine = _symmetric_average(polyhedron, vec, delta / 2, frame)
    value, gradient, hessian = ((4.0 * f - c) / 3.0 for f, c in zip(fine, coarse))
    logger.debug(f"perturbed evaluation at b = {vec} with delta = {delta:.3g}")
    return ExpIntegralResult(float(value), gradient, 0.5 * (hessian + hessian.T), True, "perturbed")


# ---------------- Simplex cubature ----------------
@lru_cache(maxsize=8)
def collapsed_rule(dim, order=CUBATURE_ORDER):
    """Nodes (Q, n) and weights (Q,) on the unit simplex from a collapsed Gauss product rule"""
    g, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (g + 1.0)
    wt = 0.5 * w
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    wgrids = np.meshgrid(*([wt] * dim), indexing="ij")
    ts = np.stack([m.ravel() for m in grids], axis=1)
    weights = np.prod(np.stack([m.ravel() for m in wgrids], axis=1), axis=1)

    nodes = np.empty_like(ts)
    remaining = np.ones(len(ts))
    for k in range(dim):
        nodes[:, k] = remaining * ts[:, k]
        # Jacobian factor (1 - t_k)^(n - k - 1)
        weights = weights * (1.0 - ts[:, k]) ** (dim - k - 1)
        remaining = remaining * (1.0 - ts[:, k])
    return nodes, weights


def triangulate(polyhedron):
    """Simplices (S, n+1, n) covering a bounded polytope"""
    points, _, _ = vertex_tables(polyhedron)
    if polyhedron.dim == 1:
        order = np.argsort(points[:, 0])
        return points[[order[0], order[-1]]][None, :, :]
    tri = Delaunay(points)
    return points[tri.simplices]


def cubature_eval(polyhedron, b, order=CUBATURE_ORDER):
    """Collapsed Gauss-Legendre cubature over a triangulation of a bounded polytope"""
    if not polyhedron.is_bounded:
        raise IntegralError("cubature needs a bounded polytope")
    vec = as_vector(b, polyhedron.dim)
    nodes, weights = collapsed_rule(polyhedron.dim, order)

    value = 0.0
    gradient = np.zeros(polyhedron.dim)
    hessian = np.zeros((polyhedron.dim, polyhedron.dim))
    for simplex in triangulate(polyhedron):
        v0 = simplex[0]
        A = (simplex[1:] - v0).T
        jac = abs(np.linalg.det(A))
        if jac == 0.0:
            continue
        x = v0 + nodes @ A.T
        f = jac * weights * np.exp(-x @ vec)
        value += f.sum()
        gradient -= f @ x
        hessian += (x * f[:, None]).T @ x
    return ExpIntegralResult(float(value), gradient, 0.5 * (hessian + hessian.T), True, "cubature")
