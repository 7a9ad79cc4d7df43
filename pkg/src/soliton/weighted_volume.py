"""
weighted_volume.py - The weighted volume functional and the soliton vector field.

F(v) = prefactor * int_P exp(-<v, x>) dx is strictly convex on the cone
Lambda = {v : <v, w> > 0 for every recession generator w of P}; its unique
critical point is the soliton vector field b_X. minimize_F finds it by damped
Newton with an Armijo line search that never leaves Lambda.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import bisect

from src.geometry.lattice import anticanonical_polyhedron
from src.integrals.exp_integrals import (
    as_vector,
    brion_eval,
    cubature_eval,
    edge_pairings,
    perturbed_eval,
)
from src.utils.errors import (
    GeometryError,
    HessianNotPD,
    LineSearchFailure,
    MaxIterations,
    NonGeneric,
    OutsideLambda,
)
from src.utils.logger import setup_logger

ARMIJO_C = 1e-4
MAX_ITERATIONS = 100
MAX_BACKTRACKS = 60
DEFAULT_TOL = 1e-10
# Below these pairings Brion sums lose digits to cancellation
CUBATURE_PAIRING = 0.05
PERTURB_RATIO = 1e-3
# Predicted decrease below this fraction of F is lost to rounding; such steps
# must reduce the gradient norm instead
FLAT_DECREASE = 1e-12

TRACE_HEADER_TAIL = ("F", "grad_norm", "step")


def resolve_prefactor(prefactor, dim):
    """'1' -> 1, '2pi' -> (2 pi)^n, numbers pass through"""
    if prefactor in (None, "1", 1):
        return 1.0
    if prefactor == "2pi":
        return (2.0 * math.pi) ** dim
    return float(prefactor)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    b: tuple
    value: float
    grad_norm: float
    step: float

    def as_row(self):
        return [self.iteration, *self.b, self.value, self.grad_norm, self.step]


@dataclass
class SolitonVectorResult:
    b_X: np.ndarray
    grad_norm: float
    hessian_cond: float
    iterations: int
    value: float
    path: list = field(default_factory=list)

    def trace_header(self):
        return ["iteration"] + [f"b{k + 1}" for k in range(len(self.b_X))] + list(TRACE_HEADER_TAIL)

    def trace_rows(self):
        return [row.as_row() for row in self.path]


class WeightedVolumeProblem:
    """Weighted volume functional on a polyhedron with the origin strictly inside"""

    def __init__(self, polyhedron, prefactor="1"):
        self.logger = setup_logger("WeightedVolumeProblem")
        if not polyhedron.contains((0,) * polyhedron.dim, strict=True):
            raise GeometryError("the origin must lie strictly inside the polyhedron")
        self.polyhedron = polyhedron
        self.dim = polyhedron.dim
        self.prefactor = resolve_prefactor(prefactor, polyhedron.dim)

    def evaluate(self, v):
        """ExpIntegralResult of int_P exp(-<v,x>) dx, routed around edge singularities"""
        vec = as_vector(v, self.dim)
        P = self.polyhedron
        pair = np.abs(edge_pairings(P, vec))
        smallest = float(pair.min())
        if P.is_bounded and smallest < CUBATURE_PAIRING:
            return cubature_eval(P, vec)
        if smallest <= PERTURB_RATIO * np.linalg.norm(vec):
            self.logger.warning(f"⚠️ b = {vec} is close to an edge hyperplane, using perturbed evaluation")
            return perturbed_eval(P, vec)
        try:
            return brion_eval(P, vec)
        except NonGeneric:
            return perturbed_eval(P, vec)


# ---------------- Operations ----------------
def lambda_contains(problem, v):
    """True iff <v, w> > 0 for all recession generators w"""
    vec = as_vector(v, problem.dim)
    return all(float(np.dot(vec, w)) > 0 for w in problem.polyhedron.recession_rays)


def F_eval(problem, v):
    """(value, gradient, hessian) of the weighted volume functional at v"""
    vec = as_vector(v, problem.dim)
    if not lambda_contains(problem, vec):
        raise OutsideLambda(vec)
    result = problem.evaluate(vec).scaled(problem.prefactor)
    return result.value, result.gradient, result.hessian


def futaki_residual(problem, v):
    """First moment int_P x exp(-<v,x>) dx; zero exactly at b_X"""
    _, gradient, _ = F_eval(problem, v)
    return -gradient / problem.prefactor


def initial_point(problem):
    """max(1, n) e_1, or the sum of recession generators when e_1 is outside Lambda"""
    start = np.zeros(problem.dim)
    start[0] = max(1, problem.dim)
    if lambda_contains(problem, start):
        return start
    rays = np.array(problem.polyhedron.recession_rays, dtype=float)
    start = rays.sum(axis=0)
    if np.linalg.norm(start) > 0 and lambda_contains(problem, start):
        return max(1, problem.dim) * start / np.linalg.norm(start)
    raise OutsideLambda(start)


def minimize_F(problem, v0=None, tol=DEFAULT_TOL, max_iterations=MAX_ITERATIONS):
    """Damped Newton for the unique minimiser of F on Lambda"""
    log = problem.logger
    v = initial_point(problem) if v0 is None else as_vector(v0, problem.dim).copy()
    if not lambda_contains(problem, v):
        raise OutsideLambda(v)

    path = []
    step = 0.0
    for iteration in range(max_iterations + 1):
        value, gradient, hessian = F_eval(problem, v)
        grad_norm = float(np.linalg.norm(gradient))
        path.append(TraceRow(iteration, tuple(float(c) for c in v), value, grad_norm, step))
        log.debug(f"iter {iteration}: b = {v}, F = {value:.17g}, |grad| = {grad_norm:.3e}")

        if grad_norm / value < tol:
            log.info(f"✅ converged to b_X = {v} in {iteration} iterations")
            return SolitonVectorResult(v, grad_norm, float(np.linalg.cond(hessian)), iteration, value, path)
        if iteration == max_iterations:
            break

        try:
            factor = cho_factor(hessian)
        except LinAlgError as e:
            raise HessianNotPD(v, np.linalg.eigvalsh(hessian)) from e
        direction = -cho_solve(factor, gradient)
        slope = float(gradient @ direction)
        flat = -slope < FLAT_DECREASE * abs(value)

        # Backtracking: halve until inside Lambda and F strictly decreases (Armijo)
        step = 1.0
        for _ in range(MAX_BACKTRACKS):
            trial = v + step * direction
            if lambda_contains(problem, trial):
                trial_value, trial_gradient, _ = F_eval(problem, trial)
                if flat:
                    if np.linalg.norm(trial_gradient) < (1.0 - ARMIJO_C * step) * grad_norm:
                        break
                elif trial_value < value and trial_value <= value + ARMIJO_C * step * slope:
                    break
            step *= 0.5
        else:
            raise LineSearchFailure(f"no acceptable step from b = {v}")
        v = trial

    raise MaxIterations(f"no convergence after {max_iterations} iterations (|grad| = {grad_norm:.3e})")


def soliton_vector_field(fan, prefactor="1", tol=DEFAULT_TOL):
    """b_X of the toric manifold with fan `fan`"""
    problem = WeightedVolumeProblem(anticanonical_polyhedron(fan), prefactor)
    return minimize_F(problem, tol=tol)


# ---------------- Closed-form oracles ----------------
def flagship_closed_form(b1, b2):
    """Weighted volume of {x1 >= -1, -1 <= x2 <= 1, x1 + x2 >= -1} at (b1, b2)"""
    return (
        math.exp(b1) / ((b1 - b2) * b2)
        + math.exp(b2) / ((b2 - b1) * b1)
        - math.exp(b1 - b2) / (b1 * b2)
    )


def flagship_root_equation(b):
    """Critical-point equation on the symmetry line b1 = 2 b2"""
    return 2.0 * (b - 1.0) * math.exp(b) - (b - 2.0)


def refine_root_1d():
    """Bisection for the positive root of 2(b-1)e^b = b - 2 on [0.5, 0.8]"""
    return bisect(flagship_root_equation, 0.5, 0.8, xtol=1e-13)
