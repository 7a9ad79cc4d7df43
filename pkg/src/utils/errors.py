"""
errors.py - Exception hierarchy shared by all toolkit modules.

Every error carries the process exit code that main.py reports for it:
  0 success, 1 verification failure, 2 optimisation domain error,
  3 continuation failure, 64 configuration/input parse error (including
  invalid geometry read from input files).
"""


class ToricError(Exception):
    """Root of all toolkit errors"""
    exit_code = 1


# ---------------- Configuration ----------------
class ConfigError(ToricError):
    exit_code = 64


class VerificationFailure(ToricError):
    """A named acceptance check missed its tolerance"""

    def __init__(self, check, detail=""):
        self.check = check
        super().__init__(f"{check} failed" + (f": {detail}" if detail else ""))


# ---------------- Lattice geometry ----------------
class GeometryError(ToricError):
    """Invalid lattice geometry; exit 1 unless raised while parsing input"""
    exit_code = 1


class NotPrimitive(GeometryError):
    pass


class RedundantHalfSpace(GeometryError):
    pass


class NotSimple(GeometryError):
    def __init__(self, vertex, facets):
        self.vertex = vertex
        self.facets = facets
        super().__init__(f"vertex {vertex} lies on {len(facets)} facets {facets}")


class EmptyPolyhedron(GeometryError):
    pass


class InvalidFan(GeometryError):
    pass


class NotAConeOfFan(GeometryError):
    pass


class NotSmoothCone(GeometryError):
    pass


class OnBoundary(GeometryError):
    pass


# ---------------- Exponential integrals ----------------
class IntegralError(ToricError):
    exit_code = 2


class Divergent(IntegralError):
    pass


class NonGeneric(IntegralError):
    pass


class TruncationTooSmall(IntegralError):
    exit_code = 1


class DivergentMeasure(IntegralError):
    exit_code = 3


# ---------------- Optimisation ----------------
class OptimizationError(ToricError):
    exit_code = 2


class OutsideLambda(OptimizationError):
    def __init__(self, point):
        self.point = tuple(point)
        super().__init__(f"v = {self.point} is outside the cone Lambda")


class HessianNotPD(OptimizationError):
    def __init__(self, point, eigenvalues=None):
        self.point = tuple(point)
        self.eigenvalues = eigenvalues
        super().__init__(f"hessian not positive definite at b = {self.point}")


class MaxIterations(OptimizationError):
    pass


class LineSearchFailure(OptimizationError):
    pass


# ---------------- Grid functions / Legendre ----------------
class GridError(ToricError):
    exit_code = 1


class NotConvex(GridError):
    pass


class BoundaryBehaviorViolated(GridError):
    pass


# ---------------- Continuity path ----------------
class ContinuationError(ToricError):
    exit_code = 3

    def __init__(self, message, s=None, monitors=None):
        self.s = s
        self.monitors = dict(monitors or {})
        self.last_good_s = None
        super().__init__(message)


class NewtonDiverged(ContinuationError):
    pass


class PositivityLoss(ContinuationError):
    pass
