"""
continuity.py - The s-path of the complex Monge-Ampere equation on a TorusModel.

For s on a uniform grid 0 = s_0 < ... < s_k = 1 the discrete equation

    log det(phi0 + psi/2)_ij - log det(phi0)_ij - <b, grad psi>/2 = F_s,
    F_s = log(1 + s (e^F - 1)),

is solved by damped Newton warm-started from the previous s. A step that fails is
retried on two half intervals (recursively, a bounded number of times). Every
recorded state carries the a-priori monitors sup/inf psi, inf/sup X.psi and the
sup of the complex hessian of psi relative to the reference metric.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from src.potentials.grid import GridFunction
from src.soliton.model import data_path, far_field_constant
from src.utils.errors import ContinuationError, NewtonDiverged, PositivityLoss
from src.utils.logger import setup_logger

logger = setup_logger("continuity")

NEWTON_TOL = 1e-10
MAX_NEWTON_ITERATIONS = 50
MAX_BACKTRACKS = 40
MAX_HALVINGS = 6
MONITOR_NAMES = ("sup_psi", "inf_psi", "inf_Xpsi", "sup_Xpsi", "sup_ddbar")
BOUND_FACTOR = 10.0
REFERENCE_S = 0.05
FAR_FIELD_FRACTION = 0.2
# The 2D central scheme conserves mass only up to O(h^2); its equation defect is
# |multiplier| * max(weights0) and must stay below COMPATIBILITY_FACTOR * h^2
COMPATIBILITY_FACTOR = 0.5


@dataclass
class ContinuityState:
    """Solution of the discrete equation at one value of s"""
    s: float
    psi: GridFunction
    F_s: GridFunction
    c_s: float
    residual_norm: float
    monitors: dict
    total_mass: float
    iterations: int = 0
    multiplier: float = 0.0
    system_residual: float = 0.0

    def as_row(self):
        return [self.s, self.residual_norm, self.system_residual, self.total_mass, self.c_s,
                self.multiplier, *(self.monitors[name] for name in MONITOR_NAMES), self.iterations]

    @staticmethod
    def header():
        return ["s", "residual_norm", "system_residual", "total_mass", "c_s", "multiplier",
                *MONITOR_NAMES, "iterations"]


@dataclass
class FarFieldFit:
    """psi ~ c1 log f + c2 on the outer part of the grid where f = <grad phi0, b> > 0"""
    c1: float
    c2: float
    residual: float
    constant_residual: float
    nodes: int = 0

    @property
    def improves(self):
        return self.residual < self.constant_residual


@dataclass
class ContinuityPath:
    """States on the uniform s grid plus the constants of the data"""
    states: list = field(default_factory=list)
    c0: float = 0.0

    @property
    def final(self):
        return self.states[-1]


def equation_tolerance(model, newton_tol=NEWTON_TOL):
    """Bound on residual_norm at convergence: newton_tol in 1D, O(h^2) in 2D"""
    if model.n == 1:
        return float(newton_tol)
    return max(float(newton_tol), COMPATIBILITY_FACTOR * max(model.grid.spacing) ** 2)


# ---------------- Newton ----------------
def _newton(scheme, state, F_s, s, tol, max_iterations):
    """Damped Newton from a warm start; returns (state, residual_norm, iterations)"""
    G = scheme.residual(state, F_s)
    norm = float(np.abs(G).max())
    for iteration in range(max_iterations + 1):
        if norm < tol:
            return state, norm, iteration
        if iteration == max_iterations:
            break
        direction = scheme.newton_step(state, G, s)

        step = 1.0
        admissible = False
        for _ in range(MAX_BACKTRACKS):
            trial = scheme.advance(state, direction, step)
            if scheme.admissible(trial):
                admissible = True
                trial_G = scheme.residual(trial, F_s)
                trial_norm = float(np.abs(trial_G).max())
                if np.isfinite(trial_norm) and trial_norm < norm:
                    break
            step *= 0.5
        else:
            monitors = scheme.monitors(state)
            if not admissible:
                raise PositivityLoss(f"metric positivity lost at s = {s:.6g}", s=s, monitors=monitors)
            raise NewtonDiverged(f"line search stalled at s = {s:.6g} (|G| = {norm:.3e})", s=s, monitors=monitors)
        state, G, norm = trial, trial_G, trial_norm
        logger.trace(f"s = {s:.6g} iter {iteration}: |G| = {norm:.3e}, step {step:g}")

    raise NewtonDiverged(
        f"no convergence at s = {s:.6g} after {max_iterations} iterations (|G| = {norm:.3e})",
        s=s, monitors=scheme.monitors(state),
    )


def _advance(scheme, state, F, s0, s1, tol, max_iterations, depth):
    """Solve at s1 from the solution at s0, halving the interval on failure"""
    try:
        new, norm, iterations = _newton(scheme, state, data_path(F, s1).reshape(-1), s1, tol, max_iterations)
        return new, norm, iterations
    except ContinuationError as e:
        if depth >= MAX_HALVINGS:
            raise
        logger.warning(f"⚠️ step to s = {s1:.6g} failed ({e}); halving")
    mid = 0.5 * (s0 + s1)
    state, _, first = _advance(scheme, state, F, s0, mid, tol, max_iterations, depth + 1)
    try:
        state, norm, second = _advance(scheme, state, F, mid, s1, tol, max_iterations, depth + 1)
    except ContinuationError as e:
        if e.last_good_s is None:
            e.last_good_s = mid
        raise
    return state, norm, first + second


def _record(model, scheme, state, F, c0, s, norm, iterations):
    """norm is the Newton system residual; residual_norm leaves out the 2D multiplier"""
    F_s = data_path(F, s)
    return ContinuityState(
        s=s,
        psi=model.grid_function(scheme.psi(state)),
        F_s=model.grid_function(F_s),
        c_s=far_field_constant(c0, s),
        residual_norm=float(np.abs(scheme.equation_residual(state, F_s.reshape(-1))).max()),
        monitors=scheme.monitors(state),
        total_mass=float(np.exp(logsumexp(scheme.log_mass(state)))),
        iterations=iterations,
        multiplier=scheme.multiplier(state),
        system_residual=norm,
    )


def continuity_solve(model, F, steps=20, c0=0.0, newton_tol=NEWTON_TOL,
                     max_iterations=MAX_NEWTON_ITERATIONS):
    """States at s = 0, 1/steps, ..., 1 for normalised data F"""
    if steps < 1:
        raise ContinuationError("steps must be at least 1")
    scheme = model.scheme
    values = F.values if isinstance(F, GridFunction) else np.asarray(F, dtype=float)
    values = values.reshape(model.grid.shape)

    state = scheme.zero_state()
    zero_norm = float(np.abs(scheme.residual(state, data_path(values, 0.0).reshape(-1))).max())
    path = ContinuityPath([_record(model, scheme, state, values, c0, 0.0, zero_norm, 0)], c0)

    s_grid = np.linspace(0.0, 1.0, steps + 1)
    for s0, s1 in zip(s_grid[:-1], s_grid[1:]):
        try:
            state, norm, iterations = _advance(
                scheme, state, values, float(s0), float(s1), newton_tol, max_iterations, 0,
            )
        except ContinuationError as e:
            if e.last_good_s is None:
                e.last_good_s = float(s0)
            logger.error(f"❌ continuation failed after s = {e.last_good_s:.6g}: {e}")
            raise
        path.states.append(_record(model, scheme, state, values, c0, float(s1), norm, iterations))
        logger.info(f"✅ s = {s1:.4f}: |G| = {norm:.3e} in {iterations} Newton steps")
    return path


# ---------------- Diagnostics ----------------
def conservation_drift(path):
    """max_s |M_s - M_0| / M_0 for the total weighted mass"""
    masses = np.array([state.total_mass for state in path.states])
    return float(np.abs(masses - masses[0]).max() / masses[0])


def fitted_constants(path):
    """One constant per monitor that bounds |monitor| along the whole path"""
    return {name: max(abs(state.monitors[name]) for state in path.states) for name in MONITOR_NAMES}


def monitors_bounded(path, factor=BOUND_FACTOR, reference_s=REFERENCE_S):
    """Per monitor: |m(s)|/s never exceeds factor times its value at the reference s

    The monitors vanish linearly at s = 0, so they are compared after division by s.
    """
    positive = [state for state in path.states if state.s > 0]
    if not positive:
        return {name: True for name in MONITOR_NAMES}
    reference = min(positive, key=lambda state: abs(state.s - reference_s))
    result = {}
    for name in MONITOR_NAMES:
        ref = abs(reference.monitors[name]) / reference.s
        bound = factor * ref + np.finfo(float).eps
        result[name] = all(abs(state.monitors[name]) / state.s <= bound for state in positive)
    return result


def far_field_fit(model, state, fraction=FAR_FIELD_FRACTION):
    """Least-squares fit of psi by c1 log f + c2 on the nodes with the largest f"""
    f = (model.grad0 @ model.b).reshape(-1)
    psi = state.psi.values.reshape(-1)
    candidates = np.flatnonzero((f > 0) & np.isfinite(psi))
    if candidates.size < 3:
        raise ContinuationError("too few nodes with positive hamiltonian for a far-field fit")
    cutoff = np.quantile(f[candidates], 1.0 - fraction)
    outer = candidates[f[candidates] >= cutoff]
    A = np.column_stack([np.log(f[outer]), np.ones(outer.size)])
    (c1, c2), *_ = np.linalg.lstsq(A, psi[outer], rcond=None)
    residual = float(np.linalg.norm(A @ np.array([c1, c2]) - psi[outer]))
    constant_residual = float(np.linalg.norm(psi[outer] - psi[outer].mean()))
    return FarFieldFit(float(c1), float(c2), residual, constant_residual, int(outer.size))
