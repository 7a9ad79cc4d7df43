"""
discretization.py - Discrete toric Monge-Ampere operators for the continuity path.

Both schemes solve, for the perturbation psi of phi = phi0 + psi/2,

    log det(phi_ij) - <b, grad phi>  -  (same for phi0)  =  F_s

together with the side condition that psi has mean zero for the reference
measure dmu0 = exp(-<b, grad phi0>) det(phi0_ij) dxi.

CellMeasureScheme1D
    Unknowns are the face increments p_k of grad(psi)/2 between neighbouring nodes.
    Cell i carries the exact mass m_i = int exp(-b x) dx between its gradient faces,
    so sum(m_i) telescopes and the weighted mass is conserved exactly. The boundary
    faces stay at their reference positions (zero flux).

CentralScheme2D
    Unknowns are nodal psi values plus a Lagrange multiplier. Central differences
    with ghost-node reflection (zero normal derivative); the multiplier absorbs the
    O(h^2) compatibility defect of the discrete measure.
"""

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.special import logsumexp

from src.utils.errors import NewtonDiverged, NotConvex
from src.utils.logger import setup_logger

SMALL_U = 1e-4
LARGE_U = 0.5


# ---------------- log(sinh(u)/u) ----------------
def log_sinhc(u):
    """log(sinh(u)/u), stable for every real u"""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    safe = np.where(a < SMALL_U, 1.0, a)
    big = safe + np.log(-np.expm1(-2.0 * safe)) - np.log(2.0 * safe)
    return np.where(a < SMALL_U, u * u / 6.0 - u ** 4 / 180.0, big)


def log_mass_change(u0, r):
    """log1p(r) + log_sinhc(u0 (1 + r)) - log_sinhc(u0)"""
    u0 = np.asarray(u0, dtype=float)
    a0 = np.abs(u0)
    direct = np.log1p(r) + log_sinhc(u0 * (1.0 + r)) - log_sinhc(u0)
    # For |u0| large the log1p terms cancel analytically
    safe = np.where(a0 > LARGE_U, a0, 1.0)
    far = (
        safe * r
        + np.log(-np.expm1(-2.0 * safe * (1.0 + r)))
        - np.log(-np.expm1(-2.0 * safe))
    )
    return np.where(a0 > LARGE_U, far, direct)


def face_sensitivities(u, d):
    """d log m / d X_right and -d log m / d X_left for a cell of width d"""
    lsc = log_sinhc(u)
    log_d = np.log(d)
    return np.exp(-u - log_d - lsc), np.exp(u - log_d - lsc)


def _solve(matrix, rhs, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            sol = spsolve(matrix.tocsc(), rhs)
        except RuntimeError as e:
            raise NewtonDiverged(f"singular Newton system: {e}", s=s) from e
    if not np.all(np.isfinite(sol)):
        raise NewtonDiverged("singular Newton system", s=s)
    return sol


# ---------------- 1D cell-measure scheme ----------------
class CellMeasureScheme1D:
    """Exactly conservative 1D scheme on gradient faces"""

    def __init__(self, model):
        self.logger = setup_logger("CellMeasureScheme1D")
        self.b = float(model.b[0])
        self.h = float(model.grid.spacing[0])
        phi = model.phi0.values
        self.size = len(phi)

        faces = np.empty(self.size + 1)
        faces[0] = model.grad0[0, 0]
        faces[-1] = model.grad0[-1, 0]
        faces[1:-1] = np.diff(phi) / self.h
        self.faces0 = faces
        self.d0 = np.diff(faces)
        if np.any(self.d0 <= 0):
            raise NotConvex("reference potential is not strictly convex on the grid")
        self.u0 = 0.5 * self.b * self.d0
        self.log_mass0 = -self.b * (faces[:-1] + 0.5 * self.d0) + np.log(self.d0) + log_sinhc(self.u0)
        self.weights0 = np.exp(self.log_mass0 - logsumexp(self.log_mass0))

    # state = face increments p_1 .. p_{M-1}
    def zero_state(self):
        return np.zeros(self.size - 1)

    def _increments(self, state):
        return np.concatenate(([0.0], state, [0.0]))

    def relative_widths(self, state):
        """r_i = (d_i - d0_i) / d0_i; the metric stays positive iff r > -1"""
        return np.diff(self._increments(state)) / self.d0

    def admissible(self, state):
        r = self.relative_widths(state)
        return bool(np.all(np.isfinite(r)) and np.all(r > -1.0))

    def log_mass(self, state):
        dX = self._increments(state)
        r = np.diff(dX) / self.d0
        mid = 0.5 * (dX[:-1] + dX[1:])
        return self.log_mass0 - self.b * mid + log_mass_change(self.u0, r)

    def residual(self, state, F_s):
        return self.log_mass(state) - self.log_mass0 - F_s

    def equation_residual(self, state, F_s):
        return self.residual(state, F_s)

    def newton_step(self, state, residual, s=None):
        """Bordered Newton direction; the multiplier column is the current mass vector"""
        r = self.relative_widths(state)
        d = self.d0 * (1.0 + r)
        right, left = face_sensitivities(0.5 * self.b * d, d)
        M = self.size

        rows = np.concatenate([np.arange(1, M), np.arange(0, M - 1)])
        cols = np.concatenate([np.arange(0, M - 1), np.arange(0, M - 1)])
        vals = np.concatenate([-left[1:], right[:-1]])
        scale = np.zeros(M)
        np.maximum.at(scale, rows, np.abs(vals))
        scale = 1.0 / np.where(scale > 0, scale, 1.0)

        log_m = self.log_mass(state)
        column = scale * np.exp(log_m - log_m.max())
        column /= np.linalg.norm(column)

        J = sp.coo_matrix((vals * scale[rows], (rows, cols)), shape=(M, M - 1))
        A = sp.hstack([J, sp.csr_matrix(column[:, None])])
        sol = _solve(A, -scale * residual, s)
        return sol[:-1]

    def advance(self, state, direction, step):
        return state + step * direction

    def psi(self, state):
        """Node values of psi with dmu0-mean zero"""
        psi = np.concatenate(([0.0], np.cumsum(2.0 * self.h * state)))
        return psi - float(self.weights0 @ psi)

    def gradient_psi(self, state):
        """grad psi on interior faces"""
        return 2.0 * state

    def multiplier(self, state):
        return 0.0

    def monitors(self, state):
        psi = self.psi(state)
        x_psi = self.b * self.gradient_psi(state)
        ddbar = np.abs(self.relative_widths(state))
        return {
            "sup_psi": float(psi.max()),
            "inf_psi": float(psi.min()),
            "inf_Xpsi": float(x_psi.min()) if x_psi.size else 0.0,
            "sup_Xpsi": float(x_psi.max()) if x_psi.size else 0.0,
            "sup_ddbar": float(ddbar.max()),
        }

    def state_from_psi(self, psi):
        """Face increments of an arbitrary node vector psi"""
        return np.diff(np.asarray(psi, dtype=float)) / (2.0 * self.h)

    def masses(self, psi):
        return np.exp(self.log_mass(self.state_from_psi(psi)))


# ---------------- 2D central scheme ----------------
def _neumann_first(m, h):
    main = np.zeros(m)
    upper = np.full(m - 1, 0.5 / h)
    lower = np.full(m - 1, -0.5 / h)
    # Reflected ghosts cancel the boundary rows
    upper[0] = 0.0
    lower[-1] = 0.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def _neumann_second(m, h):
    main = np.full(m, -2.0 / h ** 2)
    upper = np.full(m - 1, 1.0 / h ** 2)
    lower = np.full(m - 1, 1.0 / h ** 2)
    upper[0] = 2.0 / h ** 2
    lower[-1] = 2.0 / h ** 2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


class CentralScheme2D:
    """Central differences with reflection and a compatibility multiplier"""

    def __init__(self, model):
        self.logger = setup_logger("CentralScheme2D")
        self.b = np.asarray(model.b, dtype=float)
        K, L = model.grid.shape
        hx, hy = model.grid.spacing
        self.shape = (K, L)
        self.size = K * L
        self.cell = hx * hy
        Ix, Iy = sp.identity(K, format="csr"), sp.identity(L, format="csr")
        self.Dx = sp.kron(_neumann_first(K, hx), Iy, format="csr")
        self.Dy = sp.kron(Ix, _neumann_first(L, hy), format="csr")
        self.Dxx = sp.kron(_neumann_second(K, hx), Iy, format="csr")
        self.Dyy = sp.kron(Ix, _neumann_second(L, hy), format="csr")
        self.Dxy = sp.kron(_neumann_first(K, hx), _neumann_first(L, hy), format="csr")

        self.grad0 = model.grad0.reshape(-1, 2)
        self.hess0 = model.hess0.reshape(-1, 2, 2)
        self.logdet0 = np.log(np.linalg.det(self.hess0))
        self.log_mass0 = -(self.grad0 @ self.b) + self.logdet0 + np.log(self.cell)
        self.weights0 = np.exp(self.log_mass0 - logsumexp(self.log_mass0))

    # state = (psi flattened, multiplier)
    def zero_state(self):
        return np.zeros(self.size + 1)

    def _metric(self, psi):
        A = self.hess0.copy()
        A[:, 0, 0] += 0.5 * (self.Dxx @ psi)
        A[:, 1, 1] += 0.5 * (self.Dyy @ psi)
        mixed = 0.5 * (self.Dxy @ psi)
        A[:, 0, 1] += mixed
        A[:, 1, 0] += mixed
        return A

    def admissible(self, state):
        A = self._metric(state[:-1])
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] ** 2
        return bool(np.all(np.isfinite(det)) and np.all(det > 0) and np.all(A[:, 0, 0] > 0))

    def log_mass(self, state):
        psi = state[:-1]
        A = self._metric(psi)
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] ** 2
        grad = self.grad0 + 0.5 * np.stack([self.Dx @ psi, self.Dy @ psi], axis=1)
        return -(grad @ self.b) + np.log(det) + np.log(self.cell)

    def residual(self, state, F_s):
        psi, lam = state[:-1], state[-1]
        G = self.log_mass(state) - self.log_mass0 - F_s.reshape(-1) + lam * self.weights0
        return np.concatenate([G, [self.weights0 @ psi]])

    def equation_residual(self, state, F_s):
        """Defect of the discrete equation itself, without the multiplier term"""
        return self.log_mass(state) - self.log_mass0 - F_s.reshape(-1)

    def newton_step(self, state, residual, s=None):
        A = self._metric(state[:-1])
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] ** 2
        inv00, inv11, inv01 = A[:, 1, 1] / det, A[:, 0, 0] / det, -A[:, 0, 1] / det
        J = (
            sp.diags(0.5 * inv00) @ self.Dxx
            + sp.diags(inv01) @ self.Dxy
            + sp.diags(0.5 * inv11) @ self.Dyy
            - 0.5 * self.b[0] * self.Dx
            - 0.5 * self.b[1] * self.Dy
        )
        column = sp.csr_matrix(self.weights0[:, None])
        row = sp.csr_matrix(self.weights0[None, :])
        bordered = sp.bmat([[J, column], [row, None]], format="csc")
        return _solve(bordered, -residual, s)

    def advance(self, state, direction, step):
        trial = state + step * direction
        # Re-centre: constants are in the kernel of the operator
        trial[:-1] -= self.weights0 @ trial[:-1]
        return trial

    def psi(self, state):
        return state[:-1].reshape(self.shape)

    def gradient_psi(self, state):
        psi = state[:-1]
        return np.stack([self.Dx @ psi, self.Dy @ psi], axis=1)

    def multiplier(self, state):
        return float(state[-1])

    def monitors(self, state):
        psi = state[:-1]
        x_psi = self.gradient_psi(state) @ self.b
        hess_psi = self._metric(psi) - self.hess0
        # Eigenvalues of (1/2) phi0^{-1} psi_ij relative to the reference metric
        rel = np.linalg.solve(self.hess0, hess_psi)
        ddbar = np.abs(np.linalg.eigvals(rel)).max()
        return {
            "sup_psi": float(psi.max()),
            "inf_psi": float(psi.min()),
            "inf_Xpsi": float(x_psi.min()),
            "sup_Xpsi": float(x_psi.max()),
            "sup_ddbar": float(ddbar),
        }

    def state_from_psi(self, psi):
        return np.concatenate([np.asarray(psi, dtype=float).reshape(-1), [0.0]])

    def masses(self, psi):
        return np.exp(self.log_mass(self.state_from_psi(psi)))


def make_scheme(model):
    """Discretisation matching the model dimension"""
    if model.n == 1:
        return CellMeasureScheme1D(model)
    if model.n == 2:
        return CentralScheme2D(model)
    raise NotConvex(f"no discretisation for n = {model.n}")
