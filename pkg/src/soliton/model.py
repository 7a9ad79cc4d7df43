"""
model.py - Torus-invariant models and the toric soliton equation on both sides.

On the Lie-algebra side a potential phi solves the shrinking soliton equation iff

    R(xi) = log det(phi_ij) + 2 phi - <b, grad phi> = 0,

and on the polytope side its Legendre transform u satisfies rho_u(x) = <b, x> with

    rho_u(x) = 2 (<grad u, x> - u(x)) - log det(u_ij).

A TorusModel carries a reference potential phi0 on a xi-grid, its exact gradient
and hessian, and the data F_ref = -log det(phi0_ij) + <grad phi0, b> - 2 phi0.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from src.geometry.lattice import half_line, product_polyhedron
from src.potentials.grid import Grid, GridFunction
from src.potentials.legendre import facet_slacks
from src.soliton.discretization import make_scheme
from src.soliton.weighted_volume import resolve_prefactor
from src.utils.errors import DivergentMeasure, GeometryError, GridError, NotConvex
from src.utils.logger import setup_logger

logger = setup_logger("model")

GAUSSIAN_SPAN = (-8.0, 6.0)
GAUSSIAN_H = 0.01
POLYHEDRON_SPAN = (-3.0, 2.0)
POLYHEDRON_H = 0.25
DUAL_TOL = 1e-12
DUAL_MAX_ITERATIONS = 100


def _det(hess):
    if hess.shape[-1] == 1:
        return hess[..., 0, 0]
    return hess[..., 0, 0] * hess[..., 1, 1] - hess[..., 0, 1] * hess[..., 1, 0]


def _log_det(hess, what):
    det = _det(hess)
    finite = np.isfinite(det)
    if np.any(det[finite] <= 0):
        raise NotConvex(f"{what} has a non-positive hessian determinant")
    out = np.full(det.shape, np.nan)
    out[finite] = np.log(det[finite])
    return out


# ---------------- TorusModel ----------------
@dataclass
class TorusModel:
    """Reference potential phi0 with its moment polyhedron and vector field"""
    polyhedron: object
    b: np.ndarray
    phi0: GridFunction
    grad0: np.ndarray
    hess0: np.ndarray
    prefactor: float = 1.0
    name: str = "model"
    F_ref: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        self.logger = setup_logger("TorusModel")
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.b.shape != (self.n,):
            raise GridError(f"b has shape {self.b.shape}, expected ({self.n},)")
        if self.polyhedron.dim != self.n:
            raise GeometryError("polyhedron and grid dimensions differ")
        self.grad0 = np.asarray(self.grad0, dtype=float).reshape(self.grid.shape + (self.n,))
        self.hess0 = np.asarray(self.hess0, dtype=float).reshape(self.grid.shape + (self.n, self.n))
        logdet = _log_det(self.hess0, "reference potential")
        if not np.all(np.isfinite(logdet)):
            raise NotConvex("reference hessian is not finite on the grid")
        if not np.all(self.polyhedron.contains_points(self.grad0)):
            raise GeometryError("reference gradient leaves the moment polyhedron")
        self.F_ref = -logdet + self.grad0 @ self.b - 2.0 * self.phi0.values
        self.logger.debug(f"{self.name}: {self.grid.shape} nodes, b = {self.b}")

    # ---------------- Builders ----------------
    @classmethod
    def gaussian(cls, n=1, lo=GAUSSIAN_SPAN[0], hi=GAUSSIAN_SPAN[1], h=GAUSSIAN_H, prefactor="1"):
        """Product of the Gaussian soliton on C: phi0 = sum(e^{2 xi}/4 - xi - 1/2), b = (1, .., 1)"""
        if n not in (1, 2):
            raise GridError("the Gaussian model is built for n = 1 or 2")
        grid = Grid.covering([lo] * n, [hi] * n, h)
        xi = grid.nodes()
        e2 = np.exp(2.0 * xi)
        phi0 = GridFunction(grid, np.sum(e2 / 4.0 - xi - 0.5, axis=-1), "xi")
        hess0 = np.zeros(grid.shape + (n, n))
        for k in range(n):
            hess0[..., k, k] = e2[..., k]
        P = half_line()
        for _ in range(n - 1):
            P = product_polyhedron(P, half_line())
        return cls(P, np.ones(n), phi0, e2 / 2.0 - 1.0, hess0,
                   resolve_prefactor(prefactor, n), f"gaussian{n}d")

    @classmethod
    def from_polyhedron(cls, polyhedron, b, lo=POLYHEDRON_SPAN[0], hi=POLYHEDRON_SPAN[1],
                        h=POLYHEDRON_H, prefactor="1"):
        """Legendre dual of the Guillemin potential of P, sampled on a xi-grid"""
        n = polyhedron.dim
        grid = Grid.covering([lo] * n, [hi] * n, h)
        xi = grid.nodes().reshape(-1, n)
        x = guillemin_dual_points(polyhedron, xi)
        slack = facet_slacks(polyhedron, x)
        nu = polyhedron.normal_array
        u = 0.5 * np.sum(slack * np.log(slack), axis=-1)
        hess_u = 0.5 * np.einsum("ki,kj,nk->nij", nu, nu, 1.0 / slack)
        phi0 = np.sum(x * xi, axis=-1) - u
        return cls(
            polyhedron, b,
            GridFunction(grid, phi0.reshape(grid.shape), "xi"),
            x.reshape(grid.shape + (n,)),
            np.linalg.inv(hess_u).reshape(grid.shape + (n, n)),
            resolve_prefactor(prefactor, n),
            "guillemin",
        )

    # ---------------- Properties ----------------
    @property
    def n(self):
        return self.phi0.dim

    @property
    def grid(self):
        return self.phi0.grid

    @cached_property
    def scheme(self):
        return make_scheme(self)

    def total_mass(self):
        """Discrete weighted mass of the reference measure"""
        return float(np.exp(logsumexp(self.scheme.log_mass0)))

    def hamiltonian(self):
        return hamiltonian_potential(self.phi0, self.b, gradient=self.grad0)

    def grid_function(self, values):
        return GridFunction(self.grid, np.asarray(values, dtype=float).reshape(self.grid.shape), "xi")


def guillemin_dual_points(polyhedron, xi):
    """Solve grad u_P(x) = xi at every row of xi by damped Newton inside P"""
    nu = polyhedron.normal_array
    n = polyhedron.dim
    origin = np.zeros(n)
    if not polyhedron.contains_points(origin, strict=True):
        raise GeometryError("the origin must lie strictly inside the polyhedron")
    x = np.tile(origin, (len(xi), 1))

    def residual(pts):
        s = facet_slacks(polyhedron, pts)
        return 0.5 * (np.log(s) + 1.0) @ nu - xi, s

    g, s = residual(x)
    for iteration in range(DUAL_MAX_ITERATIONS):
        norm = np.linalg.norm(g, axis=-1)
        if norm.max() < DUAL_TOL:
            logger.debug(f"guillemin dual converged in {iteration} iterations")
            return x
        hess = 0.5 * np.einsum("ki,kj,nk->nij", nu, nu, 1.0 / s)
        step = -np.linalg.solve(hess, g[..., None])[..., 0]
        alpha = np.ones(len(x))
        active = norm >= DUAL_TOL
        for _ in range(60):
            trial = x + alpha[:, None] * step
            ts = facet_slacks(polyhedron, trial)
            inside = np.all(ts > 0, axis=-1)
            tg = np.where(inside[:, None], 0.5 * (np.log(np.where(ts > 0, ts, 1.0)) + 1.0) @ nu - xi, np.inf)
            ok = inside & (np.linalg.norm(tg, axis=-1) < norm) | ~active
            if ok.all():
                break
            alpha = np.where(ok, alpha, 0.5 * alpha)
        x = np.where((active & ok)[:, None], trial, x)
        g, s = residual(x)
    raise GridError(f"Legendre dual did not converge (|g| = {np.abs(g).max():.3e})")


# ---------------- Residuals ----------------
def soliton_residual_xi(phi, b, gradient=None, hessian=None, order=2):
    """R = log det(phi_ij) + 2 phi - <b, grad phi> on interior nodes"""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    grad = phi.gradient(order) if gradient is None else np.asarray(gradient, dtype=float)
    hess = phi.hessian(order) if hessian is None else np.asarray(hessian, dtype=float)
    grad = grad.reshape(phi.grid.shape + (phi.dim,))
    hess = hess.reshape(phi.grid.shape + (phi.dim, phi.dim))
    R = (_log_det(hess, "phi") + 2.0 * phi.values - grad @ b).astype(float)
    valid = np.isfinite(R)
    return GridFunction(phi.grid, np.where(valid, R, np.nan), "xi", valid)


def rho_u(u, x=None, order=2):
    """2 (<grad u, x> - u) - log det(u_ij); a GridFunction, or its value at the node nearest x"""
    if u.domain_tag != "x":
        raise GridError("rho_u expects a polytope-side function")
    nodes = u.nodes()
    grad = u.gradient(order)
    rho = 2.0 * (np.sum(grad * nodes, axis=-1) - u.values) - _log_det(u.hessian(order), "u")
    valid = np.isfinite(rho)
    out = GridFunction(u.grid, np.where(valid, rho, np.nan), "x", valid)
    if x is None:
        return out
    point = np.atleast_1d(np.asarray(x, dtype=float))
    index = tuple(
        int(round((c - o) / h)) for c, o, h in zip(point, u.origin, u.spacing)
    )
    if any(i < 0 or i >= m for i, m in zip(index, u.grid.shape)) or not valid[index]:
        raise GridError(f"x = {point} is not an interior node of the grid")
    return float(out.values[index])


def hamiltonian_potential(phi, b, gradient=None, order=2):
    """u_b(xi) = <grad phi(xi), b>"""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    grad = phi.gradient(order) if gradient is None else np.asarray(gradient, dtype=float)
    values = grad.reshape(phi.grid.shape + (phi.dim,)) @ b
    valid = np.isfinite(values) & phi.mask
    return GridFunction(phi.grid, np.where(valid, values, np.nan), "xi", valid)


# ---------------- Data ----------------
def gaussian_bump(model, amplitude, center=0.0, width=1.0):
    """amplitude * exp(-|xi - center|^2 / width^2) on the model grid"""
    if width <= 0:
        raise GridError("bump width must be positive")
    xi = model.grid.nodes()
    c = np.broadcast_to(np.asarray(center, dtype=float), (model.n,))
    r2 = np.sum((xi - c) ** 2, axis=-1)
    return model.grid_function(amplitude * np.exp(-r2 / width ** 2))


def normalize_data(model, F_raw):
    """(F, c0) with F = F_raw + c0 and sum (e^F - 1) dmu0 = 0 for the discrete reference measure"""
    raw = F_raw.values if isinstance(F_raw, GridFunction) else np.asarray(F_raw, dtype=float)
    raw = raw.reshape(-1)
    log_mass0 = model.scheme.log_mass0
    if raw.shape != log_mass0.shape:
        raise GridError(f"data has {raw.size} nodes, the model grid has {log_mass0.size}")
    if not np.all(np.isfinite(raw)) or not np.all(np.isfinite(log_mass0)):
        raise DivergentMeasure("weighted data integral is not finite")
    c0 = float(logsumexp(log_mass0) - logsumexp(raw + log_mass0))
    if not np.isfinite(c0):
        raise DivergentMeasure("weighted data integral is not finite")
    logger.debug(f"normalisation constant c0 = {c0:.17g}")
    return model.grid_function(raw + c0), c0


def data_path(F, s):
    """F_s = log(1 + s (e^F - 1)), computed without overflow"""
    values = F.values if isinstance(F, GridFunction) else np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.logaddexp(np.log1p(-s), np.log(s) + values)
    return out


def far_field_constant(c0, s):
    """c_s = log(1 + s (e^{c0} - 1))"""
    return float(np.log1p(s * np.expm1(c0)))
