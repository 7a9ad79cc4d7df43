"""
verify_suites.py - Named verification suites for the verify command.

Each suite adds results and named checks to a Report; cmd_verify fails on the
first check that misses its tolerance.
"""

import numpy as np

from src.geometry.lattice import Fan, HalfSpace, Polyhedron, anticanonical_polyhedron, blowup_cone, box, half_line
from src.integrals.exp_integrals import brion_eval
from src.integrals.quadrature import quadrature_oracle
from src.potentials.grid import Grid, GridFunction
from src.potentials.legendre import legendre_transform
from src.soliton.model import hamiltonian_potential, rho_u, soliton_residual_xi
from src.soliton.weighted_volume import flagship_closed_form
from src.utils.errors import ConfigError
from src.utils.logger import setup_logger

logger = setup_logger("verify_suites")

FD_STEP = 1e-5
CLOSED_FORM_POINTS = 20
CLOSED_FORM_TOL = 1e-12


# ---------------- Test geometry ----------------
def unit_simplex():
    return Polyhedron(2, (HalfSpace((1, 0), 0), HalfSpace((0, 1), 0), HalfSpace((-1, -1), 1)))


def flagship_polyhedron():
    """Anticanonical polytope of C x P^1 blown up at the fixed point of the cone <e1, e2>"""
    return anticanonical_polyhedron(blowup_cone(Fan.c_times_projective_line(), (0, 1)))


ORACLE_CASES = {
    "unit_simplex": (unit_simplex, (0.7, 1.3)),
    "square": (lambda: box(2), (0.3, -0.4)),
    "half_line": (half_line, (1.5,)),
    "flagship": (flagship_polyhedron, (1.2, 0.5)),
}


def gaussian_potential(xi):
    return np.exp(2.0 * xi) / 4.0 - xi - 0.5


def gaussian_symplectic(x):
    """Legendre dual of the Gaussian potential on [-1, inf)"""
    return 0.5 * (x + 1.0) * np.log(2.0 * (x + 1.0)) - 0.5 * x


def _sup(values):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(np.abs(values).max()) if values.size else 0.0


# ---------------- gaussian_xi ----------------
def suite_gaussian_xi(config, report):
    """Residual of the Gaussian soliton with exact and finite-difference derivatives"""
    h = float(config.flags["grid_h"] or 1e-3)
    grid = Grid.covering(-5.0, 4.0, h)
    phi = GridFunction.on_grid(gaussian_potential, grid)
    xi = grid.axes()[0]
    e2 = np.exp(2.0 * xi)
    # At h = 1e-3 rounding in double phi swamps phi'' = e^{-10} near xi = -5
    extended = GridFunction.on_grid(gaussian_potential, grid, dtype=np.longdouble)

    exact = soliton_residual_xi(phi, 1.0, gradient=(e2 / 2.0 - 1.0)[:, None], hessian=e2[:, None, None])
    fd = soliton_residual_xi(extended, 1.0, order=4)
    report.add("residual_exact", exact.sup_norm())
    report.add("residual_fd", fd.sup_norm())
    report.check("residual_exact", exact.sup_norm() < 1e-9, f"{exact.sup_norm():.3e}")
    report.check("residual_fd", fd.sup_norm() < 1e-5, f"{fd.sup_norm():.3e} at h = {h:g}")

    quad_grid = Grid.covering(-3.0, 3.0, 0.01)
    quadratic = GridFunction.on_grid(lambda t: 0.5 * t * t, quad_grid)
    gap = _sup(soliton_residual_xi(quadratic, 0.0).values - quad_grid.axes()[0] ** 2)
    report.check("quadratic_residual", gap < 1e-8, f"{gap:.3e}")

    hamiltonian = hamiltonian_potential(phi, 1.0, gradient=(e2 / 2.0 - 1.0)[:, None])
    at_zero = float(hamiltonian.values[int(np.argmin(np.abs(xi)))])
    report.add("hamiltonian_at_0", at_zero)
    report.check("hamiltonian_normalisation", abs(at_zero + 0.5) < 1e-12, f"{at_zero:.17g}")
    report.check("hamiltonian_bounded_below", hamiltonian.valid_values().min() > -1.0)


# ---------------- gaussian_polytope ----------------
def suite_gaussian_polytope(config, report):
    """rho_u on the polytope side, and the Legendre round trip of the Gaussian soliton"""
    h = float(config.flags["grid_h"] or 1e-3)
    grid = Grid.covering(-0.9 - 2 * h, 10.0 + 2 * h, h)
    u = GridFunction.on_grid(gaussian_symplectic, grid, "x")
    x = grid.axes()[0]
    rho = rho_u(u, order=4)
    inside = (x >= -0.9 - 1e-12) & (x <= 10.0 + 1e-12)
    gap = _sup((rho.values - x)[inside])
    report.add("rho_gap", gap)
    report.check("rho_identity", gap < 1e-6, f"{gap:.3e} at h = {h:g}")

    shifted = rho_u(u.with_values(u.values + 0.3), order=4)
    shift_gap = _sup((shifted.values - (x - 0.6))[inside])
    report.check("rho_constant_shift", shift_gap < 1e-6, f"{shift_gap:.3e}")

    quad_grid = Grid.covering(-2.0, 2.0, 0.01)
    quadratic = GridFunction.on_grid(lambda t: 0.5 * t * t, quad_grid, "x")
    quad_gap = _sup(rho_u(quadratic).values - quad_grid.axes()[0] ** 2)
    report.check("rho_quadratic", quad_gap < 1e-8, f"{quad_gap:.3e}")

    # Round trip: rho_{L(phi)} - x equals R(phi) pushed forward by the gradient map
    xi_grid = Grid.covering(-1.0, 1.5, 1e-4)
    phi = GridFunction.on_grid(gaussian_potential, xi_grid)
    residual = soliton_residual_xi(phi, 1.0)
    x_grid = Grid.covering(-0.5, 3.0, 0.05)
    dual = legendre_transform(phi, grid=x_grid)
    rho_dual = rho_u(dual)
    xi_of_x = dual.gradient()[..., 0]
    valid = np.isfinite(rho_dual.values) & np.isfinite(xi_of_x)
    pushed = np.interp(xi_of_x[valid], residual.valid_nodes()[:, 0], residual.valid_values())
    round_trip = _sup(rho_dual.values[valid] - x_grid.axes()[0][valid] - pushed)
    report.add("round_trip_gap", round_trip)
    report.check("round_trip", round_trip < x_grid.spacing[0], f"{round_trip:.3e}")


# ---------------- brion_vs_oracle ----------------
def _fd_derivatives(polyhedron, b):
    n = len(b)
    gradient = np.zeros(n)
    hessian = np.zeros((n, n))
    for k in range(n):
        step = np.zeros(n)
        step[k] = FD_STEP
        plus = brion_eval(polyhedron, b + step)
        minus = brion_eval(polyhedron, b - step)
        gradient[k] = (plus.value - minus.value) / (2 * FD_STEP)
        hessian[:, k] = (plus.gradient - minus.gradient) / (2 * FD_STEP)
    return gradient, hessian


def _relative(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def suite_brion_vs_oracle(config, report):
    """Brion sums against the quadrature oracle, finite differences and the closed form"""
    tol = config.tolerances["verify"]
    R = float(config.flags["truncation_R"])
    cells = int(config.flags["cells"])
    for name, (build, b) in ORACLE_CASES.items():
        P = build()
        vec = np.array(b, dtype=float)
        exact = brion_eval(P, vec)
        oracle = quadrature_oracle(P, vec, truncation=R, cells_per_axis=cells, tol=tol)
        gap = abs(exact.value - oracle.value) / abs(oracle.value)
        report.add(f"{name}_brion", exact.value)
        report.add(f"{name}_oracle", oracle.value)
        report.check(f"{name}_oracle", gap < tol, f"relative gap {gap:.3e}")

        gradient, hessian = _fd_derivatives(P, vec)
        report.check(f"{name}_gradient", _relative(exact.gradient, gradient) < 1e-6)
        report.check(f"{name}_hessian", _relative(exact.hessian, hessian) < 1e-6)

    P = flagship_polyhedron()
    rng = np.random.default_rng(2024)
    worst = 0.0
    worst_symmetry = 0.0
    for _ in range(CLOSED_FORM_POINTS):
        b1 = rng.uniform(0.5, 3.0)
        b2 = b1 * rng.uniform(0.15, 0.85)
        value = brion_eval(P, (b1, b2)).value
        mirrored = brion_eval(P, (b1, b1 - b2)).value
        worst = max(worst, abs(value - flagship_closed_form(b1, b2)) / abs(value))
        worst_symmetry = max(worst_symmetry, abs(value - mirrored) / abs(value))
    report.add("closed_form_gap", worst)
    report.add("symmetry_gap", worst_symmetry)
    report.check("closed_form", worst < CLOSED_FORM_TOL, f"{worst:.3e}")
    report.check("symmetry", worst_symmetry < CLOSED_FORM_TOL, f"{worst_symmetry:.3e}")


# ---------------- legendre_involution ----------------
def involution_gap(f, window=None):
    """sup |L(L(f)) - f| over nodes whose gradient lies inside the dual grid (and the window)"""
    dual = legendre_transform(f)
    back = legendre_transform(dual, grid=f.grid)
    lo = dual.grid.origin[0] + dual.spacing[0]
    hi = dual.grid.origin[0] + dual.spacing[0] * (dual.grid.shape[0] - 2)
    slope = f.gradient()[..., 0]
    inner = np.isfinite(slope) & (slope >= lo) & (slope <= hi)
    xi = f.grid.axes()[0]
    if window is not None:
        inner &= (xi >= window[0] - 1e-12) & (xi <= window[1] + 1e-12)
    return _sup((back.values - f.values)[inner]), dual, (float(xi[inner].min()), float(xi[inner].max()))


def suite_legendre_involution(config, report):
    """L(L(f)) = f for the quadratic and the Gaussian potential, first order in h"""
    cases = {
        "quadratic": (lambda t: 0.5 * t * t, -3.0, 3.0),
        "gaussian": (gaussian_potential, -3.0, 2.0),
    }
    for name, (fn, lo, hi) in cases.items():
        gaps = {}
        window = None
        # The coarse grid fixes the comparison window for the finer one
        for h in (0.02, 0.01):
            f = GridFunction.on_grid(fn, Grid.covering(lo, hi, h))
            gap, dual, inner_window = involution_gap(f, window)
            window = window or inner_window
            gaps[h] = gap
            report.add(f"{name}_gap_h{h:g}", gap)
            report.check(f"{name}_involution_h{h:g}", gap < 10 * h, f"{gap:.3e}")
            if name == "quadratic":
                x = dual.grid.axes()[0]
                self_dual = _sup(dual.values - 0.5 * x * x)
                report.check(f"quadratic_self_dual_h{h:g}", self_dual < h * h, f"{self_dual:.3e}")
        report.check(f"{name}_first_order", gaps[0.01] <= 0.5 * gaps[0.02] + 1e-12,
                     f"{gaps[0.02]:.3e} -> {gaps[0.01]:.3e}")


SUITES = {
    "gaussian_xi": suite_gaussian_xi,
    "gaussian_polytope": suite_gaussian_polytope,
    "brion_vs_oracle": suite_brion_vs_oracle,
    "legendre_involution": suite_legendre_involution,
}


def run_suite(case, config, report):
    try:
        suite = SUITES[case]
    except KeyError as e:
        raise ConfigError(f"unknown verification case {case!r}") from e
    logger.info(f"running verification suite {case}")
    suite(config, report)
    return report
