"""
functionals.py - Weighted energies along potential paths.

    I(psi)   = sum psi (dmu0 - dmu_psi)
    J(path)  = int_0^1 sum psi_t' (dmu0 - dmu_{psi_t}) dt
    F-hat    = 2 int_P (u1 - u0) exp(-<b, x>) dx           (polytope side)
             = J - sum psi dmu0                            (Kahler side)

Measures are the discrete cell masses of the model's scheme, so for n = 1 the
one-form psi' -> sum psi' (dmu0 - dmu_psi) is exactly closed and J does not
depend on the path.
"""

import math

import numpy as np
from scipy.integrate import trapezoid

from src.potentials.grid import GridFunction
from src.utils.errors import DivergentMeasure, GridError
from src.utils.logger import setup_logger

logger = setup_logger("functionals")

GAUSS_NODES = 32


def _values(psi):
    if isinstance(psi, GridFunction):
        return psi.values.reshape(-1)
    return np.asarray(psi, dtype=float).reshape(-1)


def _reference_masses(model):
    return np.exp(model.scheme.log_mass0)


def _masses(model, psi):
    masses = model.scheme.masses(psi)
    if not np.all(np.isfinite(masses)):
        raise DivergentMeasure("weighted measure of psi is not finite")
    return masses


def linear_path(psi):
    """t -> (t psi, psi)"""
    end = _values(psi)
    return lambda t: (t * end, end)


def quadratic_path(psi):
    """t -> (t^2 psi, 2 t psi)"""
    end = _values(psi)
    return lambda t: (t * t * end, 2.0 * t * end)


def functional_I(model, psi):
    """sum psi (dmu0 - dmu_psi)"""
    values = _values(psi)
    masses0 = _reference_masses(model)
    return model.prefactor * math.fsum(values * (masses0 - _masses(model, values)))


def functional_J(model, path, nodes=GAUSS_NODES):
    """Gauss-Legendre quadrature in t of sum psi_t' (dmu0 - dmu_t); path(t) -> (psi_t, psi_t')"""
    if isinstance(path, (GridFunction, np.ndarray)):
        path = linear_path(path)
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    masses0 = _reference_masses(model)
    total = []
    for tk, wk in zip(t, w):
        psi_t, dpsi_t = path(float(tk))
        dpsi_t = _values(dpsi_t)
        total.append(wk * math.fsum(dpsi_t * (masses0 - _masses(model, _values(psi_t)))))
    return model.prefactor * math.fsum(total)


def functional_Fhat_kahler(model, path, nodes=GAUSS_NODES):
    """J(path) - sum psi_1 dmu0 for a path starting at psi = 0"""
    if isinstance(path, (GridFunction, np.ndarray)):
        path = linear_path(path)
    end = _values(path(1.0)[0])
    masses0 = _reference_masses(model)
    return functional_J(model, path, nodes) - model.prefactor * math.fsum(end * masses0)


def functional_Fhat(u0, u1, b, prefactor=1.0):
    """2 int (u1 - u0) exp(-<b, x>) dx over the valid nodes of two polytope-side samples"""
    if u0.domain_tag != "x" or u1.domain_tag != "x":
        raise GridError("functional_Fhat expects polytope-side functions")
    if u0.grid != u1.grid:
        raise GridError("u0 and u1 must share a grid")
    b = np.atleast_1d(np.asarray(b, dtype=float))
    nodes = u0.nodes()
    mask = u0.mask & u1.mask
    density = np.where(mask, (u1.values - u0.values) * np.exp(-(nodes @ b)), 0.0)
    if not np.all(np.isfinite(density)):
        raise DivergentMeasure("F-hat integrand is not finite")
    if u0.dim == 1:
        idx = np.flatnonzero(mask)
        if idx.size and np.any(np.diff(idx) != 1):
            raise GridError("1D samples must be valid on one interval")
        x = u0.grid.axes()[0][idx]
        integral = trapezoid(density[idx], x)
    else:
        integral = u0.grid.cell_volume * math.fsum(density[mask])
    return 2.0 * prefactor * float(integral)
