"""Soliton residuals on both sides, reference data and the model builders"""

import math

import numpy as np
import pytest

from src.potentials.grid import GridFunction
from src.potentials.legendre import facet_slacks
from src.soliton.model import (
    TorusModel,
    data_path,
    far_field_constant,
    gaussian_bump,
    hamiltonian_potential,
    normalize_data,
    rho_u,
    soliton_residual_xi,
)
from src.utils.errors import DivergentMeasure, GridError


def gaussian_potential(xi):
    return np.exp(2.0 * xi) / 4.0 - xi - 0.5


def gaussian_symplectic(x):
    return 0.5 * (x + 1.0) * np.log(2.0 * (x + 1.0)) - 0.5 * x


def sup(f):
    return float(np.abs(f.valid_values()).max())


# ---------------- Lie-algebra side ----------------
def test_gaussian_residual_with_exact_derivatives():
    phi = GridFunction.sample(gaussian_potential, -5.0, 4.0, 0.01)
    xi = phi.grid.axes()[0]
    e2 = np.exp(2.0 * xi)
    R = soliton_residual_xi(phi, 1.0, gradient=e2 / 2.0 - 1.0, hessian=e2)
    assert R.mask.all()
    assert sup(R) < 1e-9


def test_gaussian_residual_with_fourth_order_stencils():
    phi = GridFunction.sample(gaussian_potential, -5.0, 4.0, 1e-3, dtype=np.longdouble)
    assert phi.hessian(order=4).dtype == np.longdouble
    R = soliton_residual_xi(phi, 1.0, order=4)
    assert R.values.dtype == np.float64
    assert not R.mask[:2].any()
    assert sup(R) < 1e-5
    # phi'' = e^{-10} at the left end, where the affine part dominates phi
    assert np.abs(R.values[2:100]).max() < 1e-5


def test_quadratic_residual():
    phi = GridFunction.sample(lambda t: 0.5 * t * t, -2.0, 2.0, 0.01)
    R = soliton_residual_xi(phi, 0.0)
    xi = phi.grid.axes()[0]
    assert np.allclose(R.values[R.mask], (xi * xi)[R.mask], atol=1e-8)


def test_perturbed_gaussian_is_not_a_soliton():
    phi = GridFunction.sample(lambda t: gaussian_potential(t) + 0.01 * np.exp(-t * t), -1.0, 3.0, 0.01)
    value = sup(soliton_residual_xi(phi, 1.0))
    assert 0.0 < value < 0.1


def test_hamiltonian(gaussian_model):
    u_b = gaussian_model.hamiltonian()
    xi = gaussian_model.grid.axes()[0]
    zero = int(np.argmin(np.abs(xi)))
    assert u_b.values[zero] == pytest.approx(-0.5, abs=1e-12)

    phi = GridFunction.sample(lambda t: 0.5 * t * t, -1.0, 1.0, 0.1)
    linear = hamiltonian_potential(phi, 1.0)
    assert np.allclose(linear.valid_values(), phi.grid.axes()[0][linear.mask], atol=1e-12)
    assert not linear.mask[0]


# ---------------- Polytope side ----------------
def test_rho_of_quadratic():
    u = GridFunction.sample(lambda t: 0.5 * t * t, -2.0, 2.0, 0.01, "x")
    rho = rho_u(u)
    x = u.grid.axes()[0]
    assert np.allclose(rho.values[rho.mask], (x * x)[rho.mask], atol=1e-8)


def test_rho_of_gaussian_symplectic_potential():
    u = GridFunction.sample(gaussian_symplectic, -0.9, 3.0, 0.01, "x")
    assert rho_u(u, 0.5, order=4) == pytest.approx(0.5, abs=1e-6)
    shifted = u.with_values(u.values + 0.25)
    assert rho_u(shifted, 0.5, order=4) == pytest.approx(0.0, abs=1e-6)


def test_rho_errors():
    u = GridFunction.sample(gaussian_symplectic, -0.9, 3.0, 0.01, "x")
    with pytest.raises(GridError):
        rho_u(u, -0.9)
    with pytest.raises(GridError):
        rho_u(u, 10.0)
    with pytest.raises(GridError):
        rho_u(u.with_values(u.values, "xi"))


# ---------------- Data ----------------
def test_reference_data_vanishes(gaussian_model):
    assert np.allclose(gaussian_model.F_ref, 0.0, atol=1e-8)


def test_reference_mass(gaussian_model):
    assert gaussian_model.total_mass() == pytest.approx(math.e, rel=1e-6)


def test_normalize_constant_data(gaussian_model):
    ones = np.ones(gaussian_model.grid.shape)
    F, c0 = normalize_data(gaussian_model, ones)
    assert c0 == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(F.values, 0.0, atol=1e-12)

    F, c0 = normalize_data(gaussian_model, np.zeros(gaussian_model.grid.shape))
    assert c0 == pytest.approx(0.0, abs=1e-12)


def test_normalized_bump_has_zero_mean(gaussian_model, bump_data):
    F, c0 = bump_data
    assert c0 < 0
    weights = gaussian_model.scheme.weights0
    assert abs(float(weights @ np.expm1(F.values))) < 1e-10


def test_normalize_errors(gaussian_model):
    with pytest.raises(GridError):
        normalize_data(gaussian_model, np.zeros(5))
    bad = np.zeros(gaussian_model.grid.shape)
    bad[3] = np.inf
    with pytest.raises(DivergentMeasure):
        normalize_data(gaussian_model, bad)


def test_data_path_endpoints(gaussian_model, bump_data):
    F, c0 = bump_data
    assert np.allclose(data_path(F, 0.0), 0.0, atol=1e-15)
    assert np.allclose(data_path(F, 1.0), F.values, atol=1e-14)
    half = data_path(F, 0.5)
    assert np.allclose(half, np.log(0.5 + 0.5 * np.exp(F.values)), atol=1e-14)
    assert far_field_constant(c0, 1.0) == pytest.approx(c0, abs=1e-14)
    assert far_field_constant(c0, 0.0) == 0.0


def test_gaussian_bump(gaussian_model):
    bump = gaussian_bump(gaussian_model, 0.5)
    assert bump.values.max() == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(GridError):
        gaussian_bump(gaussian_model, 0.5, width=0.0)


# ---------------- Builders ----------------
def test_gaussian_builder_dimensions():
    model = TorusModel.gaussian(n=2, lo=-2.0, hi=1.0, h=0.25)
    assert model.n == 2
    assert model.polyhedron.dim == 2
    assert np.allclose(model.F_ref, 0.0, atol=1e-12)
    with pytest.raises(GridError):
        TorusModel.gaussian(n=3)


def test_model_from_flagship(flagship):
    b = (1.2, 0.6)
    model = TorusModel.from_polyhedron(flagship, b, lo=-1.0, hi=1.0, h=0.5)
    assert model.grid.shape == (5, 5)
    x = model.grad0.reshape(-1, 2)
    xi = model.grid.nodes().reshape(-1, 2)
    assert flagship.contains_points(x, strict=True).all()
    slack = facet_slacks(flagship, x)
    assert np.abs(0.5 * (np.log(slack) + 1.0) @ flagship.normal_array - xi).max() < 1e-10
    assert np.all(np.linalg.eigvalsh(model.hess0.reshape(-1, 2, 2)) > 0)
    assert np.all(np.isfinite(model.F_ref))
