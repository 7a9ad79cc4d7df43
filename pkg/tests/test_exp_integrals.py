"""Brion sums against closed forms, perturbation, cubature and the quadrature oracle"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.geometry.lattice import box
from src.integrals.exp_integrals import brion_eval, converges, cubature_eval, is_generic, perturbed_eval
from src.integrals.quadrature import quadrature_oracle
from src.soliton.weighted_volume import flagship_closed_form
from src.utils.errors import Divergent, IntegralError, NonGeneric, TruncationTooSmall

E = math.e


def simplex_value(b1, b2):
    # int over conv{0, e1, e2} of exp(-b1 x - b2 y), b1 != b2 both non-zero
    return 1.0 / (b1 * b2) - math.exp(-b1) / (b1 * (b2 - b1)) + math.exp(-b2) / (b2 * (b2 - b1))


def test_converges(product_strip, square):
    assert converges(product_strip, (1.0, -3.0))
    assert not converges(product_strip, (0.0, 1.0))
    assert converges(square, (-4.0, 9.0))


def test_half_line_moments(halfline):
    result = brion_eval(halfline, 1.0)
    assert result.value == pytest.approx(E, rel=1e-14)
    assert abs(result.gradient[0]) < 1e-14
    assert result.hessian[0, 0] == pytest.approx(E, rel=1e-14)


def test_flagship_value(flagship):
    expected = 4.0 * E - 4.0 * math.exp(0.5)
    assert brion_eval(flagship, (1.0, 0.5)).value == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.27824, abs=1e-5)


def test_unit_simplex_value(unit_simplex):
    expected = 0.5 - math.exp(-1.0) + 0.5 * math.exp(-2.0)
    assert brion_eval(unit_simplex, (1.0, 2.0)).value == pytest.approx(expected, rel=1e-13)
    assert simplex_value(1.0, 2.0) == pytest.approx(expected, rel=1e-13)


def test_errors(product_strip, unit_simplex):
    with pytest.raises(Divergent):
        brion_eval(product_strip, (0.0, 1.0))
    assert not is_generic(unit_simplex, (1.0, 1.0))
    with pytest.raises(NonGeneric):
        brion_eval(unit_simplex, (1.0, 1.0))
    with pytest.raises(IntegralError):
        brion_eval(unit_simplex, (1.0, 2.0, 3.0))


def test_closed_form_and_symmetry(flagship):
    rng = np.random.default_rng(7)
    for _ in range(20):
        b1 = rng.uniform(0.5, 3.0)
        b2 = b1 * rng.uniform(0.15, 0.85)
        value = brion_eval(flagship, (b1, b2)).value
        assert value == pytest.approx(flagship_closed_form(b1, b2), rel=1e-12)
        assert value == pytest.approx(brion_eval(flagship, (b1, b1 - b2)).value, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(b1=st.floats(min_value=0.5, max_value=3.0), ratio=st.floats(min_value=0.15, max_value=0.85))
def test_hessian_positive_definite(flagship, b1, ratio):
    result = brion_eval(flagship, (b1, b1 * ratio))
    assert np.allclose(result.hessian, result.hessian.T)
    assert np.linalg.eigvalsh(result.hessian).min() > 0


# ---------------- Perturbation ----------------
def test_perturbed_at_singular_points(unit_simplex):
    assert perturbed_eval(unit_simplex, (1.0, 1.0)).value == pytest.approx(1.0 - 2.0 / E, rel=1e-7)
    interval = perturbed_eval(box(1), 0.0)
    assert interval.value == pytest.approx(2.0, rel=1e-8)
    assert interval.method == "perturbed"


def test_perturbed_matches_brion_when_generic(flagship):
    exact = brion_eval(flagship, (1.2, 0.5))
    perturbed = perturbed_eval(flagship, (1.2, 0.5))
    assert perturbed.value == pytest.approx(exact.value, rel=1e-8)
    assert np.allclose(perturbed.gradient, exact.gradient, rtol=1e-7)


def test_perturbed_hessian_on_an_edge_hyperplane(flagship):
    # b2 = 0 is orthogonal to the vertical edge; the true hessian is a second moment
    on_line = perturbed_eval(flagship, (2.5, 0.0))
    nearby = brion_eval(flagship, (2.5, 1e-3))
    assert np.linalg.eigvalsh(on_line.hessian).min() > 0
    assert np.allclose(on_line.hessian, nearby.hessian, rtol=0.0, atol=0.05)
    assert on_line.value == pytest.approx(nearby.value, rel=1e-2)


# ---------------- Cubature ----------------
def test_cubature_unit_simplex(unit_simplex):
    assert cubature_eval(unit_simplex, (1.0, 2.0)).value == pytest.approx(simplex_value(1.0, 2.0), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(
    b1=st.floats(min_value=0.1, max_value=2.0),
    b2=st.floats(min_value=0.1, max_value=2.0),
    flip=st.booleans(),
)
def test_cubature_matches_brion_on_square(square, b1, b2, flip):
    b = (b1, -b2 if flip else b2)
    exact = brion_eval(square, b)
    approx = cubature_eval(square, b)
    assert approx.value == pytest.approx(exact.value, rel=1e-10)
    assert np.allclose(approx.gradient, exact.gradient, rtol=1e-9, atol=1e-12)


def test_cubature_needs_bounded(halfline):
    with pytest.raises(IntegralError):
        cubature_eval(halfline, 1.0)


# ---------------- Oracle ----------------
def test_oracle_half_line(halfline):
    result = quadrature_oracle(halfline, 1.0, truncation=40.0)
    assert result.value == pytest.approx(E, rel=1e-6)
    assert result.tail_estimate < 1e-9


def test_oracle_unit_simplex(unit_simplex):
    result = quadrature_oracle(unit_simplex, (1.0, 2.0))
    assert result.value == pytest.approx(0.19979, abs=1e-5)
    assert result.value == pytest.approx(simplex_value(1.0, 2.0), rel=1e-6)


def test_oracle_flagship(flagship):
    result = quadrature_oracle(flagship, (1.0, 0.5), truncation=60.0)
    assert result.value == pytest.approx(brion_eval(flagship, (1.0, 0.5)).value, rel=1e-6)


def test_oracle_errors(halfline, product_strip):
    with pytest.raises(TruncationTooSmall):
        quadrature_oracle(halfline, 1.0, truncation=2.0)
    with pytest.raises(Divergent):
        quadrature_oracle(product_strip, (0.0, 1.0))
