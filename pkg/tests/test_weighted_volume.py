"""The weighted volume functional and its minimiser b_X"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.soliton.weighted_volume import (
    FLAT_DECREASE,
    F_eval,
    WeightedVolumeProblem,
    flagship_root_equation,
    futaki_residual,
    initial_point,
    minimize_F,
    refine_root_1d,
    resolve_prefactor,
    soliton_vector_field,
)
from src.utils.errors import GeometryError, OutsideLambda

E = math.e


@pytest.fixture(scope="module")
def flagship_result(flagship_fan):
    return soliton_vector_field(flagship_fan)


def test_prefactor_modes():
    assert resolve_prefactor("1", 3) == 1.0
    assert resolve_prefactor("2pi", 2) == pytest.approx(4.0 * math.pi ** 2)


def test_origin_must_be_interior(unit_simplex):
    with pytest.raises(GeometryError):
        WeightedVolumeProblem(unit_simplex)


# ---------------- F_eval ----------------
def test_half_line_values(halfline):
    value, gradient, hessian = F_eval(WeightedVolumeProblem(halfline), 1.0)
    assert value == pytest.approx(E, rel=1e-14)
    assert abs(gradient[0]) < 1e-14
    assert hessian[0, 0] == pytest.approx(E, rel=1e-14)


def test_flagship_values(flagship):
    problem = WeightedVolumeProblem(flagship)
    assert F_eval(problem, (1.0, 0.5))[0] == pytest.approx(4.0 * E - 4.0 * math.exp(0.5), rel=1e-12)
    # On the symmetry line b1 = 2 b2: (e^{2b} - e^b) / b^2
    assert F_eval(problem, (2.0, 1.0))[0] == pytest.approx(E * E - E, rel=1e-12)


def test_prefactor_scales_value(flagship):
    plain = F_eval(WeightedVolumeProblem(flagship), (1.0, 0.5))
    scaled = F_eval(WeightedVolumeProblem(flagship, "2pi"), (1.0, 0.5))
    factor = (2.0 * math.pi) ** 2
    assert scaled[0] == pytest.approx(factor * plain[0], rel=1e-14)
    assert np.allclose(scaled[2], factor * plain[2], rtol=1e-14)


def test_outside_lambda(product_strip):
    problem = WeightedVolumeProblem(product_strip)
    with pytest.raises(OutsideLambda):
        F_eval(problem, (-1.0, 0.0))
    with pytest.raises(OutsideLambda):
        minimize_F(problem, v0=(0.0, 1.0))


def test_futaki_residual(halfline):
    problem = WeightedVolumeProblem(halfline)
    assert abs(futaki_residual(problem, 1.0)[0]) < 1e-14
    assert futaki_residual(problem, 2.0)[0] == pytest.approx(-E * E / 4.0, rel=1e-12)


def test_evaluate_routes_by_edge_pairing(flagship, square):
    problem = WeightedVolumeProblem(flagship)
    assert problem.evaluate((1.0, 0.5)).method == "brion"
    assert problem.evaluate((2.0, 0.0)).method == "perturbed"
    assert WeightedVolumeProblem(square).evaluate((0.01, 0.3)).method == "cubature"
    assert not hasattr(problem, "value")


# ---------------- minimize_F ----------------
def test_half_line_minimiser(halfline):
    result = minimize_F(WeightedVolumeProblem(halfline), v0=3.0)
    assert result.b_X[0] == pytest.approx(1.0, abs=1e-8)
    assert result.grad_norm / result.value < 1e-10


def test_square_minimiser(square):
    result = minimize_F(WeightedVolumeProblem(square), v0=(0.3, -0.2))
    assert np.abs(result.b_X).max() < 1e-8


def test_flagship_soliton_vector(flagship_result, flagship):
    b1, b2 = flagship_result.b_X
    assert abs(b2 - 0.64) < 0.01
    assert abs(b2 - refine_root_1d()) < 1e-6
    assert abs(b1 - 2.0 * b2) < 1e-8
    problem = WeightedVolumeProblem(flagship)
    assert np.linalg.norm(futaki_residual(problem, flagship_result.b_X)) < 1e-8


def test_flagship_runtime(flagship_fan):
    start = time.perf_counter()
    soliton_vector_field(flagship_fan)
    assert time.perf_counter() - start < 1.0


def test_line_search_decreases_F(flagship_result):
    rows = flagship_result.path
    for earlier, later in zip(rows, rows[1:]):
        # F strictly decreases unless it is flat to rounding, where the gradient must shrink
        assert later.value < earlier.value or (
            abs(later.value - earlier.value) <= FLAT_DECREASE * earlier.value
            and later.grad_norm < earlier.grad_norm
        )
    assert rows[1].value < rows[0].value
    assert flagship_result.trace_header() == ["iteration", "b1", "b2", "F", "grad_norm", "step"]
    assert len(flagship_result.trace_rows()) == flagship_result.iterations + 1


def test_far_steps_strictly_decrease_F(flagship):
    rows = minimize_F(WeightedVolumeProblem(flagship), v0=(2.5, 2.0)).path
    steep = [row for row in rows if row.grad_norm > 1e-4 * row.value]
    assert steep[0] is rows[0]
    assert all(later.value < earlier.value for earlier, later in zip(steep, steep[1:]))
    assert rows[-1].value < steep[-1].value


def test_minimiser_is_prefactor_invariant(flagship_fan, flagship_result):
    scaled = soliton_vector_field(flagship_fan, prefactor="2pi")
    assert np.allclose(scaled.b_X, flagship_result.b_X, rtol=0.0, atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(b1=st.floats(min_value=0.5, max_value=2.5), b2=st.floats(min_value=-1.0, max_value=2.0))
def test_minimiser_is_start_independent(flagship, flagship_result, b1, b2):
    result = minimize_F(WeightedVolumeProblem(flagship), v0=(b1, b2))
    assert np.allclose(result.b_X, flagship_result.b_X, rtol=0.0, atol=1e-8)


def test_start_on_an_edge_hyperplane(flagship, flagship_result):
    result = minimize_F(WeightedVolumeProblem(flagship), v0=(2.5, 0.0))
    assert np.allclose(result.b_X, flagship_result.b_X, rtol=0.0, atol=1e-8)


def test_initial_point(flagship, halfline):
    assert tuple(initial_point(WeightedVolumeProblem(flagship))) == (2.0, 0.0)
    assert tuple(initial_point(WeightedVolumeProblem(halfline))) == (1.0,)


# ---------------- Root oracle ----------------
def test_root_oracle():
    root = refine_root_1d()
    assert abs(root - 0.64) < 0.01
    assert abs(flagship_root_equation(root)) < 1e-10
    assert flagship_root_equation(1.0) == pytest.approx(1.0)
    assert flagship_root_equation(0.5) == pytest.approx(1.5 - math.exp(0.5), abs=1e-12)
    assert flagship_root_equation(0.5) == pytest.approx(-0.14872, abs=1e-5)
