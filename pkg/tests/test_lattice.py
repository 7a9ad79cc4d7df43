"""Polyhedra, fans, blowups and their JSON forms"""

import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy import Rational

from src.geometry.lattice import (
    Fan,
    HalfSpace,
    Polyhedron,
    anticanonical_polyhedron,
    blowup_cone,
    box,
    delzant_check,
    is_primitive,
    primitive,
    product_polyhedron,
    recession_cone,
)
from src.geometry.serialization import (
    fan_from_dict,
    geometry_from_dict,
    load_geometry,
    parse_offset,
    polyhedron_from_dict,
)
from src.soliton.weighted_volume import WeightedVolumeProblem, lambda_contains
from src.utils.errors import (
    ConfigError,
    EmptyPolyhedron,
    InvalidFan,
    NotAConeOfFan,
    NotPrimitive,
    NotSimple,
    NotSmoothCone,
    RedundantHalfSpace,
)


def points(polyhedron):
    return sorted(tuple(int(c) for c in v.point) for v in polyhedron.vertices)


# ---------------- Vertices ----------------
def test_strip_vertices_have_one_unbounded_edge(product_strip):
    assert points(product_strip) == [(-1, -1), (-1, 1)]
    for v in product_strip.vertices:
        unbounded = [e for e, flag in zip(v.edge_dirs, v.unbounded_flags) if flag]
        assert unbounded == [(1, 0)]


def test_interval_vertices():
    assert points(box(1)) == [(-1,), (1,)]


def test_flagship_vertices(flagship):
    assert points(flagship) == [(-1, 0), (-1, 1), (0, -1)]
    for v in flagship.vertices:
        assert len(v.facets) == flagship.dim


def test_edges_point_inward(flagship):
    for v in flagship.vertices:
        for k, e in enumerate(v.edge_dirs):
            leaving = flagship.halfspaces[v.facets[k]].normal
            assert sum(a * b for a, b in zip(leaving, e)) > 0


def test_not_simple():
    P_halfspaces = (HalfSpace((1, 0), 0), HalfSpace((0, 1), 0), HalfSpace((1, 1), 0))
    with pytest.raises(NotSimple) as info:
        Polyhedron(2, P_halfspaces)
    assert len(info.value.facets) == 3


def test_empty():
    with pytest.raises(EmptyPolyhedron):
        Polyhedron(1, (HalfSpace((1,), -1), HalfSpace((-1,), 0)))


def test_redundant_halfspace_rejected():
    square = box(2)
    with pytest.raises(RedundantHalfSpace):
        Polyhedron(2, square.halfspaces + (HalfSpace((1, 1), 5),))


def test_normals_must_be_primitive():
    with pytest.raises(NotPrimitive):
        HalfSpace((2, 0), 1)
    assert is_primitive((3, -2))
    assert not is_primitive((2, 4))
    assert primitive([Rational(1, 2), Rational(1, 3)]) == (3, 2)


# ---------------- Delzant ----------------
def test_delzant_square(square):
    assert delzant_check(square).ok


def test_delzant_fails_on_stretched_triangle():
    triangle = Polyhedron(2, (HalfSpace((1, 0), 0), HalfSpace((0, 1), 0), HalfSpace((-1, -2), 2)))
    report = delzant_check(triangle)
    assert not report.ok
    assert tuple(int(c) for c in report.vertex.point) == (0, 1)
    assert abs(report.determinant) == 2


def test_delzant_flagship(flagship):
    assert delzant_check(flagship).ok


# ---------------- Fans ----------------
def test_anticanonical_of_presets():
    strip = anticanonical_polyhedron(Fan.c_times_projective_line())
    assert points(strip) == [(-1, -1), (-1, 1)]
    assert points(anticanonical_polyhedron(Fan.projective_line())) == [(-1,), (1,)]
    assert strip.contains_points(np.zeros(2), strict=True)


@pytest.mark.parametrize("cone, new_ray", [((0, 1), (1, 1)), ((0, 2), (1, -1))])
def test_blowup_adds_sum_ray(cone, new_ray):
    fan = Fan.c_times_projective_line()
    blown = blowup_cone(fan, cone)
    assert blown.rays[-1] == new_ray
    assert len(blown.max_cones) == len(fan.max_cones) + 1
    assert blown.is_smooth
    P = anticanonical_polyhedron(blown)
    assert len(anticanonical_polyhedron(fan).vertices) == 2
    assert len(P.vertices) == 3
    assert delzant_check(P).ok


def test_blowup_errors():
    fan = Fan.c_times_projective_line()
    with pytest.raises(NotAConeOfFan):
        blowup_cone(fan, (1, 2))
    singular = Fan(2, ((1, 0), (1, 2)), ((0, 1),))
    with pytest.raises(NotSmoothCone):
        blowup_cone(singular, (0, 1))


def test_fan_rejects_ray_inside_cone():
    with pytest.raises(InvalidFan):
        Fan(2, ((1, 0), (0, 1), (1, 1)), ((0, 1),))


# ---------------- Recession cone ----------------
def test_recession_cones(product_strip, square, halfline, flagship):
    assert recession_cone(product_strip) == [(1, 0)]
    assert recession_cone(square) == []
    assert recession_cone(halfline) == [(1,)]
    assert flagship.recession_rays == ((1, 0),)
    assert square.is_bounded and not flagship.is_bounded


def test_product_polyhedron(halfline):
    P = product_polyhedron(halfline, box(1))
    assert points(P) == [(-1, -1), (-1, 1)]
    assert recession_cone(P) == [(1, 0)]


# ---------------- Lambda ----------------
@settings(max_examples=100, deadline=None)
@given(
    alpha=st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
    y=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)
def test_lambda_is_the_half_space_alpha_positive(product_strip, alpha, y):
    problem = WeightedVolumeProblem(product_strip)
    assert lambda_contains(problem, (alpha, y)) == (alpha > 0)


def test_lambda_examples(flagship, square):
    assert lambda_contains(WeightedVolumeProblem(flagship), (1.0, 7.0))
    assert lambda_contains(WeightedVolumeProblem(square), (-5.0, 3.0))


# ---------------- JSON ----------------
def test_parse_offset_is_exact():
    assert parse_offset("0.5") == Rational(1, 2)
    assert parse_offset("1/3") == Rational(1, 3)
    assert parse_offset(2) == 2
    with pytest.raises(ConfigError):
        parse_offset(True)


def test_fan_json_applies_blowups(data_dir, flagship):
    polyhedron, fan = load_geometry(os.path.join(data_dir, "flagship_fan.json"))
    assert fan.rays[-1] == (1, 1)
    assert points(polyhedron) == points(flagship)


def test_polyhedron_json(data_dir, unit_simplex):
    polyhedron, fan = load_geometry(os.path.join(data_dir, "unit_simplex.json"))
    assert fan is None
    assert polyhedron == unit_simplex


def test_json_rejects_bad_input():
    with pytest.raises(ConfigError):
        polyhedron_from_dict({"dim": 1, "halfspaces": [{"normal": [1], "offset": "1", "extra": 0}]})
    with pytest.raises(ConfigError):
        polyhedron_from_dict({"dim": 1, "halfspaces": [{"normal": [1.5], "offset": "1"}]})
    with pytest.raises(ConfigError):
        fan_from_dict({"rays": [[1]]})


def test_geometry_exit_codes():
    with pytest.raises(InvalidFan) as info:
        geometry_from_dict({"dim": 2, "rays": [[2, 0], [0, 1]], "max_cones": [[0, 1]]})
    assert info.value.exit_code == ConfigError.exit_code == 64
    # Outside input parsing a geometry error is an ordinary failure
    with pytest.raises(EmptyPolyhedron) as info:
        Polyhedron(1, (HalfSpace((1,), -1), HalfSpace((-1,), 0)))
    assert info.value.exit_code == 1
