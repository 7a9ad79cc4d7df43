import os
import sys

import pytest

# Make the repository root importable the same way main.py does
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT_DIR)

from src.geometry.lattice import Fan, HalfSpace, Polyhedron, anticanonical_polyhedron, blowup_cone, box, half_line
from src.soliton.continuity import continuity_solve
from src.soliton.model import TorusModel, gaussian_bump, normalize_data

DATA_DIR = os.path.join(ROOT_DIR, "data")


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def flagship_fan():
    return blowup_cone(Fan.c_times_projective_line(), (0, 1))


@pytest.fixture(scope="session")
def flagship(flagship_fan):
    """{x1 >= -1, -1 <= x2 <= 1, x1 + x2 >= -1}"""
    return anticanonical_polyhedron(flagship_fan)


@pytest.fixture(scope="session")
def product_strip():
    """{x1 >= -1, -1 <= x2 <= 1}"""
    return Polyhedron(2, (HalfSpace((1, 0), 1), HalfSpace((0, 1), 1), HalfSpace((0, -1), 1)))


@pytest.fixture(scope="session")
def unit_simplex():
    return Polyhedron(2, (HalfSpace((1, 0), 0), HalfSpace((0, 1), 0), HalfSpace((-1, -1), 1)))


@pytest.fixture(scope="session")
def square():
    return box(2)


@pytest.fixture(scope="session")
def halfline():
    return half_line()


@pytest.fixture(scope="session")
def gaussian_model():
    """1D Gaussian model on [-8, 6] with h = 0.01"""
    return TorusModel.gaussian()


@pytest.fixture(scope="session")
def bump_data(gaussian_model):
    F_raw = gaussian_model.F_ref + gaussian_bump(gaussian_model, 0.5).values
    return normalize_data(gaussian_model, F_raw)


@pytest.fixture(scope="session")
def gaussian_path(gaussian_model, bump_data):
    """The default 20-step continuity run with a 0.5 bump"""
    F, c0 = bump_data
    return continuity_solve(gaussian_model, F, steps=20, c0=c0)

