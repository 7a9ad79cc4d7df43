"""
lattice.py - Rational polyhedra and fans in a lattice Z^n.

This module supports:
- Polyhedra in H-representation {x : <nu_i, x> >= -a_i} with primitive normals
- Exact (sympy Rational) vertex enumeration, edge directions and Delzant checks
- Recession cones, anticanonical polyhedra of fans and point blowups of 2D fans

All combinatorics is exact; floats only appear in the float views handed to the
integration code (`normal_array`, `offset_array`).
"""

from dataclasses import dataclass, field
from functools import cached_property, reduce
from itertools import combinations
from math import gcd

import numpy as np
from sympy import Matrix, Rational, ilcm

from src.utils.errors import (
    EmptyPolyhedron,
    GeometryError,
    InvalidFan,
    NotAConeOfFan,
    NotPrimitive,
    NotSimple,
    NotSmoothCone,
    RedundantHalfSpace,
)
from src.utils.logger import setup_logger

logger = setup_logger("lattice")


# ---------------- Lattice vectors ----------------
def is_primitive(vec):
    """True iff the integer vector is non-zero with gcd of entries equal to 1"""
    if any(int(c) != c for c in vec):
        return False
    return reduce(gcd, (abs(int(c)) for c in vec), 0) == 1


def primitive(vec):
    """Smallest positive integer multiple-or-divisor of a rational vector on the same ray"""
    rats = [Rational(c) for c in vec]
    if all(r == 0 for r in rats):
        raise NotPrimitive("the zero vector has no primitive generator")
    den = reduce(ilcm, (r.q for r in rats), 1)
    ints = [int(r * den) for r in rats]
    g = reduce(gcd, (abs(c) for c in ints), 0)
    return tuple(c // g for c in ints)


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _parse_offset(value):
    if isinstance(value, float):
        # Floats go through their shortest decimal representation
        return Rational(repr(value))
    return Rational(value)


# ---------------- Domain types ----------------
@dataclass(frozen=True)
class HalfSpace:
    """{x : <normal, x> >= -offset} with a primitive integer normal"""
    normal: tuple
    offset: Rational

    def __post_init__(self):
        normal = tuple(int(c) for c in self.normal)
        if not is_primitive(normal):
            raise NotPrimitive(f"halfspace normal {tuple(self.normal)} is not primitive")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", _parse_offset(self.offset))

    def slack(self, x):
        return _dot(self.normal, x) + self.offset

    def contains(self, x):
        return self.slack(x) >= 0


@dataclass(frozen=True)
class VertexData:
    """A vertex with its n primitive inward edge directions"""
    point: tuple
    facets: tuple
    edge_dirs: tuple
    unbounded_flags: tuple

    @property
    def determinant(self):
        return Matrix([list(e) for e in self.edge_dirs]).T.det()

    @property
    def float_point(self):
        return np.array([float(c) for c in self.point])

    @property
    def float_edges(self):
        return np.array(self.edge_dirs, dtype=float)


def feasible_points(halfspaces, dim):
    """Feasible intersection points of n-subsets of facet hyperplanes -> {point: tight set}"""
    points = {}
    for subset in combinations(range(len(halfspaces)), dim):
        rows = Matrix([list(halfspaces[i].normal) for i in subset])
        if rows.det() == 0:
            continue
        rhs = Matrix([-halfspaces[i].offset for i in subset])
        x = tuple(rows.LUsolve(rhs))
        if x in points:
            continue
        if all(h.slack(x) >= 0 for h in halfspaces):
            points[x] = tuple(i for i, h in enumerate(halfspaces) if h.slack(x) == 0)
    return points


@dataclass(frozen=True)
class Polyhedron:
    """Simple, full-dimensional rational polyhedron with at least one vertex"""
    dim: int
    halfspaces: tuple

    def __post_init__(self):
        hs = tuple(h if isinstance(h, HalfSpace) else HalfSpace(*h) for h in self.halfspaces)
        object.__setattr__(self, "halfspaces", hs)
        if self.dim < 1:
            raise GeometryError("polyhedron dimension must be positive")
        for h in hs:
            if len(h.normal) != self.dim:
                raise GeometryError(f"normal {h.normal} does not live in Z^{self.dim}")
        normals = [h.normal for h in hs]
        if len(set(normals)) != len(normals):
            raise RedundantHalfSpace("two halfspaces share a normal")
        # Validates simplicity, non-emptiness and irredundancy
        _ = self.vertices

    @cached_property
    def vertices(self):
        return tuple(enumerate_vertices(self))

    @property
    def n_facets(self):
        return len(self.halfspaces)

    @cached_property
    def recession_rays(self):
        return tuple(recession_cone(self))

    @property
    def is_bounded(self):
        return not self.recession_rays

    @property
    def normal_array(self):
        return np.array([h.normal for h in self.halfspaces], dtype=float)

    @property
    def offset_array(self):
        return np.array([float(h.offset) for h in self.halfspaces])

    def contains(self, x, strict=False):
        if strict:
            return all(h.slack(x) > 0 for h in self.halfspaces)
        return all(h.slack(x) >= 0 for h in self.halfspaces)

    def contains_points(self, points, strict=False):
        """Vectorised float membership test; points has shape (..., dim)"""
        pts = np.asarray(points, dtype=float)
        slack = pts @ self.normal_array.T + self.offset_array
        return np.all(slack > 0, axis=-1) if strict else np.all(slack >= 0, axis=-1)

    def to_dict(self):
        return {
            "dim": self.dim,
            "halfspaces": [{"normal": list(h.normal), "offset": str(h.offset)} for h in self.halfspaces],
        }


@dataclass(frozen=True)
class Fan:
    """Rational fan given by primitive rays and maximal cones (ray-index tuples)"""
    dim: int
    rays: tuple
    max_cones: tuple = field(default=())

    def __post_init__(self):
        rays = tuple(tuple(int(c) for c in r) for r in self.rays)
        cones = tuple(tuple(int(i) for i in c) for c in self.max_cones)
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "max_cones", cones)
        for r in rays:
            if len(r) != self.dim:
                raise InvalidFan(f"ray {r} does not live in Z^{self.dim}")
            if not is_primitive(r):
                raise InvalidFan(f"ray {r} is not primitive")
        if len(set(rays)) != len(rays):
            raise InvalidFan("duplicate rays")
        for c in cones:
            if not c or any(i < 0 or i >= len(rays) for i in c):
                raise InvalidFan(f"cone {c} references unknown rays")
        if len({frozenset(c) for c in cones}) != len(cones):
            raise InvalidFan("duplicate cones")
        if self.dim == 2:
            self._check_planar_fan()

    def _check_planar_fan(self):
        # Two strictly convex 2D cones meet in a common face iff neither
        # contains another ray in its relative interior
        for c in self.max_cones:
            if len(c) != 2:
                continue
            u, v = self.rays[c[0]], self.rays[c[1]]
            det = u[0] * v[1] - u[1] * v[0]
            if det == 0:
                raise InvalidFan(f"cone {c} is not strictly convex")
            for k, w in enumerate(self.rays):
                if k in c:
                    continue
                # w = alpha u + beta v with alpha, beta > 0
                alpha = Rational(w[0] * v[1] - w[1] * v[0], det)
                beta = Rational(u[0] * w[1] - u[1] * w[0], det)
                if alpha > 0 and beta > 0:
                    raise InvalidFan(f"ray {w} lies inside cone {c}")

    def cone_determinant(self, cone):
        return Matrix([list(self.rays[i]) for i in cone]).det()

    @property
    def is_smooth(self):
        return all(
            len(c) != self.dim or abs(self.cone_determinant(c)) == 1
            for c in self.max_cones
        )

    def to_dict(self):
        return {"dim": self.dim, "rays": [list(r) for r in self.rays],
                "max_cones": [list(c) for c in self.max_cones]}

    # ---------------- Presets ----------------
    @classmethod
    def projective_line(cls):
        return cls(1, ((1,), (-1,)), ((0,), (1,)))

    @classmethod
    def c_times_projective_line(cls):
        """Fan of C x P^1: rays e1, e2, -e2 and cones <e1,e2>, <e1,-e2>"""
        return cls(2, ((1, 0), (0, 1), (0, -1)), ((0, 1), (0, 2)))


# ---------------- Operations ----------------
def enumerate_vertices(polyhedron):
    """All vertices of a simple polyhedron with inward primitive edge directions"""
    hs = polyhedron.halfspaces
    n = polyhedron.dim
    candidates = feasible_points(hs, n)
    if not candidates:
        raise EmptyPolyhedron("polyhedron has no vertex")

    vertices = []
    for point in sorted(candidates):
        tight = candidates[point]
        if len(tight) > n:
            raise NotSimple(point, tight)
        inverse = Matrix([list(hs[i].normal) for i in tight]).inv()
        edges = []
        flags = []
        for k in range(n):
            # Column k of N_T^{-1} is orthogonal to every tight normal but the k-th
            e = primitive(list(inverse[:, k]))
            edges.append(e)
            flags.append(all(_dot(h.normal, e) >= 0 for h in hs))
        vertices.append(VertexData(point, tight, tuple(edges), tuple(flags)))

    used = set().union(*(set(v.facets) for v in vertices))
    unused = [i for i in range(len(hs)) if i not in used]
    if unused:
        raise RedundantHalfSpace(f"halfspaces {unused} support no facet")
    logger.debug(f"{len(vertices)} vertices on {len(hs)} facets")
    return vertices


@dataclass(frozen=True)
class DelzantReport:
    ok: bool
    vertex: VertexData = None
    determinant: int = 1


def delzant_check(polyhedron):
    """True iff every vertex's edge directions form a basis of Z^n"""
    for v in polyhedron.vertices:
        det = int(v.determinant)
        if abs(det) != 1:
            return DelzantReport(False, v, det)
    return DelzantReport(True)


def anticanonical_polyhedron(fan):
    """P_{-K} = {x : <nu_i, x> >= -1 for every ray nu_i}"""
    hs = tuple(HalfSpace(r, 1) for r in fan.rays)
    # <nu_i, 0> = 0 > -1, so the origin is always strictly interior
    return Polyhedron(fan.dim, hs)


def blowup_cone(fan, cone):
    """Star subdivision of a smooth 2-cone: adds the ray u + v"""
    if fan.dim != 2:
        raise GeometryError("point blowups are implemented for n = 2 fans only")
    key = frozenset(int(i) for i in cone)
    matches = [k for k, c in enumerate(fan.max_cones) if frozenset(c) == key]
    if len(key) != 2 or not matches:
        raise NotAConeOfFan(f"{tuple(cone)} is not a 2-cone of the fan")
    idx = matches[0]
    i, j = fan.max_cones[idx]
    if abs(fan.cone_determinant((i, j))) != 1:
        raise NotSmoothCone(f"cone {(i, j)} is not unimodular")

    new_ray = tuple(a + b for a, b in zip(fan.rays[i], fan.rays[j]))
    new_index = len(fan.rays)
    cones = list(fan.max_cones)
    cones[idx:idx + 1] = [(i, new_index), (new_index, j)]
    logger.info(f"blowup of cone {(i, j)} adds ray {new_ray}")
    return Fan(fan.dim, fan.rays + (new_ray,), tuple(cones))


def recession_cone(polyhedron):
    """Primitive generators of {w : <nu_i, w> >= 0 for all i}; empty iff bounded"""
    n = polyhedron.dim
    normals = [h.normal for h in polyhedron.halfspaces]
    if n == 1:
        candidates = [(1,), (-1,)]
    else:
        candidates = []
        for subset in combinations(normals, n - 1):
            kernel = Matrix([list(v) for v in subset]).nullspace()
            if len(kernel) != 1:
                continue
            w = primitive(list(kernel[0]))
            candidates.extend([w, tuple(-c for c in w)])

    rays = sorted({w for w in candidates if all(_dot(v, w) >= 0 for v in normals)})
    return rays


def product_polyhedron(first, second):
    """{(x, y) : x in first, y in second}"""
    n, m = first.dim, second.dim
    hs = [HalfSpace(h.normal + (0,) * m, h.offset) for h in first.halfspaces]
    hs += [HalfSpace((0,) * n + h.normal, h.offset) for h in second.halfspaces]
    return Polyhedron(n + m, tuple(hs))


def half_line():
    """[-1, inf): the moment image of the Gaussian soliton on C"""
    return Polyhedron(1, (HalfSpace((1,), 1),))


def box(dim, radius=1):
    """[-radius, radius]^dim"""
    hs = []
    for k in range(dim):
        e = tuple(1 if i == k else 0 for i in range(dim))
        hs.append(HalfSpace(e, radius))
        hs.append(HalfSpace(tuple(-c for c in e), radius))
    return Polyhedron(dim, tuple(hs))
