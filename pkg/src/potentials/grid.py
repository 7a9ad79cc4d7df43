"""
grid.py - Uniform-grid samples of scalar functions in one or two variables.

A GridFunction lives either on the Lie-algebra side (domain_tag "xi") or on
the polytope side (domain_tag "x"). Nodes outside the domain carry NaN and are
excluded by `mask`. Derivatives are central differences of order 2 (default)
or 4; nodes whose stencil leaves the valid region report NaN. Values sampled
in extended precision (np.longdouble) keep it through differencing.
"""

from dataclasses import dataclass, field

import numpy as np

from src.utils.errors import GridError
from src.utils.logger import setup_logger

logger = setup_logger("grid")

DOMAIN_TAGS = ("xi", "x")

# (order, derivative) -> (offsets, integer weights, denominator)
STENCILS = {
    (2, 1): ((-1, 1), (-1, 1), 2),
    (2, 2): ((-1, 0, 1), (1, -2, 1), 1),
    (4, 1): ((-2, -1, 1, 2), (1, -8, 8, -1), 12),
    (4, 2): ((-2, -1, 0, 1, 2), (-1, 16, -30, 16, -1), 12),
}


def _axis_derivative(values, axis, h, order, deriv):
    """Central difference along one axis; NaN within the stencil radius of the edges"""
    try:
        offsets, weights, denominator = STENCILS[(order, deriv)]
    except KeyError as e:
        raise GridError(f"no central stencil of order {order}") from e
    r = max(offsets)
    n = values.shape[axis]
    out = np.full(values.shape, np.nan, dtype=values.dtype)
    if n <= 2 * r:
        return out
    core = [slice(None)] * values.ndim
    core[axis] = slice(r, n - r)
    acc = np.zeros((), dtype=values.dtype)
    for o, w in zip(offsets, weights):
        shifted = list(core)
        shifted[axis] = slice(r + o, n - r + o)
        acc = acc + w * values[tuple(shifted)]
    out[tuple(core)] = acc / (denominator * h ** deriv)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid: origin + index * spacing along every axis"""
    origin: tuple
    spacing: tuple
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "spacing", tuple(float(c) for c in self.spacing))
        object.__setattr__(self, "shape", tuple(int(c) for c in self.shape))
        if not (len(self.origin) == len(self.spacing) == len(self.shape)) or len(self.shape) not in (1, 2):
            raise GridError("grids are one- or two-dimensional")
        if any(h <= 0 for h in self.spacing):
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if any(m < 1 for m in self.shape):
            raise GridError(f"empty grid shape {self.shape}")

    @classmethod
    def covering(cls, lo, hi, spacing):
        """Grid from lo to (at least) hi with the given spacing per axis"""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        h = np.broadcast_to(np.asarray(spacing, dtype=float), lo.shape)
        shape = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
        return cls(tuple(lo), tuple(h), tuple(shape))

    @property
    def dim(self):
        return len(self.shape)

    def axes(self, dtype=float):
        return [dtype(o) + dtype(h) * np.arange(m, dtype=dtype)
                for o, h, m in zip(self.origin, self.spacing, self.shape)]

    def nodes(self, dtype=float):
        """Node coordinates, shape (*shape, dim)"""
        return np.stack(np.meshgrid(*self.axes(dtype), indexing="ij"), axis=-1)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))


@dataclass
class GridFunction:
    """Values of a function on a Grid; NaN outside the mask"""
    grid: Grid
    values: np.ndarray
    domain_tag: str = "xi"
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values)
        dtype = np.longdouble if values.dtype == np.longdouble else float
        self.values = values.astype(dtype).reshape(self.grid.shape)
        if self.domain_tag not in DOMAIN_TAGS:
            raise GridError(f"domain_tag must be one of {DOMAIN_TAGS}")
        if self.mask is None:
            self.mask = np.isfinite(self.values)
            if not self.mask.all():
                raise GridError("grid values must be finite")
        else:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.grid.shape)
            if not np.all(np.isfinite(self.values[self.mask])):
                raise GridError("grid values must be finite on the mask")
            self.values = np.where(self.mask, self.values, np.nan)

    # ---------------- Construction ----------------
    @classmethod
    def sample(cls, fn, lo, hi, spacing, domain_tag="xi", dtype=float):
        """Evaluate a vectorised fn(nodes[..., dim]) on a covering grid"""
        grid = Grid.covering(lo, hi, spacing)
        return cls.on_grid(fn, grid, domain_tag, dtype=dtype)

    @classmethod
    def on_grid(cls, fn, grid, domain_tag="xi", mask=None, dtype=float):
        """dtype=np.longdouble samples and keeps fn in extended precision"""
        nodes = grid.nodes(dtype)
        arg = nodes[..., 0] if grid.dim == 1 else nodes
        if mask is None:
            return cls(grid, fn(arg), domain_tag)
        values = np.full(grid.shape, np.nan, dtype=dtype)
        values[mask] = fn(arg[mask])
        return cls(grid, values, domain_tag, mask)

    def with_values(self, values, domain_tag=None):
        return GridFunction(self.grid, values, domain_tag or self.domain_tag, self.mask.copy())

    # ---------------- Properties ----------------
    @property
    def dim(self):
        return self.grid.dim

    @property
    def spacing(self):
        return self.grid.spacing

    @property
    def origin(self):
        return self.grid.origin

    def nodes(self):
        return self.grid.nodes()

    def valid_values(self):
        return self.values[self.mask]

    def valid_nodes(self):
        return self.grid.nodes()[self.mask]

    def interior_mask(self, order=2):
        """Valid nodes where every derivative stencil of the given order is valid"""
        return np.all(np.isfinite(self.hessian(order)), axis=(-2, -1))

    # ---------------- Calculus ----------------
    def gradient(self, order=2):
        """Central differences, shape (*shape, dim); NaN where the stencil leaves the mask"""
        parts = [_axis_derivative(self.values, a, self.spacing[a], order, 1) for a in range(self.dim)]
        out = np.stack(parts, axis=-1)
        out[~np.all(np.isfinite(out), axis=-1)] = np.nan
        return out

    def hessian(self, order=2):
        """Central second differences, shape (*shape, dim, dim)"""
        f = self.values
        out = np.empty(self.grid.shape + (self.dim, self.dim), dtype=f.dtype)
        for a in range(self.dim):
            out[..., a, a] = _axis_derivative(f, a, self.spacing[a], order, 2)
        if self.dim == 2:
            first = _axis_derivative(f, 0, self.spacing[0], order, 1)
            mixed = _axis_derivative(first, 1, self.spacing[1], order, 1)
            out[..., 0, 1] = mixed
            out[..., 1, 0] = mixed
        out[~np.all(np.isfinite(out), axis=(-2, -1))] = np.nan
        return out

    def is_convex(self, tol=None):
        """Discrete Hessian PSD at every interior node (up to tol)"""
        inner = self.interior_mask()
        if not inner.any():
            return True
        H = self.hessian()[inner]
        eig = np.linalg.eigvalsh(H)
        if tol is None:
            tol = 1e-8 * max(1.0, float(np.abs(eig).max()))
        return bool(eig.min() >= -tol)

    def sup_norm(self, interior=False):
        vals = self.values[self.interior_mask() if interior else self.mask]
        return float(np.abs(vals).max()) if vals.size else 0.0

    # ---------------- Files ----------------
    def header(self):
        return "\n".join([
            f"dim: {self.dim}",
            "origin: " + " ".join(f"{c:.17g}" for c in self.origin),
            "spacing: " + " ".join(f"{c:.17g}" for c in self.spacing),
            "shape: " + " ".join(str(m) for m in self.grid.shape),
            f"domain_tag: {self.domain_tag}",
        ])

    def to_csv(self, path):
        """Header lines, then values in row-major order (NaN off the mask)"""
        data = self.values[:, None] if self.dim == 1 else self.values
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=self.header(), comments="# ")
        return path

    @classmethod
    def from_csv(cls, path):
        meta = {}
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
        try:
            shape = tuple(int(m) for m in meta["shape"].split())
            grid = Grid(
                tuple(float(c) for c in meta["origin"].split()),
                tuple(float(c) for c in meta["spacing"].split()),
                shape,
            )
        except (KeyError, ValueError) as e:
            raise GridError(f"{path} has no valid grid header") from e
        values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2).reshape(shape)
        return cls(grid, values, meta.get("domain_tag", "xi"), np.isfinite(values))
