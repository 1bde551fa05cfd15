"""Uniform lattices on rectangular windows, regions, and midpoint quadrature.

Everything downstream (norms, operators, decompositions) is computed in one
consistent discrete model:

* functions are sampled at cell midpoints of a uniform grid,
* a region contains a cell iff it contains the cell midpoint,
* the measure of a region is ``(number of contained cells) * h**n``,
* integrals are midpoint-rule sums.

Cubes are half-open, ``[z - r/2, z + r/2)`` per axis, so congruent tilings
partition the window with no double counting.  Dimensions 1 and 2 only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Window",
    "GridFunction",
    "Cube",
    "Ball",
    "Annulus",
    "Region",
    "annulus",
    "double_shell",
    "region_mask",
    "region_measure",
    "integrate",
    "average",
    "lq_norm",
    "EmptyRegionError",
    "LatticeError",
]


class LatticeError(ValueError):
    """Invalid window/grid construction."""


class EmptyRegionError(ValueError):
    """Region contains no cell midpoint of the window."""


def _as_point(x, n: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (n,):
        raise ValueError(f"expected point of dimension {n}, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular window with a uniform cell pitch.

    The pitch h = (upper - lower) / cells must agree across axes to 1e-12
    relative; every axis needs at least 2 cells.
    """

    n: int
    lower: tuple
    upper: tuple
    cells: tuple

    def __post_init__(self):
        if self.n not in (1, 2):
            raise LatticeError("only dimensions 1 and 2 are supported")
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if not (len(lower) == len(upper) == len(cells) == self.n):
            raise LatticeError("lower/upper/cells must all have length n")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cells", cells)
        if any(u <= l for l, u in zip(lower, upper)):
            raise LatticeError("upper must exceed lower componentwise")
        if any(c < 2 for c in cells):
            raise LatticeError("need at least 2 cells per axis")
        pitches = [(u - l) / c for l, u, c in zip(lower, upper, cells)]
        h0 = pitches[0]
        if any(abs(h - h0) > 1e-12 * abs(h0) for h in pitches):
            raise LatticeError("cell pitch must be identical on all axes")

    @property
    def h(self) -> float:
        return (self.upper[0] - self.lower[0]) / self.cells[0]

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_measure(self) -> float:
        return self.h**self.n

    @property
    def measure(self) -> float:
        return self.cell_count * self.cell_measure

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2.0

    def axis_midpoints(self, axis: int) -> np.ndarray:
        return self.lower[axis] + (np.arange(self.cells[axis]) + 0.5) * self.h

    def midpoints(self) -> np.ndarray:
        """All cell midpoints, shape (cell_count, n), row-major cell order."""
        if self.n == 1:
            return self.axis_midpoints(0)[:, None]
        x, y = np.meshgrid(
            self.axis_midpoints(0), self.axis_midpoints(1), indexing="ij"
        )
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def refine(self, factor: int = 2) -> "Window":
        return Window(self.n, self.lower, self.upper, tuple(c * factor for c in self.cells))

    def same_lattice(self, other: "Window") -> bool:
        return (
            self.n == other.n
            and self.lower == other.lower
            and self.upper == other.upper
            and self.cells == other.cells
        )

    def to_dict(self) -> dict:
        return {"n": self.n, "lower": list(self.lower), "upper": list(self.upper), "cells": list(self.cells)}


@dataclass(frozen=True)
class Cube:
    """Half-open cube Q_z(r): [z_i - r/2, z_i + r/2) on every axis."""

    center: tuple
    side: float

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "side", float(self.side))
        if self.side <= 0:
            raise ValueError("cube side must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def scale(self) -> float:
        return self.side / 2.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        lo = c - self.side / 2.0
        hi = c + self.side / 2.0
        return np.all((pts >= lo) & (pts < hi), axis=-1)

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.side / 2.0, c + self.side / 2.0

    def dilate(self, lam: float) -> "Cube":
        return Cube(self.center, lam * self.side)

    def to_dict(self) -> dict:
        return {"kind": "cube", "center": list(self.center), "side": self.side}


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball B(x, r)."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def scale(self) -> float:
        return self.radius

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.asarray(self.center)
        return np.sum(d * d, axis=-1) < self.radius**2

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def dilate(self, lam: float) -> "Ball":
        return Ball(self.center, lam * self.radius)

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Annulus:
    """Dyadic cube annulus Q_z(2^j r) minus Q_z(2^(j-1) r), level j >= 1."""

    center: tuple
    base_side: float
    level: int

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "base_side", float(self.base_side))
        object.__setattr__(self, "level", int(self.level))
        if self.base_side <= 0:
            raise ValueError("base side must be positive")
        if self.level < 1:
            raise ValueError("annulus level must be >= 1 (level 0 is the core cube)")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def outer(self) -> Cube:
        return Cube(self.center, self.base_side * 2**self.level)

    @property
    def inner(self) -> Cube:
        return Cube(self.center, self.base_side * 2 ** (self.level - 1))

    @property
    def scale(self) -> float:
        return self.outer.scale

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.outer.contains(pts) & ~self.inner.contains(pts)

    def bounding_box(self):
        return self.outer.bounding_box()

    def to_dict(self) -> dict:
        return {
            "kind": "annulus",
            "center": list(self.center),
            "base_side": self.base_side,
            "level": self.level,
        }


Region = Cube | Ball | Annulus


def annulus(z, r: float, j: int) -> Region:
    """Dyadic annulus around Q_z(r); by convention j = 0 returns the core cube."""
    if j == 0:
        return Cube(tuple(np.atleast_1d(z)), r)
    return Annulus(tuple(np.atleast_1d(z)), r, j)


def double_shell(cube: Cube) -> Annulus:
    """The shell 2Q minus Q of a cube, as the level-1 annulus."""
    return Annulus(cube.center, cube.side, 1)


@dataclass
class GridFunction:
    """Real values sampled at the cell midpoints of a window.

    ``values`` has shape ``window.cells`` (row-major over axes).
    """

    window: Window
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != tuple(self.window.cells):
            v = v.reshape(tuple(self.window.cells))
        if not np.all(np.isfinite(v)):
            raise LatticeError("grid function values must be finite")
        self.values = v

    @classmethod
    def from_callable(cls, window: Window, fn) -> "GridFunction":
        pts = window.midpoints()
        if window.n == 1:
            vals = np.asarray(fn(pts[:, 0]), dtype=float)
        else:
            vals = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
        return cls(window, np.broadcast_to(vals, (window.cell_count,)).reshape(window.cells))

    @classmethod
    def zeros(cls, window: Window) -> "GridFunction":
        return cls(window, np.zeros(window.cells))

    @classmethod
    def monomial(cls, window: Window, gamma) -> "GridFunction":
        """y^gamma sampled on the window."""
        gamma = tuple(int(g) for g in np.atleast_1d(gamma))
        pts = window.midpoints()
        vals = np.ones(pts.shape[0])
        for axis, g in enumerate(gamma):
            if g:
                vals = vals * pts[:, axis] ** g
        return cls(window, vals.reshape(window.cells))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.window, np.asarray(values, dtype=float))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            if not self.window.same_lattice(other.window):
                raise LatticeError("window mismatch in grid-function arithmetic")
            return GridFunction(self.window, self.values + other.values)
        return GridFunction(self.window, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            if not self.window.same_lattice(other.window):
                raise LatticeError("window mismatch in grid-function arithmetic")
            return GridFunction(self.window, self.values - other.values)
        return GridFunction(self.window, self.values - other)

    def __mul__(self, scalar):
        return GridFunction(self.window, self.values * float(scalar))

    __rmul__ = __mul__

    def save(self, path) -> None:
        payload = self.window.to_dict()
        payload["values"] = [float(v) for v in self.flat]
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path) -> "GridFunction":
        d = json.loads(Path(path).read_text())
        window = Window(d["n"], tuple(d["lower"]), tuple(d["upper"]), tuple(d["cells"]))
        return cls(window, np.asarray(d["values"], dtype=float))


def region_mask(window: Window, region: Region) -> np.ndarray:
    """Boolean mask (flat, row-major) of window cells with midpoint in region."""
    return region.contains(window.midpoints())


def _virtual_axis_indices(lower: float, h: float, lo: float, hi: float) -> np.ndarray:
    # indices k with lower + (k + 1/2) h inside [lo, hi]; k may be negative
    k_min = math.floor((lo - lower) / h - 0.5) - 1
    k_max = math.ceil((hi - lower) / h - 0.5) + 1
    return np.arange(k_min, k_max + 1)


def region_measure(window: Window, region: Region, policy: str = "restrict") -> float:
    """Cell-counted measure of a region.

    ``restrict`` counts window cells only; ``zero-extend`` counts midpoints of
    the window's lattice extended beyond the window (the function is zero
    there, but the region keeps its full size).
    """
    if policy == "restrict":
        return float(np.count_nonzero(region_mask(window, region))) * window.cell_measure
    if policy != "zero-extend":
        raise ValueError(f"unknown policy {policy!r}")
    lo, hi = region.bounding_box()
    h = window.h
    axes = [
        window.lower[a] + (_virtual_axis_indices(window.lower[a], h, lo[a], hi[a]) + 0.5) * h
        for a in range(window.n)
    ]
    if window.n == 1:
        pts = axes[0][:, None]
    else:
        x, y = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([x.ravel(), y.ravel()], axis=1)
    return float(np.count_nonzero(region.contains(pts))) * window.cell_measure


def integrate(f: GridFunction, region: Region) -> float:
    """Midpoint-rule integral of f over the region (0 for a disjoint region)."""
    mask = region_mask(f.window, region)
    if not mask.any():
        return 0.0
    return float(f.flat[mask].sum()) * f.window.cell_measure


def average(f: GridFunction, region: Region, policy: str = "restrict") -> float:
    """Mean of f over the region in the cell-counted measure.

    Under ``zero-extend`` the denominator counts virtual midpoints beyond the
    window (where f is zero), so boundary regions keep their full size.
    """
    mask = region_mask(f.window, region)
    if not mask.any():
        raise EmptyRegionError(f"region {region} contains no cell midpoint")
    if policy == "restrict":
        return float(f.flat[mask].sum()) / int(np.count_nonzero(mask))
    return integrate(f, region) / region_measure(f.window, region, policy)


def lq_norm(f: GridFunction, region: Region, q) -> float:
    """L^q norm over the region; q = inf gives the midpoint sup."""
    if q != math.inf and q < 1:
        raise ValueError("q must be >= 1 or inf")
    mask = region_mask(f.window, region)
    vals = np.abs(f.flat[mask])
    if vals.size == 0:
        return 0.0
    if q == math.inf:
        return float(vals.max())
    return float((vals**q).sum() * f.window.cell_measure) ** (1.0 / q)
