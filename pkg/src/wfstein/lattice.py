"""Grids, grid functions and dyadic filtrations of partitions.

Cubes at level ``n`` split every spatial axis of the domain into ``2**n``
half-open pieces and the time axis of a parabolic domain into ``2**(2*m*n)``
pieces, so the parent/child measure ratio is exactly ``2**d`` (Euclidean) or
``2**(d + 2m)`` (parabolic).  Level 0 is the whole domain.

Axis convention: for ``parabolic_box`` axis 0 is time and axes ``1..d`` are
space; all other kinds have ``d`` spatial axes.  For ``half_space_box`` the
wall sits at the lower end of axis 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ArgumentError, DomainError

KINDS = ("euclidean_box", "euclidean_torus", "parabolic_box", "half_space_box")


@dataclass(frozen=True)
class Domain:
    kind: str
    d: int
    extents: tuple
    points: tuple
    m: int = 1
    periodic: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown domain kind {self.kind!r}")
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        points = tuple(int(n) for n in self.points)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "points", points)
        if self.m < 1:
            raise ArgumentError("parabolic order m must be a positive integer")
        if self.kind != "parabolic_box" and self.m != 1:
            raise ArgumentError("m > 1 only makes sense for parabolic_box")
        ndim = self.d + (1 if self.kind == "parabolic_box" else 0)
        if self.d < 1 or len(extents) != ndim or len(points) != ndim:
            raise ArgumentError(
                f"{self.kind} with d={self.d} needs {ndim} extents and point counts"
            )
        for axis, ((lo, hi), n) in enumerate(zip(extents, points)):
            if not hi > lo:
                raise ArgumentError(f"axis {axis}: extent must have positive length")
            if n < 2:
                raise ArgumentError(f"axis {axis}: at least 2 grid points required")
        if self.periodic is None:
            object.__setattr__(self, "periodic", self.kind == "euclidean_torus")
        elif self.kind == "euclidean_torus" and not self.periodic:
            raise ArgumentError("a torus is periodic")
        elif self.kind == "half_space_box" and self.periodic:
            raise ArgumentError("half_space_box has a wall and cannot be periodic")

    # -- geometry -----------------------------------------------------------
    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple:
        return self.points

    @property
    def is_parabolic(self) -> bool:
        return self.kind == "parabolic_box"

    @property
    def time_axis(self):
        return 0 if self.is_parabolic else None

    @property
    def spatial_axes(self) -> tuple:
        start = 1 if self.is_parabolic else 0
        return tuple(range(start, self.ndim))

    @property
    def lengths(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.extents])

    @property
    def spacing(self) -> np.ndarray:
        return self.lengths / np.array(self.points)

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def refine_exponents(self) -> tuple:
        """Per-axis halvings per level: 2m on the time axis, 1 elsewhere."""
        return tuple(
            2 * self.m if axis == self.time_axis else 1 for axis in range(self.ndim)
        )

    def coords(self, axis: int) -> np.ndarray:
        lo, _ = self.extents[axis]
        return lo + (np.arange(self.points[axis]) + 0.5) * self.spacing[axis]

    def mesh(self) -> list:
        return np.meshgrid(*[self.coords(a) for a in range(self.ndim)], indexing="ij")

    def distance(self, offsets: Sequence) -> np.ndarray:
        """Metric length of a displacement given per axis (broadcastable arrays).

        Euclidean norm over spatial axes; for parabolic domains the time
        displacement contributes ``|t|**(1/(2m))``.
        """
        space = sum(np.asarray(offsets[a], dtype=float) ** 2 for a in self.spatial_axes)
        dist = np.sqrt(space)
        if self.is_parabolic:
            dist = dist + np.abs(np.asarray(offsets[0], dtype=float)) ** (1.0 / (2 * self.m))
        return dist

    def sub(self, axes: Sequence[int]) -> "Domain":
        """Domain spanned by a subset of axes (used for product weights)."""
        axes = tuple(axes)
        extents = [self.extents[a] for a in axes]
        points = [self.points[a] for a in axes]
        if self.is_parabolic and 0 in axes:
            if axes[0] != 0:
                raise ArgumentError("time axis must come first in a parabolic sub-domain")
            if len(axes) == 1:
                return TimeLine(extents[0], points[0], self.m, bool(self.periodic))
            return Domain("parabolic_box", len(axes) - 1, extents, points, m=self.m,
                          periodic=self.periodic)
        if self.kind == "half_space_box" and 0 in axes:
            if axes[0] != 0:
                raise ArgumentError("wall axis must come first in a half-space sub-domain")
            return Domain("half_space_box", len(axes), extents, points)
        kind = "euclidean_torus" if self.periodic else "euclidean_box"
        return Domain(kind, len(axes), extents, points)

    def with_points(self, points: Sequence[int]) -> "Domain":
        return Domain(self.kind, self.d, self.extents, tuple(points), m=self.m,
                      periodic=self.periodic)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "m": self.m,
            "extents": [list(e) for e in self.extents],
            "points": list(self.points),
            "periodic": bool(self.periodic),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Domain":
        allowed = {"kind", "d", "m", "extents", "points", "periodic"}
        unknown = set(doc) - allowed
        if unknown:
            raise ArgumentError(f"unknown domain fields: {sorted(unknown)}")
        return cls(doc["kind"], doc["d"], tuple(map(tuple, doc["extents"])),
                   tuple(doc["points"]), m=doc.get("m", 1), periodic=doc.get("periodic"))


class TimeLine(Domain):
    """One-dimensional time axis carrying the parabolic metric |t|^(1/2m)."""

    def __init__(self, extent, points, m, periodic):
        object.__setattr__(self, "kind", "euclidean_torus" if periodic else "euclidean_box")
        object.__setattr__(self, "d", 1)
        object.__setattr__(self, "extents", ((float(extent[0]), float(extent[1])),))
        object.__setattr__(self, "points", (int(points),))
        object.__setattr__(self, "m", 1)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "time_order", m)

    def distance(self, offsets):
        return np.abs(np.asarray(offsets[0], dtype=float)) ** (1.0 / (2 * self.time_order))

    def refine_exponents(self):
        return (2 * self.time_order,)

    def with_points(self, points):
        return TimeLine(self.extents[0], points[0], self.time_order, self.periodic)


@dataclass(frozen=True)
class GridFunction:
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape:
            if values.size != int(np.prod(self.domain.shape)):
                raise ArgumentError(
                    f"value count {values.size} does not match grid {self.domain.shape}"
                )
            values = values.reshape(self.domain.shape)
        object.__setattr__(self, "values", values)

    @property
    def cell_measure(self) -> float:
        return self.domain.cell_measure

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_measure)

    def like(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    @classmethod
    def from_callable(cls, domain: Domain, func) -> "GridFunction":
        return cls(domain, func(*domain.mesh()))


@dataclass(frozen=True)
class CubeId:
    level: int
    index: tuple


@dataclass(frozen=True)
class DyadicLattice:
    domain: Domain
    n_min: int
    n_max: int
    N1: int
    cubes: dict = field(repr=False, compare=False)

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def counts(self, n: int) -> tuple:
        """Number of level-n cubes along each axis."""
        return tuple(2 ** (n * r) for r in self.domain.refine_exponents())

    def block(self, n: int) -> tuple:
        """Grid cells per level-n cube along each axis."""
        return tuple(p // c for p, c in zip(self.domain.points, self.counts(n)))

    def check_level(self, n: int):
        if not self.n_min <= n <= self.n_max:
            raise ArgumentError(f"level {n} outside [{self.n_min}, {self.n_max}]")

    def cube_sums(self, values: np.ndarray, n: int) -> np.ndarray:
        return _block_reduce(values, self.block(n))

    def expand(self, coarse: np.ndarray, n: int) -> np.ndarray:
        return _block_expand(coarse, self.block(n))

    def average(self, values: np.ndarray, n: int, weight: np.ndarray | None = None) -> np.ndarray:
        """Cube averages at level n, broadcast back onto the grid."""
        if weight is None:
            sums = self.cube_sums(values, n)
            cells = int(np.prod(self.block(n)))
            return self.expand(sums / cells, n)
        return self.expand(self.cube_sums(values * weight, n) / self.cube_sums(weight, n), n)

    def labels(self, n: int) -> np.ndarray:
        """Flat index of the level-n cube containing each grid cell."""
        counts = self.counts(n)
        ids = np.arange(int(np.prod(counts))).reshape(counts)
        return self.expand(ids, n)

    def cube_extent(self, cube: CubeId) -> list:
        out = []
        for axis, (i, c) in enumerate(zip(cube.index, self.counts(cube.level))):
            lo, hi = self.domain.extents[axis]
            w = (hi - lo) / c
            out.append((lo + i * w, lo + (i + 1) * w))
        return out

    def cube_slices(self, cube: CubeId) -> tuple:
        block = self.block(cube.level)
        return tuple(slice(i * b, (i + 1) * b) for i, b in zip(cube.index, block))

    def cube_from_flat(self, n: int, flat: int) -> CubeId:
        return CubeId(n, tuple(int(i) for i in np.unravel_index(flat, self.counts(n))))


def _block_reduce(values: np.ndarray, block: tuple) -> np.ndarray:
    shape = []
    for size, b in zip(values.shape, block):
        shape.extend([size // b, b])
    return values.reshape(shape).sum(axis=tuple(range(1, 2 * len(block), 2)))


def _block_expand(coarse: np.ndarray, block: tuple) -> np.ndarray:
    out = coarse
    for axis, b in enumerate(block):
        if b > 1:
            out = np.repeat(out, b, axis=axis)
    return out


def build_lattice(domain: Domain, n_min: int, n_max: int) -> DyadicLattice:
    if n_max < n_min:
        raise ArgumentError(f"n_max={n_max} < n_min={n_min}")
    if n_min < 0:
        raise ArgumentError("levels start at 0 (the whole domain)")
    for axis, (pts, r) in enumerate(zip(domain.points, domain.refine_exponents())):
        need = 2 ** (n_max * r)
        if pts % need:
            raise AlignmentError(
                axis, f"{pts} cells is not a multiple of the {need} level-{n_max} cubes"
            )
    n1 = 2 ** sum(domain.refine_exponents())
    cubes = {}
    for n in range(n_min, n_max + 1):
        counts = tuple(2 ** (n * r) for r in domain.refine_exponents())
        block = [p // c for p, c in zip(domain.points, counts)]
        idx = np.indices(counts).reshape(len(counts), -1).T
        lo = idx * np.array(block)
        cubes[n] = np.stack([lo, lo + np.array(block)], axis=-1)
    return DyadicLattice(domain, n_min, n_max, n1, cubes)


def conditional_expectation(f: GridFunction, lat: DyadicLattice, n: int) -> GridFunction:
    lat.check_level(n)
    if f.domain != lat.domain:
        raise ArgumentError("function and lattice live on different domains")
    return f.like(lat.average(f.values, n))


def cube_containing(lat: DyadicLattice, point: Sequence[float], n: int) -> CubeId:
    lat.check_level(n)
    dom = lat.domain
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (dom.ndim,):
        raise ArgumentError(f"point needs {dom.ndim} coordinates")
    index = []
    for axis, (x, c) in enumerate(zip(point, lat.counts(n))):
        lo, hi = dom.extents[axis]
        if not lo <= x < hi:
            raise DomainError(f"coordinate {x} outside [{lo}, {hi}) on axis {axis}")
        i = int(math.floor((x - lo) * c / (hi - lo)))
        index.append(min(i, c - 1))
    return CubeId(n, tuple(index))


def lattice_constants(domain: Domain) -> tuple:
    """(N0, eps0): level-0 diameter and inscribed-ball radius, with delta = 1/2."""
    n0 = float(domain.distance(list(domain.lengths)))
    eps0 = min(
        float(domain.distance([L / 2 if a == axis else 0.0 for a, L in enumerate(domain.lengths)]))
        for axis in range(domain.ndim)
    )
    return n0, eps0


@dataclass
class ValidationReport:
    checks: dict
    details: dict
    measured_ratios: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list:
        return [name for name, ok in self.checks.items() if not ok]


def validate_lattice(lat: DyadicLattice) -> ValidationReport:
    dom = lat.domain
    h = dom.spacing
    n0, eps0 = lattice_constants(dom)
    checks = {"disjoint": True, "covering": True, "nested": True, "diameter": True,
              "inscribed_ball": True, "measure_ratio": True}
    details = {}
    ratios = {}
    for n in lat.levels:
        boxes = lat.cubes[n]
        count = np.zeros(dom.shape, dtype=np.int64)
        for box in boxes:
            count[tuple(slice(lo, hi) for lo, hi in box)] += 1
        if (count > 1).any():
            checks["disjoint"] = False
            details.setdefault("disjoint", f"level {n}: {int((count > 1).sum())} cells multiply covered")
        if (count < 1).any():
            checks["covering"] = False
            details.setdefault("covering", f"level {n}: {int((count < 1).sum())} cells uncovered")

        sides = (boxes[:, :, 1] - boxes[:, :, 0]) * h
        scale = 0.5 ** n
        diam = dom.distance(list(sides.T))
        if (diam > n0 * scale * (1 + 1e-12)).any():
            checks["diameter"] = False
            details.setdefault("diameter", f"level {n}: max diam {diam.max():.6g} > {n0 * scale:.6g}")
        half = [dom.distance([sides[:, a] / 2 if b == a else np.zeros(len(sides))
                              for b in range(dom.ndim)]) for a in range(dom.ndim)]
        inscribed = np.min(np.stack(half), axis=0)
        if (inscribed < eps0 * scale * (1 - 1e-12)).any():
            checks["inscribed_ball"] = False
            details.setdefault("inscribed_ball", f"level {n}: a cube misses the ball of radius {eps0 * scale:.6g}")

        if n == lat.n_min:
            continue
        parents = lat.cubes[n - 1]
        cells_child = np.prod(boxes[:, :, 1] - boxes[:, :, 0], axis=1)
        cells_parent = np.prod(parents[:, :, 1] - parents[:, :, 0], axis=1)
        level_ratios = set()
        for start in range(0, len(boxes), 1024):
            child = boxes[start:start + 1024]
            inside = np.all(
                (parents[None, :, :, 0] <= child[:, None, :, 0])
                & (child[:, None, :, 1] <= parents[None, :, :, 1]),
                axis=2,
            )
            n_parents = inside.sum(axis=1)
            if (n_parents != 1).any():
                checks["nested"] = False
                details.setdefault("nested", f"level {n}: a cube has {int(n_parents[n_parents != 1][0])} parents")
                continue
            owner = inside.argmax(axis=1)
            r = cells_parent[owner] / cells_child[start:start + 1024]
            level_ratios.update(np.unique(r).tolist())
        ratios[n] = sorted(level_ratios)
        if any(r != lat.N1 for r in level_ratios):
            checks["measure_ratio"] = False
            details.setdefault("measure_ratio", f"level {n}: ratios {sorted(level_ratios)} != {lat.N1}")
    return ValidationReport(checks, details, ratios)
