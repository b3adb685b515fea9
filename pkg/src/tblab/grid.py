"""Uniform midpoint grids, sampled functions, cubes, dyadic families, Lp norms.

Sample points are cell centers, so indicators of cubes whose edges align
with cell edges are represented exactly and dyadic tilings are exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .util import fmt_float

DEFAULT_GENERATION_CAP = 1 << 20


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube given by center and side length."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "side", float(self.side))
        if self.side <= 0:
            raise ValueError(f"cube side must be positive, got {self.side}")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def diam(self) -> float:
        return float(np.sqrt(self.d) * self.side)

    @property
    def volume(self) -> float:
        return self.side ** self.d

    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    def contains_point(self, p) -> bool:
        """Half-open membership [lo, hi) per axis."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return bool(np.all(p >= self.lo()) and np.all(p < self.hi()))

    def gap_to(self, other: "Cube") -> float:
        """Euclidean distance between the two closed cubes."""
        a = np.maximum(self.lo() - np.asarray(other.hi()), 0.0)
        b = np.maximum(np.asarray(other.lo()) - self.hi(), 0.0)
        return float(np.sqrt(np.sum(np.maximum(a, b) ** 2)))


def cube1(center: float, side: float) -> Cube:
    return Cube((float(center),), side)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-center grid over a box in R^d, d in {1, 2}."""

    box: Cube
    n: int

    def __post_init__(self):
        if self.box.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.box.d}")
        if self.n < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.n}")

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def h(self) -> float:
        return self.box.side / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def point_count(self) -> int:
        return self.n ** self.d

    def axis(self, i: int = 0) -> np.ndarray:
        c = self.box.center[i]
        lo = c - self.box.side / 2.0
        return lo + (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        if self.d == 1:
            return (self.axis(0),)
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def index_of(self, point) -> tuple[int, ...]:
        """Index of the grid point equal to `point` (must lie on the grid)."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for i in range(self.d):
            ax = self.axis(i)
            j = int(np.argmin(np.abs(ax - p[i])))
            if abs(ax[j] - p[i]) > 1e-9 * max(1.0, self.box.side):
                raise ValueError(f"{tuple(p)} is not a grid point (axis {i})")
            idx.append(j)
        return tuple(idx)

    def nearest_index(self, point) -> tuple[int, ...]:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return tuple(int(np.argmin(np.abs(self.axis(i) - p[i]))) for i in range(self.d))


def make_grid(d: int, box: Cube, n: int) -> Grid:
    """Midpoint-rule grid covering `box` with n points per axis."""
    if d != box.d:
        raise ValueError(f"box dimension {box.d} does not match d={d}")
    return Grid(box=box, n=int(n))


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples on a grid, optionally carrying the closed form used."""

    grid: Grid
    values: np.ndarray
    rule: object = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"value shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            pt = tuple(self.grid.axis(i)[bad[i]] for i in range(self.grid.d))
            raise ValueError(f"non-finite sample at grid point {pt}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0.0))


def sample(rule, grid: Grid, name: str = "", on_nonfinite: str = "error") -> SampledFunction:
    """Evaluate a closed-form rule at all grid points.

    `rule` is vectorized: rule(x) in d=1, rule(x, y) in d=2. With
    on_nonfinite="mask", non-finite samples (isolated singularities hit by
    the lattice) are replaced by 0 instead of raising.
    """
    vals = np.asarray(rule(*grid.meshgrid()), dtype=complex)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        if on_nonfinite == "mask":
            vals = np.where(np.isfinite(vals), vals, 0.0)
        else:
            bad = np.argwhere(~np.isfinite(vals))[0]
            pt = tuple(grid.axis(i)[bad[i]] for i in range(grid.d))
            raise ValueError(f"rule produced non-finite value at {pt}")
    return SampledFunction(grid=grid, values=vals, rule=rule, name=name)


def lp_norm(f: SampledFunction, p) -> float:
    """Midpoint-rule (int |f|^p)^(1/p); exact max over samples for p=inf."""
    a = np.abs(f.values)
    if p == np.inf or p == "inf":
        return float(np.max(a))
    p = float(p)
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    cell = f.grid.h ** f.grid.d
    return float(np.sum(a ** p) * cell) ** (1.0 / p)


@dataclass(frozen=True)
class DyadicFamily:
    """Dyadic generations over a root box: generation k has side root/2^k."""

    root: Cube
    k_min: int
    k_max: int
    generations: dict

    def all_cubes(self):
        for k in range(self.k_min, self.k_max + 1):
            yield from self.generations[k]

    def side(self, k: int) -> float:
        return self.root.side / (1 << k)


def dyadic_family(root: Cube, k_min: int, k_max: int,
                  cap: int = DEFAULT_GENERATION_CAP) -> DyadicFamily:
    """Exact dyadic tilings of `root` for generations k_min..k_max."""
    if k_min > k_max:
        raise ValueError("k_min must be <= k_max")
    if k_min < 0:
        raise ValueError("k_min must be >= 0")
    d = root.d
    total = sum((1 << k) ** d for k in range(k_min, k_max + 1))
    if total > cap:
        raise ValueError(f"family would contain {total} cubes, cap is {cap}")
    gens = {}
    lo = root.lo()
    for k in range(k_min, k_max + 1):
        side = root.side / (1 << k)
        cubes = []
        if d == 1:
            for i in range(1 << k):
                cubes.append(Cube((float(lo[0] + (i + 0.5) * side),), side))
        else:
            for i in range(1 << k):
                for j in range(1 << k):
                    cubes.append(Cube((float(lo[0] + (i + 0.5) * side),
                                       float(lo[1] + (j + 0.5) * side)), side))
        gens[k] = cubes
    return DyadicFamily(root=root, k_min=k_min, k_max=k_max, generations=gens)


# --- CSV interchange: header x[,y],re,im, lexicographic row order ---

def save_sampled_csv(f: SampledFunction, path) -> None:
    g = f.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if g.d == 1:
            w.writerow(["x", "re", "im"])
            ax = g.axis(0)
            for i in range(g.n):
                v = f.values[i]
                w.writerow([fmt_float(ax[i]), fmt_float(v.real), fmt_float(v.imag)])
        else:
            w.writerow(["x", "y", "re", "im"])
            ax, ay = g.axis(0), g.axis(1)
            for i in range(g.n):
                for j in range(g.n):
                    v = f.values[i, j]
                    w.writerow([fmt_float(ax[i]), fmt_float(ay[j]),
                                fmt_float(v.real), fmt_float(v.imag)])


def load_sampled_csv(path, name: str = "") -> SampledFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:1] != ["x"] or header[-2:] != ["re", "im"]:
        raise ValueError(f"unrecognized CSV header {header}")
    d = 1 if header[1] == "re" else 2
    data = np.asarray([[float(c) for c in r] for r in body])
    xs = np.unique(data[:, 0])
    n = len(xs)
    hx = xs[1] - xs[0]
    if not np.allclose(np.diff(xs), hx, rtol=0, atol=1e-9 * abs(hx)):
        raise ValueError("grid in CSV is not uniform")
    if d == 1:
        box = cube1((xs[0] + xs[-1]) / 2.0, n * hx)
        grid = Grid(box=box, n=n)
        vals = data[:, 1] + 1j * data[:, 2]
        return SampledFunction(grid=grid, values=vals.reshape(grid.shape), name=name)
    ys = np.unique(data[:, 1])
    if len(ys) != n:
        raise ValueError("CSV grid is not square")
    box = Cube(((xs[0] + xs[-1]) / 2.0, (ys[0] + ys[-1]) / 2.0), n * hx)
    grid = Grid(box=box, n=n)
    vals = (data[:, 2] + 1j * data[:, 3]).reshape(n, n)
    return SampledFunction(grid=grid, values=vals, name=name)
