"""Planar geometry: convex hull, barycentric coordinates, uniform triangle subdivision.

Points are plain ``numpy`` arrays of shape ``(2,)``; barycentric weights are
arrays of shape ``(3,)``. A :class:`Triangle` wraps its three vertices.

Subdivision cells live on the lattice of an ``M``-row split of the reference
triangle. With barycentric coordinates scaled by ``M``:

* upward cell ``(i, j, k)`` with ``i + j + k = M - 1`` has vertices
  ``(i+1, j, k), (i, j+1, k), (i, j, k+1)``;
* downward cell ``(i, j, k)`` with ``i + j + k = M - 2`` has vertices
  ``(i, j+1, k+1), (i+1, j, k+1), (i+1, j+1, k)``.

Cells are indexed row by row, ``k`` descending (the row at vertex 3 first),
and within a row by ``i`` ascending with each upward cell placed before the
downward cell to its right.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, floor
from typing import NamedTuple

import numpy as np

from .errors import (
    AllCollinear,
    DegenerateTriangle,
    GeometryError,
    OutsideTriangle,
    TooFewPoints,
    WeightsNotNormalized,
    ZeroResolution,
)

CONTAIN_TOL = 1e-12
DEGENERACY_TOL = 1e-12


def as_point(p):
    """Return ``p`` as a finite float array of shape (2,)."""
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"non-finite point {p!r}")
    return arr


def cross(o, a, b):
    """z-component of (a - o) x (b - o); positive for a left turn."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class Triangle:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(3, 2)
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite triangle vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, v1, v2, v3):
        return cls(np.array([v1, v2, v3], dtype=float))

    @property
    def signed_area(self):
        v = self.vertices
        return 0.5 * cross(v[0], v[1], v[2])

    @property
    def area(self):
        return abs(self.signed_area)

    @property
    def diameter(self):
        v = self.vertices
        return max(
            float(np.hypot(*(v[0] - v[1]))),
            float(np.hypot(*(v[1] - v[2]))),
            float(np.hypot(*(v[2] - v[0]))),
        )

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    @property
    def is_degenerate(self):
        d = self.diameter
        return d == 0.0 or 2.0 * self.area <= DEGENERACY_TOL * d * d

    def contains(self, p, tol=CONTAIN_TOL):
        return bool(np.all(barycentric_coords(p, self) >= -tol))


def convex_hull(points):
    """Indices of the strict convex hull vertices, counterclockwise.

    The sequence starts at the lexicographically smallest vertex (by x, then
    y). Points lying on a hull edge without being a corner are left out.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        raise TooFewPoints(f"need at least 3 points, got {n}")
    order = sorted(range(n), key=lambda i: (pts[i, 0], pts[i, 1]))

    def chain(indices):
        out = []
        for i in indices:
            while len(out) >= 2 and cross(pts[out[-2]], pts[out[-1]], pts[i]) <= 0:
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(reversed(order))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise AllCollinear("all points are collinear")
    return hull


def barycentric_coords(p, tri):
    """Barycentric weights of ``p`` with respect to ``tri``.

    ``p`` may also be an ``(n, 2)`` array, in which case an ``(n, 3)`` array
    is returned.
    """
    if tri.is_degenerate:
        raise DegenerateTriangle("triangle has (near) zero area")
    p = np.asarray(p, dtype=float)
    (x1, y1), (x2, y2), (x3, y3) = tri.vertices
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    dx = p[..., 0] - x3
    dy = p[..., 1] - y3
    w1 = ((y2 - y3) * dx + (x3 - x2) * dy) / det
    w2 = ((y3 - y1) * dx + (x1 - x3) * dy) / det
    return np.stack([w1, w2, 1.0 - w1 - w2], axis=-1)


def bary_to_point(w, tri):
    w = np.asarray(w, dtype=float)
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise WeightsNotNormalized(f"weights sum to {w.sum()!r}")
    return w @ tri.vertices


class CellRecord(NamedTuple):
    index: int
    orientation: str  # "up" or "down"
    lattice: tuple
    centroid: np.ndarray


@dataclass(frozen=True, eq=False)
class TriSubdivision:
    """The ``M**2`` cells of an ``M``-row triangle subdivision.

    ``numerators[c] / (3 M)`` are the centroid weights of cell ``c``; the
    integer numerators always sum to ``3 M``.
    """

    M: int
    upward: np.ndarray
    lattice: np.ndarray
    numerators: np.ndarray
    centroids: np.ndarray
    adjacency: tuple
    lookup: dict

    def __len__(self):
        return self.M * self.M

    @property
    def cells(self):
        return [
            CellRecord(c, "up" if self.upward[c] else "down",
                       tuple(int(v) for v in self.lattice[c]), self.centroids[c])
            for c in range(len(self))
        ]

    def vertices(self, c):
        """Barycentric coordinates of the three corners of cell ``c``."""
        i, j, k = self.lattice[c]
        if self.upward[c]:
            corners = [(i + 1, j, k), (i, j + 1, k), (i, j, k + 1)]
        else:
            corners = [(i, j + 1, k + 1), (i + 1, j, k + 1), (i + 1, j + 1, k)]
        return np.array(corners, dtype=float) / self.M

    def contains(self, c, w, tol=CONTAIN_TOL):
        x = np.asarray(w, dtype=float) * self.M
        lat = self.lattice[c]
        if self.upward[c]:
            return bool(np.all(x >= lat - tol * self.M))
        return bool(np.all(x <= lat + 1 + tol * self.M))


@lru_cache(maxsize=64)
def subdivide(M):
    """Uniform ``M``-row subdivision of the reference triangle (cached)."""
    if int(M) != M or M < 1:
        raise ZeroResolution(f"resolution must be a positive integer, got {M!r}")
    M = int(M)
    upward, lattice, nums = [], [], []
    for k in range(M - 1, -1, -1):
        top = M - 1 - k
        for i in range(top + 1):
            upward.append(True)
            lattice.append((i, top - i, k))
            nums.append((3 * i + 1, 3 * (top - i) + 1, 3 * k + 1))
            if i < top:
                j = top - 1 - i
                upward.append(False)
                lattice.append((i, j, k))
                nums.append((3 * i + 2, 3 * j + 2, 3 * k + 2))
    lookup = {(up, lat): c for c, (up, lat) in enumerate(zip(upward, lattice))}

    adjacency = []
    for up, (i, j, k) in zip(upward, lattice):
        if up:
            cand = [(i - 1, j, k), (i, j - 1, k), (i, j, k - 1)]
            nbrs = [lookup[(False, t)] for t in cand if (False, t) in lookup]
        else:
            cand = [(i + 1, j, k), (i, j + 1, k), (i, j, k + 1)]
            nbrs = [lookup[(True, t)] for t in cand]
        adjacency.append(tuple(sorted(nbrs)))

    upward = np.array(upward, dtype=bool)
    lattice = np.array(lattice, dtype=int)
    nums = np.array(nums, dtype=int)
    centroids = nums / (3.0 * M)
    for arr in (upward, lattice, nums, centroids):
        arr.setflags(write=False)
    return TriSubdivision(M, upward, lattice, nums, centroids, tuple(adjacency), lookup)


def weight_alphabet(M):
    """Sorted distinct centroid coordinates of the ``M``-row subdivision."""
    return np.unique(subdivide(M).centroids)


def formula_weight_set(M):
    """The literal two-parameter family (3a - b) / (3M), a = 1..M, b = 1, 2.

    It has one value more than :func:`weight_alphabet`, namely (3M - 1)/(3M),
    which no cell centroid attains.
    """
    return np.unique([(3 * a - b) / (3 * M) for a in range(1, M + 1) for b in (1, 2)])


def locate_cell(sub, w, tol=CONTAIN_TOL):
    """Index of the cell containing barycentric point ``w``.

    Points on shared edges or vertices go to the smallest containing index.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < -tol):
        raise OutsideTriangle(f"barycentric point {w} lies outside the triangle")
    M = sub.M
    x = w * M
    t = tol * M
    lo = [max(0, ceil(v - 1 - t)) for v in x]
    hi = [min(M - 1, floor(v + t)) for v in x]
    found = []
    for i in range(lo[0], hi[0] + 1):
        for j in range(lo[1], hi[1] + 1):
            for up, total in ((True, M - 1), (False, M - 2)):
                k = total - i - j
                c = sub.lookup.get((up, (i, j, k)))
                if c is not None and sub.contains(c, w, tol):
                    found.append(c)
    if not found:
        # only reachable through rounding right at the outer boundary
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        return locate_cell(sub, w, tol=max(tol, 1e-9))
    return min(found)


def cell_point(sub, c, tri):
    """World-coordinate centroid of cell ``c`` inside ``tri``."""
    return sub.centroids[c] @ tri.vertices
