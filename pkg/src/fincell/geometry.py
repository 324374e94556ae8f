"""Embedding domain, physical region description and penalization.

An :class:`EmbeddedGeometry` couples an axis-aligned embedding box with a
description of the physical region inside it. The region is either an
implicit boolean combination of primitives or a raster bitmap. Points that
are not physical belong to the fictitious extension and receive the
penalization factor ``10**-q``.

Points lying exactly on an interface are classified as physical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image


class GeometryError(ValueError):
    """Raised for invalid geometry construction or out-of-domain queries."""


# ---------------------------------------------------------------------------
# Implicit regions
# ---------------------------------------------------------------------------


class Region:
    """Base class of implicit regions.

    Subclasses implement ``_classify(points, closed)`` returning a boolean
    mask. ``closed=True`` includes the boundary, ``closed=False`` tests the
    open interior; the complement of a closed set is evaluated through the
    interior of its argument so that interface points stay physical.
    """

    def contains(self, points) -> np.ndarray:
        return self._classify(np.atleast_2d(np.asarray(points, dtype=float)), True)

    def _classify(self, pts: np.ndarray, closed: bool) -> np.ndarray:
        raise NotImplementedError

    def __or__(self, other: "Region") -> "Region":
        return Union((self, other))

    def __and__(self, other: "Region") -> "Region":
        return Intersection((self, other))

    def __invert__(self) -> "Region":
        return Complement(self)


@dataclass(frozen=True)
class Interval(Region):
    lo: float
    hi: float

    def _classify(self, pts, closed):
        x = pts[:, 0]
        if closed:
            return (x >= self.lo) & (x <= self.hi)
        return (x > self.lo) & (x < self.hi)


@dataclass(frozen=True)
class Rectangle(Region):
    x0: float
    y0: float
    x1: float
    y1: float

    def _classify(self, pts, closed):
        x, y = pts[:, 0], pts[:, 1]
        if closed:
            return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)


@dataclass(frozen=True)
class Circle(Region):
    cx: float
    cy: float
    r: float

    def _classify(self, pts, closed):
        d2 = (pts[:, 0] - self.cx) ** 2 + (pts[:, 1] - self.cy) ** 2
        return d2 <= self.r**2 if closed else d2 < self.r**2


@dataclass(frozen=True)
class HalfPlane(Region):
    """Points with ``nx*x + ny*y <= offset``."""

    nx: float
    ny: float
    offset: float

    def _classify(self, pts, closed):
        s = self.nx * pts[:, 0] + self.ny * pts[:, 1]
        return s <= self.offset if closed else s < self.offset


@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    def _classify(self, pts, closed):
        mask = np.zeros(len(pts), dtype=bool)
        for part in self.parts:
            mask |= part._classify(pts, closed)
        return mask


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    def _classify(self, pts, closed):
        mask = np.ones(len(pts), dtype=bool)
        for part in self.parts:
            mask &= part._classify(pts, closed)
        return mask


@dataclass(frozen=True)
class Complement(Region):
    inner: Region

    def _classify(self, pts, closed):
        return ~self.inner._classify(pts, not closed)


@dataclass(frozen=True)
class Bitmap(Region):
    """Raster region; ``grid[0]`` is the top row of the image.

    A point on a pixel edge or corner is physical if any adjacent pixel is.
    """

    grid: np.ndarray
    bounds: tuple

    def _classify(self, pts, closed):
        nrow, ncol = self.grid.shape
        x0, y0, x1, y1 = self.bounds
        tx = (pts[:, 0] - x0) / (x1 - x0) * ncol
        # row index counts downwards from the top edge
        ty = (y1 - pts[:, 1]) / (y1 - y0) * nrow
        phys = self.grid.astype(bool)
        mask = np.zeros(len(pts), dtype=bool)
        cols = (np.clip(np.ceil(tx) - 1, 0, ncol - 1), np.clip(np.floor(tx), 0, ncol - 1))
        rows = (np.clip(np.ceil(ty) - 1, 0, nrow - 1), np.clip(np.floor(ty), 0, nrow - 1))
        for r in rows:
            for c in cols:
                mask |= phys[r.astype(int), c.astype(int)]
        if not closed:
            # interior of a raster region: every touching pixel must be physical
            inner = np.ones(len(pts), dtype=bool)
            for r in rows:
                for c in cols:
                    inner &= phys[r.astype(int), c.astype(int)]
            return inner
        return mask


# ---------------------------------------------------------------------------
# Boundary data
# ---------------------------------------------------------------------------

EMBEDDING_FACES_1D = ("left", "right")
EMBEDDING_FACES_2D = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BoundaryDescriptor:
    """Boundary condition attached to an embedding face.

    Exactly one of ``dirichlet`` (prescribed value) and ``traction``
    (prescribed flux or end load) is set.
    """

    face: str
    dirichlet: float | None = None
    traction: float | None = None
    kind: str = "embedding_face"

    def __post_init__(self):
        if (self.dirichlet is None) == (self.traction is None):
            raise GeometryError(
                f"face {self.face!r}: exactly one of dirichlet/traction must be given"
            )
        if self.kind not in ("embedding_face", "internal_interface"):
            raise GeometryError(f"unknown boundary kind {self.kind!r}")


def check_boundaries(boundaries: Sequence[BoundaryDescriptor]) -> None:
    """Reject Dirichlet and Neumann data on the same face."""
    seen: dict[str, str] = {}
    for bc in boundaries:
        kind = "dirichlet" if bc.dirichlet is not None else "neumann"
        if bc.face in seen and seen[bc.face] != kind:
            raise GeometryError(f"face {bc.face!r} carries both Dirichlet and Neumann data")
        seen[bc.face] = kind


# ---------------------------------------------------------------------------
# Embedded geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRule:
    """Sampling used to decide whether a box is cut.

    Corners plus an ``n_interior`` lattice per direction, placed at the
    interior nodes of an equidistant subdivision.
    """

    n_interior: int = 5

    @classmethod
    def for_degree(cls, p: int) -> "ProbeRule":
        return cls(n_interior=p + 2)

    def points(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        dim = len(lo)
        t = np.linspace(0.0, 1.0, self.n_interior + 2)
        axes = [lo[d] + t * (hi[d] - lo[d]) for d in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class EmbeddedGeometry:
    """Embedding box plus physical region and penalization exponent ``q``.

    ``lower`` and ``upper`` hold the box corners (length 1 or 2).
    """

    lower: tuple
    upper: tuple
    region: Region
    q: int = 8
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or len(self.lower) not in (1, 2):
            raise GeometryError("embedding bounds must be a 1D interval or 2D rectangle")
        if any(h <= l for l, h in zip(self.lower, self.upper)):
            raise GeometryError("embedding bounds must have positive extent")
        if int(self.q) != self.q or self.q < 1:
            raise GeometryError(f"penalization exponent must be a positive integer, got {self.q}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def alpha_fict(self) -> float:
        return 10.0 ** (-self.q)

    def with_q(self, q: int) -> "EmbeddedGeometry":
        return EmbeddedGeometry(self.lower, self.upper, self.region, q, self.name)

    def _as_points(self, point) -> np.ndarray:
        pts = np.asarray(point, dtype=float)
        if pts.ndim == 0:
            pts = pts.reshape(1, 1)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1) if self.dim == 1 else pts.reshape(1, -1)
        if pts.shape[1] != self.dim:
            raise GeometryError(f"expected {self.dim}D points, got shape {pts.shape}")
        return pts

    def is_physical(self, point) -> np.ndarray:
        """Boolean physical mask for an array of points (no bounds check)."""
        return self.region.contains(self._as_points(point))

    def alpha(self, points) -> np.ndarray:
        """Vectorized penalization factor; raises for points outside the box."""
        pts = self._as_points(points)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        span = hi - lo
        outside = np.any((pts < lo - 1e-12 * span) | (pts > hi + 1e-12 * span), axis=1)
        if np.any(outside):
            bad = pts[np.argmax(outside)]
            raise GeometryError(f"point {bad.tolist()} lies outside the embedding domain")
        return np.where(self.region.contains(pts), 1.0, self.alpha_fict)

    def is_cut(self, lo, hi, probe: ProbeRule | None = None) -> bool:
        """True if probe samples of the box contain both classifications."""
        probe = probe or ProbeRule()
        mask = self.is_physical(probe.points(np.atleast_1d(lo), np.atleast_1d(hi)))
        return bool(mask.any() and not mask.all())


def alpha_at(geometry: EmbeddedGeometry, point) -> float:
    """Penalization factor at a single point: 1 in the physical domain, ``10**-q`` otherwise."""
    return float(geometry.alpha(point)[0])


def is_cut(geometry: EmbeddedGeometry, cell_lo, cell_hi, probe: ProbeRule | None = None) -> bool:
    lo, hi = np.atleast_1d(cell_lo).astype(float), np.atleast_1d(cell_hi).astype(float)
    if np.any(lo < np.asarray(geometry.lower) - 1e-12) or np.any(hi > np.asarray(geometry.upper) + 1e-12):
        raise GeometryError("cell must lie inside the embedding domain")
    return geometry.is_cut(lo, hi, probe)


def from_bitmap(grid, bounds, q: int = 8) -> EmbeddedGeometry:
    """Geometry from a 0/1 raster covering ``bounds = (x0, y0, x1, y1)``."""
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.size == 0:
        raise GeometryError("bitmap must be a non-empty rectangular 2D array")
    arr = (arr != 0).astype(np.uint8)
    x0, y0, x1, y1 = map(float, bounds)
    return EmbeddedGeometry((x0, y0), (x1, y1), Bitmap(arr, (x0, y0, x1, y1)), q, "bitmap")


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a P2 (plain) or P5 (raw) graymap and threshold at half the max value."""
    try:
        with Image.open(path) as im:
            if im.format != "PPM" or im.mode not in ("L", "I", "I;16", "I;16B"):
                raise GeometryError(f"{path} is not a graymap")
            full = 255.0 if im.mode == "L" else 65535.0
            values = np.asarray(im, dtype=float)
    except (OSError, SyntaxError) as exc:
        raise GeometryError(f"cannot read graymap {path}: {exc}") from None
    return (values / full >= 0.5).astype(np.uint8)


def write_pgm(path: str | Path, grid) -> None:
    """Write a 0/1 grid as a raw (P5) graymap."""
    arr = (np.asarray(grid) != 0).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PPM")


# ---------------------------------------------------------------------------
# Benchmark geometries
# ---------------------------------------------------------------------------

ROD_INTERFACES = (1.0, 7.0 / 3.0)
ROD_LENGTH = 3.0

TRANSPORT_INCLUSIONS = ((0.35, 0.55, 0.16), (0.68, 0.30, 0.13))


def rod_geometry(q: int = 8) -> EmbeddedGeometry:
    """Two physical rods [0, 1] and [7/3, 3] separated by a fictitious gap."""
    a, b = ROD_INTERFACES
    return EmbeddedGeometry((0.0,), (ROD_LENGTH,), Union((Interval(0.0, a), Interval(b, ROD_LENGTH))), q, "rod")


def inclusion_geometry(
    inclusions: Sequence[tuple[float, float, float]] = TRANSPORT_INCLUSIONS,
    q: int = 6,
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0),
) -> EmbeddedGeometry:
    """Square flow domain with impermeable circular inclusions removed."""
    x0, y0, x1, y1 = bounds
    box = Rectangle(x0, y0, x1, y1)
    if inclusions:
        region: Region = Intersection((box, Complement(Union(tuple(Circle(*c) for c in inclusions)))))
    else:
        region = box
    return EmbeddedGeometry((x0, y0), (x1, y1), region, q, "inclusions")


def rasterize(region: Region, bounds, shape: tuple[int, int]) -> np.ndarray:
    """Sample a region at pixel centres; returns grid with row 0 at the top."""
    x0, y0, x1, y1 = bounds
    nrow, ncol = shape
    xc = x0 + (np.arange(ncol) + 0.5) * (x1 - x0) / ncol
    yc = y1 - (np.arange(nrow) + 0.5) * (y1 - y0) / nrow
    X, Y = np.meshgrid(xc, yc)
    mask = region.contains(np.stack([X.ravel(), Y.ravel()], axis=1))
    return mask.reshape(nrow, ncol).astype(np.uint8)
