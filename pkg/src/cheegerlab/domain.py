"""Axis-aligned box domains and uniform cell-complex discretizations.

Domains are finite unions of axis-aligned boxes.  Grids are uniform with the
same spacing on every axis (``1/resolution``), which keeps every volume and
face-area computation exact up to float rounding: a cell has volume ``h^n``
and every face has area ``h^(n-1)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import yaml

__all__ = [
    "Box",
    "CellSet",
    "DomainSpec",
    "Grid",
    "GridError",
    "PerimeterMode",
    "build_grid",
    "builtin_specs",
    "dump_spec",
    "inscribed_rectangle",
    "iso_ratio",
    "load_spec",
    "perimeter",
    "volume",
]

SNAP_TOL = 1e-9


class GridError(ValueError):
    """Raised for invalid domain specs or degenerate grids."""


class PerimeterMode(Enum):
    """Which boundary faces count toward a set's perimeter.

    DIRICHLET counts faces on the domain boundary (matches the 1-Laplacian
    functional with its boundary trace term); RELATIVE measures perimeter
    strictly inside the domain, so boundary portions are free.
    """

    DIRICHLET = "dirichlet"
    RELATIVE = "relative"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-axis (lo, hi) intervals."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (hi > lo):
                raise GridError(f"degenerate box interval ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.bounds:
            v *= hi - lo
        return v

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= x <= hi for (lo, hi), x in zip(self.bounds, point))


@dataclass(frozen=True)
class DomainSpec:
    """Union-of-boxes domain with a name and a convexity hint.

    ``convex_hint`` gates the convex-only estimators (Faber-Krahn lower
    bounds, bilateral verification); it is trusted, not verified.
    """

    name: str
    boxes: tuple[Box, ...]
    convex_hint: bool = False

    def __post_init__(self):
        if not self.boxes:
            raise GridError("domain spec needs at least one box")
        n = self.boxes[0].dim
        if n < 1:
            raise GridError("dimension must be >= 1")
        if any(b.dim != n for b in self.boxes):
            raise GridError("all boxes must share one dimension")

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    def volume(self) -> float:
        """Volume of the union, via the arrangement decomposition (exact)."""
        coords = _arrangement_coords(self)
        total = 0.0
        for cell in _covered_arrangement_cells(self, coords):
            v = 1.0
            for ax, (a, b) in enumerate(cell):
                v *= coords[ax][b] - coords[ax][a]
            total += v
        return total

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dim,
            "boxes": [[[lo, hi] for lo, hi in b.bounds] for b in self.boxes],
            "convex_hint": self.convex_hint,
        }

    @staticmethod
    def from_dict(d: dict) -> "DomainSpec":
        boxes = tuple(Box(tuple((float(lo), float(hi)) for lo, hi in b)) for b in d["boxes"])
        spec = DomainSpec(name=str(d.get("name", "unnamed")), boxes=boxes,
                          convex_hint=bool(d.get("convex_hint", False)))
        if "dimension" in d and int(d["dimension"]) != spec.dim:
            raise GridError(f"declared dimension {d['dimension']} != box dimension {spec.dim}")
        return spec


def load_spec(path: str) -> DomainSpec:
    with open(path) as fh:
        return DomainSpec.from_dict(yaml.safe_load(fh))


def dump_spec(spec: DomainSpec, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(spec.to_dict(), fh, sort_keys=False)


def _arrangement_coords(spec: DomainSpec) -> list[np.ndarray]:
    coords = []
    for ax in range(spec.dim):
        vals = sorted({b.bounds[ax][0] for b in spec.boxes} | {b.bounds[ax][1] for b in spec.boxes})
        coords.append(np.asarray(vals))
    return coords


def _covered_arrangement_cells(spec: DomainSpec, coords) -> Iterable[tuple[tuple[int, int], ...]]:
    """Yield arrangement cells (per-axis index pairs) covered by some box."""
    ranges = [range(len(c) - 1) for c in coords]
    for idx in itertools.product(*ranges):
        center = [0.5 * (coords[ax][i] + coords[ax][i + 1]) for ax, i in enumerate(idx)]
        if any(b.contains(center) for b in spec.boxes):
            yield tuple((i, i + 1) for i in idx)


# ---------------------------------------------------------------------------
# Grid


class Grid:
    """Uniform cell complex covering a snapped union of boxes.

    Cells are stored in lexicographic multi-index order.  Interior faces join
    two cells adjacent along one axis; boundary faces sit on the domain
    boundary.  Immutable after construction; all queries are pure.
    """

    def __init__(self, spec: DomainSpec, resolution: int,
                 index: np.ndarray, origin: np.ndarray):
        self.spec = spec
        self.resolution = int(resolution)
        self.n = spec.dim
        h = 1.0 / resolution
        self.spacing = tuple(h for _ in range(self.n))
        self.cell_volume = h ** self.n
        self.face_area = h ** (self.n - 1)
        self.index = index                       # (m, n) int lattice indices
        self.origin = origin                     # lattice index 0 maps here
        self.centers = (index + 0.5) * h + origin
        self._pos = {tuple(ix): i for i, ix in enumerate(index.tolist())}

        int_faces = []   # (u, v, axis)
        bd_faces = []    # (cell, axis, side)  side 0 = low, 1 = high
        for i, ix in enumerate(index.tolist()):
            for ax in range(self.n):
                for side, step in ((0, -1), (1, +1)):
                    nb = list(ix)
                    nb[ax] += step
                    j = self._pos.get(tuple(nb))
                    if j is None:
                        bd_faces.append((i, ax, side))
                    elif step == +1:
                        int_faces.append((i, j, ax))
        self.interior_faces = np.asarray(int_faces, dtype=np.int64).reshape(-1, 3)
        self.boundary_faces = np.asarray(bd_faces, dtype=np.int64).reshape(-1, 3)

        # per-cell adjacency (CSR-style) for incremental sweep updates
        m = len(index)
        deg = np.zeros(m, dtype=np.int64)
        for u, v, _ in self.interior_faces:
            deg[u] += 1
            deg[v] += 1
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        nbrs = np.empty(indptr[-1], dtype=np.int64)
        fill = indptr[:-1].copy()
        for u, v, _ in self.interior_faces:
            nbrs[fill[u]] = v
            fill[u] += 1
            nbrs[fill[v]] = u
            fill[v] += 1
        self.adj_indptr = indptr
        self.adj_indices = nbrs
        bd_area = np.zeros(m)
        for c, _, _ in self.boundary_faces:
            bd_area[c] += self.face_area
        self.cell_boundary_area = bd_area
        self._incidence = None

    @property
    def num_cells(self) -> int:
        return len(self.index)

    def position(self, multi_index: Sequence[int]) -> int | None:
        return self._pos.get(tuple(multi_index))

    def incidence(self):
        """Sparse (faces x cells) difference operator, boundary rows included.

        Row of an interior face (u, v): +1 at u, -1 at v.  Row of a boundary
        face: +1 at its cell (the ghost value on the boundary is 0).
        """
        if self._incidence is None:
            import scipy.sparse as sp

            nf = len(self.interior_faces)
            nb = len(self.boundary_faces)
            rows = np.concatenate([
                np.repeat(np.arange(nf), 2),
                nf + np.arange(nb),
            ])
            cols = np.concatenate([
                self.interior_faces[:, :2].ravel(),
                self.boundary_faces[:, 0],
            ])
            data = np.concatenate([
                np.tile([1.0, -1.0], nf),
                np.ones(nb),
            ])
            self._incidence = sp.csr_matrix(
                (data, (rows, cols)), shape=(nf + nb, self.num_cells))
        return self._incidence


def _snap(x: float, resolution: int, what: str) -> int:
    scaled = x * resolution
    snapped = round(scaled)
    if abs(scaled - snapped) > SNAP_TOL * max(1.0, abs(scaled)):
        warnings.warn(
            f"{what}={x} is not a multiple of 1/{resolution}; snapping to {snapped / resolution}",
            stacklevel=3)
    return int(snapped)


def build_grid(spec: DomainSpec, resolution: int) -> Grid:
    """Discretize the union of boxes at ``resolution`` cells per unit length.

    Box coordinates that do not align with the lattice are snapped with a
    warning.  Raises if the resulting cell graph is empty or disconnected.
    """
    if resolution < 1:
        raise GridError("resolution must be >= 1")
    h = 1.0 / resolution
    cells: set[tuple[int, ...]] = set()
    lo_all = [math.inf] * spec.dim
    for b in spec.boxes:
        ranges = []
        for ax, (lo, hi) in enumerate(b.bounds):
            ilo = _snap(lo, resolution, f"box lo[{ax}]")
            ihi = _snap(hi, resolution, f"box hi[{ax}]")
            if ihi <= ilo:
                raise GridError(f"box collapses at resolution {resolution}: axis {ax}")
            ranges.append(range(ilo, ihi))
            lo_all[ax] = min(lo_all[ax], ilo)
        cells.update(itertools.product(*ranges))
    if not cells:
        raise GridError("grid has no cells")
    base = np.array([int(v) for v in lo_all], dtype=np.int64)
    index = np.array(sorted(cells), dtype=np.int64) - base
    origin = base.astype(float) * h
    grid = Grid(spec, resolution, index, origin)

    comp = _components(grid)
    if len(comp) > 1:
        sizes = sorted((len(c) for c in comp), reverse=True)
        reps = [grid.index[min(c)].tolist() for c in comp]
        raise GridError(
            f"cell graph is disconnected: {len(comp)} components of sizes {sizes}, "
            f"representative cells {reps}")
    return grid


def _components(grid: Grid) -> list[list[int]]:
    seen = np.zeros(grid.num_cells, dtype=bool)
    comps = []
    for start in range(grid.num_cells):
        if seen[start]:
            continue
        comp = []
        dq = deque([start])
        seen[start] = True
        while dq:
            u = dq.popleft()
            comp.append(u)
            for v in grid.adj_indices[grid.adj_indptr[u]:grid.adj_indptr[u + 1]]:
                if not seen[v]:
                    seen[v] = True
                    dq.append(v)
        comps.append(comp)
    return comps


# ---------------------------------------------------------------------------
# Cell sets


class CellSet:
    """Subset of the cells of a specific grid."""

    def __init__(self, grid: Grid, indices: Iterable[int]):
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
        if len(idx) and (idx[0] < 0 or idx[-1] >= grid.num_cells):
            raise GridError("cell index out of range for grid")
        self.grid = grid
        self.indices = idx

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CellSet) and self.grid is other.grid
                and np.array_equal(self.indices, other.indices))

    def __repr__(self) -> str:
        return f"CellSet({len(self)} cells)"

    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.num_cells, dtype=bool)
        m[self.indices] = True
        return m

    def isdisjoint(self, other: "CellSet") -> bool:
        return not np.any(self.mask() & other.mask())


def volume(grid: Grid, cells: CellSet) -> float:
    """n-dimensional volume of the set: cell count times cell volume."""
    return len(cells) * grid.cell_volume


def perimeter(grid: Grid, cells: CellSet, mode: PerimeterMode) -> float:
    """Total area of cut faces; boundary faces count in DIRICHLET mode only."""
    if len(cells) == 0:
        return 0.0
    m = cells.mask()
    u = grid.interior_faces[:, 0]
    v = grid.interior_faces[:, 1]
    cut = int(np.count_nonzero(m[u] != m[v]))
    per = cut * grid.face_area
    if mode is PerimeterMode.DIRICHLET:
        per += float(np.sum(grid.cell_boundary_area[cells.indices]))
    return per


def iso_ratio(grid: Grid, cells: CellSet, mode: PerimeterMode) -> float:
    """perimeter / volume, with +inf for the empty set."""
    vol = volume(grid, cells)
    if vol == 0.0:
        return math.inf
    return perimeter(grid, cells, mode) / vol


# ---------------------------------------------------------------------------
# Inscribed rectangle


def inscribed_rectangle(spec: DomainSpec) -> tuple[Box, float, float]:
    """Maximal axis-aligned box inside the union, by exhaustive corner scan.

    Candidate corners are taken from the arrangement of the spec's box
    coordinates; a candidate is admissible when every arrangement cell it
    covers is inside the union.  Returns ``(R, c1, c2)`` with
    ``c1 * |R| <= |Omega| <= c2 * |R|``, ``c1 = 1``, ``c2 = |Omega|/|R|``.
    """
    coords = _arrangement_coords(spec)
    covered = set(_covered_arrangement_cells(spec, coords))
    n = spec.dim

    best: tuple[float, tuple] | None = None
    axis_pairs = [
        [(a, b) for a in range(len(coords[ax]) - 1) for b in range(a + 1, len(coords[ax]))]
        for ax in range(n)
    ]
    for corner in itertools.product(*axis_pairs):
        ok = all(
            tuple((i, i + 1) for i in idx) in covered
            for idx in itertools.product(*[range(a, b) for a, b in corner])
        )
        if not ok:
            continue
        vol = 1.0
        for ax, (a, b) in enumerate(corner):
            vol *= coords[ax][b] - coords[ax][a]
        key = tuple(float(coords[ax][a]) for ax, (a, _) in enumerate(corner))
        if best is None or vol > best[0] or (vol == best[0] and key < best[1][1]):
            bounds = tuple((float(coords[ax][a]), float(coords[ax][b]))
                           for ax, (a, b) in enumerate(corner))
            best = (vol, (bounds, key))
    assert best is not None  # the spec's own boxes are always admissible
    box = Box(best[1][0])
    c2 = spec.volume() / box.volume
    return box, 1.0, c2


# ---------------------------------------------------------------------------
# Built-in specs


def builtin_specs() -> dict[str, DomainSpec]:
    """Named domains used throughout the experiment suite."""
    unit_interval = DomainSpec("unit_interval", (Box(((0.0, 1.0),)),), convex_hint=True)
    unit_square = DomainSpec("unit_square", (Box(((0.0, 1.0), (0.0, 1.0))),), convex_hint=True)
    l_shape = DomainSpec("l_shape", (
        Box(((0.0, 2.0), (0.0, 1.0))),
        Box(((0.0, 1.0), (0.0, 2.0))),
    ))
    dumbbell = DomainSpec("dumbbell", (
        Box(((0.0, 1.0), (0.0, 1.0))),
        Box(((1.0, 1.5), (0.5, 0.75))),
        Box(((1.5, 2.5), (0.0, 1.0))),
    ))
    comb4 = make_comb(4, (0.5, 0.375, 0.25, 0.125), room=(2.0, 0.5))
    return {s.name: s for s in (unit_interval, unit_square, l_shape, dumbbell, comb4)}


def make_comb(teeth: int, tooth_widths: Sequence[float], room: tuple[float, float] = (2.0, 0.5),
              tooth_length: float = 1.0) -> DomainSpec:
    """Comb domain: a room with ``teeth`` upward teeth of the given widths."""
    if teeth < 1 or len(tooth_widths) != teeth:
        raise GridError("need one positive width per tooth")
    if any(w <= 0 for w in tooth_widths):
        raise GridError("tooth widths must be positive")
    w_room, h_room = room
    total_w = sum(tooth_widths)
    if total_w >= w_room:
        raise GridError("teeth wider than the room")
    gap = (w_room - total_w) / (teeth + 1)
    boxes = [Box(((0.0, w_room), (0.0, h_room)))]
    x = gap
    for w in tooth_widths:
        boxes.append(Box(((x, x + w), (h_room, h_room + tooth_length))))
        x += w + gap
    return DomainSpec(f"comb{teeth}", tuple(boxes))
