"""Discrete scalar fields: p-energies, Rayleigh quotients, level masses.

The gradient model is the face-difference (graph) energy.  Each interior
face joining cells u, v contributes ``(A/d^(p-1)) |f_u - f_v|^p`` where A is
the face area and d the center-to-center distance along the face's axis.
Each boundary face contributes ``(A/(d/2)^(p-1)) |f_u|^p``: the zero trace
lives on the boundary face itself, at distance d/2 from the cell center.
With this convention the p=1 energy of an indicator equals the set's
dirichlet perimeter exactly (discrete coarea), and the p=2 operator is the
second-order accurate cell-centered Dirichlet Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import CellSet, Grid

__all__ = [
    "Exponent",
    "LevelInterval",
    "ScalarField",
    "band_energy",
    "level_mass",
    "load_field",
    "p_energy",
    "p_norm",
    "rayleigh",
    "rel_dist",
    "save_field",
    "superlevel_set",
    "truncate",
]


@dataclass(frozen=True)
class Exponent:
    """Integrability exponent p in (1, inf) with its conjugate q = p/(p-1)."""

    p: float

    def __post_init__(self):
        if not (1.0 < self.p < math.inf):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)


def _pval(p) -> float:
    return p.p if isinstance(p, Exponent) else float(p)


@dataclass(frozen=True)
class LevelInterval:
    """Closed value interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.hi >= self.lo):
            raise ValueError(f"need hi >= lo, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, a: float) -> bool:
        return self.lo <= a <= self.hi


class ScalarField:
    """One real value per grid cell."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.num_cells,):
            raise ValueError(f"expected {grid.num_cells} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @staticmethod
    def from_function(grid: Grid, fn) -> "ScalarField":
        vals = np.apply_along_axis(lambda x: fn(*x), 1, grid.centers)
        return ScalarField(grid, vals)

    @staticmethod
    def constant(grid: Grid, value: float) -> "ScalarField":
        return ScalarField(grid, np.full(grid.num_cells, float(value)))

    @staticmethod
    def indicator(cells: CellSet) -> "ScalarField":
        return ScalarField(cells.grid, cells.mask().astype(float))

    def support(self) -> np.ndarray:
        return self.values != 0.0


def _face_weights(grid: Grid, p: float) -> np.ndarray:
    """Per-row weights of the incidence operator, interior then boundary."""
    h = grid.spacing[0]
    w_int = grid.face_area / h ** (p - 1.0)
    w_bd = grid.face_area / (0.5 * h) ** (p - 1.0)
    return np.concatenate([
        np.full(len(grid.interior_faces), w_int),
        np.full(len(grid.boundary_faces), w_bd),
    ])


def p_energy(grid: Grid, f: ScalarField, p) -> float:
    """Discrete p-Dirichlet energy with zero trace on the boundary.

    p = 1 is accepted here (and only here): it yields the total-variation
    energy whose value on indicators is the dirichlet perimeter.
    """
    pv = _pval(p)
    if pv < 1.0:
        raise ValueError("p must be >= 1 for p_energy")
    w = _face_weights(grid, pv)
    jumps = np.abs(grid.incidence() @ f.values)
    return float(w @ jumps ** pv)


def p_energy_gradient(grid: Grid, values: np.ndarray, p: float) -> np.ndarray:
    B = grid.incidence()
    w = _face_weights(grid, p)
    bf = B @ values
    return p * (B.T @ (w * np.abs(bf) ** (p - 1.0) * np.sign(bf)))


def p_norm(grid: Grid, f: ScalarField, p) -> float:
    pv = _pval(p)
    return float(np.sum(np.abs(f.values) ** pv) * grid.cell_volume) ** (1.0 / pv)


def rayleigh(grid: Grid, f: ScalarField, p) -> float:
    """p_energy / p_norm^p; scale-invariant."""
    pv = _pval(p)
    denom = float(np.sum(np.abs(f.values) ** pv) * grid.cell_volume)
    if denom == 0.0:
        raise ValueError("Rayleigh quotient of the zero field is undefined")
    return p_energy(grid, f, pv) / denom


def level_mass(grid: Grid, f: ScalarField, p, interval: LevelInterval) -> float:
    """p-mass carried by cells whose value lies in the closed interval."""
    pv = _pval(p)
    v = f.values
    mask = (v >= interval.lo) & (v <= interval.hi)
    return float(np.sum(np.abs(v[mask]) ** pv) * grid.cell_volume)


def band_energy(grid: Grid, f: ScalarField, p, interval: LevelInterval) -> float:
    """p-energy restricted to faces with at least one endpoint value in I.

    Boundary-face ghosts carry the value 0, so boundary faces participate
    when 0 is in I.
    """
    pv = _pval(p)
    v = f.values
    inI = (v >= interval.lo) & (v <= interval.hi)
    zero_in = interval.contains(0.0)

    w = _face_weights(grid, pv)
    nf = len(grid.interior_faces)
    u = grid.interior_faces[:, 0]
    vv = grid.interior_faces[:, 1]
    mask_int = inI[u] | inI[vv]
    bc = grid.boundary_faces[:, 0]
    mask_bd = inI[bc] | zero_in

    jumps = np.abs(grid.incidence() @ v)
    e = float(w[:nf][mask_int] @ jumps[:nf][mask_int] ** pv)
    e += float(w[nf:][mask_bd] @ jumps[nf:][mask_bd] ** pv)
    return e


def superlevel_set(grid: Grid, f: ScalarField, t: float) -> CellSet:
    return CellSet(grid, np.flatnonzero(f.values >= t))


def rel_dist(a: float, interval: LevelInterval) -> float:
    """Relative distance inf_{b in I} |a - b| / b; needs I.lo > 0."""
    if interval.lo <= 0.0:
        raise ValueError("relative distance needs an interval with lo > 0")
    if a < 0.0:
        raise ValueError("relative distance is defined for a >= 0")
    if a < interval.lo:
        return (interval.lo - a) / interval.lo
    if a > interval.hi:
        return (a - interval.hi) / interval.hi
    return 0.0


def _rel_dist_vec(vals: np.ndarray, interval: LevelInterval) -> np.ndarray:
    below = np.clip((interval.lo - vals) / interval.lo, 0.0, None)
    above = np.clip((vals - interval.hi) / interval.hi, 0.0, None)
    return np.maximum(below, above)


def truncate(grid: Grid, f: ScalarField, region: Sequence[LevelInterval],
             eps: float) -> ScalarField:
    """Multiply f by the ramp max{0, 1 - dist(f, region)/eps}.

    dist is the minimum relative distance over the region's intervals; the
    support of the result is contained in the eps-neighborhood preimage.
    Requires f >= 0 (take the positive part or |f| first).
    """
    if not region:
        raise ValueError("region must contain at least one interval")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if any(iv.lo <= 0.0 for iv in region):
        raise ValueError("region intervals must have lo > 0")
    v = f.values
    if np.any(v < 0.0):
        raise ValueError("truncate needs a nonnegative field")
    dist = np.min(np.stack([_rel_dist_vec(v, iv) for iv in region]), axis=0)
    mult = np.clip(1.0 - dist / eps, 0.0, 1.0)
    return ScalarField(grid, v * mult)


# ---------------------------------------------------------------------------
# Columnar text I/O: multi-index components then value, lexicographic order.


def save_field(f: ScalarField, path: str) -> None:
    with open(path, "w") as fh:
        for ix, val in zip(f.grid.index.tolist(), f.values):
            fh.write(" ".join(str(c) for c in ix) + f" {float(val)!r}\n")


def load_field(grid: Grid, path: str) -> ScalarField:
    vals = np.empty(grid.num_cells)
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != grid.num_cells:
        raise ValueError(f"expected {grid.num_cells} rows, found {len(rows)}")
    for i, row in enumerate(rows):
        ix = tuple(int(c) for c in row[:-1])
        pos = grid.position(ix)
        if pos != i:
            raise ValueError(f"row {i} has index {ix}, not in lexicographic grid order")
        vals[i] = float(row[-1])
    return ScalarField(grid, vals)
