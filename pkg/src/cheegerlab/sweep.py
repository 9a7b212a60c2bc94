"""Level-set rounding: the best superlevel set of a function.

The sweep enumerates every distinct positive value of Phi = |psi|^(p-1) psi
as a threshold (between consecutive values the superlevel set is constant,
so this is exhaustive), maintains perimeter and volume incrementally in one
descending pass, and returns the minimizer with the smallest optimal
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CellSet, Grid, PerimeterMode, iso_ratio, volume
from .fields import LevelInterval, ScalarField, _pval, band_energy, rayleigh

__all__ = ["BandBoundCheck", "SweepResult", "check_band_bound", "sweep"]


@dataclass
class SweepResult:
    t_opt: float
    cells: CellSet
    phi: float
    phi_of_field: float
    bound: float          # p * R(psi)^(1/p), the continuum target
    slack: float          # (2n)^(1/q), the documented discrete allowance
    mode: PerimeterMode
    rayleigh_value: float


def sweep(grid: Grid, psi: ScalarField, p, mode: PerimeterMode) -> SweepResult:
    """Best superlevel set of psi over all positive thresholds.

    The returned set is contained in the support of psi.  Ties in the ratio
    break toward the smallest optimal threshold.
    """
    pv = _pval(p)
    v = psi.values
    if not np.any(v != 0.0):
        raise ValueError("sweep needs a nonzero field")

    pos = np.flatnonzero(v > 0.0)
    if len(pos) == 0:
        # psi has no positive values; |psi| has the same energy and mass,
        # so sweep -psi instead.
        return sweep(grid, ScalarField(grid, -v), pv, mode)

    order = pos[np.argsort(-v[pos], kind="stable")]
    vals = v[order]

    in_set = np.zeros(grid.num_cells, dtype=bool)
    area = grid.face_area
    dirichlet = mode is PerimeterMode.DIRICHLET
    per = 0.0
    count = 0
    best_phi = math.inf
    best_t = math.inf
    best_count = 0

    i = 0
    m = len(order)
    while i < m:
        t = vals[i]
        # add the whole group of cells at this value
        while i < m and vals[i] == t:
            c = order[i]
            for nb in grid.adj_indices[grid.adj_indptr[c]:grid.adj_indptr[c + 1]]:
                per += -area if in_set[nb] else area
            if dirichlet:
                per += grid.cell_boundary_area[c]
            in_set[c] = True
            count += 1
            i += 1
        vol = count * grid.cell_volume
        phi = per / vol
        if phi <= best_phi:
            best_phi = phi
            best_t = t
            best_count = count

    cells = CellSet(grid, order[:best_count])
    R = rayleigh(grid, psi, pv)
    q = pv / (pv - 1.0) if pv > 1.0 else math.inf
    slack = (2.0 * grid.n) ** (1.0 / q) if math.isfinite(q) else 1.0
    return SweepResult(
        t_opt=float(best_t), cells=cells, phi=best_phi, phi_of_field=best_phi,
        bound=pv * R ** (1.0 / pv), slack=slack, mode=mode, rayleigh_value=R)


@dataclass
class BandBoundCheck:
    """Both sides of the band-energy lower bound, with the measured slack."""

    lhs: float            # band energy over I
    rhs: float            # (phi(f) |Omega_f(a)| |I|)^p / |Omega_f(I)|^(p/q)
    slack: float          # lhs / rhs, +inf when rhs vanishes
    phi_of_field: float
    vol_top: float        # |Omega_f(a)|, superlevel volume at I.hi
    vol_band: float       # |Omega_f(I)|
    trivial: bool
    violated: bool


def check_band_bound(grid: Grid, f: ScalarField, p, interval: LevelInterval,
                     mode: PerimeterMode) -> BandBoundCheck:
    pv = _pval(p)
    if np.any(f.values < 0.0):
        raise ValueError("band bound check needs f >= 0")
    if not (interval.hi > interval.lo >= 0.0):
        raise ValueError("need an interval [b, a] with a > b >= 0")
    q = pv / (pv - 1.0)

    lhs = band_energy(grid, f, pv, interval)
    phi = sweep(grid, f, pv, mode).phi
    top = volume(grid, superlevel := _superlevel(grid, f, interval.hi))
    v = f.values
    band_cells = np.count_nonzero((v >= interval.lo) & (v <= interval.hi))
    vol_band = band_cells * grid.cell_volume

    if vol_band == 0.0 or top == 0.0:
        rhs = 0.0
    else:
        rhs = (phi * top * interval.width) ** pv / vol_band ** (pv / q)
    trivial = rhs == 0.0
    slack = math.inf if trivial else lhs / rhs
    return BandBoundCheck(lhs=lhs, rhs=rhs, slack=slack, phi_of_field=phi,
                          vol_top=top, vol_band=vol_band, trivial=trivial,
                          violated=(not trivial and slack < 1.0))


def _superlevel(grid: Grid, f: ScalarField, t: float) -> CellSet:
    return CellSet(grid, np.flatnonzero(f.values >= t))
