"""Dyadic value-interval scheme and disjointly supported function families.

From a nonnegative unit-p-norm function this module builds the geometric
interval ladder I_i = [alpha^(i+1), alpha^i], splits each rung into 12k
equal subintervals, classifies them as heavy or light by their p-mass,
assembles 2k well-separated regions out of heavy subintervals of balanced
rungs, truncates the function to each region, and keeps the k members of
least energy.  Every run carries a certificate with the intermediate
quantities so the resulting Rayleigh bounds can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .domain import Grid, PerimeterMode
from .fields import (Exponent, LevelInterval, ScalarField, _pval, p_energy,
                     p_norm, rayleigh, truncate)
from .sweep import sweep

__all__ = [
    "DecompositionCertificate",
    "DecompositionError",
    "DisjointFamily",
    "IntervalBand",
    "IntervalScheme",
    "MultiaxisResult",
    "RegionFamily",
    "SubintervalRef",
    "assemble_regions",
    "build_scheme",
    "decompose",
    "disjoint_family",
    "heavy_constant",
    "multiaxis_decompose_experimental",
]

RESIDUAL_TOL = 1e-12
DELTA_GATE = 0.1
MAX_BANDS = 4000


class DecompositionError(RuntimeError):
    """Raised when the decomposition cannot certify anything useful."""

    def __init__(self, msg: str, scheme: "IntervalScheme | None" = None):
        super().__init__(msg)
        self.scheme = scheme


def heavy_constant(p: float, alpha: float) -> float:
    """The closed-form heaviness constant: c^(p/q) = 3 (a^(p(1+1/q)) (1-a))^p / 12^p."""
    q = p / (p - 1.0)
    base = 3.0 * (alpha ** (p * (1.0 + 1.0 / q)) * (1.0 - alpha)) ** p / 12.0 ** p
    return base ** (q / p)


@dataclass
class IntervalBand:
    """One rung of the ladder with its 12k subintervals."""

    i: int
    lo: float                 # alpha^(i+1)
    hi: float                 # alpha^i
    mass: float               # L_i, p-mass of values in (lo, hi]
    sub_lo: np.ndarray
    sub_hi: np.ndarray
    sub_mass: np.ndarray
    heavy: np.ndarray         # bool, L_{i,j} >= c * delta * L_{i-1} / k
    heavy_count: int
    balanced: bool            # heavy_count >= 6k
    prev_mass: float          # L_{i-1}


@dataclass
class IntervalScheme:
    alpha: float
    k: int
    p: float
    q: float
    phi: float
    rayleigh_value: float
    delta: float              # (phi^p / R)^(q/p)
    c: float
    bands: list[IntervalBand]
    Delta: float              # sum of L_{i-1} over balanced rungs
    residual_mass: float
    mass_at_zero: float

    @property
    def index_range(self) -> tuple[int, int]:
        return (self.bands[0].i, self.bands[-1].i)


@dataclass(frozen=True)
class SubintervalRef:
    i: int
    j: int
    lo: float
    hi: float
    mass: float


@dataclass
class RegionFamily:
    regions: list[list[SubintervalRef]]   # 2k regions
    epsilon: float                        # (1 - alpha) / (12k)
    density: float                        # min region mass
    separation_ok: bool


@dataclass
class DecompositionCertificate:
    delta: float
    Delta: float
    epsilon: float
    c: float
    W: float                      # region density
    lemma31_bound: float          # 2^(p+1) R(f) / (k eps^p W)
    lemma32_bound: float          # (24k/(1-alpha))^p 2 R(f) / (c delta Delta)
    theorem34_bound: float        # measured max_i R(f_i)
    slack_factor: float           # theorem34 / lemma31


@dataclass
class DisjointFamily:
    members: list[ScalarField]
    rayleighs: list[float]
    source: ScalarField
    certificate: DecompositionCertificate
    scheme: IntervalScheme
    regions: RegionFamily


def build_scheme(grid: Grid, f: ScalarField, p, k: int, alpha: float = 0.5,
                 mode: PerimeterMode = PerimeterMode.DIRICHLET) -> IntervalScheme:
    """Build the interval ladder for a nonnegative unit-p-norm field.

    Mass accounting uses half-open value bins (lo, hi] so the subinterval
    masses of a rung sum to the rung mass exactly and rungs partition the
    positive range; the ladder extends downward until the uncovered positive
    mass falls below 1e-12.
    """
    pv = _pval(p)
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    v = f.values
    if np.any(v < 0.0):
        raise DecompositionError("scheme needs a nonnegative field")
    total = float(np.sum(v ** pv) * grid.cell_volume)
    if total == 0.0:
        raise DecompositionError("scheme needs a nonzero field")
    if abs(total - 1.0) > 1e-10:
        raise DecompositionError(f"field must have unit p-norm (p-mass {total:.3e})")

    q = pv / (pv - 1.0)
    sw = sweep(grid, f, pv, mode)
    phi = sw.phi
    R = sw.rayleigh_value
    delta = (phi ** pv / R) ** (q / pv)
    c = heavy_constant(pv, alpha)

    vmax = float(np.max(v))
    # topmost rung index: vmax in (alpha^(i+1), alpha^i]
    i_lo = math.floor(math.log(vmax) / math.log(alpha))
    while alpha ** i_lo < vmax:
        i_lo -= 1
    while alpha ** (i_lo + 1) >= vmax:
        i_lo += 1

    nsub = 12 * k
    pmass = v ** pv * grid.cell_volume
    pos = v > 0.0
    masses: dict[int, float] = {}
    bands_raw: list[tuple[int, float, float, np.ndarray]] = []
    i = i_lo
    covered = 0.0
    while True:
        hi = alpha ** i
        lo = alpha ** (i + 1)
        mask = pos & (v > lo) & (v <= hi)
        sub_mass = np.zeros(nsub)
        if np.any(mask):
            # j = floor((1 - v/hi) * 12k / (1-alpha)); half-open (lo_j, hi_j]
            frac = (1.0 - v[mask] / hi) * nsub / (1.0 - alpha)
            j = np.floor(frac).astype(np.int64)
            np.clip(j, 0, nsub - 1, out=j)
            np.add.at(sub_mass, j, pmass[mask])
        L = float(np.sum(sub_mass))
        masses[i] = L
        bands_raw.append((i, lo, hi, sub_mass))
        covered += L
        uncovered = float(np.sum(pmass[pos & (v <= lo)]))
        if uncovered < RESIDUAL_TOL * total:
            break
        i += 1
        if i - i_lo > MAX_BANDS:
            raise DecompositionError("interval ladder exceeded the band cap")

    bands = []
    Delta = 0.0
    for i, lo, hi, sub_mass in bands_raw:
        prev = masses.get(i - 1, 0.0)
        thresh = c * delta * prev / k
        heavy = sub_mass >= thresh
        h_count = int(np.count_nonzero(heavy))
        balanced = h_count >= 6 * k
        if balanced:
            Delta += prev
        width = hi * (1.0 - alpha) / nsub
        sub_hi = hi - width * np.arange(nsub)
        sub_lo = sub_hi - width
        sub_lo[-1] = lo  # close the rung exactly
        bands.append(IntervalBand(i=i, lo=lo, hi=hi, mass=float(np.sum(sub_mass)),
                                  sub_lo=sub_lo, sub_hi=sub_hi, sub_mass=sub_mass,
                                  heavy=heavy, heavy_count=h_count,
                                  balanced=balanced, prev_mass=prev))
    residual = total - covered
    return IntervalScheme(alpha=alpha, k=k, p=pv, q=q, phi=phi,
                          rayleigh_value=R, delta=delta, c=c, bands=bands,
                          Delta=Delta, residual_mass=residual, mass_at_zero=0.0)


def assemble_regions(scheme: IntervalScheme) -> RegionFamily:
    """Distribute heavy subintervals of balanced rungs over 2k regions.

    Within each balanced rung the heavy subintervals are ordered by j
    ascending and region a (1-based) receives the (3a-1)-th one, leaving the
    two neighbors of every assigned subinterval unassigned.
    """
    k = scheme.k
    regions: list[list[SubintervalRef]] = [[] for _ in range(2 * k)]
    for band in scheme.bands:
        if not band.balanced:
            continue
        heavy_js = np.flatnonzero(band.heavy)
        if len(heavy_js) < 6 * k:
            raise DecompositionError(
                f"rung {band.i} flagged balanced with only {len(heavy_js)} heavy subintervals")
        for a in range(1, 2 * k + 1):
            j = int(heavy_js[3 * a - 2])
            regions[a - 1].append(SubintervalRef(
                i=band.i, j=j, lo=float(band.sub_lo[j]), hi=float(band.sub_hi[j]),
                mass=float(band.sub_mass[j])))
    epsilon = (1.0 - scheme.alpha) / (12 * k)
    density = min((sum(r.mass for r in reg) for reg in regions), default=0.0)
    if any(not reg for reg in regions):
        density = 0.0
    return RegionFamily(regions=regions, epsilon=epsilon, density=density,
                        separation_ok=_separation_ok(regions, epsilon))


def _neighborhood(ref: SubintervalRef, eps: float) -> tuple[float, float]:
    return (ref.lo * (1.0 - eps), ref.hi * (1.0 + eps))


def _separation_ok(regions: list[list[SubintervalRef]], eps: float) -> bool:
    for a in range(len(regions)):
        for b in range(a + 1, len(regions)):
            for ra in regions[a]:
                la, ha = _neighborhood(ra, eps)
                for rb in regions[b]:
                    lb, hb = _neighborhood(rb, eps)
                    if la < hb and lb < ha:
                        return False
    return True


def disjoint_family(grid: Grid, f: ScalarField, p, scheme: IntervalScheme,
                    regions: RegionFamily) -> DisjointFamily:
    """Truncate f to the 2k regions and keep the k members of least energy.

    Exact selection by energy dominates the probabilistic averaging bound.
    Raises if any two truncation supports overlap or if no region carries
    mass.
    """
    pv = _pval(p)
    if regions.density <= 0.0:
        raise DecompositionError("all regions are empty or massless", scheme)
    eps = regions.epsilon
    members = []
    for reg in regions.regions:
        intervals = [LevelInterval(r.lo, r.hi) for r in reg]
        members.append(truncate(grid, f, intervals, eps))

    supports = [m.support() for m in members]
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            overlap = supports[a] & supports[b]
            if overlap.any():
                cell = int(np.flatnonzero(overlap)[0])
                raise DecompositionError(
                    f"regions {a} and {b} have overlapping truncation supports "
                    f"(witness cell {cell}, index {grid.index[cell].tolist()})", scheme)
    if not any(s.any() for s in supports):
        raise DecompositionError("every truncated member vanished", scheme)

    k = scheme.k
    energies = np.array([p_energy(grid, m, pv) for m in members])
    nonzero = [a for a in range(len(members)) if supports[a].any()]
    if len(nonzero) < k:
        raise DecompositionError(
            f"only {len(nonzero)} of {2 * k} regions carry support", scheme)
    order = sorted(nonzero, key=lambda a: (energies[a], a))
    chosen = sorted(order[:k])
    sel = [members[a] for a in chosen]
    rays = [rayleigh(grid, m, pv) for m in sel]

    R = scheme.rayleigh_value
    W = regions.density
    lemma31 = 2.0 ** (pv + 1.0) * R / (k * eps ** pv * W)
    lemma32 = ((24.0 * k / (1.0 - scheme.alpha)) ** pv * 2.0 * R
               / (scheme.c * scheme.delta * scheme.Delta)) if scheme.Delta > 0 else math.inf
    theorem34 = max(rays)
    cert = DecompositionCertificate(
        delta=scheme.delta, Delta=scheme.Delta, epsilon=eps, c=scheme.c,
        W=W, lemma31_bound=lemma31, lemma32_bound=lemma32,
        theorem34_bound=theorem34, slack_factor=theorem34 / lemma31)
    return DisjointFamily(members=sel, rayleighs=rays, source=f,
                          certificate=cert, scheme=scheme, regions=regions)


def decompose(grid: Grid, f_raw: ScalarField, p, k: int,
              mode: PerimeterMode = PerimeterMode.DIRICHLET,
              alpha: float = 0.5) -> DisjointFamily:
    """|f_raw| -> unit p-norm -> scheme -> regions -> k disjoint members."""
    pv = _pval(p)
    v = np.abs(f_raw.values)
    nrm = float(np.sum(v ** pv) * grid.cell_volume) ** (1.0 / pv)
    if nrm == 0.0:
        raise DecompositionError("cannot decompose the zero field")
    f = ScalarField(grid, v / nrm)
    scheme = build_scheme(grid, f, pv, k, alpha=alpha, mode=mode)
    if scheme.Delta < DELTA_GATE:
        raise DecompositionError(
            f"balanced mass Delta = {scheme.Delta:.3g} < {DELTA_GATE}: the "
            f"discretization is too coarse for a meaningful certificate", scheme)
    regions = assemble_regions(scheme)
    return disjoint_family(grid, f, pv, scheme, regions)


# ---------------------------------------------------------------------------
# Literal multi-axis construction (experimental)


@dataclass
class MultiaxisResult:
    fields: dict[tuple[int, int], ScalarField]   # (region i, axis j) -> field
    overlaps: list[tuple[tuple[int, int], tuple[int, int], int]]  # pair + witness cell

    @property
    def disjoint(self) -> bool:
        return not self.overlaps


def multiaxis_decompose_experimental(grid: Grid, f_raw: ScalarField, p,
                                     k: int,
                                     mode: PerimeterMode = PerimeterMode.DIRICHLET,
                                     alpha: float = 0.5) -> MultiaxisResult:
    """Literal per-axis truncation products f * theta_{i,j}.

    theta_{i,j}(x) = max{0, 1 - dist(f(x), I_i)/eps} evaluates f at the full
    point x, so for a fixed region i the fields are value-identical across
    axes j; the overlap report records exactly which pairs fail
    disjointness.  Not used by any verification pipeline.
    """
    if grid.n < 2:
        raise ValueError("multi-axis construction needs n >= 2")
    pv = _pval(p)
    v = np.abs(f_raw.values)
    nrm = float(np.sum(v ** pv) * grid.cell_volume) ** (1.0 / pv)
    if nrm == 0.0:
        raise DecompositionError("cannot decompose the zero field")
    f = ScalarField(grid, v / nrm)
    scheme = build_scheme(grid, f, pv, k, alpha=alpha, mode=mode)
    regions = assemble_regions(scheme)
    if regions.density <= 0.0:
        raise DecompositionError("all regions are empty or massless", scheme)
    eps = regions.epsilon

    fields: dict[tuple[int, int], ScalarField] = {}
    for i in range(k):
        intervals = [LevelInterval(r.lo, r.hi) for r in regions.regions[i]]
        member = truncate(grid, f, intervals, eps)
        for j in range(grid.n):
            fields[(i + 1, j + 1)] = member

    keys = sorted(fields)
    overlaps = []
    for a in range(len(keys)):
        sa = fields[keys[a]].support()
        for b in range(a + 1, len(keys)):
            both = sa & fields[keys[b]].support()
            if both.any():
                overlaps.append((keys[a], keys[b], int(np.flatnonzero(both)[0])))
    return MultiaxisResult(fields=fields, overlaps=overlaps)
