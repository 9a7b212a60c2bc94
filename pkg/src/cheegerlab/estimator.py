"""Certified information about higher-order Cheeger constants.

Upper bounds come from the eigenfunction -> decomposition -> sweep pipeline;
exact values from brute force on small grids (with a fast dynamic program
for 1D domains); lower bounds from the Faber-Krahn closed form on convex
domains.  Whenever two routes to the same quantity exist they are compared,
never merged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .domain import (CellSet, DomainSpec, Grid, PerimeterMode, build_grid,
                     inscribed_rectangle, iso_ratio, make_comb, perimeter,
                     volume)
from .decomposition import DecompositionError, DisjointFamily, decompose
from .fields import ScalarField, _pval, rayleigh
from .spectrum import Eigenpair, first_eigenpair, spectrum_p2
from .sweep import sweep

__all__ = [
    "BruteForceBudgetError",
    "CheegerReport",
    "InequalityCheck",
    "counterexample_comb",
    "faber_krahn_lower",
    "hk_bruteforce",
    "hk_local_search",
    "hk_upper",
    "p_to_one_sweep",
    "partition_upper",
    "unit_ball_volume",
    "verify_bilateral",
]


class BruteForceBudgetError(RuntimeError):
    """Enumeration would exceed the budget; reduce the resolution."""


@dataclass
class InequalityCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool


@dataclass
class CheegerReport:
    spec_name: str
    resolution: int
    mode: PerimeterMode
    p: float
    k: int
    h_k_upper: float
    witnesses: list[CellSet]
    h1_ref: float                         # direct sweep of the eigenfunction
    lambda_refs: dict
    c_eff: float                          # h_k_upper / (k^(1/n) (lambda1/h1)^(q/p))
    theorem11_rhs: float                  # c_eff * k^(1/n) (lambda1/h1)^(q/p)
    certificate: object
    checks: list[InequalityCheck] = dfield(default_factory=list)
    h_k_exact: float | None = None
    faber_krahn: float | None = None


def unit_ball_volume(n: int) -> float:
    """omega_n; closed forms for small n keep the n=1 case exactly 2."""
    if n == 1:
        return 2.0
    if n == 2:
        return math.pi
    if n == 3:
        return 4.0 * math.pi / 3.0
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def faber_krahn_lower(n: int, k: int, vol: float) -> float:
    """Convex-domain lower bound n (k omega_n / |Omega|)^(1/n)."""
    if vol <= 0.0:
        raise ValueError("volume must be positive")
    return n * (k * unit_ball_volume(n) / vol) ** (1.0 / n)


# ---------------------------------------------------------------------------
# Exact values by brute force


def _ratio_of(grid: Grid, idx: np.ndarray, mode: PerimeterMode) -> float:
    return iso_ratio(grid, CellSet(grid, idx), mode)


def hk_bruteforce(grid: Grid, k: int, mode: PerimeterMode,
                  budget: int = 2_000_000) -> tuple[float, list[CellSet]]:
    """Exact minimum over k pairwise-disjoint nonempty sets of the max ratio.

    Any set may be replaced by its best-ratio connected component without
    increasing the objective (mediant inequality), so the search ranges over
    connected sets only.  1D grids use an interval dynamic program; k = 1
    enumerates all subsets up to 20 cells; otherwise a canonical DFS over
    families of connected sets runs against the budget.  The witness is
    deterministic (lexicographically least optimum).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = grid.num_cells
    if k > m:
        raise ValueError(f"cannot fit {k} disjoint nonempty sets in {m} cells")
    if grid.n == 1:
        return _hk_exact_1d(grid, k, mode, budget)
    if k == 1:
        if m > 20:
            raise BruteForceBudgetError(
                f"k=1 exhaustive enumeration limited to 20 cells, grid has {m}")
        return _h1_exact_subsets(grid, mode)
    if m > 24:
        raise BruteForceBudgetError(
            f"connected-family enumeration limited to 24 cells, grid has {m}; "
            f"reduce the resolution")
    return _hk_exact_connected_dfs(grid, k, mode, budget)


def _hk_exact_1d(grid: Grid, k: int, mode: PerimeterMode,
                 budget: int) -> tuple[float, list[CellSet]]:
    """Interval DP: connected sets in 1D are index ranges [a, b]."""
    m = grid.num_cells
    if m * m * k > budget:
        raise BruteForceBudgetError(
            f"1D DP needs ~{m * m * k} steps, budget is {budget}")

    def block_ratio(a: int, b: int) -> float:
        # faces cut: left of a, right of b; boundary faces in dirichlet mode
        per = 0.0
        area = grid.face_area
        if a > 0:
            per += area
        elif mode is PerimeterMode.DIRICHLET:
            per += area
        if b < m - 1:
            per += area
        elif mode is PerimeterMode.DIRICHLET:
            per += area
        vol = (b - a + 1) * grid.cell_volume
        return per / vol

    INF = math.inf
    # best[r][s]: minimal achievable max-ratio placing r blocks within cells[s:]
    best = [[INF] * (m + 1) for _ in range(k + 1)]
    best[0] = [0.0] * (m + 1)
    for r in range(1, k + 1):
        for s in range(m - 1, -1, -1):
            acc = best[r][s + 1]  # skip cell s
            for e in range(s, m):
                val = max(block_ratio(s, e), best[r - 1][e + 1])
                if val < acc:
                    acc = val
            best[r][s] = acc

    # deterministic reconstruction: earliest block start, then shortest block
    witnesses = []
    s, r = 0, k
    target = best[k][0]
    while r > 0:
        placed = False
        for e in range(s, m):
            if max(block_ratio(s, e), best[r - 1][e + 1]) == best[r][s]:
                witnesses.append(CellSet(grid, np.arange(s, e + 1)))
                s, r = e + 1, r - 1
                placed = True
                break
        if not placed:
            s += 1
    return target, witnesses


def _h1_exact_subsets(grid: Grid, mode: PerimeterMode) -> tuple[float, list[CellSet]]:
    m = grid.num_cells
    u = grid.interior_faces[:, 0]
    v = grid.interior_faces[:, 1]
    bits = np.arange(1, 1 << m, dtype=np.uint64)
    best_ratio = math.inf
    best_masks: list[int] = []
    chunk = 1 << 16
    for start in range(0, len(bits), chunk):
        b = bits[start:start + chunk]
        member = ((b[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)).astype(bool)
        cut = np.count_nonzero(member[:, u] != member[:, v], axis=1) * grid.face_area
        per = cut
        if mode is PerimeterMode.DIRICHLET:
            per = per + member @ grid.cell_boundary_area
        vol = member.sum(axis=1) * grid.cell_volume
        ratio = per / vol
        lo = float(ratio.min())
        if lo < best_ratio:
            best_ratio = lo
            best_masks = [int(x) for x in b[ratio == lo]]
        elif lo == best_ratio:
            best_masks.extend(int(x) for x in b[ratio == lo])
    cells = min(tuple(i for i in range(m) if mask >> i & 1) for mask in best_masks)
    return best_ratio, [CellSet(grid, cells)]


def _hk_exact_connected_dfs(grid: Grid, k: int, mode: PerimeterMode,
                            budget: int) -> tuple[float, list[CellSet]]:
    m = grid.num_cells
    adj = [grid.adj_indices[grid.adj_indptr[c]:grid.adj_indptr[c + 1]].tolist()
           for c in range(m)]
    counter = {"n": 0}
    best = {"val": math.inf, "wit": None}

    def connected_supersets(base: frozenset, frontier: list, banned: set,
                            min_cell: int, used: set):
        """Enumerate connected sets containing ``base`` (standard rec. scheme)."""
        yield base
        for idx, c in enumerate(frontier):
            new_banned = banned | set(frontier[:idx])
            nxt = [x for x in adj[c]
                   if x > min_cell and x not in base and x not in new_banned
                   and x not in used and x not in frontier[idx + 1:]]
            yield from connected_supersets(base | {c},
                                           frontier[idx + 1:] + nxt,
                                           new_banned, min_cell, used)

    def family_dfs(used: set, start: int, chosen: list, cur_max: float):
        if len(chosen) == k:
            key = tuple(tuple(sorted(s)) for s in chosen)
            if cur_max < best["val"] or (cur_max == best["val"]
                                         and (best["wit"] is None or key < best["wit"])):
                best["val"] = cur_max
                best["wit"] = key
            return
        for c in range(start, m):
            if c in used:
                continue
            frontier = [x for x in adj[c] if x > c and x not in used]
            for S in connected_supersets(frozenset([c]), frontier, set(), c, used):
                counter["n"] += 1
                if counter["n"] > budget:
                    raise BruteForceBudgetError(
                        f"connected-family enumeration exceeded budget {budget}; "
                        f"reduce the resolution")
                r = _ratio_of(grid, np.array(sorted(S)), mode)
                nxt = max(cur_max, r)
                if nxt > best["val"]:
                    continue
                family_dfs(used | S, c + 1, chosen + [S], nxt)

    family_dfs(set(), 0, [], 0.0)
    if best["wit"] is None:
        raise BruteForceBudgetError("no family found within budget")
    return best["val"], [CellSet(grid, s) for s in best["wit"]]


# ---------------------------------------------------------------------------
# Local search


def hk_local_search(grid: Grid, k: int, mode: PerimeterMode,
                    seed_partition: list[CellSet], rounds: int = 100
                    ) -> tuple[float, list[CellSet]]:
    """Greedy single-cell moves and adjacent swaps on a disjoint seed family.

    Moves strictly reduce (max ratio, total perimeter) lexicographically;
    the result is never worse than the seed.
    """
    if len(seed_partition) != k:
        raise ValueError(f"seed has {len(seed_partition)} parts, expected {k}")
    label = np.zeros(grid.num_cells, dtype=np.int64)  # 0 = unassigned
    for a, cs in enumerate(seed_partition, start=1):
        if np.any(label[cs.indices] != 0):
            raise ValueError("seed partition is not disjoint")
        label[cs.indices] = a

    def objective(lab) -> tuple[float, float]:
        worst = 0.0
        total_per = 0.0
        for a in range(1, k + 1):
            cs = CellSet(grid, np.flatnonzero(lab == a))
            if len(cs) == 0:
                return (math.inf, math.inf)
            per = perimeter(grid, cs, mode)
            worst = max(worst, per / volume(grid, cs))
            total_per += per
        return (worst, total_per)

    cur = objective(label)
    for _ in range(rounds):
        best_move = None
        best_obj = cur
        counts = np.bincount(label, minlength=k + 1)
        for c in range(grid.num_cells):
            src = label[c]
            if src != 0 and counts[src] == 1:
                continue  # would empty its set
            for tgt in range(0, k + 1):
                if tgt == src:
                    continue
                label[c] = tgt
                obj = objective(label)
                label[c] = src
                if obj < best_obj:
                    best_obj = obj
                    best_move = ("move", c, tgt)
        for u, v, _ in grid.interior_faces:
            if label[u] != label[v]:
                label[u], label[v] = label[v], label[u]
                obj = objective(label)
                label[u], label[v] = label[v], label[u]
                if obj < best_obj:
                    best_obj = obj
                    best_move = ("swap", int(u), int(v))
        if best_move is None:
            break
        if best_move[0] == "move":
            _, c, tgt = best_move
            label[c] = tgt
        else:
            _, u, v = best_move
            label[u], label[v] = label[v], label[u]
        cur = best_obj
    parts = [CellSet(grid, np.flatnonzero(label == a)) for a in range(1, k + 1)]
    return cur[0], parts


def _factorizations(k: int, n: int) -> list[tuple[int, ...]]:
    """All ordered tuples of n positive integers with product k."""
    if n == 1:
        return [(k,)]
    out = []
    for d in range(1, k + 1):
        if k % d == 0:
            out.extend((d,) + rest for rest in _factorizations(k // d, n - 1))
    return out


def partition_upper(grid: Grid, k: int, mode: PerimeterMode
                    ) -> tuple[float, list[CellSet]]:
    """Constructive upper bound from axis-aligned grid partitions.

    Splits the index range of each axis into equal contiguous bands, one
    factorization of k per candidate, and keeps the partition with the
    least max ratio.  Cheap, deterministic, and exact for equal strips.
    """
    best = math.inf
    best_parts: list[CellSet] | None = None
    for factors in _factorizations(k, grid.n):
        part_id = np.zeros(grid.num_cells, dtype=np.int64)
        mult = 1
        ok = True
        for axis, f in enumerate(factors):
            idx = grid.index[:, axis]
            lo, hi = int(idx.min()), int(idx.max())
            band = np.minimum((idx - lo) * f // (hi - lo + 1), f - 1)
            part_id += band * mult
            mult *= f
        counts = np.bincount(part_id, minlength=k)
        if np.any(counts == 0):
            continue
        parts = [CellSet(grid, np.flatnonzero(part_id == a)) for a in range(k)]
        worst = max(iso_ratio(grid, cs, mode) for cs in parts)
        if worst < best:
            best = worst
            best_parts = parts
    if best_parts is None:
        raise ValueError(f"no axis partition yields {k} nonempty parts")
    return best, best_parts


# ---------------------------------------------------------------------------
# Pipeline upper bound


def hk_upper(grid: Grid, p, k: int, mode: PerimeterMode = PerimeterMode.DIRICHLET,
             eig: Eigenpair | None = None,
             family: DisjointFamily | None = None) -> CheegerReport:
    """Upper-bound h_k: eigenfunction -> k disjoint members -> sweep each.

    The k sweep sets inherit pairwise disjointness from the member supports.
    The report carries the full certificate chain and the measured effective
    constant of the k^(1/n) scaling law.
    """
    pv = _pval(p)
    q = pv / (pv - 1.0)
    if eig is None:
        eig = first_eigenpair(grid, pv)
    direct = sweep(grid, eig.field, pv, mode)
    if family is None:
        family = decompose(grid, eig.field, pv, k, mode=mode)

    sweeps = [sweep(grid, member, pv, mode) for member in family.members]
    witnesses = [s.cells for s in sweeps]
    for a in range(len(witnesses)):
        for b in range(a + 1, len(witnesses)):
            if not witnesses[a].isdisjoint(witnesses[b]):
                raise RuntimeError("sweep sets lost disjointness")  # unreachable

    h_upper = max(s.phi for s in sweeps)
    h1_ref = direct.phi
    lam1 = eig.lam
    scaling = k ** (1.0 / grid.n) * (lam1 / h1_ref) ** (q / pv)
    c_eff = h_upper / scaling

    checks = []
    max_ray = max(family.rayleighs)
    lemma21_rhs = pv * direct.slack * max_ray ** (1.0 / pv)
    checks.append(InequalityCheck("lemma21_chain", h_upper, lemma21_rhs,
                                  h_upper <= lemma21_rhs))
    cert = family.certificate
    checks.append(InequalityCheck("lemma31_x4", cert.theorem34_bound,
                                  4.0 * cert.lemma31_bound,
                                  cert.theorem34_bound <= 4.0 * cert.lemma31_bound))

    report = CheegerReport(
        spec_name=grid.spec.name, resolution=grid.resolution, mode=mode,
        p=pv, k=k, h_k_upper=h_upper, witnesses=witnesses, h1_ref=h1_ref,
        lambda_refs={"lambda1": lam1}, c_eff=c_eff,
        theorem11_rhs=c_eff * scaling, certificate=cert, checks=checks)
    if grid.spec.convex_hint:
        report.faber_krahn = faber_krahn_lower(grid.n, k, grid.spec.volume())
    return report


# ---------------------------------------------------------------------------
# Bilateral verification on convex domains


def verify_bilateral(spec: DomainSpec, resolutions: list[int], p, k_max: int,
                     mode: PerimeterMode = PerimeterMode.DIRICHLET,
                     budget: int = 2_000_000) -> dict:
    """Scaling of h_k and the h_k^p / lambda_k ratio on a convex domain.

    Flags pass when the log-log slope of the best h_k estimate lies in
    [1/n - 0.2, 1/n + 0.2] and the max/min ratio of h_k^p / lambda_k stays
    below 4 across k (the pinned band).
    """
    if not spec.convex_hint:
        raise ValueError("bilateral verification applies to convex specs only")
    pv = _pval(p)
    rows = []
    vol = spec.volume()
    for res in resolutions:
        grid = build_grid(spec, res)
        eig = first_eigenpair(grid, pv)
        slice2 = spectrum_p2(grid, min(k_max, grid.num_cells))
        for k in range(1, k_max + 1):
            row = {"spec": spec.name, "resolution": res, "p": pv, "k": k,
                   "mode": mode.value}
            try:
                rep = hk_upper(grid, pv, k, mode, eig=eig)
                row["h_upper"] = rep.h_k_upper
                if grid.num_cells <= 512:
                    improved, _ = hk_local_search(grid, k, mode,
                                                  rep.witnesses, rounds=60)
                    row["h_local"] = improved
                else:
                    row["h_local"] = math.nan
            except DecompositionError as exc:
                row["h_upper"] = math.nan
                row["h_local"] = math.nan
                row["error"] = str(exc)
            try:
                row["h_part"], _ = partition_upper(grid, k, mode)
            except ValueError:
                row["h_part"] = math.nan
            try:
                exact, _ = hk_bruteforce(grid, k, mode, budget)
                row["h_exact"] = exact
            except BruteForceBudgetError:
                row["h_exact"] = math.nan
            row["faber_krahn"] = faber_krahn_lower(grid.n, k, vol)
            row["lambda_k_p2"] = float(slice2.eigenvalues[k - 1]) if k <= len(
                slice2.eigenvalues) else math.nan
            cands = [row[key] for key in ("h_exact", "h_local", "h_part",
                                          "h_upper")
                     if not math.isnan(row[key])]
            row["h_best"] = min(cands) if cands else math.nan
            rows.append(row)

    finest = max(resolutions)
    sub = [r for r in rows if r["resolution"] == finest and not math.isnan(r["h_best"])]
    ks = np.array([r["k"] for r in sub], dtype=float)
    hs = np.array([r["h_best"] for r in sub])
    n = spec.dim
    slope = float(np.polyfit(np.log(ks), np.log(hs), 1)[0]) if len(sub) >= 2 else math.nan
    scale = (ks / vol) ** (1.0 / n)
    c1 = float(np.min(hs / scale))
    c2 = float(np.max(hs / scale))
    ratios = np.array([r["h_best"] ** pv / r["lambda_k_p2"] for r in sub
                       if not math.isnan(r["lambda_k_p2"])])
    band = float(np.max(ratios) / np.min(ratios)) if len(ratios) else math.nan
    summary = {
        "slope": slope,
        "slope_ok": abs(slope - 1.0 / n) <= 0.2 if not math.isnan(slope) else False,
        "C1": c1, "C2": c2,
        "ratio_band": band,
        "ratio_band_ok": band <= 4.0 if not math.isnan(band) else False,
    }
    return {"rows": rows, "summary": summary}


# ---------------------------------------------------------------------------
# p -> 1 trend


def p_to_one_sweep(grid: Grid, p_list: list[float],
                   mode: PerimeterMode = PerimeterMode.DIRICHLET,
                   budget: int = 2_000_000) -> dict:
    """lambda_1(p) along a descending p list, against h_1 and (h_1/p)^p."""
    ps = [float(p) for p in p_list]
    if any(not (1.0 < p <= 2.0) for p in ps):
        raise ValueError("p list must lie in (1, 2]")
    if any(b >= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p list must be strictly descending")
    try:
        h1, _ = hk_bruteforce(grid, 1, mode, budget)
        h1_source = "bruteforce"
    except BruteForceBudgetError:
        h1 = math.nan
        h1_source = "unavailable"

    rows = []
    prev_field = None
    for p in ps:
        row = {"p": p, "h1": h1, "h1_source": h1_source}
        try:
            eig = first_eigenpair(grid, p, initial=prev_field)
            prev_field = eig.field
            row["lambda1"] = eig.lam
            if not math.isnan(h1):
                classical = (h1 / p) ** p
                row["classical_lower"] = classical
                row["classical_ok"] = eig.lam >= classical * (1.0 - 0.1)
        except Exception as exc:  # keep the sweep going past one bad solve
            row["error"] = str(exc)
        rows.append(row)
    lams = [r["lambda1"] for r in rows if "lambda1" in r]
    monotone = all(b <= a * (1.0 + 1e-9) for a, b in zip(lams, lams[1:]))
    return {"rows": rows, "monotone_decreasing": monotone, "h1": h1}


# ---------------------------------------------------------------------------
# Non-convex counterexample


def counterexample_comb(teeth: int, tooth_widths: list[float],
                        room: tuple[float, float], resolution: int) -> dict:
    """Comb domain: bounded relative h_k next to growing lambda_k.

    Witnesses are full teeth (relative ratio: mouth area over tooth volume,
    exactly 1 for unit-length teeth).  Reports lambda_k(2), the ratio
    lambda_k / h_k^2, and the dirichlet tooth ratios showing the
    mode-sensitivity.
    """
    h = 1.0 / resolution
    if any(w < h - 1e-12 for w in tooth_widths):
        raise ValueError(f"tooth thinner than one cell at resolution {resolution}")
    # snap widths and room so every wall is grid-aligned
    widths = [round(w * resolution) / resolution for w in tooth_widths]
    w_room = round(room[0] * resolution) / resolution
    h_room = round(room[1] * resolution) / resolution
    gap = math.floor((w_room - sum(widths)) / (teeth + 1) * resolution) / resolution
    if gap <= 0:
        raise ValueError("room too narrow for the teeth at this resolution")
    from .domain import Box

    boxes = [Box(((0.0, w_room), (0.0, h_room)))]
    x = gap
    tooth_boxes = []
    for w in widths:
        b = Box(((x, x + w), (h_room, h_room + 1.0)))
        boxes.append(b)
        tooth_boxes.append(b)
        x += w + gap
    spec = DomainSpec(f"comb{teeth}", tuple(boxes))
    grid = build_grid(spec, resolution)

    tooth_sets = []
    for b in tooth_boxes:
        (x0, x1), (y0, y1) = b.bounds
        cx = grid.centers[:, 0]
        cy = grid.centers[:, 1]
        idx = np.flatnonzero((cx > x0) & (cx < x1) & (cy > y0) & (cy < y1))
        tooth_sets.append(CellSet(grid, idx))

    rel = [iso_ratio(grid, ts, PerimeterMode.RELATIVE) for ts in tooth_sets]
    dirich = [iso_ratio(grid, ts, PerimeterMode.DIRICHLET) for ts in tooth_sets]
    order = sorted(range(teeth), key=lambda i: (rel[i], i))

    slice2 = spectrum_p2(grid, teeth)
    rows = []
    for k in range(1, teeth + 1):
        hk = max(rel[i] for i in order[:k])
        lam = float(slice2.eigenvalues[k - 1])
        rows.append({"k": k, "h_k_rel_upper": hk, "lambda_k_p2": lam,
                     "ratio": lam / hk ** 2,
                     "witness_teeth": sorted(order[:k])})
    ratios = [r["ratio"] for r in rows]
    return {
        "spec": spec, "grid": grid, "rows": rows,
        "tooth_ratios_relative": rel,
        "tooth_ratios_dirichlet": dirich,
        "ratio_strictly_increasing": all(b > a for a, b in zip(ratios, ratios[1:])),
    }
