"""p-Laplacian eigenpairs on grids.

The first eigenpair for general p in (1, inf) comes from normalized descent
on the Rayleigh quotient.  For p = 2 the full low end of the spectrum of the
symmetric second-difference operator is available through a sparse
symmetric eigensolver, which provides the exact cross-checks the variational
upper bounds are measured against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dfield

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import Grid
from .fields import (Exponent, ScalarField, _face_weights, _pval, p_energy,
                     p_energy_gradient, p_norm, rayleigh, save_field)

__all__ = [
    "Eigenpair",
    "SolverError",
    "SpectrumSlice",
    "first_eigenpair",
    "lambda_upper_from_family",
    "save_eigenpair",
    "spectrum_p2",
    "stiffness_matrix",
]


class SolverError(RuntimeError):
    """Raised when an eigensolver fails to converge; carries the last iterate."""

    def __init__(self, msg: str, last: "Eigenpair | None" = None):
        super().__init__(msg)
        self.last = last


@dataclass
class Eigenpair:
    lam: float
    field: ScalarField
    p: float
    iterations: int
    residual: float


@dataclass
class SpectrumSlice:
    """The m smallest p=2 eigenpairs; fields are pairwise orthogonal, unit 2-norm."""

    eigenvalues: np.ndarray
    fields: list[ScalarField] = dfield(default_factory=list)


def stiffness_matrix(grid: Grid) -> sp.csr_matrix:
    """Quadratic form Q with p_energy(f, 2) = f^T Q f."""
    B = grid.incidence()
    w = _face_weights(grid, 2.0)
    return (B.T @ sp.diags(w) @ B).tocsr()


def spectrum_p2(grid: Grid, m: int) -> SpectrumSlice:
    """m smallest eigenpairs of the discrete Dirichlet Laplacian (p = 2)."""
    n = grid.num_cells
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= {n} eigenvalues, got {m}")
    Q = stiffness_matrix(grid)
    if m >= n - 1 or n <= 64:
        vals, vecs = np.linalg.eigh(Q.toarray())
        vals, vecs = vals[:m], vecs[:, :m]
    else:
        v0 = np.ones(n)
        vals, vecs = spla.eigsh(Q, k=m, sigma=0.0, which="LM", v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vals = vals / grid.cell_volume

    fields = []
    scale = 1.0 / math.sqrt(grid.cell_volume)
    for j in range(m):
        v = vecs[:, j]
        nz = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
        if len(nz) and v[nz[0]] < 0:
            v = -v
        fields.append(ScalarField(grid, v * scale))
    return SpectrumSlice(eigenvalues=vals, fields=fields)


def first_eigenpair(grid: Grid, p, tol: float = 1e-8, max_iter: int = 100_000,
                    initial: ScalarField | None = None) -> Eigenpair:
    """First eigenpair by preconditioned descent with backtracking.

    Starts from the constant field (unless ``initial`` is given, e.g. for
    continuation in p), takes descent steps on the Rayleigh quotient along
    the Sobolev gradient (the p = 2 stiffness matrix applied inversely to
    the Euclidean gradient, which keeps the iteration count roughly
    resolution-independent), with a warm-started backtracking step size,
    projects to unit p-norm, and stops when the relative Rayleigh decrease
    of an accepted step drops below ``tol``.  The returned field is
    nonnegative with unit p-norm.
    """
    pv = _pval(p)
    if not (1.0 < pv < math.inf):
        raise ValueError("first_eigenpair needs p in (1, inf)")
    vol = grid.cell_volume
    if pv == 2.0 and initial is None:
        # linear case: the symmetric eigensolver is exact and cheap
        sl = spectrum_p2(grid, 1)
        v = np.abs(sl.fields[0].values)
        v /= float(np.sum(v ** 2) * vol) ** 0.5
        return Eigenpair(lam=float(sl.eigenvalues[0]),
                         field=ScalarField(grid, v), p=2.0, iterations=0,
                         residual=0.0)
    x = (initial.values.copy() if initial is not None
         else np.ones(grid.num_cells))

    def normalize(v):
        nrm = float(np.sum(np.abs(v) ** pv) * vol) ** (1.0 / pv)
        if nrm == 0.0:
            raise SolverError("descent iterate collapsed to zero")
        return v / nrm

    B = grid.incidence()
    w = _face_weights(grid, pv)
    precond = spla.factorized(stiffness_matrix(grid).tocsc())

    def energy(v):
        return float(w @ np.abs(B @ v) ** pv)

    x = normalize(x)
    R = energy(x)
    step = 1.0
    iters = 0
    prev_R = R
    converged = False
    while iters < max_iter:
        iters += 1
        grad_e = p_energy_gradient(grid, x, pv)
        grad_n = pv * vol * np.abs(x) ** (pv - 1.0) * np.sign(x)
        g = grad_e - R * grad_n
        d = precond(g)
        gn = float(np.linalg.norm(d))
        if gn == 0.0:
            converged = True
            break
        s = step
        accepted = False
        while s > 1e-18:
            y = normalize(x - s * d / gn)
            Ry = energy(y)
            if Ry < R:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            converged = True  # no descent direction left at float precision
            break
        rel_dec = (R - Ry) / R if R > 0 else 0.0
        prev_R, x, R = R, y, Ry
        step = min(s * 2.0, 1.0)
        if rel_dec < tol:
            converged = True
            break

    x = normalize(np.abs(x))
    lam = energy(x)
    pair = Eigenpair(lam=lam, field=ScalarField(grid, x), p=pv,
                     iterations=iters, residual=abs(prev_R - lam))
    if not converged:
        raise SolverError(
            f"first_eigenpair did not converge in {max_iter} iterations "
            f"(last Rayleigh {lam:.6g}, residual {pair.residual:.3g})", last=pair)
    return pair


def lambda_upper_from_family(family: list[ScalarField], p) -> float:
    """max_i R(f_i) over disjointly supported fields: an upper bound on
    the k-th variational eigenvalue, k = len(family)."""
    if not family:
        raise ValueError("family must be nonempty")
    grid = family[0].grid
    supports = [f.support() for f in family]
    for i, s in enumerate(supports):
        if not s.any():
            raise ValueError(f"family member {i} has empty support")
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            overlap = supports[i] & supports[j]
            if overlap.any():
                cell = int(np.flatnonzero(overlap)[0])
                raise ValueError(
                    f"members {i} and {j} have overlapping supports "
                    f"(witness cell {cell}, index {grid.index[cell].tolist()})")
    return max(rayleigh(grid, f, p) for f in family)


def save_eigenpair(pair: Eigenpair, path_prefix: str, spec_name: str = "",
                   resolution: int = 0) -> None:
    """Write the field in columnar form plus a JSON metadata sidecar."""
    save_field(pair.field, path_prefix + ".field.txt")
    meta = {
        "p": pair.p,
        "lambda": pair.lam,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "resolution": resolution,
        "spec": spec_name,
    }
    with open(path_prefix + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
