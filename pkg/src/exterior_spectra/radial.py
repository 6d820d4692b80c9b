"""Separation-of-variables oracle for radial problems outside a disk.

With ``u(r, theta) = r**-0.5 * w(r) * exp(i m theta)`` the operator
``-Laplace + V`` becomes ``-w'' + ((m**2 - 1/4) / r**2 + V(r)) w`` on
``(r0, R)``. Each angular mode is discretised by central differences on a
uniform grid, giving a symmetric tridiagonal eigenproblem.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .fields import Potential
from .spectral import cluster_multiplicity

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialProblem:
    r0: float
    R: float
    V: Potential
    inner_bc: str = "dirichlet"  # "dirichlet" | "neumann" | "robin"
    alpha: float = 0.0
    m_max: int = 8
    n_r: int = 1024

    def __post_init__(self):
        if not (self.r0 > 0 and self.R > self.r0):
            raise ValueError("radial problem needs 0 < r0 < R")
        if self.n_r < 64 or self.m_max < 0:
            raise ValueError("radial problem needs n_r >= 64 and m_max >= 0")
        if self.inner_bc not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown inner boundary condition {self.inner_bc!r}")
        if not getattr(self.V, "radial", False):
            raise ValueError("radial oracle needs a radially symmetric potential")

    @property
    def robin_coefficient(self) -> float | None:
        if self.inner_bc == "dirichlet":
            return None
        return self.alpha if self.inner_bc == "robin" else 0.0


@dataclass(frozen=True, order=True)
class RadialEigenvalue:
    value: float
    m: int
    index: int
    multiplicity: int = field(default=1, compare=False)


def potential_matrix(V: Potential, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of ``int V phi_i phi_j dr`` for hat functions.

    Cells are split at the potential's jump radii and every piece is
    integrated with 4-point Gauss-Legendre, so a jump between grid nodes
    costs only O(h**3) per cell.
    """
    lo, hi = nodes[0], nodes[-1]
    cuts = [b for b in V.breakpoints() if lo < b < hi]
    pts = np.union1d(nodes, cuts)
    a, b = pts[:-1], pts[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GAUSS_X[None, :]
    cell = np.searchsorted(nodes, a, side="right") - 1
    left, width = nodes[cell][:, None], np.diff(nodes)[cell][:, None]
    phi_r = (x - left) / width
    phi_l = 1.0 - phi_r
    wv = half[:, None] * _GAUSS_W[None, :] * V.of_radius(x)
    n = len(nodes)
    diag = np.bincount(cell, (wv * phi_l ** 2).sum(1), minlength=n)
    diag += np.bincount(cell + 1, (wv * phi_r ** 2).sum(1), minlength=n)
    off = np.bincount(cell, (wv * phi_l * phi_r).sum(1), minlength=n - 1)
    return diag, off


def _mode_matrix(p: RadialProblem, m: int, centrifugal: bool = True):
    """Diagonal and off-diagonal of the symmetrised matrix for mode ``m``.

    Generalised form ``(K + P + Q) w = lambda D w`` with the central-difference
    stiffness ``K``, the Galerkin potential matrix ``P``, the nodal centrifugal
    term ``Q`` and lumped weights ``D``; returned as ``D^-1/2 (K+P+Q) D^-1/2``.
    """
    h = (p.R - p.r0) / p.n_r
    r = p.r0 + h * np.arange(p.n_r + 1)
    beta = p.robin_coefficient
    pd, po = potential_matrix(p.V, r)
    w = np.full(p.n_r + 1, h)
    k_diag = np.full(p.n_r + 1, 2.0 / h)
    if beta is not None:
        # u' = alpha u at r0 (outward normal points towards the origin), hence
        # w' = (1/(2 r0) + alpha) w; node 0 keeps half a cell
        w[0] = 0.5 * h
        k_diag[0] = 1.0 / h + (0.5 / p.r0 + beta)
    cf = (m * m - 0.25) / r ** 2 if centrifugal else np.zeros_like(r)
    diag = k_diag + pd + cf * w
    off = -1.0 / h + po
    first = 0 if beta is not None else 1
    sl = slice(first, p.n_r)  # outer node is Dirichlet
    d = diag[sl] / w[sl]
    e = off[first:p.n_r - 1] / np.sqrt(w[first:p.n_r - 1] * w[first + 1:p.n_r])
    return d, e


def mode_eigenvalues(p: RadialProblem, m: int, mu: float, centrifugal: bool = True) -> np.ndarray:
    """Eigenvalues of angular mode ``m`` strictly below ``mu``."""
    d, e = _mode_matrix(p, m, centrifugal)
    off = np.abs(np.concatenate([[0.0], e])) + np.abs(np.concatenate([e, [0.0]]))
    lower = float(np.min(d - off)) - 1.0
    if mu <= lower:
        return np.empty(0)
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(lower, mu))
    vals = np.sort(vals[vals < mu])
    # a half-wavelength needs enough grid points to be resolved
    if len(vals) and p.n_r < 8 * len(vals):
        raise OracleError(f"n_r={p.n_r} too coarse for {len(vals)} eigenvalues in mode {m}; "
                          f"use n_r >= {8 * len(vals)}")
    return vals


def radial_eigs(p: RadialProblem, mu: float) -> list[RadialEigenvalue]:
    """All eigenvalues below ``mu`` over angular modes ``0..m_max``.

    Modes ``m >= 1`` carry multiplicity 2 (the ``+m`` and ``-m`` harmonics).
    ``m_max`` is raised automatically while its mode still contributes.
    """
    out = []
    m = 0
    while True:
        vals = mode_eigenvalues(p, m, mu)
        out.extend(RadialEigenvalue(float(v), m, i + 1, 1 if m == 0 else 2)
                   for i, v in enumerate(vals))
        if m >= p.m_max and len(vals) == 0:
            break
        m += 1
    out.sort()
    return out


def expand(eigs: list[RadialEigenvalue]) -> np.ndarray:
    """Multiplicity-counted ascending eigenvalue list."""
    return np.sort(np.array([e.value for e in eigs for _ in range(e.multiplicity)]))


def ground_state(p: RadialProblem, m: int = 0) -> float:
    vals = mode_eigenvalues(p, m, 0.0)
    if not len(vals):
        raise OracleError(f"mode {m} has no negative eigenvalue")
    return float(vals[0])


def write_csv(path, eigs: list[RadialEigenvalue], n_r: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "index", "eigenvalue", "multiplicity", "n_r"])
        for e in eigs:
            w.writerow([e.m, e.index, f"{e.value:.17g}", e.multiplicity, n_r])


# ---------------------------------------------------------------------------
# cross-check against a FEM eigenvalue list


@dataclass
class CrosscheckReport:
    passed: bool
    pairs: list[tuple[float, float, float]]  # (fem, oracle, relative error)
    max_rel_error: float
    unmatched_fem: list[float]
    unmatched_oracle: list[float]
    multiplicity_mismatch: list[tuple[float, int, int]]


def oracle_crosscheck(fem_values, oracle_values, rel_tol: float,
                      cluster_tol: float = 1e-6) -> CrosscheckReport:
    """Match FEM and oracle eigenvalues cluster by cluster, ascending.

    Each FEM cluster takes the nearest still-unused oracle cluster. The check
    passes iff every cluster on both sides is matched, multiplicities agree,
    and all relative errors are within ``rel_tol``.
    """
    fem = cluster_multiplicity(fem_values, cluster_tol)
    orc = cluster_multiplicity(oracle_values, cluster_tol)
    free = list(range(len(orc)))
    pairs, unmatched_fem, mult_bad = [], [], []
    for val, mult in fem:
        best = min(free, key=lambda j: abs(orc[j][0] - val), default=None)
        if best is None or abs(orc[best][0] - val) > rel_tol * abs(orc[best][0]):
            unmatched_fem.append(val)
            continue
        free.remove(best)
        ref, ref_mult = orc[best]
        pairs.append((val, ref, abs(val - ref) / abs(ref)))
        if mult != ref_mult:
            mult_bad.append((val, mult, ref_mult))
    unmatched_oracle = [orc[j][0] for j in free]
    max_err = max((e for *_, e in pairs), default=0.0)
    passed = not (unmatched_fem or unmatched_oracle or mult_bad) and max_err <= rel_tol
    return CrosscheckReport(passed, pairs, max_err, unmatched_fem, unmatched_oracle, mult_bad)
