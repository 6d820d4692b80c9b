"""Eigenvalue counting by matrix inertia and eigenpairs below a threshold.

For a symmetric pencil ``(A, M)`` with ``M`` positive definite, the number of
eigenvalues below ``mu`` equals the number of negative pivots of any
symmetric ``L D L^T`` factorization of ``A - mu M`` (Sylvester's law of
inertia). That count is used as an exact certificate for the eigensolver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_CUTOFF = 600
DENSE_LDL_CUTOFF = 1500
PIVOT_TOL = 1e-13
SHIFT_STEP = 1e-10
MAX_SHIFTS = 8
SEED = 20140707


class SpectralError(RuntimeError):
    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class Inertia:
    n_negative: int
    mu: float        # shift requested
    mu_used: float   # shift actually factorised (differs after a pivot breakdown)
    method: str


def _negative_pivots_dense(S: np.ndarray) -> int | None:
    _, d, _ = sl.ldl(S, lower=True, hermitian=True, check_finite=False)
    # d is block diagonal with 1x1 and 2x2 blocks
    neg, i, n = 0, 0, len(d)
    scale = max(np.abs(S).max(), 1.0)
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            ev = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            block = ev
            i += 2
        else:
            block = [d[i, i]]
            i += 1
        for v in block:
            if abs(v) <= PIVOT_TOL * scale:
                return None
            neg += v < 0
    return int(neg)


def _negative_pivots_sparse(S: sp.csc_matrix) -> int | None:
    try:
        lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError:  # exactly singular
        return None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        # off-diagonal pivoting happened; U's diagonal is no longer a congruence
        return None
    d = lu.U.diagonal()
    scale = max(abs(S).max(), 1.0)
    if np.any(np.abs(d) <= PIVOT_TOL * scale) or not np.all(np.isfinite(d)):
        return None
    return int(np.sum(d < 0))


def inertia(A, M, mu: float) -> Inertia:
    """Negative-pivot count of ``A - mu M`` with retry on pivot breakdown."""
    n = A.shape[0]
    if n == 0:
        return Inertia(0, mu, mu, "empty")
    shift = mu
    for attempt in range(MAX_SHIFTS):
        if n <= DENSE_LDL_CUTOFF:
            S = (A - shift * M)
            S = S.toarray() if sp.issparse(S) else np.asarray(S)
            count, method = _negative_pivots_dense(S), "ldl-bunch-kaufman"
        else:
            S = sp.csc_matrix(A - shift * M)
            count, method = _negative_pivots_sparse(S), "sparse-ldl-symmetric"
        if count is not None:
            if attempt:
                log.info("inertia at mu=%r needed shift to %r", mu, shift)
            return Inertia(count, mu, shift, method)
        shift = shift - SHIFT_STEP * (1.0 + abs(mu)) * 2 ** attempt
    raise SpectralError(f"factorization of A - mu M breaks down near mu={mu}")


def inertia_count(A, M, mu: float) -> int:
    """Number of eigenvalues of the pencil ``(A, M)`` strictly below ``mu``."""
    return inertia(A, M, mu).n_negative


@dataclass(frozen=True)
class CountingReport:
    mu: float
    n_strictly_below: int
    n_at_mu: int

    @property
    def n_below_or_equal(self) -> int:
        return self.n_strictly_below + self.n_at_mu


def cluster_tolerance(mu: float, rel: float = 1e-8) -> float:
    return rel * (1.0 + abs(mu))


def counting_report(A, M, mu: float, cluster_tol: float = 1e-8) -> CountingReport:
    """Counts below and at ``mu``; "at" means within ``cluster_tol * (1 + |mu|)``."""
    tol = cluster_tolerance(mu, cluster_tol)
    below = inertia_count(A, M, mu - tol)
    upto = inertia_count(A, M, mu + tol)
    return CountingReport(mu, below, upto - below)


# ---------------------------------------------------------------------------
# eigenpairs


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray   # columns, M-orthonormal
    residuals: np.ndarray
    threshold: float
    method: str = ""

    def __len__(self):
        return len(self.eigenvalues)


def _residuals(A, M, lam, X):
    R = A @ X - (M @ X) * lam
    MX = M @ X
    return np.linalg.norm(R, axis=0) / np.linalg.norm(MX, axis=0)


def _rayleigh_ritz(A, M, X):
    """Re-orthonormalise a basis in the M inner product and rotate to Ritz vectors."""
    H = X.T @ (A @ X)
    G = X.T @ (M @ X)
    H = 0.5 * (H + H.T)
    G = 0.5 * (G + G.T)
    lam, Y = sl.eigh(H, G)
    return lam, X @ Y


def _empty(n, mu, method):
    return SpectralResult(np.empty(0), np.empty((n, 0)), np.empty(0), mu, method)


def eigs_below(A, M, mu: float, tol: float = 1e-8, max_count: int = 400,
               dense_cutoff: int = DENSE_CUTOFF) -> SpectralResult:
    """All eigenpairs of ``A u = lambda M u`` with ``lambda < mu``.

    The number of eigenvalues is fixed beforehand by :func:`inertia_count`
    and the solver output must reproduce it. Small pencils go to a dense
    generalized solve; larger ones to shift-invert Lanczos (ARPACK) with the
    shift placed below the whole spectrum.
    """
    n = A.shape[0]
    target = inertia_count(A, M, mu)
    if target > max_count:
        raise SpectralError(f"{target} eigenvalues below {mu} exceed max_count={max_count}")
    if target == 0:
        return _empty(n, mu, "inertia")

    if n <= dense_cutoff or target >= n - 2:
        lam, X = sl.eigh(_dense(A), _dense(M))
        keep = lam < mu
        lam, X = lam[keep], X[:, keep]
        method = "dense"
    else:
        lam, X, method = _shift_invert(A, M, mu, target, tol)

    if len(lam) != target:
        raise SpectralError(f"solver found {len(lam)} eigenvalues below {mu}, inertia says {target}")
    res = _residuals(A, M, lam, X)
    if np.max(res) > tol:
        raise SpectralError(f"eigenpair residual {np.max(res):.3e} above tolerance {tol:.1e}",
                            best_residual=float(np.max(res)))
    return SpectralResult(lam, X, res, mu, method)


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X)


def _lower_shift(A, M, mu):
    """A shift with no eigenvalue below it, found by inertia."""
    step = 1.0 + abs(mu)
    sigma = mu - step
    while inertia_count(A, M, sigma) > 0:
        step *= 2.0
        sigma = mu - step
    return sigma


def _shift_invert(A, M, mu, target, tol):
    sigma = _lower_shift(A, M, mu)
    A = sp.csc_matrix(A)
    M = sp.csc_matrix(M)
    lu = spla.splu(A - sigma * M)
    op = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(SEED).standard_normal(A.shape[0])
    best = np.inf
    k = target
    for ncv in (max(2 * k + 1, 20), max(4 * k + 1, 40), max(8 * k + 1, 80)):
        ncv = min(ncv, A.shape[0] - 1)
        try:
            lam, X = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM", OPinv=op,
                                v0=v0, ncv=ncv, tol=tol * 1e-3, maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            log.info("ARPACK did not converge with ncv=%d", ncv)
            if len(exc.eigenvalues):
                best = min(best, float(np.max(_residuals(A, M, exc.eigenvalues, exc.eigenvectors))))
            continue
        lam, X = _rayleigh_ritz(A, M, X)
        res = _residuals(A, M, lam, X)
        best = min(best, float(np.max(res)))
        if np.all(lam < mu) and np.max(res) <= tol:
            return lam, X, "shift-invert-lanczos"
    raise SpectralError(f"shift-invert iteration did not converge below mu={mu}", best_residual=best)


def cluster_multiplicity(result, cluster_tol: float = 1e-8) -> list[tuple[float, int]]:
    """Merge eigenvalues closer than ``cluster_tol * (1 + |lambda|)`` into clusters."""
    values = result.eigenvalues if isinstance(result, SpectralResult) else result
    groups: list[list[float]] = []
    for v in np.sort(np.asarray(values, dtype=float)):
        if groups and abs(v - groups[-1][-1]) <= cluster_tol * (1 + abs(v)):
            groups[-1].append(float(v))
        else:
            groups.append([float(v)])
    return [(float(np.mean(g)), len(g)) for g in groups]
