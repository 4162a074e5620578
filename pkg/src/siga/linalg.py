"""Sparse direct solve, matrix bandwidth, and the smallest nonzero
generalized eigenvalue used for the discrete inf-sup constant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    pass


def sparse_solve(K, b):
    """Direct sparse LU solve with a fill-reducing ordering.

    Raises SingularSystemError on structural or numerical singularity,
    reporting the offending pivot index when the factorization exposes it.
    """
    K = sp.csc_matrix(K)
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(K)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise SingularSystemError(f"singular system: non-finite pivot/solution "
                                  f"at index {bad}")
    return x


def factorized(K):
    """LU factorization handle for repeated right-hand sides."""
    try:
        return spla.splu(sp.csc_matrix(K))
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc


def matrix_bandwidth(S, rel_tol: float = 1e-14) -> int:
    """Smallest b such that S_ij = 0 for |i - j| > b, ignoring stored entries
    of magnitude at most rel_tol times the largest."""
    S = sp.coo_matrix(S)
    if S.nnz == 0:
        return 0
    cut = rel_tol * np.abs(S.data).max()
    keep = np.abs(S.data) > cut
    if not np.any(keep):
        return 0
    return int(np.abs(S.row[keep] - S.col[keep]).max())


@dataclass
class GevpResult:
    beta_h: float
    eigenvalues: np.ndarray
    zero_modes: int


def smallest_nonzero_gevp(P, G, zero_tol: float = 1e-10) -> GevpResult:
    """beta_h = sqrt of the smallest nonzero eigenvalue of P q = beta^2 G q.

    P symmetric positive semidefinite, G symmetric positive definite; dense
    symmetric reduction (Cholesky of G), intended for n_p <= 4000.
    """
    P = np.asarray(sp.csr_matrix(P).todense(), dtype=float)
    G = np.asarray(sp.csr_matrix(G).todense(), dtype=float)
    if P.shape[0] > 4000:
        raise ValueError("dense eigensolver path limited to n <= 4000")
    P = 0.5 * (P + P.T)
    G = 0.5 * (G + G.T)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Gramian matrix is not positive definite") from exc
    lam = scipy.linalg.eigh(P, G, eigvals_only=True)
    lam_max = lam[-1] if lam.size else 0.0
    cut = zero_tol * max(lam_max, 0.0)
    nonzero = lam[lam > cut]
    zero_modes = int(lam.size - nonzero.size)
    if nonzero.size == 0:
        raise ValueError("all generalized eigenvalues are numerically zero")
    return GevpResult(float(np.sqrt(nonzero[0])), lam, zero_modes)
