"""
Matrix primitives shared by every other module.

Representation matrices hold one feature vector per row and are plain
float64 ``numpy`` arrays; Gram matrices are the ``n x n`` matrices of
their pairwise inner products. The helpers here validate those
conventions, build Gram matrices, and wrap the SVD used for nuclear
norms and Procrustes alignment.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    NotPositiveSemidefinite,
    PreconditionError,
    RankExceedsDim,
    ZeroRow,
)

ROW_NORM_TOL = 1e-9
SYMMETRY_TOL = 1e-9
PSD_SLACK = 1e-8
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``M = U @ diag(S) @ V.T`` with ``S`` descending."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite, non-empty 2-D float64 array."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise PreconditionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise PreconditionError(f"{name} must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise PreconditionError(f"{name} has non-finite entries")
    return A


def as_representation(R, name="representation", unit_norm=False):
    """Validate a representation matrix; optionally require unit-norm rows."""
    A = as_matrix(R, name)
    if unit_norm:
        norms = np.linalg.norm(A, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > ROW_NORM_TOL)
        if bad.size:
            raise PreconditionError(
                f"{name} row {bad[0]} has norm {norms[bad[0]]!r}, expected 1"
            )
    return A


def as_gram(K, name="gram", check_psd=False):
    """Validate a square symmetric matrix (and optionally PSD)."""
    A = as_matrix(K, name)
    if A.shape[0] != A.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {A.shape}")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > SYMMETRY_TOL * scale:
        raise PreconditionError(f"{name} is not symmetric")
    if check_psd and min_eigenvalue(A) < -PSD_SLACK * scale:
        raise NotPositiveSemidefinite(f"{name} is not positive semi-definite")
    return A


def normalize_rows(M):
    """Scale every row of ``M`` to unit Euclidean norm.

    Raises
    ------
    ZeroRow
        If some row has norm below ``1e-12``.
    """
    A = as_matrix(M)
    norms = np.linalg.norm(A, axis=1)
    small = np.flatnonzero(norms < 1e-12)
    if small.size:
        raise ZeroRow(int(small[0]))
    return A / norms[:, None]


def center_and_normalize(M):
    """Subtract column means, then re-normalize rows.

    Exact simultaneous centering and unit-norm rows is generally
    impossible, so this is an explicit opt-in transform.
    """
    A = as_matrix(M)
    return normalize_rows(A - A.mean(axis=0, keepdims=True))


def center_gram(K):
    """Double-center a Gram matrix, ``H K H`` with ``H = I - J/n``."""
    K = as_gram(K)
    row = K.mean(axis=0, keepdims=True)
    col = K.mean(axis=1, keepdims=True)
    return K - row - col + K.mean()


def gram(R):
    """Gram matrix ``R @ R.T`` (exactly symmetrized)."""
    A = as_matrix(R)
    K = A @ A.T
    return 0.5 * (K + K.T)


def all_ones(n):
    return np.ones((n, n))


def svd(M):
    """Thin SVD of ``M``.

    Raises
    ------
    ConvergenceFailure
        If LAPACK does not converge.
    """
    A = as_matrix(M)
    try:
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SvdFactors(U=U, S=S, V=Vt.T)


def nuclear_norm(M):
    """Sum of singular values of ``M``."""
    return float(svd(M).S.sum())


def min_eigenvalue(K):
    return float(np.linalg.eigvalsh(K)[0])


def numerical_rank(K, rtol=RANK_RTOL):
    """Number of eigenvalues of the symmetric ``K`` above ``rtol * max(eig)``."""
    w = np.linalg.eigvalsh(as_gram(K))
    top = w[-1]
    if top <= 0:
        return 0
    return int(np.count_nonzero(w > rtol * top))


def factor_gram(K, target_dim):
    """Realize a PSD Gram matrix as ``target_dim``-dimensional vectors.

    Returns ``R`` with ``R @ R.T == K`` (to rounding). Eigenvalues in
    ``[-1e-8, 0]`` are clamped to zero; more negative ones mean ``K``
    is not PSD.

    Raises
    ------
    RankExceedsDim
        If the numerical rank of ``K`` exceeds ``target_dim``.
    """
    if int(target_dim) != target_dim or target_dim < 1:
        raise PreconditionError(f"target_dim must be a positive integer, got {target_dim}")
    K = as_gram(K)
    w, Q = np.linalg.eigh(K)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -PSD_SLACK * scale:
        raise NotPositiveSemidefinite(f"smallest eigenvalue {w[0]!r} below slack")
    w = np.clip(w, 0.0, None)
    keep = w > RANK_RTOL * w[-1] if w[-1] > 0 else np.zeros_like(w, dtype=bool)
    rank = int(keep.sum())
    if rank > target_dim:
        raise RankExceedsDim(rank, target_dim)
    # eigh sorts ascending; take the top eigenpairs largest first
    idx = np.flatnonzero(keep)[::-1]
    cols = Q[:, idx] * np.sqrt(w[idx])
    # deterministic sign: largest-magnitude entry of each column positive
    pivots = np.abs(cols).argmax(axis=0)
    signs = np.sign(cols[pivots, np.arange(cols.shape[1])])
    signs[signs == 0] = 1.0
    R = np.zeros((K.shape[0], int(target_dim)))
    R[:, :rank] = cols * signs
    return R
