"""
Alignment distances between teacher and student representations.

Four distances are provided: the Frobenius distance between Gram
matrices (``d_fg``), linear CKA and its distance ``1 - CKA``, the
orthogonal Procrustes distance (kernel form for mismatched dimensions,
direct form for equal ones), and the learned linear projection
distance. Gram-based functions take ``n x n`` Gram matrices; the
others take ``n x d`` representation matrices.

Functions suffixed ``_repr`` evaluate Gram-based quantities through
``d x d`` cross products, which never materialize an ``n x n`` matrix.
They are meant for monitoring large problems; they lose accuracy near
zero distance through cancellation.
"""

import numpy as np

from .core import as_gram, as_matrix, center_gram, svd
from .errors import DimensionMismatch, ZeroGram

ZERO_GRAM_TOL = 1e-24


def _same_n(A, B, what=("teacher", "student")):
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatch(
            f"{what[0]} has {A.shape[0]} rows but {what[1]} has {B.shape[0]}"
        )


def d_fg(Kt, Ks):
    """Feature Gram distance ``||Kt - Ks||_F``."""
    Kt, Ks = as_gram(Kt, "Kt"), as_gram(Ks, "Ks")
    if Kt.shape != Ks.shape:
        raise DimensionMismatch(f"Gram shapes differ: {Kt.shape} vs {Ks.shape}")
    return float(np.linalg.norm(Kt - Ks))


def cka(Kt, Ks, centered=False):
    """Linear CKA between two Gram matrices.

    ``tr(Kt Ks) / sqrt(tr(Kt Kt) tr(Ks Ks))``. With ``centered=True``
    both Gram matrices are double-centered first (the HSIC form);
    the default uses them as given.

    Raises
    ------
    ZeroGram
        If ``tr(K K) < 1e-24`` for either argument.
    """
    Kt, Ks = as_gram(Kt, "Kt"), as_gram(Ks, "Ks")
    if Kt.shape != Ks.shape:
        raise DimensionMismatch(f"Gram shapes differ: {Kt.shape} vs {Ks.shape}")
    if centered:
        Kt, Ks = center_gram(Kt), center_gram(Ks)
    # for symmetric matrices tr(A B) is the elementwise inner product
    tt = float(np.sum(Kt * Kt))
    ss = float(np.sum(Ks * Ks))
    if tt < ZERO_GRAM_TOL or ss < ZERO_GRAM_TOL:
        raise ZeroGram("CKA undefined for a zero Gram matrix")
    return float(np.sum(Kt * Ks)) / (np.sqrt(tt) * np.sqrt(ss))


def d_cka(Kt, Ks, centered=False):
    """CKA distance ``1 - cka(Kt, Ks)``."""
    return 1.0 - cka(Kt, Ks, centered=centered)


def procrustes_squared(Rt, Rs):
    """Squared kernel-form Procrustes distance.

    Mathematically ``tr(Kt) + tr(Ks) - 2 ||Rs^T Rt||_*``. With the thin
    SVD ``Rs^T Rt = U S V^T`` this equals the sum of three squared
    Frobenius norms::

        ||Rs U - Rt V||^2 + ||Rs - Rs U U^T||^2 + ||Rt - Rt V V^T||^2

    which is evaluated instead: every term is non-negative, so there is
    no cancellation near zero distance.
    """
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    f = svd(Rs.T @ Rt)
    RsU = Rs @ f.U
    RtV = Rt @ f.V
    total = (
        np.sum((RsU - RtV) ** 2)
        + np.sum((Rs - RsU @ f.U.T) ** 2)
        + np.sum((Rt - RtV @ f.V.T) ** 2)
    )
    return float(total)


def procrustes_squared_trace_form(Rt, Rs):
    """``tr(Kt) + tr(Ks) - 2 ||Rs^T Rt||_*`` evaluated literally."""
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    return float(np.sum(Rt * Rt) + np.sum(Rs * Rs) - 2.0 * svd(Rs.T @ Rt).S.sum())


def d_procrustes(Rt, Rs):
    """Kernel-form Procrustes distance; dimensions may differ."""
    return float(np.sqrt(max(procrustes_squared(Rt, Rs), 0.0)))


def optimal_rotation(Rt, Rs):
    """Orthogonal ``Q`` minimizing ``||Rs Q - Rt||_F`` (equal dimensions)."""
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    if Rt.shape[1] != Rs.shape[1]:
        raise DimensionMismatch(
            f"direct Procrustes needs equal dimensions, got d_t={Rt.shape[1]} d_s={Rs.shape[1]}"
        )
    f = svd(Rs.T @ Rt)
    return f.U @ f.V.T


def d_procrustes_direct(Rt, Rs):
    """``min_Q ||Rs Q - Rt||_F`` over orthogonal ``Q``."""
    Q = optimal_rotation(Rt, Rs)
    return float(np.linalg.norm(np.asarray(Rs, dtype=float) @ Q - np.asarray(Rt, dtype=float)))


def d_linproj_value(Rt, Rs, P):
    """``||Rs P - Rt||_F`` at a fixed projection ``P`` of shape ``(d_s, d_t)``."""
    Rt, Rs, P = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs"), as_matrix(P, "P")
    _same_n(Rt, Rs)
    if P.shape != (Rs.shape[1], Rt.shape[1]):
        raise DimensionMismatch(
            f"P must have shape {(Rs.shape[1], Rt.shape[1])}, got {P.shape}"
        )
    return float(np.linalg.norm(Rs @ P - Rt))


def linproj_closed_form(Rt, Rs):
    """Least-squares projection ``P* = pinv(Rs) Rt`` and its residual."""
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    P = np.linalg.pinv(Rs) @ Rt
    return P, float(np.linalg.norm(Rs @ P - Rt))


def is_right_orthonormal(P, tol=1e-8):
    """True when ``P P^T`` is the identity to within ``tol`` (max entry)."""
    P = as_matrix(P, "P")
    return bool(np.abs(P @ P.T - np.eye(P.shape[0])).max() <= tol)


def fg_squared_repr(Rt, Rs):
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    tt = np.sum((Rt.T @ Rt) ** 2)
    ss = np.sum((Rs.T @ Rs) ** 2)
    ts = np.sum((Rt.T @ Rs) ** 2)
    return float(max(tt + ss - 2.0 * ts, 0.0))


def d_fg_repr(Rt, Rs):
    """``d_fg(gram(Rt), gram(Rs))`` without forming Gram matrices."""
    return float(np.sqrt(fg_squared_repr(Rt, Rs)))


def cka_repr(Rt, Rs):
    """``cka(gram(Rt), gram(Rs))`` without forming Gram matrices."""
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    _same_n(Rt, Rs)
    tt = np.sum((Rt.T @ Rt) ** 2)
    ss = np.sum((Rs.T @ Rs) ** 2)
    if tt < ZERO_GRAM_TOL or ss < ZERO_GRAM_TOL:
        raise ZeroGram("CKA undefined for a zero Gram matrix")
    return float(np.sum((Rt.T @ Rs) ** 2) / (np.sqrt(tt) * np.sqrt(ss)))


def d_cka_repr(Rt, Rs):
    return 1.0 - cka_repr(Rt, Rs)
