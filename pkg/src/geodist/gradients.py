"""
Analytic gradients of the alignment losses with respect to the student.

Losses used for optimization:

========== ==========================================
fg         ``||Kt - Ks||_F^2``
linproj    ``||Rs P - Rt||_F^2`` (gradients for Rs and P)
cka        ``1 - CKA(Kt, Ks)``
procrustes ``tr(Kt) + tr(Ks) - 2 ||Rs^T Rt||_*``
========== ==========================================

``finite_diff`` is the independent central-difference oracle the
analytic gradients are checked against.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_matrix, svd
from .errors import DimensionMismatch, NearSingular, PreconditionError, ZeroGram
from .metrics import ZERO_GRAM_TOL, procrustes_squared

LOSS_KINDS = ("fg", "linproj", "cka", "procrustes")

SINGULAR_TOL = 1e-10
DEFAULT_FD_STEP = 1e-5


@dataclass
class LossGradient:
    loss_value: float
    d_student: np.ndarray
    d_projection: Optional[np.ndarray] = None


def _pair(Rt, Rs):
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    if Rt.shape[0] != Rs.shape[0]:
        raise DimensionMismatch(f"teacher has {Rt.shape[0]} rows, student {Rs.shape[0]}")
    return Rt, Rs


def grad_fg(Rt, Rs):
    Rt, Rs = _pair(Rt, Rs)
    diff = Rt @ Rt.T - Rs @ Rs.T
    return LossGradient(float(np.sum(diff * diff)), -4.0 * diff @ Rs)


def grad_procrustes(Rt, Rs):
    """Gradient of the squared kernel-form Procrustes distance.

    With ``Rs^T Rt = U S V^T`` the gradient is ``2 Rs - 2 Rt V U^T``.
    Zero singular values are harmless when the teacher's rows lie in
    the span of the retained right singular vectors (e.g. a batch with
    fewer rows than ``d_s``); otherwise the nuclear norm has no unique
    gradient there.

    Raises
    ------
    NearSingular
        If the nuclear norm term is not differentiable at ``Rs``.
    """
    Rt, Rs = _pair(Rt, Rs)
    f = svd(Rs.T @ Rt)
    tol = SINGULAR_TOL * max(1.0, float(f.S[0]) if f.S.size else 0.0)
    r = int(np.count_nonzero(f.S > tol))
    U, V = f.U[:, :r], f.V[:, :r]
    if r < Rs.shape[1]:
        outside = np.linalg.norm(Rt - (Rt @ V) @ V.T)
        if outside > 1e-8 * max(1.0, float(np.linalg.norm(Rt))):
            smallest = float(f.S[-1]) if f.S.size else 0.0
            raise NearSingular(
                f"Rs^T Rt has rank {r} < d_s={Rs.shape[1]} "
                f"(smallest singular value {smallest:.3e}); gradient is not unique"
            )
    grad = 2.0 * Rs - 2.0 * (Rt @ V) @ U.T
    return LossGradient(procrustes_squared(Rt, Rs), grad)


def grad_cka(Rt, Rs):
    """Gradient of ``1 - CKA`` for uncentered linear CKA.

    With ``a = tr(Kt Ks)``, ``b = ||Kt||_F``, ``c = ||Ks||_F``::

        d(a/(b c))/dRs = 2 Kt Rs / (b c) - 2 a Ks Rs / (b c^3)
    """
    Rt, Rs = _pair(Rt, Rs)
    Kt = Rt @ Rt.T
    Ks = Rs @ Rs.T
    b2 = float(np.sum(Kt * Kt))
    c2 = float(np.sum(Ks * Ks))
    if b2 < ZERO_GRAM_TOL or c2 < ZERO_GRAM_TOL:
        raise ZeroGram("CKA undefined for a zero Gram matrix")
    a = float(np.sum(Kt * Ks))
    b, c = np.sqrt(b2), np.sqrt(c2)
    grad_sim = 2.0 * (Kt @ Rs) / (b * c) - 2.0 * a * (Ks @ Rs) / (b * c * c2)
    return LossGradient(1.0 - a / (b * c), -grad_sim)


def grad_linproj(Rt, Rs, P):
    Rt, Rs = _pair(Rt, Rs)
    P = as_matrix(P, "P")
    if P.shape != (Rs.shape[1], Rt.shape[1]):
        raise DimensionMismatch(f"P must have shape {(Rs.shape[1], Rt.shape[1])}, got {P.shape}")
    resid = Rs @ P - Rt
    return LossGradient(
        float(np.sum(resid * resid)),
        2.0 * resid @ P.T,
        d_projection=2.0 * Rs.T @ resid,
    )


def loss_and_grad(kind, Rt, Rs, P=None):
    """Dispatch on loss name; ``P`` is required for ``linproj``."""
    if kind == "fg":
        return grad_fg(Rt, Rs)
    if kind == "procrustes":
        return grad_procrustes(Rt, Rs)
    if kind == "cka":
        return grad_cka(Rt, Rs)
    if kind == "linproj":
        if P is None:
            raise PreconditionError("linproj loss needs a projection matrix")
        return grad_linproj(Rt, Rs, P)
    raise PreconditionError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def loss_value(kind, Rt, Rs, P=None):
    """Loss only, computed directly from its definition (no gradient path)."""
    Rt, Rs = _pair(Rt, Rs)
    if kind == "fg":
        return float(np.sum((Rt @ Rt.T - Rs @ Rs.T) ** 2))
    if kind == "procrustes":
        return float(np.sum(Rt * Rt) + np.sum(Rs * Rs)
                     - 2.0 * np.linalg.svd(Rs.T @ Rt, compute_uv=False).sum())
    if kind == "cka":
        Kt, Ks = Rt @ Rt.T, Rs @ Rs.T
        return 1.0 - float(np.sum(Kt * Ks) / np.sqrt(np.sum(Kt * Kt) * np.sum(Ks * Ks)))
    if kind == "linproj":
        return float(np.sum((Rs @ P - Rt) ** 2))
    raise PreconditionError(f"unknown loss kind {kind!r}")


def finite_diff(loss, X, step=DEFAULT_FD_STEP):
    """Central-difference gradient of the scalar function ``loss`` at ``X``.

    Each entry is ``(loss(X + h E_ij) - loss(X - h E_ij)) / (2 h)``.
    """
    if not (1e-7 <= step <= 1e-3):
        raise PreconditionError(f"finite-difference step {step} outside [1e-7, 1e-3]")
    X = np.array(X, dtype=np.float64)
    grad = np.empty_like(X)
    flat = X.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        fplus = loss(X)
        flat[k] = orig - step
        fminus = loss(X)
        flat[k] = orig
        gflat[k] = (fplus - fminus) / (2.0 * step)
    return grad


def relative_error(analytic, reference):
    """``||analytic - reference||_F / max(||reference||_F, 1e-12)``."""
    return float(np.linalg.norm(analytic - reference) / max(np.linalg.norm(reference), 1e-12))


def check_gradient(kind, Rt, Rs, P=None, step=DEFAULT_FD_STEP):
    """Relative errors of the analytic gradients against ``finite_diff``.

    Returns a dict with ``d_student`` (and ``d_projection`` for linproj).
    """
    g = loss_and_grad(kind, Rt, Rs, P)
    fd = finite_diff(lambda X: loss_value(kind, Rt, X, P), Rs, step)
    out = {"d_student": relative_error(g.d_student, fd)}
    if kind == "linproj":
        fdp = finite_diff(lambda X: loss_value(kind, Rt, Rs, X), P, step)
        out["d_projection"] = relative_error(g.d_projection, fdp)
    return out
