"""
Numerical checks of the structural claims relating the four distances.

Each ``*_verify`` function returns a :class:`Verdict` whose ``line()``
is a one-line machine-readable summary::

    PASS theorem3 n=32 d_t=12 d_s=6 seed=4 procrustes=3.1e-15 fg=2.2e-15

The ``*_suite`` helpers build random instances and collect verdicts; the
CLI ``verify-theorems`` subcommand is a thin wrapper around them.

Claim checked by each verifier:

* ``theorem1`` -- mixing the teacher Gram matrix with the all-ones
  matrix, ``(1 - eps) Kt + eps J``, moves CKA distance by at most
  ``eps`` while the Gram distance becomes ``sqrt(eps) ||Kt - J||_F``.
  The exact Gram distance of that construction is ``eps ||Kt - J||_F``;
  both values are reported, and the verdict judges the stated claim.
* ``theorem2`` -- zero projection loss implies zero Gram distance when
  ``P`` has orthonormal rows, or more generally when the student's rows
  lie in the unit eigenspace of ``P P^T``.
* ``theorem3`` -- Procrustes distance vanishes exactly when the Gram
  distance does.
* ``psd_lemmas`` -- conic combinations of PSD matrices are PSD and
  ``tr(A^T B) >= 0`` for PSD ``A``, ``B``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    all_ones,
    as_gram,
    as_matrix,
    factor_gram,
    gram,
    min_eigenvalue,
    normalize_rows,
    numerical_rank,
)
from .errors import PreconditionError, PremiseViolated
from .metrics import d_cka, d_fg, d_procrustes, is_right_orthonormal

CKA_SLACK = 1e-9
FG_RTOL = 1e-8
PREMISE_TOL = 1e-9
FG_ZERO = 1e-6
PROCRUSTES_ZERO = 1e-7


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


@dataclass
class Verdict:
    theorem: str
    passed: bool
    params: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)

    def line(self):
        parts = ["PASS" if self.passed else "FAIL", self.theorem]
        parts += [f"{k}={_fmt(v)}" for k, v in self.params.items()]
        parts += [f"{k}={_fmt(v)}" for k, v in self.measured.items()]
        return " ".join(parts)


# -- instance builders ------------------------------------------------------


def low_rank_teacher(n, d_t, rank, rng):
    """Unit-norm ``n x d_t`` rows spanning a random ``rank``-dimensional subspace."""
    return normalize_rows(rng.standard_normal((n, rank)) @ rng.standard_normal((rank, d_t)))


def random_orthogonal(d, rng):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def random_right_orthonormal(d_s, d_t, rng):
    """``(d_s, d_t)`` matrix with ``P P^T = I``."""
    if d_s > d_t:
        raise PreconditionError("right-orthonormal P needs d_s <= d_t")
    Q, R = np.linalg.qr(rng.standard_normal((d_t, d_s)))
    return (Q * np.sign(np.diag(R))).T


def unit_eigenspace_instance(n, d_s, d_t, rng, k=None, stretch=2.0):
    """Student and non-orthonormal ``P`` whose ``P P^T`` fixes the student's rows.

    ``P = U diag(1, ..., 1, stretch, ...) V^T`` with ``k`` unit singular
    values; the student rows are spanned by the first ``k`` columns of
    ``U``. Returns ``(Rs, P)``.
    """
    k = max(1, d_s - 1) if k is None else k
    if not (1 <= k < d_s <= d_t):
        raise PreconditionError("need 1 <= k < d_s <= d_t")
    U = random_orthogonal(d_s, rng)
    V = random_right_orthonormal(d_s, d_t, rng).T
    sig = np.ones(d_s)
    sig[k:] = stretch
    P = (U * sig) @ V.T
    Rs = normalize_rows(rng.standard_normal((n, k)) @ U[:, :k].T)
    return Rs, P


# -- theorem 1 --------------------------------------------------------------


@dataclass
class Theorem1Instance:
    Kt: np.ndarray
    Kt_tilde: np.ndarray
    epsilon: float
    fg_predicted: float
    fg_exact: float
    cka_bound: float


def theorem1_construct(Rt, epsilon):
    """Blend the teacher Gram matrix with the all-ones matrix.

    ``fg_predicted`` is ``sqrt(eps) ||Kt - J||_F`` as claimed;
    ``fg_exact`` is ``eps ||Kt - J||_F``, the actual Gram distance.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise PreconditionError(f"epsilon must lie in [0, 1], got {epsilon}")
    Rt = as_matrix(Rt, "Rt")
    Kt = gram(Rt)
    J = all_ones(Kt.shape[0])
    Kt_tilde = (1.0 - epsilon) * Kt + epsilon * J
    gap = float(np.linalg.norm(Kt - J))
    return Theorem1Instance(Kt, Kt_tilde, float(epsilon),
                            math.sqrt(epsilon) * gap, epsilon * gap, float(epsilon))


def theorem1_verify(inst, Ks, params=None):
    """Check the blended teacher against a student with ``Ks == Kt``.

    Raises
    ------
    PremiseViolated
        If ``d_fg(Kt, Ks) > 1e-9``.
    """
    Ks = as_gram(Ks, "Ks")
    premise = d_fg(inst.Kt, Ks)
    if premise > PREMISE_TOL:
        raise PremiseViolated(f"Ks differs from Kt (d_fg={premise:.3e})")
    eps, n = inst.epsilon, inst.Kt.shape[0]
    cka_dist = d_cka(inst.Kt_tilde, Ks)
    fg = d_fg(inst.Kt_tilde, Ks)
    cka_ok = cka_dist <= eps + CKA_SLACK
    fg_ok = abs(fg - inst.fg_predicted) <= FG_RTOL * max(1.0, inst.fg_predicted)
    fg_exact_ok = abs(fg - inst.fg_exact) <= FG_RTOL * max(1.0, inst.fg_exact)
    norm_kt = float(np.linalg.norm(inst.Kt))
    norm_tilde = float(np.linalg.norm(inst.Kt_tilde))
    eq7_ok = norm_tilde >= (1.0 - eps) * norm_kt - eps * n - 1e-12 * max(1.0, norm_kt)
    scale = max(1.0, float(np.abs(inst.Kt_tilde).max()))
    psd_ok = min_eigenvalue(inst.Kt_tilde) >= -1e-8 * scale
    diag_ok = bool(np.all(np.abs(np.diag(inst.Kt_tilde) - 1.0) <= 1e-9))
    rank_ok = numerical_rank(inst.Kt_tilde) <= numerical_rank(inst.Kt) + 1
    measured = {
        "d_cka": cka_dist,
        "d_fg": fg,
        "fg_claimed": inst.fg_predicted,
        "fg_exact": inst.fg_exact,
        "cka_bound_ok": cka_ok,
        "fg_claim_ok": fg_ok,
        "fg_exact_ok": fg_exact_ok,
        "eq7_ok": eq7_ok,
        "psd_ok": psd_ok,
    }
    passed = cka_ok and fg_ok and eq7_ok and psd_ok and diag_ok and rank_ok
    p = {"eps": eps, "n": n}
    p.update(params or {})
    return Verdict("theorem1", bool(passed), p, measured)


def realize_blended_teacher(inst, d_t):
    """Vectors in ``d_t`` dimensions whose Gram matrix is ``Kt_tilde``."""
    return factor_gram(inst.Kt_tilde, d_t)


# -- theorem 2 --------------------------------------------------------------


def spectral_condition(Rs, P, tol=1e-8):
    """``||Rs (I - P P^T)||_F < tol``."""
    Rs, P = as_matrix(Rs, "Rs"), as_matrix(P, "P")
    if Rs.shape[1] != P.shape[0]:
        raise PreconditionError(f"Rs has {Rs.shape[1]} columns but P has {P.shape[0]} rows")
    return bool(np.linalg.norm(Rs - Rs @ P @ P.T) < tol)


def unit_eigenspace_contains(Rs, P, tol=1e-8):
    """Rows of ``Rs`` lie in the span of left singular vectors of ``P`` with singular value 1."""
    Rs, P = as_matrix(Rs, "Rs"), as_matrix(P, "P")
    U, S, _ = np.linalg.svd(P, full_matrices=True)
    sig = np.zeros(U.shape[1])
    sig[: S.size] = S
    basis = U[:, np.abs(sig - 1.0) <= tol]
    resid = Rs - (Rs @ basis) @ basis.T
    return bool(np.linalg.norm(resid) < tol)


def theorem2_verify(Rt, Rs, P, params=None):
    """Relate zero projection loss to zero Gram distance for a given ``P``.

    The verdict passes when right-orthonormal ``P`` or the spectral
    condition gives ``d_fg < 1e-6``, and when a full-column-rank
    student violating the spectral condition gives ``d_fg >= 1e-6``.

    Raises
    ------
    PremiseViolated
        If ``||Rs P - Rt||_F >= 1e-9``.
    """
    Rt, Rs, P = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs"), as_matrix(P, "P")
    resid = float(np.linalg.norm(Rs @ P - Rt))
    if resid >= PREMISE_TOL:
        raise PremiseViolated(f"||Rs P - Rt||_F = {resid:.3e} is not zero")
    right_orth = is_right_orthonormal(P)
    spectral = spectral_condition(Rs, P)
    fg = d_fg(gram(Rt), gram(Rs))
    full_rank = np.linalg.matrix_rank(Rs) == Rs.shape[1]
    fg_zero = fg < FG_ZERO
    passed = ((not right_orth) or fg_zero) and ((not spectral) or fg_zero)
    if full_rank and not spectral:
        passed = passed and not fg_zero
    measured = {"right_orthonormal": right_orth, "spectral": spectral,
                "full_rank": bool(full_rank), "d_fg": fg, "residual": resid}
    return Verdict("theorem2", bool(passed), dict(params or {}), measured)


# -- theorem 3 --------------------------------------------------------------


def theorem3_verify(Rt, Rs, params=None, expect_zero=False):
    """Procrustes distance is zero exactly when the Gram distance is.

    With ``expect_zero`` the pair was constructed to satisfy one side
    (equal Gram matrices or an orthogonal transform), so both distances
    must also be zero for the verdict to pass.
    """
    Rt, Rs = as_matrix(Rt, "Rt"), as_matrix(Rs, "Rs")
    dp = d_procrustes(Rt, Rs)
    fg = d_fg(gram(Rt), gram(Rs))
    p_zero, fg_zero = dp < PROCRUSTES_ZERO, fg < FG_ZERO
    passed = p_zero == fg_zero
    if expect_zero:
        passed = passed and p_zero and fg_zero
    return Verdict("theorem3", bool(passed), dict(params or {}),
                   {"procrustes": dp, "fg": fg})


# -- lemmas -----------------------------------------------------------------


def psd_lemmas_check(A, B, alpha, beta):
    """Conic combination stays PSD; PSD inner product is non-negative."""
    if not (alpha > 0 and beta > 0):
        raise PreconditionError("alpha and beta must be positive")
    A = as_gram(A, "A", check_psd=True)
    B = as_gram(B, "B", check_psd=True)
    if A.shape != B.shape:
        raise PreconditionError("A and B must have the same shape")
    lam = min_eigenvalue(alpha * A + beta * B)
    inner = float(np.trace(A.T @ B))
    passed = lam >= -1e-8 and inner >= -1e-10
    return Verdict("psd_lemmas", bool(passed), {"alpha": float(alpha), "beta": float(beta)},
                   {"min_eig": lam, "inner": inner})


# -- suites -----------------------------------------------------------------


def theorem1_suite(eps_values=(0.1, 0.25, 0.5, 0.9), seeds=range(10), n=64, d_t=32, d_s=8):
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        Rt = low_rank_teacher(n, d_t, d_s, rng)
        Rs = factor_gram(gram(Rt), d_s)
        for eps in eps_values:
            inst = theorem1_construct(Rt, eps)
            out.append(theorem1_verify(inst, gram(Rs), {"seed": seed, "d_t": d_t, "d_s": d_s}))
    return out


def theorem2_suite(seeds=range(20), n=32, d_t=12, d_s=6):
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        P = random_right_orthonormal(d_s, d_t, rng)
        Rs = normalize_rows(rng.standard_normal((n, d_s)))
        out.append(theorem2_verify(Rs @ P, Rs, P, {"case": "right_orthonormal", "seed": seed}))
        Rs2, P2 = unit_eigenspace_instance(n, d_s, d_t, rng)
        v = theorem2_verify(Rs2 @ P2, Rs2, P2, {"case": "unit_eigenspace", "seed": seed})
        v.measured["unit_eigenspace"] = unit_eigenspace_contains(Rs2, P2)
        v.passed = v.passed and v.measured["unit_eigenspace"] and not v.measured["right_orthonormal"]
        out.append(v)
    return out


def theorem3_suite(seeds=range(100), n=32, d_t=12, d_s=6, corrupt=False):
    """Per seed: an equal-Gram pair, an orthogonally rotated pair, an unrelated pair.

    ``corrupt`` perturbs the first equal-Gram student (negative control).
    """
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        Rt = low_rank_teacher(n, d_t, d_s, rng)
        Rs = factor_gram(gram(Rt), d_s)
        if corrupt and not out:
            Rs = normalize_rows(Rs + 1e-3 * rng.standard_normal(Rs.shape))
        out.append(theorem3_verify(Rt, Rs, {"case": "equal_gram", "seed": seed}, expect_zero=True))
        Q = random_orthogonal(d_t, rng)
        out.append(theorem3_verify(Rt, Rt @ Q, {"case": "rotation", "seed": seed}, expect_zero=True))
        other = normalize_rows(rng.standard_normal((n, d_s)))
        out.append(theorem3_verify(Rt, other, {"case": "unrelated", "seed": seed}))
    return out


def psd_suite(seeds=range(100), n=8):
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        G1, G2 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        alpha, beta = rng.uniform(0.1, 3.0, size=2)
        v = psd_lemmas_check(G1 @ G1.T, G2 @ G2.T, alpha, beta)
        v.params["seed"] = seed
        out.append(v)
    return out


def run_suites(which="all", eps_values=(0.1, 0.25, 0.5, 0.9), seeds=10, n=64, corrupt=False):
    """Verdicts for the selected theorem(s); ``which`` in {1, 2, 3, lemmas, all}."""
    which = str(which)
    out = []
    if which in ("1", "all"):
        out += theorem1_suite(eps_values, range(seeds), n=n)
    if which in ("2", "all"):
        out += theorem2_suite(range(seeds))
    if which in ("3", "all"):
        out += theorem3_suite(range(seeds), corrupt=corrupt)
    if which in ("lemmas", "all"):
        out += psd_suite(range(seeds))
    if which not in ("1", "2", "3", "lemmas", "all"):
        raise PreconditionError(f"unknown theorem selection {which!r}")
    return out

