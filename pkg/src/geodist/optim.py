"""
Mini-batch Adam minimization of an alignment loss over the student rows.

Each epoch shuffles the rows, splits them into batches, evaluates the
loss on the batch sub-matrices of teacher and student, and applies one
Adam update to the batch rows of the student (and to the projection
matrix for ``linproj``). Adam moments and step counts are kept per row,
so a row's bias correction depends only on how often it was updated.
"""

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .core import as_matrix
from .errors import DimensionMismatch, NearSingular, PreconditionError
from .gradients import LOSS_KINDS, loss_and_grad
from .metrics import d_cka_repr, d_fg_repr, d_procrustes
from .synth import count_eps_orthogonal

TRACE_HEADER = ("step", "loss_kind", "loss", "cka", "procrustes", "fg", "orth_count")


@dataclass(frozen=True)
class OptimConfig:
    loss_kind: str = "procrustes"
    learning_rate: float = 0.01
    batch_size: int = 256
    epochs: int = 7
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    renormalize_rows: bool = True
    eval_every: int = 10
    eval_epsilon: float = 0.2
    luby_trials: int = 5
    count_orthogonal: bool = True

    def validate(self):
        if self.loss_kind not in LOSS_KINDS:
            raise PreconditionError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if not self.learning_rate > 0:
            raise PreconditionError("learning_rate must be positive")
        if self.batch_size < 2:
            raise PreconditionError("batch_size must be at least 2")
        if self.epochs < 1:
            raise PreconditionError("epochs must be at least 1")
        if self.eval_every < 1:
            raise PreconditionError("eval_every must be at least 1")
        if self.luby_trials < 1:
            raise PreconditionError("luby_trials must be at least 1")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise PreconditionError("Adam betas must lie in [0, 1)")
        return self


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: object = 0  # int, or an integer array broadcastable against m

    @classmethod
    def zeros_like(cls, params):
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(params, grads, state, lr, b1=0.9, b2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(params, state)`` without mutating inputs."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise DimensionMismatch("params, grads and Adam moments must share a shape")
    t = np.asarray(state.t) + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    t_out = int(t) if t.ndim == 0 else t
    return new, AdamState(m, v, t_out)


@dataclass
class TraceEntry:
    step: int
    loss_kind: str
    loss: float
    cka: float
    procrustes: float
    fg: float
    orth_count: Optional[int] = None


@dataclass
class OptimRun:
    config: OptimConfig
    trace: list
    final_student: np.ndarray
    final_projection: Optional[np.ndarray] = None
    initial_orth_count: Optional[int] = None
    skipped: list = field(default_factory=list)

    @property
    def final_count(self):
        for entry in reversed(self.trace):
            if entry.orth_count is not None:
                return entry.orth_count
        return None

    @property
    def final_loss(self):
        return self.trace[-1].loss if self.trace else None

    def trace_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for e in self.trace:
            w.writerow([
                e.step, e.loss_kind, repr(e.loss), repr(e.cka), repr(e.procrustes),
                repr(e.fg), "" if e.orth_count is None else e.orth_count,
            ])
        return buf.getvalue()


def parse_trace_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ValueError("not a trace file: bad header")
    out = []
    for r in rows[1:]:
        out.append(TraceEntry(int(r[0]), r[1], float(r[2]), float(r[3]), float(r[4]),
                              float(r[5]), int(r[6]) if r[6] else None))
    return out


def _metrics(Rt, Rs):
    return d_cka_repr(Rt, Rs), d_procrustes(Rt, Rs), d_fg_repr(Rt, Rs)


def run(Rt, Rs0, cfg, projection0=None):
    """Minimize ``cfg.loss_kind`` from the starting student ``Rs0``.

    ``projection0`` sets the initial ``(d_s, d_t)`` projection for
    ``linproj``; by default it is Gaussian with variance ``1/d_t``.
    Batches where the Procrustes gradient is undefined are skipped and
    listed in ``OptimRun.skipped``.
    """
    cfg.validate()
    Rt = as_matrix(Rt, "Rt")
    Rs = as_matrix(Rs0, "Rs0").copy()
    n, d_s = Rs.shape
    if Rt.shape[0] != n:
        raise DimensionMismatch(f"teacher has {Rt.shape[0]} rows, student {n}")
    d_t = Rt.shape[1]

    shuffle_seq, proj_seq, luby_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    luby_seed = int(luby_seq.generate_state(1, dtype=np.uint64)[0])

    P = None
    if cfg.loss_kind == "linproj":
        if projection0 is None:
            P = np.random.default_rng(proj_seq).standard_normal((d_s, d_t)) / math.sqrt(d_t)
        else:
            P = as_matrix(projection0, "projection0").copy()
            if P.shape != (d_s, d_t):
                raise DimensionMismatch(f"projection0 must have shape {(d_s, d_t)}")
        p_state = AdamState.zeros_like(P)

    m = np.zeros_like(Rs)
    v = np.zeros_like(Rs)
    row_t = np.zeros(n, dtype=np.int64)
    hyper = dict(lr=cfg.learning_rate, b1=cfg.adam_beta1, b2=cfg.adam_beta2, eps=cfg.adam_eps)

    def orth_count(tag):
        if not cfg.count_orthogonal:
            return None
        return count_eps_orthogonal(Rs, cfg.eval_epsilon, luby_seed + tag, cfg.luby_trials)

    initial = orth_count(0)
    trace, skipped = [], []
    step = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        batches = [order[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        for b, idx in enumerate(batches):
            step += 1
            try:
                g = loss_and_grad(cfg.loss_kind, Rt[idx], Rs[idx], P)
            except NearSingular as exc:
                skipped.append((step, str(exc)))
                g = None
            if g is not None:
                sub = AdamState(m[idx], v[idx], row_t[idx][:, None])
                new_rows, sub = adam_step(Rs[idx], g.d_student, sub, **hyper)
                if cfg.renormalize_rows:
                    new_rows /= np.linalg.norm(new_rows, axis=1, keepdims=True)
                Rs[idx], m[idx], v[idx] = new_rows, sub.m, sub.v
                row_t[idx] = sub.t[:, 0]
                if P is not None:
                    P, p_state = adam_step(P, g.d_projection, p_state, **hyper)
            last_of_epoch = b == len(batches) - 1
            if g is not None and (step % cfg.eval_every == 0 or last_of_epoch):
                c, pr, f = _metrics(Rt, Rs)
                trace.append(TraceEntry(step, cfg.loss_kind, float(g.loss_value), c, pr, f,
                                        orth_count(epoch + 1) if last_of_epoch else None))
    return OptimRun(cfg, trace, Rs, P, initial, skipped)


def _run_job(args):
    Rt, Rs0, cfg = args
    return run(Rt, Rs0, cfg)


def sweep(Rt, Rs0, losses, seeds, cfg_base, jobs=1):
    """One run per ``(loss, seed)``, ordered by loss then seed."""
    if not seeds:
        raise PreconditionError("seeds must be non-empty")
    if not losses:
        raise PreconditionError("losses must be non-empty")
    cfgs = [replace(cfg_base, loss_kind=loss, seed=int(seed)) for loss in losses for seed in seeds]
    for c in cfgs:
        c.validate()
    if jobs <= 1 or len(cfgs) == 1:
        return [run(Rt, Rs0, c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, [(Rt, Rs0, c) for c in cfgs]))


def summarize(runs):
    """Final orthogonal-count statistics per loss (sample standard deviation)."""
    by_loss = {}
    for r in runs:
        by_loss.setdefault(r.config.loss_kind, []).append(r)
    out = {}
    for loss, group in by_loss.items():
        counts = [r.final_count for r in group if r.final_count is not None]
        losses = [r.final_loss for r in group]
        out[loss] = {
            "runs": len(group),
            "counts": counts,
            "mean": statistics.fmean(counts) if counts else float("nan"),
            "stdev": statistics.stdev(counts) if len(counts) > 1 else 0.0,
            "median": statistics.median(counts) if counts else float("nan"),
            "final_loss_median": statistics.median(losses),
        }
    return out


def config_dict(cfg):
    return asdict(cfg)
