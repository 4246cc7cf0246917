"""
Acceptance criteria, one test per criterion. Each test records a
``PASS``/``FAIL`` line that is repeated in the terminal summary.

Run only this module with ``pytest tests/test_acceptance.py -v``; add
``--paper-scale`` to include the multi-hour full-size synthetic run.
"""

import os
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest

from geodist.cli import build_synth_data, load_config, run_synth, validate_synth_config
from geodist.core import normalize_rows
from geodist.gradients import LOSS_KINDS, check_gradient
from geodist.metrics import d_procrustes, d_procrustes_direct, is_right_orthonormal
from geodist.optim import OptimConfig, summarize, sweep
from geodist.synth import (
    TeacherConfig,
    build_teacher,
    graph_from_edges,
    is_independent,
    is_maximal,
    luby_mis,
    sample_pair_violations,
)
from geodist.theorems import spectral_condition, theorem1_suite, theorem2_suite, theorem3_suite

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

# Median final orthogonal counts of the desk run, recorded on its first
# successful execution; later runs must stay within 10%.
DESK_PINNED_MEDIANS = {"procrustes": 867, "fg": 842, "cka": 812, "linproj": 489}


def test_gradients_match_finite_differences(criterion):
    t0 = time.perf_counter()
    worst = {}
    for kind in LOSS_KINDS:
        errs = []
        for seed in range(50):
            rng = np.random.default_rng(10_000 + seed)
            n, d_t, d_s = int(rng.integers(2, 33)), int(rng.integers(2, 17)), int(rng.integers(2, 9))
            Rt = normalize_rows(rng.standard_normal((n, d_t)))
            Rs = normalize_rows(rng.standard_normal((n, d_s)))
            P = rng.standard_normal((d_s, d_t)) / np.sqrt(d_t)
            errs.append(max(check_gradient(kind, Rt, Rs, P).values()))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = all(e <= 1e-4 for e in worst.values()) and elapsed < 30
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f" time={elapsed:.1f}s"
    criterion("criterion-1 gradient-oracle", ok, detail)
    assert ok, detail


def test_blended_teacher_bounds(criterion):
    t0 = time.perf_counter()
    verdicts = theorem1_suite(eps_values=(0.1, 0.25, 0.5, 0.9), seeds=range(10), n=64)
    elapsed = time.perf_counter() - t0
    cka_fail = [v for v in verdicts if not v.measured["cka_bound_ok"]]
    fg_fail = [v for v in verdicts if not v.measured["fg_claim_ok"]]
    eq7_fail = [v for v in verdicts if not v.measured["eq7_ok"]]
    ok = not (cka_fail or fg_fail or eq7_fail) and elapsed < 10
    worst_cka = max(v.measured["d_cka"] - v.params["eps"] for v in verdicts)
    ratio = max(v.measured["d_fg"] / v.measured["fg_claimed"] for v in verdicts)
    detail = (f"instances={len(verdicts)} cka_bound_failures={len(cka_fail)} "
              f"fg_claim_failures={len(fg_fail)} norm_bound_failures={len(eq7_fail)} "
              f"max(d_cka-eps)={worst_cka:.3g} max(d_fg/claimed)={ratio:.3g} time={elapsed:.2f}s")
    criterion("criterion-2 blended-teacher", ok, detail)
    assert ok, detail


def test_procrustes_zero_iff_gram_equal(criterion):
    t0 = time.perf_counter()
    verdicts = theorem3_suite(seeds=range(100))
    elapsed = time.perf_counter() - t0
    equal = [v for v in verdicts if v.params["case"] == "equal_gram"]
    rotated = [v for v in verdicts if v.params["case"] == "rotation"]
    ok = (len(equal) == len(rotated) == 100
          and all(v.measured["procrustes"] < 1e-7 for v in equal)
          and all(v.measured["fg"] < 1e-6 for v in rotated)
          and all(v.passed for v in verdicts) and elapsed < 30)
    detail = (f"max_procrustes_equal_gram={max(v.measured['procrustes'] for v in equal):.2e} "
              f"max_fg_rotated={max(v.measured['fg'] for v in rotated):.2e} time={elapsed:.2f}s")
    criterion("criterion-3 procrustes-gram-equivalence", ok, detail)
    assert ok, detail


def test_projection_loss_zero_implies_gram_equal(criterion):
    t0 = time.perf_counter()
    verdicts = theorem2_suite(seeds=range(20))
    elapsed = time.perf_counter() - t0
    orth = [v for v in verdicts if v.params["case"] == "right_orthonormal"]
    eig = [v for v in verdicts if v.params["case"] == "unit_eigenspace"]
    ok = (len(orth) == len(eig) == 20
          and all(v.measured["d_fg"] < 1e-6 for v in orth)
          and all(v.measured["spectral"] and not v.measured["right_orthonormal"] for v in eig)
          and all(v.passed for v in verdicts) and elapsed < 10)
    detail = (f"max_fg_right_orthonormal={max(v.measured['d_fg'] for v in orth):.2e} "
              f"counterexamples_ok={sum(v.passed for v in eig)}/20 time={elapsed:.2f}s")
    criterion("criterion-4 projection-loss", ok, detail)
    assert ok, detail


def test_direct_and_kernel_procrustes_agree(criterion):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(20_000 + seed)
        n, d = int(rng.integers(2, 40)), int(rng.integers(1, 12))
        Rt = normalize_rows(rng.standard_normal((n, d)))
        Rs = normalize_rows(rng.standard_normal((n, d)))
        worst = max(worst, abs(d_procrustes_direct(Rt, Rs) - d_procrustes(Rt, Rs)))
    ok = worst <= 1e-8
    criterion("criterion-5 procrustes-forms", ok, f"max_abs_diff={worst:.2e}")
    assert ok


def _max_independent_size(G):
    """Exact maximum independent set size by include/exclude branching."""
    nbr = [set(int(u) for u in G.neighbors(v)) for v in range(G.n)]

    def best(avail):
        if not avail:
            return 0
        v = min(avail)
        skip = best(avail - {v})
        take = 1 + best(avail - {v} - nbr[v])
        return max(skip, take)

    return best(frozenset(range(G.n)))


def test_luby_against_brute_force(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(30_000)
    bad = 0
    densities = (0.0, 0.15, 0.3, 0.5, 0.7, 0.9, 1.0)
    for k in range(100):
        n = int(rng.integers(1, 13))
        density = densities[k % len(densities)]
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < density]
        G = graph_from_edges(n, edges)
        rep = luby_mis(G, seed=k)
        if not (is_independent(G, rep.independent_set) and is_maximal(G, rep.independent_set)
                and rep.count <= _max_independent_size(G)):
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    criterion("criterion-6 luby", ok, f"graphs=100 failures={bad} time={elapsed:.2f}s")
    assert ok


def test_full_size_teacher(criterion):
    t0 = time.perf_counter()
    cfg = TeacherConfig(d_t=1000, epsilon=0.2, seed=0)
    R = build_teacher(cfg)
    violations = sample_pair_violations(R, 0.2, 100_000, seed=1)
    elapsed = time.perf_counter() - t0
    ok = cfg.n == 22026 and R.shape == (22026, 1000) and violations == 0 and elapsed < 30
    criterion("criterion-7 teacher", ok, f"n={cfg.n} violations={violations} time={elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def desk_runs():
    cfg = validate_synth_config(load_config(os.path.join(CONFIG_DIR, "desk.yaml")))
    t0 = time.perf_counter()
    Rt, Rs0 = build_synth_data(cfg)
    base = replace(OptimConfig(), **cfg["optimizer"])
    runs = sweep(Rt, Rs0, cfg["losses"], cfg["seeds"], base)
    return cfg, runs, summarize(runs), time.perf_counter() - t0


def test_desk_orthogonality_ordering(desk_runs, criterion):
    cfg, _, summary, elapsed = desk_runs
    assert (cfg["d_t"], cfg["d_s"], cfg["n_override"], cfg["epsilon"]) == (200, 100, 1000, 0.35)
    assert len(cfg["seeds"]) == 5
    med = {k: s["median"] for k, s in summary.items()}
    ordering = all(med[top] >= med[other] for top in ("procrustes", "fg") for other in ("cka", "linproj"))
    pinned = all(abs(med[k] - v) <= 0.1 * v for k, v in DESK_PINNED_MEDIANS.items())
    ok = ordering and pinned and elapsed < 900
    detail = " ".join(f"{k}={med[k]}" for k in ("procrustes", "fg", "cka", "linproj"))
    criterion("criterion-8 desk-ordering", ok, f"{detail} time={elapsed:.0f}s")
    assert ok, detail


def test_desk_cka_loss_near_zero(desk_runs, criterion):
    _, runs, summary, _ = desk_runs
    final_losses = [r.final_loss for r in runs if r.config.loss_kind == "cka"]
    cka_loss = statistics.median(final_losses)
    below = summary["cka"]["median"] < summary["procrustes"]["median"]
    ok = cka_loss < 0.05 and below
    full = statistics.median(r.trace[-1].cka for r in runs if r.config.loss_kind == "cka")
    detail = (f"cka_final_loss_median={cka_loss:.4f} (max {max(final_losses):.4f}) "
              f"full_matrix_cka_distance={full:.4f} "
              f"cka_count={summary['cka']['median']} procrustes_count={summary['procrustes']['median']}")
    criterion("criterion-8 desk-cka-convergence", ok, detail)
    assert ok, detail


@pytest.mark.paper_scale
@pytest.mark.slow
def test_full_size_run_completes(tmp_path, criterion):
    cfg = validate_synth_config(load_config(os.path.join(CONFIG_DIR, "full.yaml")))
    runs, summary = run_synth(cfg, str(tmp_path / "full"), jobs=os.cpu_count() or 1)
    finite = all(np.isfinite(r.final_student).all() for r in runs)
    ok = len(runs) == 20 and finite and all(len(r.trace) > 0 for r in runs)
    detail = " ".join(f"{k}={s['median']}" for k, s in summary.items())
    criterion("criterion-9 full-size-run", ok, detail)
    assert ok
