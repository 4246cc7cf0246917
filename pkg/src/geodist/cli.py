"""Command-line entry point: ``geodist {metric,synth,verify-theorems,grad-check}``.

Exit codes: 0 success, 1 verification failure, 2 bad input, 3 shape error.
"""

import argparse
import datetime
import json
import logging
import os
import sys
from dataclasses import asdict, fields, replace

import numpy as np
import yaml

from . import metrics
from .core import center_and_normalize, gram, normalize_rows
from .errors import DimensionMismatch, GeodistError, NearSingular, PreconditionError
from .gradients import LOSS_KINDS, check_gradient
from .matrix_io import MatrixFormatError, atomic_write_text, read_matrix
from .optim import OptimConfig, summarize, sweep
from .synth import TeacherConfig, build_teacher, init_student_projected, init_student_random
from .theorems import run_suites

log = logging.getLogger("geodist")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SHAPE = 0, 1, 2, 3
GRAD_TOL = 1e-4

METRICS = ("fg", "cka", "cka-dist", "procrustes", "procrustes-direct", "linproj")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


# -- metric -----------------------------------------------------------------


def compute_metric(name, Rt, Rs, centered=False):
    if Rt.shape[0] != Rs.shape[0]:
        raise DimensionMismatch(f"teacher has {Rt.shape[0]} rows, student {Rs.shape[0]}")
    if name == "fg":
        return metrics.d_fg(gram(Rt), gram(Rs))
    if name in ("cka", "cka-dist"):
        value = metrics.cka(gram(Rt), gram(Rs), centered=centered)
        return value if name == "cka" else 1.0 - value
    if name == "procrustes":
        return metrics.d_procrustes(Rt, Rs)
    if name == "procrustes-direct":
        return metrics.d_procrustes_direct(Rt, Rs)
    if name == "linproj":
        return metrics.linproj_closed_form(Rt, Rs)[1]
    raise PreconditionError(f"unknown metric {name!r}")


def cmd_metric(args):
    try:
        Rt, Rs = read_matrix(args.teacher), read_matrix(args.student)
    except (OSError, MatrixFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.center:
            Rt, Rs = center_and_normalize(Rt), center_and_normalize(Rs)
        elif args.normalize:
            Rt, Rs = normalize_rows(Rt), normalize_rows(Rs)
        value = compute_metric(args.metric, Rt, Rs, centered=args.centered_cka)
    except DimensionMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except GeodistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"{args.metric} {value:.12f}")
    return EXIT_OK


# -- synth ------------------------------------------------------------------

_TOP_KEYS = {"d_t", "d_s", "epsilon", "n_override", "student_init", "losses", "seeds",
             "data_seed", "optimizer"}
_OPT_KEYS = {f.name for f in fields(OptimConfig)} - {"loss_kind", "seed"}


def _need_int(cfg, key, minimum, optional=False):
    if key not in cfg or cfg[key] is None:
        if optional:
            return None
        raise ConfigError(key, "missing")
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(key, f"expected integer >= {minimum}, got {v!r}")
    return v


def validate_synth_config(raw):
    """Check a synth config mapping and return a normalized copy."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    cfg = {
        "d_t": _need_int(raw, "d_t", 2),
        "d_s": _need_int(raw, "d_s", 1),
        "n_override": _need_int(raw, "n_override", 1, optional=True),
        "data_seed": _need_int(raw, "data_seed", 0, optional=True) or 0,
    }
    eps = raw.get("epsilon")
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not 0 < eps < 1:
        raise ConfigError("epsilon", f"expected a number in (0, 1), got {eps!r}")
    cfg["epsilon"] = float(eps)
    init = raw.get("student_init", "projected")
    if init not in ("projected", "random"):
        raise ConfigError("student_init", f"expected 'projected' or 'random', got {init!r}")
    cfg["student_init"] = init
    losses = raw.get("losses")
    if not isinstance(losses, list) or not losses:
        raise ConfigError("losses", "expected a non-empty list")
    for loss in losses:
        if loss not in LOSS_KINDS:
            raise ConfigError("losses", f"unknown loss {loss!r}; expected one of {LOSS_KINDS}")
    cfg["losses"] = list(losses)
    seeds = raw.get("seeds")
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("seeds", "expected a non-empty list of non-negative integers")
    cfg["seeds"] = list(seeds)
    opt = raw.get("optimizer") or {}
    if not isinstance(opt, dict):
        raise ConfigError("optimizer", "expected a mapping")
    bad = sorted(set(opt) - _OPT_KEYS)
    if bad:
        raise ConfigError(f"optimizer.{bad[0]}", "unknown key")
    opt = dict(opt)
    opt.setdefault("eval_epsilon", cfg["epsilon"])
    try:
        OptimConfig(**opt).validate()
    except (TypeError, PreconditionError) as exc:
        raise ConfigError("optimizer", str(exc)) from exc
    cfg["optimizer"] = opt
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return json.loads(text)
    return yaml.safe_load(text)


def _env_seeds():
    raw = os.environ.get("GEODIST_SEED")
    if not raw:
        return None
    try:
        return [int(s) for s in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError("GEODIST_SEED", f"expected integers, got {raw!r}") from exc


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc) if epoch
            else datetime.datetime.now(datetime.timezone.utc))
    return when.replace(microsecond=0).isoformat()


def build_synth_data(cfg):
    """Teacher and initial student for a validated synth config."""
    tcfg = TeacherConfig(d_t=cfg["d_t"], epsilon=cfg["epsilon"],
                         n_override=cfg["n_override"], seed=cfg["data_seed"])
    Rt = build_teacher(tcfg)
    student_seed = cfg["data_seed"] + 1
    if cfg["student_init"] == "projected":
        Rs0 = init_student_projected(Rt, cfg["d_s"], student_seed)
    else:
        Rs0 = init_student_random(Rt.shape[0], cfg["d_s"], student_seed)
    return Rt, Rs0


def format_summary(summary):
    lines = ["loss,runs,mean_count,stdev_count,median_count,final_loss_median,counts"]
    for loss, s in summary.items():
        counts = " ".join(str(c) for c in s["counts"])
        lines.append(f"{loss},{s['runs']},{s['mean']!r},{s['stdev']!r},{s['median']!r},"
                     f"{s['final_loss_median']!r},{counts}")
    return "\n".join(lines) + "\n"


def run_synth(cfg, out_dir, jobs=1, config_path=""):
    """Execute a validated synth config and write all artifacts to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    Rt, Rs0 = build_synth_data(cfg)
    base = replace(OptimConfig(), **cfg["optimizer"])
    log.info("teacher %s, student %s, %d runs", Rt.shape, Rs0.shape,
             len(cfg["losses"]) * len(cfg["seeds"]))
    runs = sweep(Rt, Rs0, cfg["losses"], cfg["seeds"], base, jobs=jobs)
    produced = []
    for r in runs:
        name = f"{r.config.loss_kind}_{r.config.seed}.csv"
        atomic_write_text(os.path.join(out_dir, name), r.trace_csv())
        produced.append(name)
    summary = summarize(runs)
    atomic_write_text(os.path.join(out_dir, "summary.csv"), format_summary(summary))
    produced.append("summary.csv")
    resolved = dict(cfg)
    resolved["optimizer"] = {k: v for k, v in asdict(base).items() if k not in ("loss_kind", "seed")}
    resolved["n"] = int(Rt.shape[0])
    atomic_write_text(os.path.join(out_dir, "config.json"),
                      json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    produced.append("config.json")
    manifest = [
        "command: synth",
        f"config_path: {config_path}",
        f"output_dir: {out_dir}",
        f"seeds: {' '.join(str(s) for s in cfg['seeds'])}",
        f"timestamp: {_timestamp()}",
        "files:",
    ] + [f"  {p}" for p in produced + ["manifest.txt"]]
    atomic_write_text(os.path.join(out_dir, "manifest.txt"), "\n".join(manifest) + "\n")
    return runs, summary


def cmd_synth(args):
    try:
        raw = load_config(args.config)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = validate_synth_config(raw)
        env = _env_seeds()
        if env:
            cfg["seeds"] = env
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    _, summary = run_synth(cfg, args.out, jobs=jobs, config_path=args.config)
    print(format_summary(summary), end="")
    return EXIT_OK


# -- verify-theorems --------------------------------------------------------


def cmd_verify_theorems(args):
    verdicts = run_suites(args.which, eps_values=tuple(args.eps), seeds=args.seeds,
                          n=args.n, corrupt=args.corrupt)
    for v in verdicts:
        print(v.line())
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAIL


# -- grad-check -------------------------------------------------------------


def grad_check_lines(losses, n, d_t, d_s, seeds, degenerate=False):
    """Yield ``(ok, line)`` for every (loss, seed) gradient check."""
    for loss in losses:
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            Rt = normalize_rows(rng.standard_normal((n, d_t)))
            Rs = normalize_rows(rng.standard_normal((n, d_s)))
            if degenerate:
                # every student row identical: Rs^T Rt has rank one
                Rs = np.tile(Rs[:1], (n, 1))
            P = rng.standard_normal((d_s, d_t)) / np.sqrt(d_t)
            head = f"grad loss={loss} seed={seed} n={n} d_t={d_t} d_s={d_s}"
            try:
                errs = check_gradient(loss, Rt, Rs, P)
            except NearSingular as exc:
                yield False, f"FAIL {head} error=NearSingular ({exc})"
                continue
            worst = max(errs.values())
            ok = worst <= GRAD_TOL
            detail = " ".join(f"rel_err_{k}={v:.3e}" for k, v in errs.items())
            yield ok, f"{'PASS' if ok else 'FAIL'} {head} {detail}"


def cmd_grad_check(args):
    if min(args.n, args.d_t, args.d_s) < 2:
        print("error: n, d_t and d_s must be at least 2", file=sys.stderr)
        return EXIT_INPUT
    losses = LOSS_KINDS if args.loss == "all" else (args.loss,)
    all_ok = True
    for ok, line in grad_check_lines(losses, args.n, args.d_t, args.d_s, args.seeds,
                                     degenerate=args.degenerate):
        print(line)
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_FAIL


# -- entry point ------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="geodist", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metric", help="distance between two matrix files")
    m.add_argument("teacher")
    m.add_argument("student")
    m.add_argument("--metric", choices=METRICS, default="procrustes")
    m.add_argument("--normalize", action="store_true", help="scale rows to unit norm first")
    m.add_argument("--center", action="store_true",
                   help="subtract column means, then scale rows to unit norm")
    m.add_argument("--centered-cka", action="store_true", help="double-center Gram matrices for CKA")
    m.set_defaults(func=cmd_metric)

    s = sub.add_parser("synth", help="run the synthetic geometry experiment")
    s.add_argument("config", help="YAML (or .json) experiment config")
    s.add_argument("--out", default="synth_out")
    s.add_argument("--jobs", type=int, default=0, help="parallel runs (default: all cores)")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("verify-theorems", help="numerical checks of the distance theorems")
    t.add_argument("--which", choices=("1", "2", "3", "lemmas", "all"), default="all")
    t.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.9])
    t.add_argument("--seeds", type=int, default=10)
    t.add_argument("--n", type=int, default=64)
    t.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    t.set_defaults(func=cmd_verify_theorems)

    g = sub.add_parser("grad-check", help="analytic vs finite-difference gradients")
    g.add_argument("--loss", choices=LOSS_KINDS + ("all",), default="all")
    g.add_argument("--n", type=int, default=16)
    g.add_argument("--d-t", type=int, default=8)
    g.add_argument("--d-s", type=int, default=8)
    g.add_argument("--seeds", type=int, default=10)
    g.add_argument("--degenerate", action="store_true",
                   help="use a rank-one student to exercise the non-differentiable path")
    g.set_defaults(func=cmd_grad_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
