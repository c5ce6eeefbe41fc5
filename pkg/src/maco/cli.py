"""Command-line front end.

Five commands: ``complete`` (solve an interval-completion problem from an
observation file), ``inpaint`` (image reconstruction from a random pixel
mask), ``sweep`` (interval-slack sweep on synthetic low-rank instances),
``recover-demo`` (worked 3x3 example of the rank-truncation oracle), and
``evaluate`` (RMSE of checkpointed factors on a test file).

Exit codes: 0 success, 1 input or usage error, 2 numerical abort.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import io as mio
from . import linalg, metrics, solver
from .errors import MacoError, NumericalAbort, ParseError, ValidationError
from .model import ConstraintKind, FactorPair

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _default_threads() -> int:
    env = os.environ.get("MACO_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"bad MACO_THREADS value {env!r}") from None
    return os.cpu_count() or 1


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v}")
    return v


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_solver_flags(p: _Parser, mu_default: float = 1e-3):
    p.add_argument("--rank", type=_positive_int, required=True,
                   help="factorization rank r")
    p.add_argument("--mu", type=float, default=mu_default,
                   help=f"regularization weight (default {mu_default})")
    p.add_argument("--epochs", type=int, default=100,
                   help="number of epochs (default 100)")
    p.add_argument("--tau", type=_positive_int, default=None,
                   help="rows/columns sampled per pass "
                        "(default: the thread count, capped at the "
                        "matrix dimensions)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: MACO_THREADS or all "
                        "cores; results never depend on this)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed (default 0)")
    p.add_argument("--variant", type=solver.Variant.parse,
                   default=solver.Variant.plain(),
                   help="update restriction: plain, nonneg, or clip:ZETA "
                        "(default plain)")
    p.add_argument("--trace-every", type=_positive_int, default=1,
                   help="epochs between exact objective evaluations "
                        "(default 1)")


def _make_config(args, m: int, n: int) -> solver.SolverConfig:
    threads = args.threads if args.threads is not None else _default_threads()
    tau = args.tau if args.tau is not None else threads
    return solver.SolverConfig(
        rank=args.rank, mu=args.mu, epochs=args.epochs,
        tau_row=min(tau, m), tau_col=min(tau, n), seed=args.seed,
        variant=args.variant, threads=threads,
        trace_every=args.trace_every)


def _echo_config(cfg: solver.SolverConfig):
    print("config:")
    for line in cfg.to_kv().splitlines():
        print(f"  {line}")


def _trace_callback(report: metrics.MetricReport, started: float,
                    extra=None):
    def cb(state, ov):
        report.append(metrics.MetricRow(
            epoch=state.epoch, updates=state.updates, objective=ov.total,
            rmse=None, psnr=None if extra is None else extra(state),
            seconds=time.monotonic() - started))
    return cb


def _print_summary(state: solver.SolverState, seconds: float):
    first = state.objective_trace[0][1].total
    last = state.objective_trace[-1][1].total
    print(f"epochs: {state.epoch}   coordinate updates: {state.updates}")
    print(f"objective: {first:.6g} -> {last:.6g}")
    print(f"wall time: {seconds:.2f} s   threads: {state.effective_threads}")


# ---------------------------------------------------------------------------
# complete

def _cmd_complete(args) -> int:
    with open(args.obs, "r", encoding="utf-8") as fh:
        obs = mio.parse_observations(fh.read())
    cfg = _make_config(args, obs.m, obs.n)
    _echo_config(cfg)
    report = metrics.MetricReport()
    started = time.monotonic()
    state = solver.run(obs, cfg, callbacks=[_trace_callback(report, started)])
    _print_summary(state, time.monotonic() - started)
    if args.out_l:
        mio.write_text_atomic(args.out_l, mio.write_dense(state.factors.L))
    if args.out_r:
        mio.write_text_atomic(args.out_r, mio.write_dense(state.factors.R))
    if args.trace:
        mio.write_text_atomic(args.trace, report.to_csv())
    return 0


# ---------------------------------------------------------------------------
# inpaint

def _cmd_inpaint(args) -> int:
    with open(args.image, "rb") as fh:
        img = mio.read_pgm(fh.read())
    unit = args.scale == "unit"
    mode = mio.InpaintMode(args.mode)
    if mode is mio.InpaintMode.BOX_RANGE_EVERYWHERE and unit:
        raise ValueError("--mode box255 implies the raw [0,255] scale")
    range_lo = range_hi = None
    if args.range:
        lo_s, _, hi_s = args.range.partition(":")
        range_lo, range_hi = float(lo_s), float(hi_s or "nan")
        if not range_lo <= range_hi:
            raise ValueError(f"bad --range {args.range!r}; expected LO:HI")
    mask = mio.sample_mask(img.height, img.width, args.keep_fraction,
                           args.seed)
    obs = mio.image_to_observations(img, mask, mode, unit_scale=unit,
                                    range_lo=range_lo, range_hi=range_hi)
    cfg = _make_config(args, img.height, img.width)
    _echo_config(cfg)
    print(f"kept pixels: {mask.size} of {img.height * img.width}")

    scale = 255.0 if unit else 1.0

    def current_psnr(state):
        return metrics.psnr(state.factors.dense() * scale, img)

    report = metrics.MetricReport()
    started = time.monotonic()
    extra = current_psnr if args.report else None
    state = solver.run(obs, cfg,
                       callbacks=[_trace_callback(report, started, extra)])
    seconds = time.monotonic() - started
    recon = state.factors.dense() * scale
    value = metrics.psnr(recon, img)
    _print_summary(state, seconds)
    print("PSNR: exact" if math.isinf(value) else f"PSNR: {value:.4f} dB")
    if args.out:
        out_img = mio.GrayImage.from_matrix(recon)
        mio.write_bytes_atomic(args.out, mio.write_pgm(out_img))
    if args.report:
        mio.write_text_atomic(args.report, report.to_csv())
    return 0


# ---------------------------------------------------------------------------
# sweep

def _cmd_sweep(args) -> int:
    deltas = [t.strip() for t in args.deltas.split(",") if t.strip()]
    if not deltas:
        raise ValueError("--deltas is empty; give values or 'tail'")
    p_list = args.p
    seeds = args.seeds
    if not p_list or not seeds:
        raise ValueError("--p and --seeds must be non-empty")
    if args.rank > args.true_rank:
        raise ValueError(f"solve rank {args.rank} exceeds the planted "
                         f"rank {args.true_rank}")
    size = args.size
    epochs = max(1, math.ceil(args.iters / size))
    rows = ["p,delta,seed,error"]
    for p in p_list:
        if not 0 < p <= 100:
            raise ValueError(f"p is a percentage in (0, 100], got {p}")
        for seed in seeds:
            X = linalg.random_low_rank(size, size, args.true_rank, seed=seed)
            mask = mio.sample_mask(size, size, p / 100.0,
                                   seed=seed + 10_000)
            tail = linalg.tail_bound(linalg.svd(X).sigma, args.rank)
            resolved = [tail if d == "tail" else float(d) for d in deltas]
            cfg = solver.SolverConfig(rank=args.rank, mu=args.mu,
                                      epochs=epochs, tau_row=1, tau_col=1,
                                      seed=seed, trace_every=epochs)
            for delta, err in metrics.delta_sweep(X, mask, resolved, cfg):
                rows.append(f"{p},{delta!r},{seed},{err!r}")
                print(f"p={p} delta={delta:.6g} seed={seed} "
                      f"error={err:.6g}")
    mio.write_text_atomic(args.out, "\n".join(rows) + "\n")
    return 0


# ---------------------------------------------------------------------------
# recover-demo

_DEMO = np.array([[68.16, 78.12, 24.04],
                  [78.12, 90.09, 30.03],
                  [24.04, 30.03, 20.01]])


def _print_matrix(X):
    for row in X:
        print("  " + " ".join(f"{v:9.4f}" for v in row))


def _cmd_recover_demo(args) -> int:
    print("demo matrix:")
    _print_matrix(_DEMO)
    res = linalg.svd(_DEMO)
    print("singular values: ("
          + ", ".join(f"{s:.4f}" for s in res.sigma) + ")")
    print("best rank-2 approximation:")
    _print_matrix(res.truncate(2))
    print(f"tail bound R(2) = {linalg.tail_bound(res.sigma, 2):.4f}")
    return 0


# ---------------------------------------------------------------------------
# evaluate

def _cmd_evaluate(args) -> int:
    with open(args.factors_l, "r", encoding="utf-8") as fh:
        L = mio.read_dense(fh.read())
    with open(args.factors_r, "r", encoding="utf-8") as fh:
        R = mio.read_dense(fh.read())
    factors = FactorPair(L, R)
    with open(args.test, "r", encoding="utf-8") as fh:
        test_obs = mio.parse_observations(fh.read())
    if (test_obs.m, test_obs.n) != (factors.m, factors.n):
        raise ValueError(f"test file is {test_obs.m} x {test_obs.n} but "
                         f"factors give {factors.m} x {factors.n}")
    triples = []
    for e in test_obs.entries:
        if e.kind is not ConstraintKind.EQUALITY:
            raise ValueError(f"test entries must be exact (kind E); "
                             f"found {e.kind.value} at ({e.i + 1},{e.j + 1})")
        triples.append((e.i, e.j, e.value))
    clip = None
    if args.clip:
        lo_s, _, hi_s = args.clip.partition(":")
        clip = (float(lo_s), float(hi_s))
        if not clip[0] <= clip[1]:
            raise ValueError(f"bad --clip {args.clip!r}; expected LO:HI")
    print(f"RMSE {metrics.rmse(factors, triples, clip=clip):.6f}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _build_parser() -> _Parser:
    parser = _Parser(prog="maco",
                     description="Low-rank matrix completion under "
                                 "element-wise interval constraints.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("complete",
                       help="solve an interval-completion problem",
                       description="Solve the completion problem described "
                                   "by an observation file and checkpoint "
                                   "the factors.")
    p.add_argument("--obs", required=True, help="observation file")
    _add_solver_flags(p)
    p.add_argument("--out-l", default=None,
                   help="write the left factor (dense text)")
    p.add_argument("--out-r", default=None,
                   help="write the right factor (dense text)")
    p.add_argument("--trace", default=None,
                   help="write the objective trace as CSV")
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("inpaint",
                       help="reconstruct an image from a random pixel mask",
                       description="Sample a keep-mask, build constraints "
                                   "per --mode, solve, and report PSNR.")
    p.add_argument("--image", required=True, help="input PGM image")
    p.add_argument("--keep-fraction", type=_fraction, required=True,
                   help="fraction of pixels kept as observations")
    p.add_argument("--mode", default="box255",
                   choices=[m.value for m in mio.InpaintMode],
                   help="constraints: eq (equalities only), eq+range "
                        "(plus box on missing pixels), box255 (full-range "
                        "box on missing pixels; default)")
    p.add_argument("--scale", default="raw", choices=["raw", "unit"],
                   help="solve on the raw [0,255] or unit [0,1] scale "
                        "(default raw)")
    p.add_argument("--range", default=None,
                   help="LO:HI box range for mode eq+range "
                        "(default: full pixel range)")
    _add_solver_flags(p)
    p.add_argument("--out", default=None, help="write reconstruction PGM")
    p.add_argument("--report", default=None,
                   help="write per-epoch PSNR/objective CSV")
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("sweep",
                       help="interval-slack sweep on synthetic instances",
                       description="Generate square rank-limited instances, "
                                   "observe a random fraction of entries as "
                                   "boxes [x-delta, x+delta], solve, and "
                                   "record the error against the "
                                   "rank-truncation oracle.")
    p.add_argument("--p", type=_int_list, required=True,
                   help="comma-separated observed percentages, e.g. 30,50,80")
    p.add_argument("--deltas", required=True,
                   help="comma-separated slack values; the token 'tail' "
                        "resolves to the instance's singular-value tail sum")
    p.add_argument("--seeds", type=_int_list, required=True,
                   help="comma-separated instance seeds")
    p.add_argument("--iters", type=float, default=1e5,
                   help="serial iterations per solve (default 1e5)")
    p.add_argument("--mu", type=float, default=1e-5,
                   help="regularization weight (default 1e-5)")
    p.add_argument("--rank", type=_positive_int, default=7,
                   help="solve/oracle rank (default 7)")
    p.add_argument("--size", type=_positive_int, default=20,
                   help="instance dimension (default 20)")
    p.add_argument("--true-rank", type=_positive_int, default=8,
                   help="planted rank of the instances (default 8)")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("recover-demo",
                       help="worked 3x3 rank-truncation example",
                       description="Print a 3x3 near-rank-2 matrix, its "
                                   "singular values, its best rank-2 "
                                   "approximation, and the tail bound.")
    p.set_defaults(func=_cmd_recover_demo)

    p = sub.add_parser("evaluate",
                       help="RMSE of checkpointed factors on a test file",
                       description="Read dense factor checkpoints and an "
                                   "equality-only observation file; print "
                                   "the RMSE of the factor product.")
    p.add_argument("--factors-l", required=True, help="left factor file")
    p.add_argument("--factors-r", required=True, help="right factor file")
    p.add_argument("--test", required=True,
                   help="test observations (kind E records only)")
    p.add_argument("--clip", default=None,
                   help="LO:HI interval to clip predictions into")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 2
    except (MacoError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
