"""Command-line front end.

Subcommands: ``gen`` writes a seeded random stable test system, ``reduce``
converts a triple to a controller-Hessenberg archive, ``tf`` evaluates the
transfer function over a shift list or frequency range, ``pspec`` maps
||G(z)||_2 over a rectangular complex grid, ``irka`` runs the model
reduction driver, and ``bench`` reports per-phase flop and timing counters.

Exit codes: 0 success, 2 parse/usage errors, 3 dimension mismatches,
4 eigensolver failures.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import sysio
from .counters import ALL_PHASES, PHASE_REDUCTION, PhaseCounters
from .errors import DimensionMismatchError, EigensolverError
from .hessenberg import reduce_controller_hessenberg
from .irka import irka_iterate
from .pools import WorkerPool
from .solvers import eval_transfer_function, structured_pseudospectrum_grid
from .systems import RunConfig, random_stable_system

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_EIGEN = 4


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=int, default=64,
                   help="reduction panel width b")
    p.add_argument("--nb", type=int, default=32, help="solver window block")
    p.add_argument("--batch", type=int, default=None,
                   help="shifts factored simultaneously (default: all)")
    p.add_argument("--workers-panel", type=int, default=1,
                   help="workers for panel/window tasks")
    p.add_argument("--workers-update", type=int, default=1,
                   help="workers for the trailing-update pool")
    p.add_argument("--strategy", choices=("sequential", "overlapped"),
                   default="sequential")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maxiter", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--fixed-iters", action="store_true",
                   help="always run exactly --maxiter iterations")


def _config(args) -> RunConfig:
    return RunConfig(block_size=args.block_size, nb=args.nb, batch=args.batch,
                     workers_panel=args.workers_panel,
                     workers_update=args.workers_update,
                     strategy=args.strategy, seed=args.seed,
                     maxiter=args.maxiter, tol=args.tol,
                     fixed_iters=args.fixed_iters)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftsolve", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a seeded random stable system")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("reduce", help="reduce (A,B,C) to an archive")
    r.add_argument("a_file")
    r.add_argument("b_file")
    r.add_argument("c_file")
    r.add_argument("--out", required=True, help="archive directory")
    _add_config_flags(r)

    t = sub.add_parser("tf", help="evaluate the transfer function")
    t.add_argument("archive")
    t.add_argument("--out", required=True, help="output CSV")
    t.add_argument("--shifts", help="file with one complex shift per line")
    t.add_argument("--w-min", type=float, help="log-spaced i*omega range start")
    t.add_argument("--w-max", type=float, help="log-spaced i*omega range end")
    t.add_argument("--count", type=int, help="number of frequencies")
    _add_config_flags(t)

    s = sub.add_parser("pspec", help="||G(z)|| over a rectangular grid")
    s.add_argument("archive")
    s.add_argument("--out", required=True)
    s.add_argument("--re-min", type=float, required=True)
    s.add_argument("--re-max", type=float, required=True)
    s.add_argument("--re-count", type=int, required=True)
    s.add_argument("--im-min", type=float, required=True)
    s.add_argument("--im-max", type=float, required=True)
    s.add_argument("--im-count", type=int, required=True)
    _add_config_flags(s)

    i = sub.add_parser("irka", help="interpolatory model reduction")
    i.add_argument("archive")
    i.add_argument("-r", "--order", type=int, required=True)
    i.add_argument("--out", required=True, help="output directory")
    _add_config_flags(i)

    b = sub.add_parser("bench", help="per-phase flop and time counters")
    b.add_argument("archive")
    b.add_argument("--out", required=True)
    b.add_argument("--shift-count", type=int, default=64)
    _add_config_flags(b)
    return ap


def _cmd_gen(args) -> int:
    sysb = random_stable_system(args.n, args.m, args.p, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sysio.write_matrix(out / "A.mtx", sysb.A)
    sysio.write_matrix(out / "B.mtx", sysb.B)
    sysio.write_matrix(out / "C.mtx", sysb.C)
    print(f"wrote {sysb.name} to {out}")
    return EXIT_OK


def _cmd_reduce(args) -> int:
    cfg = _config(args)
    A = sysio.read_matrix(args.a_file)
    B = sysio.read_matrix(args.b_file)
    C = sysio.read_matrix(args.c_file)
    counter = PhaseCounters()
    t0 = time.perf_counter()
    with WorkerPool(cfg.workers_panel) as pp, WorkerPool(cfg.workers_update) as pu:
        chf = reduce_controller_hessenberg(
            A, B, C, block_size=cfg.block_size, strategy=cfg.strategy,
            pool_panel=pp, pool_update=pu, counter=counter)
    seconds = time.perf_counter() - t0
    stats = {"flops": counter.flops.get(PHASE_REDUCTION, 0.0), "seconds": seconds}
    sysio.write_archive(args.out, chf, reduction_stats=stats,
                        config={"block_size": cfg.block_size, "strategy": cfg.strategy})
    print(f"reduced n={chf.n} m={chf.m} p={chf.p} -> {args.out} "
          f"({stats['flops']:.3e} flops, {seconds:.3f}s)")
    return EXIT_OK


def _tf_shifts(args) -> np.ndarray:
    if args.shifts:
        return sysio.read_shift_file(args.shifts)
    if args.w_min is None or args.w_max is None or not args.count:
        raise sysio.MatrixParseError(
            "tf needs --shifts FILE or --w-min/--w-max/--count")
    omega = np.logspace(np.log10(args.w_min), np.log10(args.w_max), args.count)
    return 1j * omega


def _cmd_tf(args) -> int:
    cfg = _config(args)
    chf, _ = sysio.load_archive(args.archive)
    shifts = _tf_shifts(args)
    with WorkerPool(cfg.workers_panel) as pool:
        res = eval_transfer_function(chf, shifts, nb=cfg.nb, batch_size=cfg.batch,
                                     pool=pool, on_singular="mark",
                                     singular_rtol=cfg.singular_rtol)
    sysio.write_tf_csv(args.out, res.G, res.shifts, res.failures, chf.p, chf.m)
    bad = f" ({len(res.failures)} singular)" if res.failures else ""
    print(f"wrote {len(shifts)} transfer-function rows to {args.out}{bad}")
    return EXIT_OK


def _cmd_pspec(args) -> int:
    cfg = _config(args)
    chf, _ = sysio.load_archive(args.archive)
    re = np.linspace(args.re_min, args.re_max, args.re_count)
    im = np.linspace(args.im_min, args.im_max, args.im_count)
    grid = (re[None, :] + 1j * im[:, None]).ravel()
    with WorkerPool(cfg.workers_panel) as pool:
        norms = structured_pseudospectrum_grid(chf, grid, nb=cfg.nb,
                                               batch_size=cfg.batch, pool=pool,
                                               singular_rtol=cfg.singular_rtol)
    sysio.write_pspec_csv(args.out, grid, norms)
    print(f"wrote {grid.size} grid rows to {args.out}")
    return EXIT_OK


def _cmd_irka(args) -> int:
    cfg = _config(args)
    chf, _ = sysio.load_archive(args.archive)
    if not 1 <= args.order < chf.n:
        raise DimensionMismatchError(
            f"reduced order must satisfy 1 <= r < n = {chf.n}")
    with WorkerPool(cfg.workers_panel) as pool:
        model, state = irka_iterate(chf, args.order, maxiter=cfg.maxiter,
                                    tol=cfg.tol, fixed_iters=cfg.fixed_iters,
                                    nb=cfg.nb, batch_size=cfg.batch, pool=pool)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sysio.write_matrix(out / "ar_re.mtx", model.Ar.real)
    sysio.write_matrix(out / "ar_im.mtx", model.Ar.imag)
    sysio.write_matrix(out / "br_re.mtx", model.Br.real)
    sysio.write_matrix(out / "br_im.mtx", model.Br.imag)
    sysio.write_matrix(out / "cr_re.mtx", model.Cr.real)
    sysio.write_matrix(out / "cr_im.mtx", model.Cr.imag)
    sysio.write_history_csv(out / "history.csv", state.history)
    print(f"irka r={args.order}: {state.iterations} iterations, "
          f"final shift change {state.history[-1].shift_change:.3e} -> {out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _config(args)
    chf, manifest = sysio.load_archive(args.archive)
    rng = np.random.default_rng(cfg.seed)
    shifts = 1j * np.sort(rng.uniform(1e-2, 1e2, args.shift_count))
    counter = PhaseCounters()
    t0 = time.perf_counter()
    with WorkerPool(cfg.workers_panel) as pool:
        eval_transfer_function(chf, shifts, nb=cfg.nb, batch_size=cfg.batch,
                               pool=pool, counter=counter, on_singular="mark")
    solve_seconds = time.perf_counter() - t0
    red = manifest.get("reduction", {})
    rows = []
    total_seconds = float(red.get("seconds", 0.0)) + solve_seconds
    snap = counter.snapshot()
    for phase in ALL_PHASES:
        if phase == PHASE_REDUCTION:
            fl, sec = float(red.get("flops", 0.0)), float(red.get("seconds", 0.0))
        else:
            fl, sec = snap.get(phase, (0.0, 0.0))
        rows.append({"phase": phase, "flops": fl, "seconds": sec,
                     "pct_time": 100.0 * sec / total_seconds if total_seconds else 0.0,
                     "note": ""})
    note = ("reduction stats come from the archive manifest; with "
            "strategy=overlapped its phases overlap in time and percentages "
            "undercount concurrency")
    sysio.write_bench_csv(args.out, rows, note=note)
    print(f"wrote phase counters to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "reduce": _cmd_reduce,
    "tf": _cmd_tf,
    "pspec": _cmd_pspec,
    "irka": _cmd_irka,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except sysio.MatrixParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except EigensolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EIGEN


if __name__ == "__main__":
    sys.exit(main())
