"""Simultaneous RQ / LQ factorization of batches of small trapezoidal blocks.

A batch holds one block per shift, packed side by side in a single
column-major array.  All blocks share a precomputed annihilation schedule
(they have identical shape), so the rotations of one step can be applied
independently per block and, inside a block, in schedule order: every
rotation of a step touches a disjoint column pair, which makes the result
bitwise independent of how blocks are distributed over workers.

Each block is processed in isolation: the output for block l is bitwise
identical whether the batch holds 1 or many blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counters import PHASE_RQ, PhaseCounters, add_flops
from .errors import DimensionMismatchError, SingularShiftError
from .kernels import givens, rotate_columns
from .pools import WorkerPool, run_tasks
from .schedule import AnnihilationSchedule


@dataclass
class BlockBatch:
    """s packed blocks of n_rows x n_cols plus their orthogonal factors.

    ``Z`` is n_rows x (s * n_cols) with block l at column offset l * n_cols.
    After factorization ``P`` holds, per block, the first ``m_keep`` columns
    of the accumulated rotation product P* (the unitary factor applied from
    the right), packed as n_cols x (s * m_keep).
    """

    n_rows: int
    n_cols: int
    s: int
    Z: np.ndarray
    P: np.ndarray | None = None
    m_keep: int | None = None

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int, s: int) -> "BlockBatch":
        Z = np.zeros((n_rows, s * n_cols), dtype=np.complex128, order="F")
        return cls(n_rows=n_rows, n_cols=n_cols, s=s, Z=Z)

    def z_block(self, l: int) -> np.ndarray:
        return self.Z[:, l * self.n_cols:(l + 1) * self.n_cols]

    def p_block(self, l: int) -> np.ndarray:
        if self.P is None:
            raise ValueError("batch not factorized yet")
        return self.P[:, l * self.m_keep:(l + 1) * self.m_keep]


def _rotation_flops(rows_z: int, n_cols: int) -> float:
    # one complex rotation: ~20 real flops per touched row of Z and of P*,
    # plus the parameter computation
    return 20.0 * (rows_z + n_cols) + 16.0


def _factor_block(Z: np.ndarray, P: np.ndarray, schedule: AnnihilationSchedule,
                  lower: bool) -> float:
    """Apply the scheduled rotations to one block and its P* accumulator.

    ``lower=False``: upper trapezoid, rotations touch rows [0, r) plus the
    rotation row.  ``lower=True``: mirrored top-down variant, rows [r-1, end).
    Annihilated entries are written as exact zeros.  Returns counted flops.
    """
    n_rows = schedule.n_rows
    flops = 0.0
    info = schedule.rot_info
    off = 0
    for size in schedule.job_size:
        for k in range(off, off + size):
            r, c1, c2 = info[3 * k], info[3 * k + 1], info[3 * k + 2]
            g, rr = givens(Z[r - 1, c2 - 1], Z[r - 1, c1 - 1])
            if lower:
                lo, hi = r - 1, n_rows
            else:
                lo, hi = 0, r
            rotate_columns(Z, c2 - 1, c1 - 1, g.c, g.s, lo, hi)
            Z[r - 1, c1 - 1] = 0.0
            Z[r - 1, c2 - 1] = rr
            rotate_columns(P, c2 - 1, c1 - 1, g.c, g.s)
            flops += _rotation_flops(hi - lo, P.shape[0])
        off += size
    return flops


def batched_rq(batch: BlockBatch, schedule: AnnihilationSchedule,
               m_keep: int | None = None, *, pool: WorkerPool | None = None,
               counter: PhaseCounters | None = None) -> BlockBatch:
    """RQ-factorize every block of the batch in place.

    Each upper-trapezoidal block Z (rows annihilated bottom-up) is replaced
    by its triangular factor; ``batch.P`` receives the first ``m_keep``
    columns of each block's accumulated unitary factor P*, i.e. the columns
    needed to push the transformation into the rest of a sliding window.
    With the full factor retained (``m_keep = n_cols``), Z_in = R @ P*^H.
    """
    nr, nc = schedule.n_rows, schedule.n_cols
    if batch.n_rows != nr or batch.n_cols != nc:
        raise DimensionMismatchError("schedule shape does not match batch blocks")
    if m_keep is None:
        m_keep = nc
    if not 0 < m_keep <= nc:
        raise ValueError("m_keep out of range")
    batch.m_keep = m_keep
    batch.P = np.zeros((nc, batch.s * m_keep), dtype=np.complex128, order="F")
    flop_box = [0.0] * batch.s

    def task(l):
        Pfull = np.eye(nc, dtype=np.complex128, order="F")
        flop_box[l] = _factor_block(batch.z_block(l), Pfull, schedule, lower=False)
        batch.P[:, l * m_keep:(l + 1) * m_keep] = Pfull[:, :m_keep]

    run_tasks(pool, [(lambda l=l: task(l)) for l in range(batch.s)])
    add_flops(counter, PHASE_RQ, sum(flop_box))
    return batch


def batched_lq(batch: BlockBatch, schedule: AnnihilationSchedule,
               rhs: np.ndarray, *, pivot_tol=0.0,
               pool: WorkerPool | None = None,
               counter: PhaseCounters | None = None,
               skip: set[int] | None = None,
               on_singular: str = "raise") -> list[tuple[int, int]]:
    """LQ-factorize every block top-down and forward-substitute its RHS.

    Blocks are lower trapezoids (row r nonzero up to column r+delta); the
    mirrored schedule zeroes the band above the diagonal.  In the same
    sweep, once row k of a block is final, the k-th entry of that block's
    right-hand-side column ``rhs[:, l]`` is eliminated: it is divided by
    the diagonal L(k, k) and its multiple is subtracted from the entries
    below, leaving the solution of L y = rhs in place.

    A pivot of magnitude <= ``pivot_tol`` (scalar or per-block array) marks
    that block singular; its slices are zeroed, the remaining blocks
    complete normally, and a :class:`SingularShiftError` naming the block
    and pivot row is raised at the end.  Blocks listed in ``skip`` are left
    untouched.  Returns the failure list (empty when nothing failed and no
    exception is raised).
    """
    nr, nc = schedule.n_rows, schedule.n_cols
    if batch.n_rows != nr or batch.n_cols != nc:
        raise DimensionMismatchError("schedule shape does not match batch blocks")
    if rhs.shape != (nr, batch.s):
        raise DimensionMismatchError("rhs must be n_rows x s")
    tol = np.broadcast_to(np.asarray(pivot_tol, dtype=np.float64), (batch.s,))
    batch.m_keep = nc
    batch.P = np.zeros((nc, batch.s * nc), dtype=np.complex128, order="F")
    failures: list[tuple[int, int] | None] = [None] * batch.s
    flop_box = [0.0] * batch.s

    def task(l):
        if skip and l in skip:
            return
        Z = batch.z_block(l)
        P = batch.P[:, l * nc:(l + 1) * nc]
        P[np.diag_indices(nc)] = 1.0
        flop_box[l] = _factor_block(Z, P, schedule, lower=True)
        y = rhs[:, l]
        for i in range(nr):
            piv = Z[i, i]
            if abs(piv) <= tol[l]:
                failures[l] = (l, i)
                Z[:, :] = 0.0
                P[:, :] = 0.0
                y[:] = 0.0
                return
            y[i] = y[i] / piv
            y[i + 1:] -= Z[i + 1:nr, i] * y[i]

    run_tasks(pool, [(lambda l=l: task(l)) for l in range(batch.s)])
    add_flops(counter, PHASE_RQ, sum(flop_box))
    failed = [f for f in failures if f is not None]
    if failed and on_singular == "raise":
        raise SingularShiftError(failed)
    return failed
