"""Batched direct solvers on controller-Hessenberg data.

All three solvers share one idea: with A banded Hessenberg (band width m),
the factorization of A - sigma*I that a solve needs touches only m + nb
consecutive columns at a time.  A sliding window walks over the stacked
matrix (output rows over A - sigma*I), nb rows of every shifted copy are
triangularized per step by a scheduled batch of Givens rotations, and the
window's shift-independent part is shared by the whole batch of shifts:

  * the shift-independent columns (Z1) are read once per step and pushed
    into every shift's window with two multiplies, one of them a single
    fused product across the batch;
  * the diagonal of the shift is never subtracted eagerly; the few entries
    that enter a window step unshifted are corrected right where the
    factorization or the update needs them.

``eval_transfer_function`` walks bottom-up with an RQ orientation (the
output rows carry C), ``solve_shifted_reduced`` does the same with the
window's top part seeded in place to the identity so that it accumulates
the orthogonal factor, and ``solve_shifted_transposed`` walks top-down
with an LQ orientation, fusing the forward substitution and the solution
accumulation into the sweep so the triangular and orthogonal factors are
never formed whole.

Every per-shift computation is independent of which other shifts share the
batch, so removing a shift leaves the remaining outputs bitwise unchanged,
and a singular shift is reported and isolated rather than poisoning its
batch.
"""

from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .batched import BlockBatch, batched_lq, batched_rq
from .counters import (
    PHASE_BATCHED_GEMM,
    PHASE_OUTER_GEMM,
    PHASE_RQ,
    PHASE_TAIL,
    PhaseCounters,
    add_flops,
    gemm_flops,
)
from .errors import DimensionMismatchError, SingularShiftError
from .hessenberg import ControllerHessForm
from .kernels import EPS, gemm_acc, givens, rotate_columns
from .pools import WorkerPool, run_tasks
from .schedule import greedy_schedule, mirrored_schedule


@dataclass
class ShiftBatchWorkspace:
    """Window arrays for one batch of shifts.

    ``z1`` holds the shared shift-independent window columns, ``z2`` the
    per-shift transformed columns (slice l is columns l*m..(l+1)*m), ``w``
    the stacked substitution vectors of the transposed solver.  The packed
    trapezoid blocks live in a per-step :class:`BlockBatch`.
    """

    z1: np.ndarray
    z2: np.ndarray
    w: np.ndarray | None = None
    block: BlockBatch | None = None


@dataclass
class TransferFunctionResult:
    """Transfer-function values: slice l of ``G`` is the p x m value at
    ``shifts[l]``.  ``failures`` maps shift index to the pivot row that
    flagged it singular; failed slices are NaN."""

    G: np.ndarray
    shifts: np.ndarray
    failures: dict[int, int] = field(default_factory=dict)

    def value(self, l: int) -> np.ndarray:
        m = self.G.shape[1] // len(self.shifts)
        return self.G[:, l * m:(l + 1) * m]


@dataclass
class ShiftedSolveResult:
    """Solutions of a batch of shifted systems, one column per shift."""

    x: np.ndarray
    shifts: np.ndarray
    failures: dict[int, int] = field(default_factory=dict)


def default_singular_rtol(n: int) -> float:
    """Relative pivot threshold below which a shift is declared singular."""
    return 1e3 * n * EPS


def _timed(counter: PhaseCounters | None, phase: str):
    return counter.timed(phase) if counter is not None else nullcontext()


def _shift_scales(A: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """||A - sigma I||_F per shift, in closed form."""
    fro2 = float(np.sum(A * A))
    tr = float(np.trace(A))
    n = A.shape[0]
    vals = fro2 - 2.0 * np.real(np.conj(shifts) * tr) + (np.abs(shifts) ** 2) * n
    return np.sqrt(np.maximum(vals, 0.0))


def _check_chf(chf: ControllerHessForm) -> None:
    if chf.Ahat.shape != (chf.n, chf.n) or chf.Bhat.shape[0] != chf.n:
        raise DimensionMismatchError("inconsistent controller-Hessenberg form")


def _batches(total: int, size: int | None):
    if total == 0:
        return
    size = total if size is None else max(1, int(size))
    for lo in range(0, total, size):
        yield lo, min(lo + size, total)


# ---------------------------------------------------------------------------
# bottom-up RQ sweep: shared by transfer function and reduced-RHS solves
# ---------------------------------------------------------------------------

def _sweep_rq(A: np.ndarray, top: np.ndarray | None, m: int, shifts: np.ndarray,
              nb0: int, pool: WorkerPool | None,
              counter: PhaseCounters | None) -> np.ndarray:
    """Run the bottom-up batched window sweep.

    ``top`` is the p x n output-row block, or None for an identity top of
    height n (seeded in place, never materialized).  Returns the window
    array Z2 whose rows 0..ptop+m hold, per shift, the transformed first m
    columns of the stacked matrix: the transformed output rows over the
    leading m x m block of the triangular factor.
    """
    n = A.shape[0]
    ptop = n if top is None else top.shape[0]
    s = len(shifts)
    ws = ShiftBatchWorkspace(
        z1=np.zeros((ptop + n, min(nb0, max(n - m, 1))), dtype=np.complex128, order="F"),
        z2=np.zeros((ptop + n, s * m), dtype=np.complex128, order="F"))
    z1, z2 = ws.z1, ws.z2

    def fill_top(dst, c0, c1):
        if top is not None:
            dst[:ptop, :] = top[:, c0:c1]
        else:
            dst[:ptop, :] = 0.0
            for t in range(c1 - c0):
                dst[c0 + t, t] = 1.0

    # seed: last m columns of the stack, with the shift on A's diagonal
    for l in range(s):
        cols = slice(l * m, (l + 1) * m)
        fill_top(z2[:, cols], n - m, n)
        z2[ptop:, cols] = A[:, n - m:]
        for t in range(m):
            z2[ptop + n - m + t, l * m + t] -= shifts[l]

    k = n
    while k >= m + 1:
        nb = min(nb0, k - m)
        mnb = min(m, nb)
        r0 = ptop + k - nb
        zw = z1[:, :nb]
        fill_top(zw, k - m - nb, k - m)
        zw[ptop:ptop + k, :] = A[:k, k - m - nb:k - m]

        batch = ws.block = BlockBatch.zeros(nb, nb + m, s)
        for l in range(s):
            off = l * (nb + m)
            batch.Z[:, off:off + nb] = zw[r0:ptop + k, :]
            batch.Z[:, off + nb:off + nb + m] = z2[r0:ptop + k, l * m:(l + 1) * m]
            if nb > m:
                for t in range(nb - m):
                    batch.Z[t, off + t + m] -= shifts[l]
        with _timed(counter, PHASE_RQ):
            batched_rq(batch, greedy_schedule(nb, nb + m), m_keep=m,
                       pool=pool, counter=counter)

        with _timed(counter, PHASE_BATCHED_GEMM):
            def update_shift(l):
                cols = slice(l * m, (l + 1) * m)
                P = batch.p_block(l)
                z2[:r0, cols] = z2[:r0, cols] @ P[nb:nb + m, :]
                z2[r0 - m:r0 - m + mnb, cols] -= shifts[l] * P[:mnb, :]

            run_tasks(pool, [(lambda l=l: update_shift(l)) for l in range(s)])
            add_flops(counter, PHASE_BATCHED_GEMM,
                      s * (gemm_flops(r0, m, m, True) + 8.0 * mnb * m))

        with _timed(counter, PHASE_OUTER_GEMM):
            gemm_acc(1.0, zw[:r0, :], batch.P[:nb, :], 1.0, z2[:r0, :],
                     pool=pool, col_block=m, counter=counter, phase=PHASE_OUTER_GEMM)
        k -= nb
    return z2


def _head_solve_rq(z2: np.ndarray, ptop: int, m: int, l: int, rhs: np.ndarray,
                   tol: float) -> tuple[np.ndarray | None, int]:
    """Unblocked reduction of the final m x m head, fused with the
    triangular solve against ``rhs``.

    Works in place on shift l's window columns (rows 0..ptop+m).  Returns
    (X, -1) on success or (None, pivot_row) when a pivot falls below
    ``tol``.
    """
    cols = slice(l * m, (l + 1) * m)
    H = z2[:ptop + m, cols]
    q = rhs.shape[1]
    X = np.zeros((m, q), dtype=np.complex128, order="F")
    flops = 0.0
    for i in range(m - 1, -1, -1):
        row = ptop + i
        for jj in range(i):
            g, rr = givens(H[row, i], H[row, jj])
            rotate_columns(H, i, jj, g.c, g.s, 0, ptop + m)
            H[row, jj] = 0.0
            H[row, i] = rr
            flops += 20.0 * (ptop + m)
        piv = H[row, i]
        if abs(piv) <= tol:
            return None, i
        X[i, :] = (rhs[i, :] - H[row, i + 1:m] @ X[i + 1:, :]) / piv
        flops += 8.0 * (m - i) * q
    return X, -1


def eval_transfer_function(chf: ControllerHessForm, shifts, nb: int = 32,
                           batch_size: int | None = None, *,
                           pool: WorkerPool | None = None,
                           counter: PhaseCounters | None = None,
                           on_singular: str = "raise",
                           singular_rtol: float | None = None) -> TransferFunctionResult:
    """Values of C (sigma I - A)^{-1} B for every shift, in batches.

    Shifts are processed in batches of ``batch_size`` (all at once by
    default); within a batch all window work is shared.  A shift at which
    the leading triangular block is numerically singular is reported in
    ``failures`` (its value slice is NaN) or, with ``on_singular="raise"``,
    raises :class:`SingularShiftError` after the batch completes.
    """
    _check_chf(chf)
    shifts = np.asarray(shifts, dtype=np.complex128).ravel()
    n, m, p = chf.n, chf.m, chf.p
    if nb < 1:
        raise ValueError("window block size must be >= 1")
    rtol = default_singular_rtol(n) if singular_rtol is None else singular_rtol
    scales = _shift_scales(chf.Ahat, shifts)
    Bh = np.asarray(chf.Bhat[:m, :m], dtype=np.complex128)
    G = np.full((p, len(shifts) * m), np.nan, dtype=np.complex128, order="F")
    failures: dict[int, int] = {}
    for lo, hi in _batches(len(shifts), batch_size):
        sl = shifts[lo:hi]
        z2 = _sweep_rq(chf.Ahat, chf.Chat, m, sl, nb, pool, counter)
        with _timed(counter, PHASE_TAIL):
            for l in range(len(sl)):
                X, bad = _head_solve_rq(z2, p, m, l, Bh, rtol * scales[lo + l])
                if X is None:
                    failures[lo + l] = bad
                    continue
                G[:, (lo + l) * m:(lo + l + 1) * m] = -z2[:p, l * m:(l + 1) * m] @ X
                add_flops(counter, PHASE_TAIL, gemm_flops(p, m, m, True))
    if failures and on_singular == "raise":
        raise SingularShiftError(sorted((l, i) for l, i in failures.items()))
    return TransferFunctionResult(G=G, shifts=shifts, failures=failures)


def solve_shifted_reduced(chf: ControllerHessForm, shifts, b_dirs, nb: int = 32,
                          batch_size: int | None = None, *,
                          pool: WorkerPool | None = None,
                          counter: PhaseCounters | None = None,
                          on_singular: str = "raise",
                          singular_rtol: float | None = None) -> ShiftedSolveResult:
    """Solve (A - sigma_l I) x_l = B bhat_l for every shift.

    ``b_dirs`` holds one m-vector per shift (m x s).  The right-hand sides
    have at most m leading nonzero entries after the reduction, so the
    window's output rows are seeded to the identity and accumulate the
    orthogonal factor; the solution is its leading column block times the
    small triangular solve.
    """
    _check_chf(chf)
    shifts = np.asarray(shifts, dtype=np.complex128).ravel()
    b_dirs = np.asarray(b_dirs, dtype=np.complex128)
    n, m = chf.n, chf.m
    if b_dirs.shape != (m, len(shifts)):
        raise DimensionMismatchError("b_dirs must be m x s")
    rtol = default_singular_rtol(n) if singular_rtol is None else singular_rtol
    scales = _shift_scales(chf.Ahat, shifts)
    Bh = np.asarray(chf.Bhat[:m, :m], dtype=np.complex128)
    X = np.full((n, len(shifts)), np.nan, dtype=np.complex128, order="F")
    failures: dict[int, int] = {}
    for lo, hi in _batches(len(shifts), batch_size):
        sl = shifts[lo:hi]
        z2 = _sweep_rq(chf.Ahat, None, m, sl, nb, pool, counter)
        with _timed(counter, PHASE_TAIL):
            for l in range(len(sl)):
                rhs = (Bh @ b_dirs[:, lo + l]).reshape(m, 1)
                Y, bad = _head_solve_rq(z2, n, m, l, rhs, rtol * scales[lo + l])
                if Y is None:
                    failures[lo + l] = bad
                    continue
                X[:, lo + l] = z2[:n, l * m:(l + 1) * m] @ Y[:, 0]
                add_flops(counter, PHASE_TAIL, gemm_flops(n, 1, m, True))
    if failures and on_singular == "raise":
        raise SingularShiftError(sorted((l, i) for l, i in failures.items()))
    return ShiftedSolveResult(x=X, shifts=shifts, failures=failures)


# ---------------------------------------------------------------------------
# top-down LQ sweep: transposed systems with general right-hand sides
# ---------------------------------------------------------------------------

def solve_shifted_transposed(chf: ControllerHessForm, shifts, rhs, nb: int = 32,
                             batch_size: int | None = None, *,
                             pool: WorkerPool | None = None,
                             counter: PhaseCounters | None = None,
                             on_singular: str = "raise",
                             singular_rtol: float | None = None) -> ShiftedSolveResult:
    """Solve (A - sigma_l I)^T x_l = c_l for general right-hand sides.

    The transposed matrix is lower banded Hessenberg; its rows are brought
    to triangular form top-down, and because forward substitution consumes
    the rows in the same order, each window step immediately eliminates its
    right-hand-side entries and accumulates its columns' contribution to
    the solution.  Neither triangular nor orthogonal factor is ever formed
    whole: the stacked vector w carries the partially reduced RHS above the
    partially accumulated solution (the window's lower part starts at -I,
    which makes one subtraction update both halves).
    """
    _check_chf(chf)
    shifts = np.asarray(shifts, dtype=np.complex128).ravel()
    rhs = np.asarray(rhs, dtype=np.complex128)
    n, m = chf.n, chf.m
    if rhs.shape != (n, len(shifts)):
        raise DimensionMismatchError("rhs must be n x s")
    rtol = default_singular_rtol(n) if singular_rtol is None else singular_rtol
    scales = _shift_scales(chf.Ahat, shifts)
    X = np.full((n, len(shifts)), np.nan, dtype=np.complex128, order="F")
    failures: dict[int, int] = {}
    for lo, hi in _batches(len(shifts), batch_size):
        bf = _sweep_lq(chf.Ahat, shifts[lo:hi], rhs[:, lo:hi], nb,
                       rtol * scales[lo:hi], pool, counter,
                       X[:, lo:hi], m)
        for l, row in bf.items():
            failures[lo + l] = row
    if failures and on_singular == "raise":
        raise SingularShiftError(sorted((l, i) for l, i in failures.items()))
    return ShiftedSolveResult(x=X, shifts=shifts, failures=failures)


def _sweep_lq(A: np.ndarray, shifts: np.ndarray, rhs: np.ndarray, nb0: int,
              tols: np.ndarray, pool: WorkerPool | None,
              counter: PhaseCounters | None, xout: np.ndarray, m: int) -> dict[int, int]:
    """Top-down fused LQ sweep for one batch; writes solutions into ``xout``
    and returns {shift index: singular pivot row (0-based)}."""
    n = A.shape[0]
    s = len(shifts)
    AT = np.asfortranarray(A.T)
    ws = ShiftBatchWorkspace(
        z1=np.zeros((2 * n, min(nb0, max(n - m, 1))), dtype=np.complex128, order="F"),
        z2=np.zeros((2 * n, s * m), dtype=np.complex128, order="F"),
        w=np.zeros((2 * n, s), dtype=np.complex128, order="F"))
    z1, z2, w = ws.z1, ws.z2, ws.w
    failed: dict[int, int] = {}

    for l in range(s):
        cols = slice(l * m, (l + 1) * m)
        w[:n, l] = rhs[:, l]
        z2[:n, cols] = AT[:, :m]
        for t in range(m):
            z2[t, l * m + t] -= shifts[l]
            z2[n + t, l * m + t] = -1.0

    k1 = 1  # 1-based first row of the current window step
    while k1 <= n - m:
        nb = min(nb0, n - m - k1 + 1)
        mnb = min(m, nb)
        r1 = k1 + nb + m
        zw = z1[:, :nb]
        c0 = k1 + m - 1  # 0-based first source column
        zw[k1 - 1:, :] = 0.0
        zw[k1 - 1:n, :] = AT[k1 - 1:n, c0:c0 + nb]
        for t in range(nb):
            zw[n + c0 + t, t] = -1.0

        batch = ws.block = BlockBatch.zeros(nb, nb + m, s)
        for l in range(s):
            off = l * (nb + m)
            batch.Z[:, off:off + m] = z2[k1 - 1:k1 - 1 + nb, l * m:(l + 1) * m]
            batch.Z[:, off + m:off + m + nb] = zw[k1 - 1:k1 - 1 + nb, :]
            if nb > m:
                for i in range(m, nb):
                    batch.Z[i, off + i] -= shifts[l]
        wseg = w[k1 - 1:k1 - 1 + nb, :]
        with _timed(counter, PHASE_RQ):
            new_failures = batched_lq(batch, mirrored_schedule(nb, nb + m), wseg,
                                      pivot_tol=tols, pool=pool, counter=counter,
                                      skip=set(failed), on_singular="mark")
        for l, row in new_failures:
            failed[l] = k1 - 1 + row
            z2[:, l * m:(l + 1) * m] = 0.0
            w[:, l] = 0.0

        dW = np.zeros((nb + m, s), dtype=np.complex128, order="F")

        def update_shift(l):
            if l in failed:
                return
            cols = slice(l * m, (l + 1) * m)
            P = batch.p_block(l)
            dW[:, l] = P[:, :nb] @ w[k1 - 1:k1 - 1 + nb, l]
            w[k1 - 1 + nb:, l] -= z2[k1 - 1 + nb:, cols] @ dW[:m, l]
            z2[k1 - 1 + nb:, cols] = z2[k1 - 1 + nb:, cols] @ P[:m, nb:nb + m]
            w[r1 - mnb - 1:r1 - 1, l] += shifts[l] * dW[nb + m - mnb:nb + m, l]
            z2[r1 - mnb - 1:r1 - 1, cols] -= shifts[l] * P[m + nb - mnb:m + nb, nb:nb + m]
            rows = 2 * n - (k1 - 1 + nb)
            add_flops(counter, PHASE_BATCHED_GEMM,
                      gemm_flops(nb + m, 1, nb, True) + gemm_flops(rows, 1, m, True)
                      + gemm_flops(rows, m, m, True))

        def trail_shift(l):
            if l in failed:
                return
            cols = slice(l * m, (l + 1) * m)
            P = batch.p_block(l)
            z2[k1 - 1 + nb:, cols] += zw[k1 - 1 + nb:, :] @ P[m:m + nb, nb:nb + m]
            w[k1 - 1 + nb:, l] -= zw[k1 - 1 + nb:, :] @ dW[m:m + nb, l]
            rows = 2 * n - (k1 - 1 + nb)
            add_flops(counter, PHASE_OUTER_GEMM,
                      gemm_flops(rows, m, nb, True) + gemm_flops(rows, 1, nb, True))

        with _timed(counter, PHASE_BATCHED_GEMM):
            run_tasks(pool, [(lambda l=l: update_shift(l)) for l in range(s)])
        with _timed(counter, PHASE_OUTER_GEMM):
            run_tasks(pool, [(lambda l=l: trail_shift(l)) for l in range(s)])
        k1 += nb

    # Unblocked m-column tail, fused with the last substitutions: per shift,
    # row n-m+kk of the window keeps its first live column as the diagonal
    # and the rotations run over rows n-m+1..2n only (everything above is
    # already consumed).
    with _timed(counter, PHASE_TAIL):
        tail_failed = [-1] * s

        def tail_shift(l):
            if l in failed:
                return
            base = l * m
            lo = n - m
            flops = 0.0
            for kk in range(1, m):
                rr = n - m + kk - 1
                for c in range(kk, m):
                    g, rv = givens(z2[rr, base + kk - 1], z2[rr, base + c])
                    rotate_columns(z2, base + kk - 1, base + c, g.c, g.s, lo, 2 * n)
                    z2[rr, base + c] = 0.0
                    z2[rr, base + kk - 1] = rv
                    flops += 20.0 * (2 * n - lo)
                piv = z2[rr, base + kk - 1]
                if abs(piv) <= tols[l]:
                    tail_failed[l] = rr
                    return
                w[rr, l] = w[rr, l] / piv
                w[rr + 1:, l] -= z2[rr + 1:, base + kk - 1] * w[rr, l]
                flops += 8.0 * (2 * n - rr)
            piv = z2[n - 1, base + m - 1]
            if abs(piv) <= tols[l]:
                tail_failed[l] = n - 1
                return
            w[n - 1, l] = w[n - 1, l] / piv
            w[n:, l] -= z2[n:, base + m - 1] * w[n - 1, l]
            xout[:, l] = w[n:, l]
            add_flops(counter, PHASE_TAIL, flops + 8.0 * n)

        run_tasks(pool, [(lambda l=l: tail_shift(l)) for l in range(s)])
        for l, row in enumerate(tail_failed):
            if row >= 0:
                failed[l] = row
    return failed


def residual_certificate(chf: ControllerHessForm, sigma: complex, x: np.ndarray,
                         rhs: np.ndarray, transpose: bool = False) -> float:
    """Normalized residual of a shifted solve:
    ||(A - sigma I)^(T) x - rhs|| / (||A - sigma I||_F ||x|| + ||rhs||)."""
    M = chf.Ahat - sigma * np.eye(chf.n)
    if transpose:
        M = M.T
    num = np.linalg.norm(M @ x - rhs)
    den = np.linalg.norm(M, "fro") * np.linalg.norm(x) + np.linalg.norm(rhs)
    return float(num / den) if den else float(num)


def two_norm_small(M: np.ndarray) -> float:
    """Spectral norm of a small dense matrix (off-the-shelf SVD)."""
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def structured_pseudospectrum_grid(chf: ControllerHessForm, grid, nb: int = 32,
                                   batch_size: int | None = None, *,
                                   pool: WorkerPool | None = None,
                                   counter: PhaseCounters | None = None,
                                   singular_rtol: float | None = None) -> np.ndarray:
    """||C (z I - A)^{-1} B||_2 over a set of complex grid points.

    Grid points where the shifted system is numerically singular are
    reported as +inf (they lie inside every level set) rather than failing
    the sweep.
    """
    grid = np.asarray(grid, dtype=np.complex128).ravel()
    res = eval_transfer_function(chf, grid, nb=nb, batch_size=batch_size,
                                 pool=pool, counter=counter,
                                 on_singular="mark", singular_rtol=singular_rtol)
    m = chf.m
    out = np.empty(len(grid), dtype=np.float64)
    for l in range(len(grid)):
        if l in res.failures:
            out[l] = np.inf
        else:
            out[l] = two_norm_small(res.G[:, l * m:(l + 1) * m])
    return out
