"""Reduction of (A, B, C) to controller-Hessenberg form.

The pair (A, B) is brought by orthogonal equivalence to a form where A has
zeros below its m-th subdiagonal (m = number of inputs) and B is upper
triangular; C is carried along.  Transfer-function values and shifted
solves are invariant under this change of coordinates, so the reduction is
paid once and amortized over every shift.

The band reduction is blocked on two levels: panels of ``block_size``
columns are reduced with compact WY reflectors, and inside a panel,
right-hand-side updates are deferred to every m-th column ("mini-blocks"),
which is what makes the band width pay off.  After a panel, three trailing
update tasks remain:

  (a) rows below the panel offset, updated from the right using Y = A V T,
  (b) the same rows updated from the left using (V, T),
  (c) rows above the offset: compute the top part of Y, then update from
      the right (this includes the triangular touch-up of the panel's own
      tail columns).

Tasks (a) and (b) must finish before the next panel starts; task (c)
touches a disjoint row range and may overlap with the next panel.  The
``overlapped`` strategy runs (c) asynchronously on its own worker pool,
serialized panel-to-panel; ``sequential`` runs everything inline.  Both
strategies execute identical floating-point operations on identical
chunks, so their results agree bitwise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .counters import PHASE_REDUCTION, PhaseCounters, add_flops, gemm_flops
from .errors import DimensionMismatchError
from .kernels import (
    BlockReflector,
    apply_block_reflector,
    as_fmatrix,
    householder_vector,
    reflector_t_column,
)
from .pools import WorkerPool, chunk_ranges, run_tasks

#: fixed row height of one task-(c) chunk; never derived from worker count
TOP_ROW_CHUNK = 64
#: fixed column width of trailing-update chunks
TRAIL_COL_CHUNK = 256


@dataclass
class ControllerHessForm:
    """Reduced triple: banded-Hessenberg Ahat, upper-triangular Bhat, dense Chat.

    The zero patterns are exact (written zeros).  Q, when accumulated,
    satisfies Q^T A Q = Ahat and Q^T B = Bhat up to roundoff.
    """

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    m: int
    n: int
    p: int
    Q: np.ndarray | None = None


@dataclass
class PanelResult:
    """One panel's compact WY data: reflector (V, T, Y), panel index, offset.

    ``offset`` is the number of rows above the reflector support: V's local
    row 0 is global row ``offset``.
    """

    reflector: BlockReflector
    index: int
    offset: int


def mini_boundaries(block_width: int, m: int) -> list[tuple[int, int, int]]:
    """Mini-block boundary events inside one panel.

    Returns (j, current_mini, next_mini) for every column index j (1-based)
    at which the deferred right-hand updates fire: every m-th column and
    the final column.  ``current_mini`` is the width of the mini-block just
    finished, ``next_mini`` the width of the block updated from the right.
    """
    events = []
    for j in range(1, block_width + 1):
        if j % m == 0 or j == block_width:
            c_mini = m if j % m == 0 else block_width % m
            events.append((j, c_mini, min(block_width - j, m)))
    return events


def _process_panel(A: np.ndarray, zc: int, bw: int, kb: int, m: int,
                   counter: PhaseCounters | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce panel columns [zc, zc+bw) of A in place; offset kb = zc + m.

    Returns (V, T, Ybot): reflectors on rows kb..n-1, their T factor, and
    the bottom part Y(kb:n, :) of A V T, maintained incrementally at
    mini-block boundaries.  Columns of the panel receive left updates
    lazily per column and right updates only at mini-block boundaries.
    """
    n = A.shape[0]
    nk = n - kb
    V = np.zeros((nk, bw), order="F")
    T = np.zeros((bw, bw), order="F")
    Y = np.zeros((nk, bw), order="F")
    events = {j: (c, nxt) for j, c, nxt in mini_boundaries(bw, m)}
    flops = 0.0
    for j0 in range(bw):
        col = zc + j0
        if j0 > 0:
            a = A[kb:, col]
            w = V[:, :j0].T @ a
            w = T[:j0, :j0].T @ w
            a -= V[:, :j0] @ w
            flops += 4.0 * nk * j0 + 2.0 * j0 * j0
        h, beta = householder_vector(A[kb + j0:, col])
        V[j0:, j0] = h.v
        A[kb + j0, col] = beta
        A[kb + j0 + 1:, col] = 0.0
        reflector_t_column(V, T, j0, h.tau)
        flops += 4.0 * (nk - j0) + 2.0 * nk * j0
        jb = j0 + 1
        if jb in events:
            c_mini, n_mini = events[jb]
            js = jb - c_mini
            Vt = V[:, js:jb]
            AV = A[kb:, kb:] @ Vt
            flops += gemm_flops(nk, c_mini, nk, False)
            if js > 0:
                AV -= Y[:, :js] @ (V[:, :js].T @ Vt)
                flops += gemm_flops(js, c_mini, nk, False) + gemm_flops(nk, c_mini, js, False)
            Y[:, js:jb] = AV @ T[js:jb, js:jb]
            flops += gemm_flops(nk, c_mini, c_mini, False)
            if n_mini > 0:
                A[kb:, zc + jb: zc + jb + n_mini] -= \
                    Y[:, :jb] @ V[jb - m: jb - m + n_mini, :jb].T
                flops += gemm_flops(nk, n_mini, jb, False)
    add_flops(counter, PHASE_REDUCTION, flops)
    return V, T, Y


def _trailing_bottom(A, kb, zc, bw, V, T, Y, pool, counter):
    """Tasks (a) + (b): update rows kb..n from the right, then the left."""
    n = A.shape[0]
    col0 = max(zc + bw, kb)
    if col0 < n:
        vrow0 = col0 - kb

        def right(c0, c1):
            A[kb:, col0 + c0: col0 + c1] -= Y @ V[vrow0 + c0: vrow0 + c1, :].T

        run_tasks(pool, [(lambda a=a, b=b: right(a, b))
                         for a, b in chunk_ranges(n - col0, TRAIL_COL_CHUNK)])
        add_flops(counter, PHASE_REDUCTION, gemm_flops(n - kb, n - col0, bw, False))
    if zc + bw < n:
        apply_block_reflector("left", BlockReflector(V, T), A[kb:, zc + bw:],
                              pool=pool, counter=counter, phase=PHASE_REDUCTION)


def _trailing_top(A, kb, zc, bw, m, V, T, Ytop_out, pool, counter):
    """Task (c): per fixed row chunk of rows 0..kb, compute the top part of
    Y = A V T and apply the right update to the panel tail and the trailing
    columns."""
    n = A.shape[0]
    tail0 = max(zc + bw, kb)  # first trailing column with reflector support
    vrow0 = tail0 - kb
    tri = bw - m  # panel tail columns kb .. zc+bw receive the triangular update
    flops = [0.0] * max(1, (kb + TOP_ROW_CHUNK - 1) // TOP_ROW_CHUNK)

    def task(idx, r0, r1):
        fl = 0.0
        Yc = (A[r0:r1, kb:] @ V) @ T
        fl += gemm_flops(r1 - r0, bw, n - kb, False) + gemm_flops(r1 - r0, bw, bw, False)
        Ytop_out[r0:r1, :] = Yc
        if tri > 0:
            A[r0:r1, kb: zc + bw] -= Yc[:, :tri] @ V[:tri, :tri].T
            fl += gemm_flops(r1 - r0, tri, tri, False)
        if tail0 < n:
            A[r0:r1, tail0:] -= Yc @ V[vrow0:, :].T
            fl += gemm_flops(r1 - r0, n - tail0, bw, False)
        flops[idx] = fl

    tasks = [(lambda i=i, a=a, b=b: task(i, a, b))
             for i, (a, b) in enumerate(chunk_ranges(kb, TOP_ROW_CHUNK))]
    run_tasks(pool, tasks)
    add_flops(counter, PHASE_REDUCTION, sum(flops))


def mhessenberg_reduce(A: np.ndarray, m: int, block_size: int = 64,
                       strategy: str = "sequential", *,
                       pool_panel: WorkerPool | None = None,
                       pool_update: WorkerPool | None = None,
                       counter: PhaseCounters | None = None,
                       overwrite_a: bool = False) -> tuple[np.ndarray, list[PanelResult]]:
    """Reduce A to banded Hessenberg form (zeros below the m-th subdiagonal).

    Returns the reduced matrix and the panel reflectors; applying all
    stored reflectors to the identity reconstructs the orthogonal factor.
    ``strategy`` chooses between inline trailing updates ("sequential") and
    the overlapped variant ("overlapped") where the rows-above-offset
    update of panel i runs concurrently with panel i+1.  Results are
    bitwise identical across strategies and pool sizes.
    """
    if strategy not in ("sequential", "overlapped"):
        raise ValueError("strategy must be 'sequential' or 'overlapped'")
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatchError("A must be square")
    if not 1 <= m < n:
        raise DimensionMismatchError("band width must satisfy 1 <= m < n")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    Ah = A if overwrite_a else as_fmatrix(A, dtype=np.float64).copy(order="F")
    panels: list[PanelResult] = []
    ncols = max(n - m - 1, 0)
    chain = ThreadPoolExecutor(1) if strategy == "overlapped" else None
    pending = []
    try:
        for idx, zc in enumerate(range(0, ncols, block_size)):
            bw = min(block_size, ncols - zc)
            kb = zc + m
            V, T, Ybot = _process_panel(Ah, zc, bw, kb, m, counter)
            Yfull = np.zeros((n, bw), order="F")
            Yfull[kb:, :] = Ybot
            panels.append(PanelResult(BlockReflector(V, T, Yfull), idx, kb))
            if chain is None:
                _trailing_top(Ah, kb, zc, bw, m, V, T, Yfull[:kb, :], pool_update, counter)
            else:
                pending.append(chain.submit(
                    _trailing_top, Ah, kb, zc, bw, m, V, T, Yfull[:kb, :],
                    pool_update, counter))
            _trailing_bottom(Ah, kb, zc, bw, V, T, Ybot, pool_panel, counter)
        for fut in pending:
            fut.result()
    finally:
        if chain is not None:
            chain.shutdown(wait=True)
    return Ah, panels


def accumulate_q(n: int, panels: list[PanelResult], *,
                 pool: WorkerPool | None = None,
                 counter: PhaseCounters | None = None) -> np.ndarray:
    """Explicit orthogonal factor: the product of all panel reflectors."""
    Q = np.eye(n, order="F")
    for panel in panels:
        kb = panel.offset
        apply_block_reflector("right", panel.reflector, Q[:, kb:],
                              pool=pool, counter=counter, phase=PHASE_REDUCTION)
    return Q


def reduce_controller_hessenberg(A: np.ndarray, B: np.ndarray, C: np.ndarray,
                                 block_size: int = 64, strategy: str = "sequential", *,
                                 accumulate: bool = False,
                                 pool_panel: WorkerPool | None = None,
                                 pool_update: WorkerPool | None = None,
                                 counter: PhaseCounters | None = None) -> ControllerHessForm:
    """Orthogonally reduce (A, B, C): QR of B, similarity on A, band
    reduction of A, and the matching right-updates of C.

    The band width equals B's column count.  Transfer-function values of
    the reduced triple match the original triple up to conditioning-scaled
    roundoff; the orthogonal factor cancels and is only accumulated on
    request.
    """
    A = as_fmatrix(A, dtype=np.float64)
    B = as_fmatrix(B, dtype=np.float64)
    C = as_fmatrix(C, dtype=np.float64)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatchError("A must be square")
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatchError("B must have as many rows as A")
    if C.ndim != 2 or C.shape[1] != n:
        raise DimensionMismatchError("C must have as many columns as A")
    m = B.shape[1]
    p = C.shape[0]
    if not 1 <= m < n:
        raise DimensionMismatchError("need 1 <= m < n (inputs vs state dimension)")

    Ah = A.copy(order="F")
    Bh = B.copy(order="F")
    Ch = C.copy(order="F")
    Q = np.eye(n, order="F") if accumulate else None

    # QR of B by Householder columns, with the similarity applied to A and
    # the right-update applied to C as each reflector is produced.
    flops = 0.0
    for j in range(min(m, n - 1)):
        h, beta = householder_vector(Bh[j:, j])
        Bh[j, j] = beta
        Bh[j + 1:, j] = 0.0
        if h.tau != 0.0:
            v = h.v
            sub = Bh[j:, j + 1:]
            sub -= np.outer(h.tau * v, v @ sub)
            left = Ah[j:, :]
            left -= np.outer(h.tau * v, v @ left)
            right = Ah[:, j:]
            right -= np.outer(right @ v, h.tau * v)
            cr = Ch[:, j:]
            cr -= np.outer(cr @ v, h.tau * v)
            flops += 4.0 * (n - j) * (m - j + 2 * n + p)
            if Q is not None:
                qr = Q[:, j:]
                qr -= np.outer(qr @ v, h.tau * v)
    Bh[m:, :] = 0.0
    add_flops(counter, PHASE_REDUCTION, flops)

    Ah, panels = mhessenberg_reduce(Ah, m, block_size, strategy,
                                    pool_panel=pool_panel, pool_update=pool_update,
                                    counter=counter, overwrite_a=True)
    for panel in panels:
        kb = panel.offset
        apply_block_reflector("right", panel.reflector, Ch[:, kb:],
                              pool=pool_update, counter=counter, phase=PHASE_REDUCTION)
        if Q is not None:
            apply_block_reflector("right", panel.reflector, Q[:, kb:],
                                  pool=pool_update, counter=counter, phase=PHASE_REDUCTION)
    return ControllerHessForm(Ahat=Ah, Bhat=Bh, Chat=Ch, m=m, n=n, p=p, Q=Q)
