"""Dense column-major kernels.

Matrices throughout the library are numpy arrays in Fortran (column-major)
order; a submatrix view keeps the parent's column stride, so the classic
(rows, cols, leading dimension) picture carries over unchanged.  This module
provides the elementary transforms everything else is composed from:
Householder reflectors, Givens rotations, compact WY block reflectors, and
the multiply / triangular-solve primitives.

Real input data is float64; anything shift-dependent is complex128.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counters import PHASE_OUTER_GEMM, PhaseCounters, add_flops, gemm_flops
from .errors import DimensionMismatchError, SingularDiagonalError
from .pools import WorkerPool, chunk_ranges, run_tasks

EPS = float(np.finfo(np.float64).eps)

#: fixed column width of one gemm chunk; never derived from the worker count
GEMM_COL_BLOCK = 256


def fmat(rows: int, cols: int, dtype=np.float64) -> np.ndarray:
    """Zero-initialized column-major matrix."""
    return np.zeros((rows, cols), dtype=dtype, order="F")


def as_fmatrix(a, dtype=None) -> np.ndarray:
    """Column-major copy (or view, if already conforming) of ``a``."""
    return np.asfortranarray(a, dtype=dtype)


@dataclass
class Householder:
    """Elementary reflector I - tau * v v^H with v[0] == 1."""

    v: np.ndarray
    tau: complex


@dataclass
class GivensRotation:
    """Plane rotation with real nonnegative cosine."""

    c: float
    s: complex


@dataclass
class BlockReflector:
    """Compact WY aggregate Q = I - V T V^H.

    V is unit lower-trapezoidal (implicit structure; stored densely with
    exact zeros above each reflector's head), T is upper triangular.  Y
    optionally carries the running product A V T maintained by the band
    reduction.
    """

    V: np.ndarray
    T: np.ndarray
    Y: np.ndarray | None = None

    @property
    def order(self) -> int:
        return self.T.shape[0]


def householder_vector(x: np.ndarray) -> tuple[Householder, complex]:
    """Reflector annihilating all but the first entry of ``x``.

    Returns ``(h, beta)`` with ``(I - tau v v^H)^H x = beta e1`` and the
    non-cancelling sign choice beta = -sign(Re x[0]) * ||x||.  A vector that
    is already collapsed (or zero) yields tau = 0 and the identity.
    """
    x = np.asarray(x)
    if x.size == 0:
        raise DimensionMismatchError("householder_vector needs a nonempty vector")
    alpha = x.flat[0]
    tail = x.flat[1:]
    sigma = float(np.real(np.vdot(tail, tail)))
    v = np.zeros(x.size, dtype=x.dtype)
    v[0] = 1.0
    iscomplex = np.iscomplexobj(x)
    if sigma == 0.0 and (not iscomplex or alpha.imag == 0.0):
        return Householder(v, 0.0 * alpha), alpha
    anorm = np.sqrt(abs(alpha) ** 2 + sigma)
    beta = -anorm if np.real(alpha) >= 0 else anorm
    tau = (beta - alpha) / beta
    v[1:] = tail / (alpha - beta)
    if not iscomplex:
        tau = float(np.real(tau))
        beta = float(beta)
    return Householder(v, tau), beta


def apply_householder_left(h: Householder, M: np.ndarray) -> None:
    """M <- (I - tau v v^H) M, in place."""
    if h.tau == 0:
        return
    w = h.v.conj() @ M
    M -= h.tau * np.outer(h.v, w)


def apply_householder_right(h: Householder, M: np.ndarray) -> None:
    """M <- M (I - tau v v^H), in place."""
    if h.tau == 0:
        return
    w = M @ h.v
    M -= np.outer(w, h.tau * h.v.conj())


def givens(a: complex, b: complex) -> tuple[GivensRotation, complex]:
    """Rotation G with G applied to (a, b) giving (r, 0).

    The cosine is real and nonnegative; |r| = hypot(|a|, |b|).  (a, 0) maps
    to the identity rotation, (0, b) to a pure swap.
    """
    if b == 0:
        one = 1.0
        return GivensRotation(one, 0.0 * b), a
    if a == 0:
        babs = abs(b)
        return GivensRotation(0.0, np.conj(b) / babs), babs + 0 * b
    aabs = abs(a)
    d = np.hypot(aabs, abs(b))
    phase = a / aabs
    c = aabs / d
    s = phase * np.conj(b) / d
    r = phase * d
    return GivensRotation(float(c), s), r


def rotate_columns(M: np.ndarray, helper: int, target: int, c: float, s: complex,
                   row_lo: int = 0, row_hi: int | None = None) -> None:
    """Apply a Givens rotation to the column pair (helper, target) of rows
    [row_lo, row_hi) of ``M`` in place.

    Column ``helper`` receives c*helper + s*target; column ``target``
    receives c*target - conj(s)*helper, which zeroes the row the rotation
    was generated from.
    """
    if row_hi is None:
        row_hi = M.shape[0]
    xh = M[row_lo:row_hi, helper].copy()
    xt = M[row_lo:row_hi, target]
    M[row_lo:row_hi, helper] = c * xh + s * xt
    M[row_lo:row_hi, target] = c * xt - np.conj(s) * xh


def reflector_t_column(V: np.ndarray, T: np.ndarray, j: int, tau: complex) -> None:
    """Grow the upper-triangular T factor by one reflector (column j of V)."""
    if j > 0:
        T[:j, j] = -tau * (T[:j, :j] @ (V[:, :j].conj().T @ V[:, j]))
    T[j, j] = tau


def apply_block_reflector(side: str, refl: BlockReflector, M: np.ndarray, *,
                          pool: WorkerPool | None = None,
                          counter: PhaseCounters | None = None,
                          phase: str = PHASE_OUTER_GEMM) -> np.ndarray:
    """Apply a compact WY reflector to ``M`` in place.

    side == "left":  M <- (I - V T^H V^H) M
    side == "right": M <- M (I - V T V^H)

    The left form is the adjoint used for similarity updates.  Work is
    split into fixed column (left) or row (right) chunks.
    """
    V, T = refl.V, refl.T
    j = T.shape[0]
    if j == 0 or M.size == 0:
        return M
    cplx = np.iscomplexobj(M) or np.iscomplexobj(V)
    if side == "left":
        if M.shape[0] != V.shape[0]:
            raise DimensionMismatchError("left reflector: row mismatch")

        def task(c0, c1):
            W = V.conj().T @ M[:, c0:c1]
            W = T.conj().T @ W
            M[:, c0:c1] -= V @ W

        tasks = [(lambda a=a, b=b: task(a, b)) for a, b in chunk_ranges(M.shape[1], GEMM_COL_BLOCK)]
        run_tasks(pool, tasks)
        add_flops(counter, phase,
                  gemm_flops(j, M.shape[1], V.shape[0], cplx) * 2
                  + gemm_flops(j, M.shape[1], j, cplx))
    elif side == "right":
        if M.shape[1] != V.shape[0]:
            raise DimensionMismatchError("right reflector: column mismatch")

        def task(r0, r1):
            W = (M[r0:r1, :] @ V) @ T
            M[r0:r1, :] -= W @ V.conj().T

        tasks = [(lambda a=a, b=b: task(a, b)) for a, b in chunk_ranges(M.shape[0], GEMM_COL_BLOCK)]
        run_tasks(pool, tasks)
        add_flops(counter, phase,
                  gemm_flops(M.shape[0], j, V.shape[0], cplx) * 2
                  + gemm_flops(M.shape[0], j, j, cplx))
    else:
        raise ValueError("side must be 'left' or 'right'")
    return M


def gemm_acc(alpha: complex, X: np.ndarray, Y: np.ndarray, beta: complex, Z: np.ndarray, *,
             pool: WorkerPool | None = None, col_block: int | None = None,
             counter: PhaseCounters | None = None,
             phase: str = PHASE_OUTER_GEMM) -> np.ndarray:
    """Z <- alpha * X @ Y + beta * Z, in place on Z.

    The update runs in fixed column chunks (``col_block`` columns each), so
    the result is bitwise identical for any worker count and any batch
    composition that preserves chunk boundaries.
    """
    mm, kk = X.shape
    k2, nn = Y.shape
    if kk != k2 or Z.shape != (mm, nn):
        raise DimensionMismatchError(
            f"gemm_acc: ({mm}x{kk}) @ ({k2}x{nn}) -> {Z.shape}")
    if col_block is None:
        col_block = max(nn, 1)

    def task(c0, c1):
        prod = X @ Y[:, c0:c1]
        if beta == 0:
            Z[:, c0:c1] = alpha * prod
        elif beta == 1:
            Z[:, c0:c1] += alpha * prod
        else:
            Z[:, c0:c1] = alpha * prod + beta * Z[:, c0:c1]

    tasks = [(lambda a=a, b=b: task(a, b)) for a, b in chunk_ranges(nn, col_block)]
    run_tasks(pool, tasks)
    cplx = np.iscomplexobj(Z) or np.iscomplexobj(X) or np.iscomplexobj(Y)
    add_flops(counter, phase, gemm_flops(mm, nn, kk, cplx))
    return Z


def trsm_upper(R: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve R X = B for upper-triangular R by back substitution.

    Raises :class:`SingularDiagonalError` naming the first zero diagonal.
    """
    R = np.asarray(R)
    B = np.asarray(B)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionMismatchError("trsm_upper: R must be square")
    m = R.shape[0]
    vec = B.ndim == 1
    rhs = B.reshape(m, -1) if vec else B
    if rhs.shape[0] != m:
        raise DimensionMismatchError("trsm_upper: row mismatch")
    dtype = np.result_type(R.dtype, rhs.dtype)
    X = np.zeros(rhs.shape, dtype=dtype, order="F")
    for i in range(m - 1, -1, -1):
        piv = R[i, i]
        if piv == 0:
            raise SingularDiagonalError(i)
        X[i, :] = (rhs[i, :] - R[i, i + 1:] @ X[i + 1:, :]) / piv
    return X[:, 0] if vec else X


def orthonormalize_columns(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the columns of M via twice-iterated MGS.

    Raises ValueError on (numerically) dependent columns.
    """
    M = np.array(M, dtype=np.result_type(M.dtype, np.float64), order="F")
    n, k = M.shape
    Q = np.zeros((n, k), dtype=M.dtype, order="F")
    for j in range(k):
        v = M[:, j].copy()
        scale = np.linalg.norm(v)
        for _ in range(2):
            if j > 0:
                v -= Q[:, :j] @ (Q[:, :j].conj().T @ v)
        nv = np.linalg.norm(v)
        if nv <= 1e3 * n * EPS * max(scale, 1e-300):
            raise ValueError(f"column {j} is numerically dependent")
        Q[:, j] = v / nv
    return Q
