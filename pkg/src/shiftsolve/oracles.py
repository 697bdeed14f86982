"""Slow, independent reference implementations.

Everything here exists only to check the fast paths in tests: plain
partial-pivoting LU for shifted solves, an unblocked column-by-column band
reduction with an explicit orthogonal factor, and a one-rotation-at-a-time
RQ.  None of it shares code with the production path beyond numpy storage,
and none of it is tuned for speed (sizes are capped by assertion).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAX_N = 512


@dataclass
class OracleReport:
    """Summary of an oracle comparison sweep."""

    max_relative_error: float
    worst_case_id: str
    residuals: np.ndarray


def lu_factor_pp(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-pivoted LU, returning (LU combined, pivot rows)."""
    M = np.array(M, dtype=np.result_type(M.dtype, np.float64))
    n = M.shape[0]
    assert M.shape == (n, n) and n <= _MAX_N
    piv = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if M[p, k] == 0:
            raise ZeroDivisionError(f"singular at column {k}")
        if p != k:
            M[[k, p], :] = M[[p, k], :]
            piv[[k, p]] = piv[[p, k]]
        M[k + 1:, k] /= M[k, k]
        M[k + 1:, k + 1:] -= np.outer(M[k + 1:, k], M[k, k + 1:])
    return M, piv


def lu_solve_factored(LU: np.ndarray, piv: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = LU.shape[0]
    b = np.array(rhs, dtype=np.result_type(LU.dtype, rhs.dtype))
    vec = b.ndim == 1
    b = b.reshape(n, -1)[piv, :]
    for k in range(n):  # forward, unit lower
        b[k + 1:, :] -= np.outer(LU[k + 1:, k], b[k, :])
    for k in range(n - 1, -1, -1):  # backward, upper
        b[k, :] = (b[k, :] - LU[k, k + 1:] @ b[k + 1:, :]) / LU[k, k]
    return b[:, 0] if vec else b


def lu_solve_shifted(A: np.ndarray, sigma: complex, rhs: np.ndarray,
                     transpose: bool = False) -> np.ndarray:
    """Solve (A - sigma I) x = rhs, or its transpose, by dense LU."""
    n = A.shape[0]
    M = np.asarray(A, dtype=np.complex128) - sigma * np.eye(n)
    if transpose:
        M = M.T.copy()
    LU, piv = lu_factor_pp(M)
    return lu_solve_factored(LU, piv, rhs)


def oracle_transfer_function(A, B, C, sigma) -> np.ndarray:
    """G(sigma) = C (sigma I - A)^{-1} B via one LU solve."""
    X = lu_solve_shifted(A, sigma, np.asarray(B, dtype=np.complex128))
    return -np.asarray(C, dtype=np.complex128) @ X


def reference_mhessenberg(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Unblocked reduction to banded Hessenberg form with explicit Q.

    Column by column, a Householder reflector annihilates everything below
    the m-th subdiagonal and is applied to both sides immediately; Q is
    accumulated densely.  Returns (H, Q) with Q^T A Q = H.
    """
    H = np.array(A, dtype=np.float64)
    n = H.shape[0]
    assert H.shape == (n, n) and n <= _MAX_N and 1 <= m < n
    Q = np.eye(n)
    for j in range(max(n - m - 1, 0)):
        x = H[j + m:, j].copy()
        if x.size <= 1:
            continue
        sigma = float(x[1:] @ x[1:])
        if sigma == 0.0:
            continue
        beta = -np.sign(x[0]) * np.sqrt(x[0] ** 2 + sigma) if x[0] != 0 else -np.sqrt(sigma)
        v = x.copy()
        v[0] = 1.0
        v[1:] /= (x[0] - beta)
        tau = (beta - x[0]) / beta
        H[j + m, j] = beta
        H[j + m + 1:, j] = 0.0
        sub = H[j + m:, j + 1:]
        sub -= np.outer(tau * v, v @ sub)
        right = H[:, j + m:]
        right -= np.outer(right @ v, tau * v)
        qr = Q[:, j + m:]
        qr -= np.outer(qr @ v, tau * v)
    return H, Q


def reference_rq(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full RQ of an upper trapezoid by sequential Givens annihilation.

    Returns (R, P) with Z = R @ P, P unitary and R zero at every (r, c),
    c < r + (nCols - nRows).  Every target in row r is rotated against the
    row's final diagonal column.
    """
    R = np.array(Z, dtype=np.complex128)
    nr, nc = R.shape
    assert nr <= nc <= _MAX_N
    delta = nc - nr
    Pstar = np.eye(nc, dtype=np.complex128)
    for r in range(nr - 1, -1, -1):
        diag = r + delta
        for c in range(diag - 1, r - 1, -1):
            f, g = R[r, diag], R[r, c]
            if g == 0:
                continue
            d = np.hypot(abs(f), abs(g))
            if f == 0:
                cc, ss = 0.0, np.conj(g) / abs(g)
            else:
                cc = abs(f) / d
                ss = (f / abs(f)) * np.conj(g) / d
            for M in (R, Pstar):
                h = M[:, diag].copy()
                t = M[:, c].copy()
                M[:, diag] = cc * h + ss * t
                M[:, c] = cc * t - np.conj(ss) * h
            R[r, c] = 0.0
    return R, Pstar.conj().T


def oracle_max_singular_value(M: np.ndarray) -> float:
    """Largest singular value by explicit SVD."""
    return float(np.linalg.svd(np.asarray(M), compute_uv=False)[0])


def _oracle_phase(v: np.ndarray) -> np.ndarray:
    nv = np.linalg.norm(v)
    if nv == 0:
        return v
    v = v / nv
    piv = v[int(np.argmax(np.abs(v)))]
    return v * (np.conj(piv) / abs(piv)) if piv != 0 else v


def _oracle_pair(s, bd, cd, rtol=1e-9):
    s = np.array(s, dtype=np.complex128)
    bd = np.array(bd, dtype=np.complex128)
    cd = np.array(cd, dtype=np.complex128)
    used = np.zeros(len(s), dtype=bool)
    for i in np.lexsort((s.imag, s.real)):
        if used[i]:
            continue
        if abs(s[i].imag) <= rtol * (1.0 + abs(s[i])):
            s[i] = s[i].real
            used[i] = True
            continue
        cands = [(abs(s[j] - np.conj(s[i])), j)
                 for j in range(len(s)) if j != i and not used[j]]
        if not cands:
            s[i] = s[i].real
            used[i] = True
            continue
        _, j = min(cands)
        mu = 0.5 * (s[i] + np.conj(s[j]))
        s[i], s[j] = mu, np.conj(mu)
        bd[:, j] = np.conj(bd[:, i])
        cd[:, j] = np.conj(cd[:, i])
        used[i] = used[j] = True
    return s, bd, cd


def oracle_irka(A, B, C, r, shifts0, b_dirs0, c_dirs0, maxiter,
                tol=1e-6, fixed_iters=True):
    """IRKA in the original coordinates with per-shift LU solves.

    A deliberately plain re-implementation of the fixed-point iteration:
    dense LU for every system, library QR for the bases, and the same
    conjugate-pairing and phase conventions as the production driver so
    trajectories are comparable.  Returns (shift history, final model).
    """
    import scipy.linalg

    n = A.shape[0]
    assert n <= _MAX_N and 1 <= r < n
    sigma = np.array(shifts0, dtype=np.complex128).ravel()
    bd = np.array(b_dirs0, dtype=np.complex128)
    cd = np.array(c_dirs0, dtype=np.complex128)
    Bc = np.asarray(B, dtype=np.complex128)
    Cc = np.asarray(C, dtype=np.complex128)
    history = []
    model = None
    for _ in range(maxiter):
        history.append(sigma.copy())
        Vcols = np.stack([lu_solve_shifted(A, sigma[i], Bc @ bd[:, i])
                          for i in range(r)], axis=1)
        Wcols = np.stack([lu_solve_shifted(A, sigma[i], Cc.T @ cd[:, i], transpose=True)
                          for i in range(r)], axis=1)
        V, _ = np.linalg.qr(Vcols)
        W, _ = np.linalg.qr(Wcols)
        E = W.T @ A @ V
        F = W.T @ V
        lam, vl, vr = scipy.linalg.eig(E, F, left=True, right=True)
        Y = vl.conj().T
        order = np.lexsort((lam.imag, lam.real))
        lam, Y, vr = lam[order], Y[order, :], vr[:, order]
        Bt = W.T @ Bc
        Ct = Cc @ V
        new_sigma = -lam
        new_bd = np.stack([_oracle_phase(Y[i, :] @ Bt) for i in range(r)], axis=1)
        new_cd = np.stack([_oracle_phase(Ct @ vr[:, i]) for i in range(r)], axis=1)
        new_sigma, new_bd, new_cd = _oracle_pair(new_sigma, new_bd, new_cd)
        model = (np.linalg.solve(F, E), np.linalg.solve(F, Bt), Ct)
        change = max(max(np.min(np.abs(new_sigma - x)) for x in sigma),
                     max(np.min(np.abs(sigma - y)) for y in new_sigma))
        scale = max(np.max(np.abs(sigma)), np.max(np.abs(new_sigma)), 1e-300)
        sigma, bd, cd = new_sigma, new_bd, new_cd
        if not fixed_iters and change / scale < tol:
            break
    return history, model
