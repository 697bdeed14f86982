"""Interpolatory model reduction by fixed-point iteration (IRKA).

Each iteration solves r shifted systems and r transposed shifted systems
on the reduced (controller-Hessenberg) coordinates, orthonormalizes the
two solution bases, projects the system onto them, and mirrors the poles
of the projected pencil into the next shift set, with tangent directions
read off the left and right eigenvectors.  Running in reduced coordinates
is a pure change of basis: the shift trajectory is the same as if the
iteration ran on the original triple.

The reduced model built from the final bases tangentially interpolates
the full transfer function at the final interpolation points, converged
or not; convergence only makes those points stationary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .counters import PhaseCounters
from .errors import DimensionMismatchError, EigensolverError
from .hessenberg import ControllerHessForm
from .kernels import orthonormalize_columns
from .pools import WorkerPool
from .solvers import solve_shifted_reduced, solve_shifted_transposed

MAX_PENCIL_ORDER = 512


@dataclass
class IterationRecord:
    """Interpolation data used by one iteration and the resulting change."""

    shifts: np.ndarray
    b_dirs: np.ndarray
    c_dirs: np.ndarray
    shift_change: float


@dataclass
class IrkaState:
    """Trajectory and final bases of one IRKA run.

    ``history[k]`` holds the shifts and tangent directions the k-th
    iteration interpolated at; ``shifts`` are the next (mirrored) points
    produced by the last iteration.
    """

    r: int
    shifts: np.ndarray
    b_dirs: np.ndarray
    c_dirs: np.ndarray
    V: np.ndarray
    W: np.ndarray
    iterations: int
    history: list[IterationRecord] = field(default_factory=list)
    perturbations: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class ReducedModel:
    """Projected triple (Ar, Br, Cr); transfer value Cr (sI - Ar)^{-1} Br."""

    Ar: np.ndarray
    Br: np.ndarray
    Cr: np.ndarray

    def transfer(self, s: complex) -> np.ndarray:
        r = self.Ar.shape[0]
        return self.Cr @ np.linalg.solve(s * np.eye(r) - self.Ar, self.Br)


def small_eig_pencil(E: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generalized eigenproblem E x = lambda F x of a small dense pencil.

    Returns (eigenvalues, Y, X) with right eigenvectors in the columns of X
    and the rows of Y satisfying Y[i] @ E = lam[i] * (Y[i] @ F).  Delegated
    to the wrapped off-the-shelf dense eigensolver; raises
    :class:`EigensolverError` on failure or a singular F.
    """
    E = np.asarray(E)
    F = np.asarray(F)
    r = E.shape[0]
    if E.shape != (r, r) or F.shape != (r, r):
        raise DimensionMismatchError("pencil matrices must be square and equal size")
    if r > MAX_PENCIL_ORDER:
        raise ValueError(f"pencil order {r} exceeds {MAX_PENCIL_ORDER}")
    try:
        lam, vl, vr = scipy.linalg.eig(E, F, left=True, right=True)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise EigensolverError("pencil has non-finite eigenvalues (singular F?)")
    # scipy's left vectors satisfy vl^H E = lam vl^H F
    return lam, vl.conj().T, vr


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit norm with its largest entry real positive."""
    nv = np.linalg.norm(v)
    if nv == 0:
        return v
    v = v / nv
    pivot = v[int(np.argmax(np.abs(v)))]
    if pivot != 0:
        v = v * (np.conj(pivot) / abs(pivot))
    return v


def pair_conjugates(shifts: np.ndarray, b_dirs: np.ndarray, c_dirs: np.ndarray,
                    rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Enforce exact conjugate closure on a shift set and its directions.

    Real-system poles come in conjugate pairs up to roundoff; each pair is
    averaged to an exact pair and the partner's directions are set to the
    conjugates, so downstream bases span conjugate-closed spaces.
    """
    s = np.array(shifts, dtype=np.complex128)
    bd = np.array(b_dirs, dtype=np.complex128)
    cd = np.array(c_dirs, dtype=np.complex128)
    used = np.zeros(len(s), dtype=bool)
    order = np.lexsort((s.imag, s.real))
    for i in order:
        if used[i]:
            continue
        tol = rtol * (1.0 + abs(s[i]))
        if abs(s[i].imag) <= tol:
            s[i] = s[i].real
            used[i] = True
            continue
        best, dist = -1, np.inf
        for j in range(len(s)):
            if j == i or used[j]:
                continue
            d = abs(s[j] - np.conj(s[i]))
            if d < dist:
                best, dist = j, d
        if best < 0:
            s[i] = s[i].real  # no partner left; collapse to the real axis
            used[i] = True
            continue
        mu = 0.5 * (s[i] + np.conj(s[best]))
        s[i] = mu
        s[best] = np.conj(mu)
        bd[:, best] = np.conj(bd[:, i])
        cd[:, best] = np.conj(cd[:, i])
        used[i] = used[best] = True
    return s, bd, cd


def relative_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between shift sets, relative to scale."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    d1 = max(np.min(np.abs(b - x)) for x in a)
    d2 = max(np.min(np.abs(a - y)) for y in b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(max(d1, d2) / scale)


def default_initial_data(chf: ControllerHessForm, r: int,
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-spaced positive real starting shifts and identity-column
    tangent directions (conjugate-closed by construction)."""
    anorm = float(np.linalg.norm(chf.Ahat, "fro"))
    anorm = anorm if anorm > 0 else 1.0
    shifts = np.logspace(np.log10(anorm * 1e-4), np.log10(anorm), r).astype(np.complex128)
    b_dirs = np.zeros((chf.m, r), dtype=np.complex128)
    c_dirs = np.zeros((chf.p, r), dtype=np.complex128)
    for i in range(r):
        b_dirs[i % chf.m, i] = 1.0
        c_dirs[i % chf.p, i] = 1.0
    return shifts, b_dirs, c_dirs


def irka_iterate(chf: ControllerHessForm, r: int, shifts0=None, b_dirs0=None,
                 c_dirs0=None, maxiter: int = 30, tol: float = 1e-6,
                 fixed_iters: bool = False, nb: int = 32,
                 batch_size: int | None = None, *,
                 pool: WorkerPool | None = None,
                 counter: PhaseCounters | None = None,
                 ) -> tuple[ReducedModel, IrkaState]:
    """Run IRKA on a reduced triple and return the projected model.

    With ``fixed_iters`` the loop always runs ``maxiter`` iterations;
    otherwise it stops early once the relative Hausdorff distance between
    consecutive shift sets drops below ``tol``.  A shift that collides with
    the spectrum is nudged by 1e-8 * ||A||_F and the event recorded in the
    state's ``perturbations``.
    """
    n, m, p = chf.n, chf.m, chf.p
    if not 1 <= r < n:
        raise DimensionMismatchError("reduced order must satisfy 1 <= r < n")
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    if shifts0 is None:
        sigma, bd, cd = default_initial_data(chf, r)
    else:
        sigma = np.array(shifts0, dtype=np.complex128).ravel()
        bd = (np.array(b_dirs0, dtype=np.complex128) if b_dirs0 is not None
              else default_initial_data(chf, r)[1])
        cd = (np.array(c_dirs0, dtype=np.complex128) if c_dirs0 is not None
              else default_initial_data(chf, r)[2])
    if len(sigma) != r or bd.shape != (m, r) or cd.shape != (p, r):
        raise DimensionMismatchError("initial shifts/directions have wrong shape")

    anorm = float(np.linalg.norm(chf.Ahat, "fro"))
    CT = np.asarray(chf.Chat.T, dtype=np.complex128)
    history: list[IterationRecord] = []
    perturbations: list[tuple[int, int]] = []
    V = W = None
    E = F = Bt = Ct = None
    iterations = 0

    for k in range(maxiter):
        for _attempt in range(8):
            res_v = solve_shifted_reduced(chf, sigma, bd, nb, batch_size,
                                          pool=pool, counter=counter, on_singular="mark")
            res_w = solve_shifted_transposed(chf, sigma, CT @ cd, nb, batch_size,
                                             pool=pool, counter=counter, on_singular="mark")
            bad = sorted(set(res_v.failures) | set(res_w.failures))
            if not bad:
                break
            for i in bad:
                sigma[i] = sigma[i] + 1e-8 * anorm
                perturbations.append((k, i))
        else:
            raise EigensolverError("shifts could not be moved off the spectrum")

        V = orthonormalize_columns(res_v.x)
        W = orthonormalize_columns(res_w.x)
        E = W.T @ (chf.Ahat @ V)
        F = W.T @ V
        Bt = W.T @ chf.Bhat
        Ct = chf.Chat @ V
        lam, Y, X = small_eig_pencil(E, F)
        order = np.lexsort((lam.imag, lam.real))
        lam = lam[order]
        Y = Y[order, :]
        X = X[:, order]
        new_sigma = -lam
        new_bd = np.stack([_canonical_phase(Y[i, :] @ Bt) for i in range(r)], axis=1)
        new_cd = np.stack([_canonical_phase(Ct @ X[:, i]) for i in range(r)], axis=1)
        new_sigma, new_bd, new_cd = pair_conjugates(new_sigma, new_bd, new_cd)
        change = relative_hausdorff(new_sigma, sigma)
        history.append(IterationRecord(sigma.copy(), bd.copy(), cd.copy(), change))
        sigma, bd, cd = new_sigma, new_bd, new_cd
        iterations = k + 1
        if not fixed_iters and change < tol:
            break

    Ar = np.linalg.solve(F, E)
    Br = np.linalg.solve(F, Bt)
    Cr = Ct
    model = ReducedModel(Ar=Ar, Br=Br, Cr=Cr)
    state = IrkaState(r=r, shifts=sigma, b_dirs=bd, c_dirs=cd, V=V, W=W,
                      iterations=iterations, history=history,
                      perturbations=perturbations)
    return model, state
