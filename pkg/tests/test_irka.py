import numpy as np
import pytest

from shiftsolve.errors import DimensionMismatchError, EigensolverError
from shiftsolve.hessenberg import reduce_controller_hessenberg
from shiftsolve.irka import (
    default_initial_data,
    irka_iterate,
    pair_conjugates,
    relative_hausdorff,
    small_eig_pencil,
)
from shiftsolve.oracles import oracle_irka, oracle_transfer_function

from conftest import make_system


def reduced(n, m, p, seed):
    sysb = make_system(n, m, p, seed)
    return sysb, reduce_controller_hessenberg(sysb.A, sysb.B, sysb.C, block_size=8)


class TestSmallEigPencil:
    def test_diagonal_identity(self):
        E = np.diag([3.0, -1.0, 2.0])
        lam, Y, X = small_eig_pencil(E, np.eye(3))
        assert np.allclose(np.sort(lam.real), [-1.0, 2.0, 3.0], atol=1e-13)

    def test_2x2_quadratic_formula(self):
        # eigenvalues of [[a, b], [c, d]] from the characteristic polynomial
        a, b, c, d = 2.0, 1.0, 3.0, -1.0
        E = np.array([[a, b], [c, d]])
        tr, det = a + d, a * d - b * c
        disc = np.sqrt(tr * tr - 4 * det + 0j)
        expect = np.sort_complex(np.array([(tr + disc) / 2, (tr - disc) / 2]))
        lam, _, _ = small_eig_pencil(E, np.eye(2))
        assert np.allclose(np.sort_complex(lam), expect, atol=1e-12)

    def test_residual_contract(self, rng):
        E = rng.standard_normal((8, 8))
        F = rng.standard_normal((8, 8)) + 8 * np.eye(8)
        lam, Y, X = small_eig_pencil(E, F)
        for i in range(8):
            bound = 1e-10 * (np.linalg.norm(E) + abs(lam[i]) * np.linalg.norm(F))
            assert np.linalg.norm(E @ X[:, i] - lam[i] * (F @ X[:, i])) <= bound
            assert np.linalg.norm(Y[i, :] @ E - lam[i] * (Y[i, :] @ F)) <= bound

    def test_singular_f_rejected(self):
        with pytest.raises(EigensolverError):
            small_eig_pencil(np.eye(2), np.zeros((2, 2)))

    def test_size_cap(self):
        big = np.eye(513)
        with pytest.raises(ValueError):
            small_eig_pencil(big, big)


def test_pair_conjugates_enforces_closure(rng):
    shifts = np.array([1.0 + 2.0j, 1.0 - 2.0000001j, 3.0 + 1e-12j])
    bd = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    cd = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    s, b, c = pair_conjugates(shifts, bd, cd)
    assert np.array_equal(np.sort_complex(s), np.sort_complex(np.conj(s)))
    assert s[2].imag == 0.0
    assert np.array_equal(b[:, 1], np.conj(b[:, 0]))


def test_relative_hausdorff():
    a = np.array([1.0 + 1j, 2.0])
    assert relative_hausdorff(a, a) == 0.0
    b = np.array([1.0 + 1j, 2.2])
    assert relative_hausdorff(a, b) == pytest.approx(0.2 / 2.2)


class TestIrka:
    def test_full_order_rejected(self, rng):
        _, chf = reduced(10, 1, 1, seed=0)
        with pytest.raises(DimensionMismatchError):
            irka_iterate(chf, 10)

    def test_single_iteration_history(self, rng):
        _, chf = reduced(16, 2, 2, seed=1)
        model, state = irka_iterate(chf, 3, maxiter=1, fixed_iters=True, nb=4)
        assert state.iterations == 1
        assert len(state.history) == 1
        assert model.Ar.shape == (3, 3)
        assert model.Br.shape == (3, 2)
        assert model.Cr.shape == (2, 3)
        assert np.all(np.isfinite(model.Ar))

    def test_conjugate_closed_trajectory(self, rng):
        _, chf = reduced(24, 2, 2, seed=2)
        _, state = irka_iterate(chf, 4, maxiter=6, fixed_iters=True, nb=8)
        for rec in state.history:
            s = rec.shifts
            assert np.allclose(np.sort_complex(s), np.sort_complex(np.conj(s)), atol=0)

    def test_orthonormal_bases(self, rng):
        _, chf = reduced(24, 2, 2, seed=3)
        _, state = irka_iterate(chf, 4, maxiter=3, fixed_iters=True, nb=8)
        for M in (state.V, state.W):
            assert np.linalg.norm(M.conj().T @ M - np.eye(4)) <= 1e-12

    def test_siso_trajectory_matches_oracle(self, rng):
        sysb, chf = reduced(30, 1, 1, seed=4)
        s0, b0, c0 = default_initial_data(chf, 4)
        _, state = irka_iterate(chf, 4, s0, b0, c0, maxiter=8, fixed_iters=True, nb=8)
        hist, _ = oracle_irka(sysb.A, sysb.B, sysb.C, 4, s0, b0, c0, maxiter=8)
        for rec, so in zip(state.history, hist):
            assert relative_hausdorff(rec.shifts, so) <= 1e-8

    def test_mimo_tangential_interpolation(self, rng):
        sysb, chf = reduced(30, 2, 2, seed=5)
        model, state = irka_iterate(chf, 4, maxiter=10, fixed_iters=True, nb=8)
        rec = state.history[-1]
        for i in range(4):
            g_full = oracle_transfer_function(sysb.A, sysb.B, sysb.C, rec.shifts[i]) @ rec.b_dirs[:, i]
            g_red = model.transfer(rec.shifts[i]) @ rec.b_dirs[:, i]
            assert np.linalg.norm(g_red - g_full) <= 1e-6 * np.linalg.norm(g_full)

    def test_early_stop_on_tolerance(self, rng):
        _, chf = reduced(20, 1, 1, seed=1)
        _, state = irka_iterate(chf, 2, maxiter=60, tol=1e-8, nb=8)
        assert state.iterations < 60
        assert state.history[-1].shift_change < 1e-8

    def test_spectrum_collision_perturbed(self, rng):
        sysb, chf = reduced(16, 1, 1, seed=7)
        ev = np.linalg.eigvals(chf.Ahat)
        s0 = np.array([complex(ev[0]), 1.0 + 0j])
        b0 = np.ones((1, 2), dtype=complex)
        c0 = np.ones((1, 2), dtype=complex)
        _, state = irka_iterate(chf, 2, s0, b0, c0, maxiter=2, fixed_iters=True, nb=4)
        assert state.perturbations
        assert state.perturbations[0][0] == 0
