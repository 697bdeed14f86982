import numpy as np
import pytest

from shiftsolve.batched import BlockBatch, batched_lq, batched_rq
from shiftsolve.errors import DimensionMismatchError, SingularShiftError
from shiftsolve.kernels import EPS
from shiftsolve.oracles import reference_rq
from shiftsolve.pools import WorkerPool
from shiftsolve.schedule import greedy_schedule, mirrored_schedule


def random_trapezoid(rng, nr, nc):
    Z = rng.standard_normal((nr, nc)) + 1j * rng.standard_normal((nr, nc))
    for r in range(nr):
        Z[r, :r] = 0.0
    return Z


def fill_batch(rng, nr, nc, s, maker=random_trapezoid):
    batch = BlockBatch.zeros(nr, nc, s)
    for l in range(s):
        batch.z_block(l)[:, :] = maker(rng, nr, nc)
    return batch


class TestBatchedRQ:
    def test_triangular_input_gives_identity_rotations(self, rng):
        nr, nc = 3, 5
        Z = np.zeros((nr, nc), dtype=complex)
        for r in range(nr):
            Z[r, r + 2:] = rng.standard_normal(nc - r - 2)  # targets already zero
        batch = BlockBatch.zeros(nr, nc, 1)
        batch.z_block(0)[:, :] = Z
        batched_rq(batch, greedy_schedule(nr, nc))
        assert np.array_equal(batch.p_block(0), np.eye(nc, dtype=complex))
        assert np.array_equal(batch.z_block(0), Z)

    def test_reconstruction_single_block(self, rng):
        #R @ P reconstructs the input; the oracle is the rotation product P*
        nr, nc = 3, 5
        Z = random_trapezoid(rng, nr, nc)
        batch = BlockBatch.zeros(nr, nc, 1)
        batch.z_block(0)[:, :] = Z
        batched_rq(batch, greedy_schedule(nr, nc))
        R = batch.z_block(0)
        Pstar = batch.p_block(0)
        recon = R @ Pstar.conj().T
        assert np.linalg.norm(recon - Z) <= 1e-13 * np.linalg.norm(Z)
        assert np.linalg.norm(Pstar.conj().T @ Pstar - np.eye(nc)) <= 1e-13

    def test_matches_reference_rq_triangle(self, rng):
        nr, nc = 4, 7
        Z = random_trapezoid(rng, nr, nc)
        batch = BlockBatch.zeros(nr, nc, 1)
        batch.z_block(0)[:, :] = Z
        batched_rq(batch, greedy_schedule(nr, nc))
        R_ref, P_ref = reference_rq(Z)
        # triangles agree up to per-column unitary phases; compare moduli
        delta = nc - nr
        for r in range(nr):
            assert np.allclose(np.abs(batch.z_block(0)[r, r + delta:]),
                               np.abs(R_ref[r, r + delta:]), atol=1e-12)
        assert np.linalg.norm(Z - R_ref @ P_ref) <= 1e-13 * np.linalg.norm(Z)

    def test_annihilated_positions_exactly_zero(self, rng):
        nr, nc = 5, 8
        batch = fill_batch(rng, nr, nc, 2)
        batched_rq(batch, greedy_schedule(nr, nc))
        delta = nc - nr
        for l in range(2):
            R = batch.z_block(l)
            for r in range(nr):
                assert np.all(R[r, :r + delta] == 0.0)

    def test_identical_blocks_bitwise(self, rng):
        nr, nc = 4, 6
        Z = random_trapezoid(rng, nr, nc)
        batch = BlockBatch.zeros(nr, nc, 4)
        for l in range(4):
            batch.z_block(l)[:, :] = Z
        batched_rq(batch, greedy_schedule(nr, nc))
        for l in range(1, 4):
            assert np.array_equal(batch.z_block(l), batch.z_block(0))
            assert np.array_equal(batch.p_block(l), batch.p_block(0))

    def test_batch_independence_vs_single(self, rng):
        nr, nc = 4, 6
        blocks = [random_trapezoid(rng, nr, nc) for _ in range(3)]
        multi = BlockBatch.zeros(nr, nc, 3)
        for l, Z in enumerate(blocks):
            multi.z_block(l)[:, :] = Z
        batched_rq(multi, greedy_schedule(nr, nc))
        for l, Z in enumerate(blocks):
            single = BlockBatch.zeros(nr, nc, 1)
            single.z_block(0)[:, :] = Z
            batched_rq(single, greedy_schedule(nr, nc))
            assert np.array_equal(single.z_block(0), multi.z_block(l))
            assert np.array_equal(single.p_block(0), multi.p_block(l))

    def test_worker_count_bitwise(self, rng):
        nr, nc = 6, 9
        blocks = [random_trapezoid(rng, nr, nc) for _ in range(5)]
        outs = []
        for workers in (1, 4):
            batch = BlockBatch.zeros(nr, nc, 5)
            for l, Z in enumerate(blocks):
                batch.z_block(l)[:, :] = Z
            with WorkerPool(workers) as pool:
                batched_rq(batch, greedy_schedule(nr, nc), pool=pool)
            outs.append((batch.Z.copy(), batch.P.copy()))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])

    def test_unitarity_of_rotation_product(self, rng):
        nr, nc = 5, 9
        batch = fill_batch(rng, nr, nc, 1)
        sched = greedy_schedule(nr, nc)
        batched_rq(batch, sched)
        P = batch.p_block(0)
        assert np.linalg.norm(P.conj().T @ P - np.eye(nc)) <= 64 * sched.num_rots * EPS

    def test_m_keep_trims(self, rng):
        nr, nc = 4, 6
        batch = fill_batch(rng, nr, nc, 2)
        full = fill_batch(np.random.default_rng(0), nr, nc, 2)
        full.Z[:, :] = batch.Z
        batched_rq(batch, greedy_schedule(nr, nc), m_keep=2)
        batched_rq(full, greedy_schedule(nr, nc))
        for l in range(2):
            assert np.array_equal(batch.p_block(l), full.p_block(l)[:, :2])

    def test_shape_mismatch(self, rng):
        batch = fill_batch(rng, 3, 5, 1)
        with pytest.raises(DimensionMismatchError):
            batched_rq(batch, greedy_schedule(3, 6))


def random_lower_trapezoid(rng, nr, nc):
    delta = nc - nr
    Z = rng.standard_normal((nr, nc)) + 1j * rng.standard_normal((nr, nc))
    for r in range(nr):
        Z[r, r + delta + 1:] = 0.0
    return Z


class TestBatchedLQ:
    def test_zero_superdiagonal_identity_rotations(self, rng):
        # a 1 x (1+m) block whose band entries are already zero
        nr, nc = 1, 4
        batch = BlockBatch.zeros(nr, nc, 1)
        batch.z_block(0)[0, 0] = 2.0
        rhs = np.array([[4.0 + 0j]])
        batched_lq(batch, mirrored_schedule(nr, nc), rhs)
        assert np.array_equal(batch.p_block(0), np.eye(nc, dtype=complex))
        assert rhs[0, 0] == 2.0  # forward substitution fused into the sweep

    def test_flip_symmetry_with_rq(self, rng):
        # transpose-flip of an RQ case: the LQ triangle is the flipped RQ one
        nr, nc = 4, 6
        Z = random_trapezoid(rng, nr, nc)
        rq = BlockBatch.zeros(nr, nc, 1)
        rq.z_block(0)[:, :] = Z
        batched_rq(rq, greedy_schedule(nr, nc))

        lq = BlockBatch.zeros(nr, nc, 1)
        lq.z_block(0)[:, :] = Z[::-1, ::-1]
        rhs = np.zeros((nr, 1), dtype=complex)
        batched_lq(lq, mirrored_schedule(nr, nc), rhs)
        L = lq.z_block(0)
        R = rq.z_block(0)
        assert np.allclose(np.abs(L), np.abs(R[::-1, ::-1]), atol=1e-13 * np.abs(Z).max())

    def test_solves_lower_system(self, rng):
        nr, nc = 5, 8
        Z = random_lower_trapezoid(rng, nr, nc)
        Z[np.arange(nr), np.arange(nr)] += 3.0  # keep pivots comfortable
        batch = BlockBatch.zeros(nr, nc, 1)
        batch.z_block(0)[:, :] = Z
        rhs = rng.standard_normal((nr, 1)) + 1j * rng.standard_normal((nr, 1))
        keep = rhs.copy()
        batched_lq(batch, mirrored_schedule(nr, nc), rhs)
        L = batch.z_block(0)[:, :nr]
        assert np.allclose(np.tril(L), L, atol=0)
        assert np.linalg.norm(L @ rhs[:, 0] - keep[:, 0]) <= 1e-12 * np.linalg.norm(keep)
        # the full factorization reproduces the input block
        P = batch.p_block(0)
        assert np.linalg.norm(batch.z_block(0) @ P.conj().T - Z) \
            <= 1e-12 * np.linalg.norm(Z)

    def test_singular_block_isolated(self, rng):
        nr, nc = 3, 5
        batch = BlockBatch.zeros(nr, nc, 3)
        good = random_lower_trapezoid(rng, nr, nc)
        good[np.arange(nr), np.arange(nr)] += 3.0
        for l in (0, 2):
            batch.z_block(l)[:, :] = good
        # block 1 becomes exactly singular: an all-zero row
        bad = good.copy()
        bad[1, :] = 0.0
        batch.z_block(1)[:, :] = bad
        rhs = np.ones((nr, 3), dtype=complex)
        with pytest.raises(SingularShiftError) as err:
            batched_lq(batch, mirrored_schedule(nr, nc), rhs)
        assert err.value.failures == [(1, 1)]
        # the other blocks completed and match a singleton run
        solo = BlockBatch.zeros(nr, nc, 1)
        solo.z_block(0)[:, :] = good
        rhs1 = np.ones((nr, 1), dtype=complex)
        batched_lq(solo, mirrored_schedule(nr, nc), rhs1)
        for l in (0, 2):
            assert np.array_equal(batch.z_block(l), solo.z_block(0))
            assert np.array_equal(rhs[:, l], rhs1[:, 0])
