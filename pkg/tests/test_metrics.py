"""Metrology metrics: closed forms, cross-oracles, decomposition identities."""

import numpy as np
import pytest

from cdqfi.magnus import TimeGrid, evolve_sequential
from cdqfi.metrics import (
    ExtremalPair,
    extremal_pair,
    extremal_subspace_trace,
    fidelity_block,
    gap_series,
    qfi_central_diff,
    qfi_max_bound,
    qfi_via_generator,
    schrodinger_residual,
    sx_operator,
    symmetry_mismatch,
    unitarity_error,
)

Z = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)


def random_state(dim, rng):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_pair(dim, rng):
    m = rng.standard_normal((dim, 2)) + 1j * rng.standard_normal((dim, 2))
    q, _ = np.linalg.qr(m)
    return ExtremalPair(-1.0, 1.0, q[:, 0], q[:, 1], False)


class TestExtremalPair:
    def test_orthonormal_and_ordered(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        m = (m + m.conj().T) / 2
        pair = extremal_pair(m)
        assert pair.val_min <= pair.val_max
        np.testing.assert_allclose(np.linalg.norm(pair.vec_min), 1.0, atol=1e-12)
        np.testing.assert_allclose(
            np.vdot(pair.vec_min, pair.vec_max), 0.0, atol=1e-11
        )
        assert not pair.degenerate

    def test_degeneracy_flagged(self):
        assert extremal_pair(np.eye(3, dtype=complex)).degenerate


class TestQfiCentralDiff:
    def test_omega_independent_dynamics(self):
        psi = random_state(4, np.random.default_rng(1))
        fq, _ = qfi_central_diff(lambda w: psi, 1.0, 1e-6)
        assert abs(fq) < 1e-9

    def test_global_phase_only(self):
        psi = random_state(4, np.random.default_rng(2))
        fq, _ = qfi_central_diff(lambda w: np.exp(-1j * w * 3.7) * psi, 1.0, 1e-6)
        assert abs(fq) < 1e-6

    def test_single_qubit_ramsey_closed_form(self):
        # H = (omega/2) Z, probe |+>, horizon 1: figure of merit = T^2
        def evolve(w):
            return np.exp(-1j * (w / 2) * np.diag(Z) * 1.0) * PLUS

        fq, _ = qfi_central_diff(evolve, 1.0, 1e-6)
        np.testing.assert_allclose(fq, 1.0, rtol=1e-6)

    def test_delta_stability(self):
        def evolve(w):
            return np.exp(-1j * (w / 2) * np.diag(Z)) * PLUS

        fq1, _ = qfi_central_diff(evolve, 1.0, 1e-6)
        fq2, _ = qfi_central_diff(evolve, 1.0, 5e-7)
        assert abs(fq2 - fq1) / fq1 < 1e-4

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            qfi_central_diff(lambda w: np.array([1.0, 1.0]), 1.0, 1e-6)


class TestQfiMaxBound:
    def test_zero_sensitivity(self):
        grid = TimeGrid(16)
        dh = np.zeros((16, 2, 2), dtype=complex)
        assert qfi_max_bound(dh, grid) == 0.0

    def test_constant_z_gap(self):
        grid = TimeGrid(64)
        c = 0.7
        dh = np.broadcast_to(c * Z, (64, 2, 2)).copy()
        np.testing.assert_allclose(qfi_max_bound(dh, grid), (2 * c) ** 2, rtol=1e-12)

    def test_time_scaling_quadruples(self):
        dh = np.broadcast_to(Z, (64, 2, 2)).copy()
        b1 = qfi_max_bound(dh, TimeGrid(64, horizon=1.0))
        b2 = qfi_max_bound(dh, TimeGrid(64, horizon=2.0))
        np.testing.assert_allclose(b2, 4 * b1, rtol=1e-12)


class TestGeneratorOracle:
    def test_zero_sensitivity(self):
        grid = TimeGrid(8)
        pre = np.broadcast_to(np.eye(2, dtype=complex), (8, 2, 2)).copy()
        dh = np.zeros((8, 2, 2), dtype=complex)
        assert qfi_via_generator(pre, dh, grid, PLUS) == 0.0

    def test_commuting_constant_matches_central_difference(self):
        grid = TimeGrid(256)
        h = np.broadcast_to(0.5 * Z, (256, 2, 2)).copy()  # omega = 1
        seq = evolve_sequential(PLUS, h, grid, want_prefix=True)
        dh = np.broadcast_to(0.5 * Z, (256, 2, 2)).copy()
        fq_gen = qfi_via_generator(seq.prefix_ops, dh, grid, PLUS)

        def evolve(w):
            return np.exp(-1j * (w / 2) * np.diag(Z)) * PLUS

        fq_cd, _ = qfi_central_diff(evolve, 1.0, 1e-6)
        np.testing.assert_allclose(fq_gen, 1.0, rtol=1e-3)
        assert abs(fq_gen - fq_cd) / fq_cd < 1e-3

    def test_noncommuting_dynamics_cross_agreement(self):
        # the step-transport term keeps both routes within 1e-3 at N_t = 256
        grid = TimeGrid(256)
        X = np.array([[0, 1], [1, 0]], dtype=complex)

        def h_of(w):
            t = grid.times[:, None, None]
            return 0.8 * X[None] + (w / 2) * np.sin(2.3 * t) * Z[None]

        def dh_of(w):
            t = grid.times[:, None, None]
            return 0.5 * np.sin(2.3 * t) * Z[None] + 0.0 * X[None]

        def evolve(w):
            return evolve_sequential(PLUS, h_of(w), grid).psi_final

        fq_cd, _ = qfi_central_diff(evolve, 1.0, 1e-6)
        seq = evolve_sequential(PLUS, h_of(1.0), grid, want_prefix=True)
        fq_gen = qfi_via_generator(
            seq.prefix_ops, dh_of(1.0), grid, PLUS, h_samples=h_of(1.0)
        )
        assert abs(fq_gen - fq_cd) / fq_cd < 1e-3


class TestFidelityBlock:
    def test_balanced_superposition(self):
        rng = np.random.default_rng(3)
        pair = random_pair(4, rng)
        psi = (pair.vec_min + pair.vec_max) / np.sqrt(2)
        block = fidelity_block(psi, pair)
        np.testing.assert_allclose(
            [block.fidelity, block.balance, block.cos_dphi], [1.0, 1.0, 1.0],
            atol=1e-12,
        )

    def test_one_sided_population(self):
        rng = np.random.default_rng(4)
        pair = random_pair(4, rng)
        block = fidelity_block(pair.vec_max.copy(), pair)
        np.testing.assert_allclose(block.fidelity, 0.5, atol=1e-12)
        np.testing.assert_allclose(block.balance, 0.0, atol=1e-12)
        np.testing.assert_allclose(block.p_max, 1.0, atol=1e-12)

    def test_antiphase(self):
        rng = np.random.default_rng(5)
        pair = random_pair(4, rng)
        psi = (pair.vec_min - pair.vec_max) / np.sqrt(2)
        block = fidelity_block(psi, pair)
        np.testing.assert_allclose(block.fidelity, 0.0, atol=1e-12)
        np.testing.assert_allclose(block.balance, 1.0, atol=1e-12)
        np.testing.assert_allclose(block.cos_dphi, -1.0, atol=1e-12)

    def test_decomposition_identity_random(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            pair = random_pair(5, rng)
            block = fidelity_block(random_state(5, rng), pair)
            assert 0.0 <= block.balance <= 1.0
            assert 0.0 <= block.fidelity <= 1.0


class TestSchrodingerResidual:
    def test_constant_h_eigenstate_small_residual(self):
        # exact evolution leaves only the discretization floor, dominated by
        # the one-sided endpoint derivatives; it shrinks as the grid refines
        floors = []
        for n_t in (128, 256, 512):
            grid = TimeGrid(n_t)
            h = np.broadcast_to(Z, (n_t, 2, 2)).copy()
            states = np.stack(
                [np.exp(-1j * t) * np.array([1, 0]) for t in grid.times]
            )
            res, flag = schrodinger_residual(states, h, grid)
            assert not flag
            floors.append(res)
        assert floors[0] < 5e-4
        assert floors[2] < floors[1] < floors[0]

    def test_zero_hamiltonian_constant_state_flagged(self):
        grid = TimeGrid(16)
        states = np.broadcast_to(np.array([1.0, 0.0]), (16, 2)).astype(complex)
        res, flag = schrodinger_residual(states, np.zeros((16, 2, 2)), grid)
        assert res == 0.0 and flag

    def test_needs_three_points(self):
        grid = TimeGrid(2)
        with pytest.raises(ValueError):
            schrodinger_residual(
                np.zeros((2, 2), dtype=complex), np.zeros((2, 2, 2)), grid
            )


class TestUnitarity:
    def test_identity_props(self):
        props = np.broadcast_to(np.eye(4, dtype=complex), (8, 4, 4)).copy()
        assert unitarity_error(props) == 0.0

    def test_exact_rotations(self):
        from scipy.linalg import expm

        rng = np.random.default_rng(7)
        ms = rng.standard_normal((6, 4, 4)) + 1j * rng.standard_normal((6, 4, 4))
        hs = (ms + ms.conj().swapaxes(-1, -2)) / 2
        props = np.stack([expm(-1j * h) for h in hs])
        assert unitarity_error(props) <= 1e-12

    def test_scaled_unitary_closed_form(self):
        props = np.array([[[1.01]]], dtype=complex)
        np.testing.assert_allclose(unitarity_error(props), 1.01**2 - 1, rtol=1e-12)


class TestDiagnostics:
    def test_p_ext_tracks_membership(self):
        rng = np.random.default_rng(8)
        pairs = [random_pair(4, rng) for _ in range(5)]
        states_in = np.stack([p.vec_max for p in pairs])
        np.testing.assert_allclose(
            extremal_subspace_trace(states_in, pairs), np.ones(5), atol=1e-12
        )
        # orthogonal complement states
        outs = []
        for p in pairs:
            psi = random_state(4, rng)
            psi -= np.vdot(p.vec_min, psi) * p.vec_min
            psi -= np.vdot(p.vec_max, psi) * p.vec_max
            outs.append(psi / np.linalg.norm(psi))
        np.testing.assert_allclose(
            extremal_subspace_trace(np.stack(outs), pairs), np.zeros(5), atol=1e-12
        )

    def test_p_ext_in_unit_interval(self):
        rng = np.random.default_rng(9)
        pairs = [random_pair(4, rng) for _ in range(50)]
        states = np.stack([random_state(4, rng) for _ in range(50)])
        vals = extremal_subspace_trace(states, pairs)
        assert np.all(vals >= 0) and np.all(vals <= 1 + 1e-12)

    def test_symmetry_mismatch_self_commutation(self):
        sx = sx_operator(2)
        ops = sx[None].copy()
        np.testing.assert_allclose(symmetry_mismatch(ops, sx), [0.0], atol=1e-15)

    def test_symmetry_mismatch_hand_value(self):
        sx = sx_operator(1)
        ops = Z[None].copy()
        np.testing.assert_allclose(
            symmetry_mismatch(ops, sx), [np.sqrt(2)], rtol=1e-12
        )

    def test_symmetry_mismatch_identity_and_zero(self):
        sx = sx_operator(1)
        ops = np.stack([np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex)])
        np.testing.assert_allclose(symmetry_mismatch(ops, sx), [0.0, 0.0], atol=1e-15)

    def test_gap_series_constant(self):
        dh = np.broadcast_to(0.3 * Z, (7, 2, 2)).copy()
        np.testing.assert_allclose(gap_series(dh), np.full(7, 0.6), atol=1e-12)
