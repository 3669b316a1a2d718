import numpy as np
import pytest

from cstomo import pauli

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def random_hermitian(d, rng):
    M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return M + M.conj().T


def all_dense(n):
    return [pauli.dense_matrix(pauli.label_from_index(a, n)) for a in range(4**n)]


class TestLabelIndexing:
    def test_zero_index_is_identity(self):
        p = pauli.label_from_index(0, 1)
        assert (p.u, p.v) == (0, 0)
        assert p.is_identity

    def test_index_three_single_qubit(self):
        p = pauli.label_from_index(3, 1)
        assert (p.u, p.v) == (1, 1)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_round_trip_bijection(self, n):
        seen = set()
        for a in range(4**n):
            p = pauli.label_from_index(a, n)
            assert pauli.index_from_label(p) == a
            seen.add((p.u, p.v))
        assert len(seen) == 4**n

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            pauli.label_from_index(16, 1)
        with pytest.raises(ValueError):
            pauli.label_from_index(-1, 2)
        with pytest.raises(ValueError):
            pauli.PauliLabel(n=2, u=4, v=0)


class TestDenseMatrix:
    def test_single_qubit_x(self):
        assert np.array_equal(
            pauli.dense_matrix(pauli.PauliLabel(1, 1, 0)), SIGMA_X
        )

    def test_single_qubit_y_from_phase_convention(self):
        # hand multiplication: i * sigma_x * sigma_z
        expected = 1j * SIGMA_X @ SIGMA_Z
        got = pauli.dense_matrix(pauli.PauliLabel(1, 1, 1))
        assert np.allclose(got, expected, atol=1e-15)
        assert np.allclose(got, SIGMA_Y, atol=1e-15)

    def test_single_qubit_z(self):
        assert np.array_equal(
            pauli.dense_matrix(pauli.PauliLabel(1, 0, 1)), SIGMA_Z
        )

    def test_kron_ordering_qubit0_least_significant(self):
        # X on qubit 0 only: should flip the least significant bit
        p = pauli.PauliLabel(n=2, u=1, v=0)
        expected = np.kron(np.eye(2), SIGMA_X)
        assert np.allclose(pauli.dense_matrix(p), expected)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_hermitian_unitary_traceless(self, n):
        for a, W in enumerate(all_dense(n)):
            assert np.allclose(W, W.conj().T, atol=1e-12)
            assert np.allclose(W @ W.conj().T, np.eye(2**n), atol=1e-12)
            if a != 0:
                assert abs(np.trace(W)) < 1e-12
            assert abs(np.linalg.norm(W, 2) - 1.0) < 1e-10

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            pauli.dense_matrix(pauli.PauliLabel(n=15, u=0, v=0))


class TestOrthogonality:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_trace_orthogonality(self, n):
        d = 2**n
        W = all_dense(n)
        G = np.array([[np.trace(Wa @ Wb) for Wb in W] for Wa in W])
        assert np.allclose(G, d * np.eye(4**n), atol=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_basis_completeness(self, n):
        d = 2**n
        rng = np.random.default_rng(n)
        M = random_hermitian(d, rng)
        W = all_dense(n)
        recon = sum(Wa * np.trace(M @ Wa) for Wa in W) / d
        assert np.max(np.abs(recon - M)) < 1e-10


class TestExpectation:
    def test_maximally_mixed_vs_nonidentity(self):
        d = 8
        rho = np.eye(d) / d
        for a in range(1, 64):
            assert abs(pauli.expectation(rho, pauli.label_from_index(a, 3))) < 1e-14

    def test_z_eigenstate(self):
        rho = np.zeros((2, 2), dtype=complex)
        rho[0, 0] = 1.0
        assert pauli.expectation(rho, pauli.PauliLabel(1, 0, 1)) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_dense_oracle(self, n):
        d = 2**n
        rng = np.random.default_rng(17)
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = G @ G.conj().T
        rho /= np.trace(rho).real
        for a, W in enumerate(all_dense(n)):
            want = np.trace(rho @ W).real
            got = pauli.expectation(rho, pauli.label_from_index(a, n))
            assert abs(got - want) < 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pauli.expectation(np.eye(4) / 4, pauli.PauliLabel(1, 0, 1))


class TestApplyPauli:
    def test_identity_label(self):
        x = np.arange(8, dtype=complex)
        out = pauli.apply_pauli(pauli.PauliLabel(3, 0, 0), x)
        assert np.array_equal(out, x)

    def test_bit_flip(self):
        out = pauli.apply_pauli(pauli.PauliLabel(1, 1, 0), np.array([1.0, 0.0]))
        assert np.allclose(out, [0.0, 1.0])

    def test_involution_random(self):
        rng = np.random.default_rng(3)
        n, d = 3, 8
        for _ in range(100):
            a = int(rng.integers(0, 4**n))
            p = pauli.label_from_index(a, n)
            x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            assert np.allclose(pauli.apply_pauli(p, pauli.apply_pauli(p, x)), x, atol=1e-14)

    def test_matches_dense_action(self):
        rng = np.random.default_rng(5)
        n, d = 2, 4
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        for a in range(16):
            p = pauli.label_from_index(a, n)
            assert np.allclose(pauli.apply_pauli(p, x), pauli.dense_matrix(p) @ x, atol=1e-13)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pauli.apply_pauli(pauli.PauliLabel(2, 1, 0), np.zeros(3))


class TestSparseAction:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_structure(self, n):
        d = 2**n
        for a in range(4**n):
            p = pauli.label_from_index(a, n)
            act = pauli.sparse_action(p)
            W = pauli.dense_matrix(p)
            # one unit-modulus entry per column at row j ^ u
            assert np.allclose(np.abs(act.phase), 1.0)
            for j in range(d):
                assert abs(W[act.perm[j], j] - act.phase[j]) < 1e-14

    def test_fwht_matches_brute_force(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(16)
        H = np.array(
            [[(-1) ** bin(i & j).count("1") for j in range(16)] for i in range(16)]
        )
        assert np.allclose(pauli.fwht(x), H @ x, atol=1e-12)

    def test_fwht_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            pauli.fwht(np.zeros(12))

    def test_str_representation(self):
        assert str(pauli.PauliLabel(2, 1, 0)) == "IX"
        assert str(pauli.PauliLabel(2, 2, 2)) == "YI"
        assert str(pauli.PauliLabel(2, 0, 0)) == "II"
