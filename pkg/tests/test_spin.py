import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinstar.spin import (EXCITED, GROUND, SpinStarParams, central_spin_operators,
                           collective_spin_operators, is_hermitian, partial_trace_ancilla,
                           partial_trace_central, spin_star_hamiltonian)


def random_density(d, rng):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho)


class TestCollectiveSpins:
    def test_spin_half(self):
        s = collective_spin_operators(1)
        np.testing.assert_array_equal(s.Iz, np.diag([0.5, -0.5]))
        np.testing.assert_array_equal(s.Iplus, np.array([[0, 1], [0, 0]]))

    def test_spin_one_ladder(self):
        s = collective_spin_operators(2)
        np.testing.assert_array_equal(s.Iz, np.diag([1.0, 0.0, -1.0]))
        np.testing.assert_allclose(np.diag(s.Iplus, 1), [np.sqrt(2), np.sqrt(2)], atol=1e-15)
        assert np.count_nonzero(s.Iplus) == 2

    def test_zero_spins_rejected(self):
        with pytest.raises(ValueError):
            collective_spin_operators(0)

    @pytest.mark.parametrize("N", range(1, 13))
    def test_angular_momentum_algebra(self, N):
        s = collective_spin_operators(N)
        I = [s.Ix, s.Iy, s.Iz]
        for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
            comm = I[a] @ I[b] - I[b] @ I[a]
            assert np.abs(comm - 1j * I[c]).max() < 1e-12
        np.testing.assert_array_equal(s.Iplus, s.Ix + 1j * s.Iy)
        np.testing.assert_array_equal(s.Iminus, s.Ix - 1j * s.Iy)
        casimir = sum(op @ op for op in I)
        j = N / 2
        assert np.abs(casimir - j * (j + 1) * np.eye(N + 1)).max() < 1e-12

    def test_commutator_n4(self):
        s = collective_spin_operators(4)
        assert np.abs(s.Ix @ s.Iy - s.Iy @ s.Ix - 1j * s.Iz).max() < 1e-12

    def test_highest_weight_first(self):
        s = collective_spin_operators(5)
        assert s.Iz[0, 0].real == 2.5 and s.Iz[-1, -1].real == -2.5
        assert s.total_spin == 2.5


class TestCentralSpin:
    def test_lowering_annihilates_ground(self):
        sx, sy, sz, sm = central_spin_operators()
        ground = np.zeros(2)
        ground[GROUND] = 1
        excited = np.zeros(2)
        excited[EXCITED] = 1
        np.testing.assert_array_equal(sm @ ground, 0)
        np.testing.assert_array_equal(sm @ excited, ground)
        assert sz[GROUND, GROUND].real == -0.5
        np.testing.assert_allclose(sm, sx - 1j * sy)


class TestParams:
    def test_derived_quantities(self):
        p = SpinStarParams(gamma_reduced=15, N=20)
        assert p.total_spin == 10 and p.Gamma == 150

    @pytest.mark.parametrize("kw", [dict(N=0), dict(N=2.5), dict(gamma_reduced=0),
                                    dict(omega_c=np.nan), dict(J=np.ones((2, 2)))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SpinStarParams(**kw)

    def test_gamma0(self):
        p = SpinStarParams.fig2()
        assert p.gamma0 == 1.0

    def test_roundtrip_dict(self):
        p = SpinStarParams.fig2(N=3, gamma_reduced=7)
        q = SpinStarParams(**{**p.to_dict(), "J": np.array(p.to_dict()["J"])})
        assert q.to_dict() == p.to_dict()


class TestHamiltonian:
    def test_only_central_field(self):
        N = 3
        p = SpinStarParams(omega_c=0.7, J=np.zeros((3, 3)), N=N)
        H = spin_star_hamiltonian(p)
        sz = central_spin_operators()[2]
        np.testing.assert_allclose(H, 0.7 * np.kron(sz, np.eye(N + 1)))
        ev = np.sort(np.linalg.eigvalsh(H))
        np.testing.assert_allclose(ev, np.r_[[-0.35] * (N + 1), [0.35] * (N + 1)], atol=1e-14)

    def test_fig2_shape(self):
        H = spin_star_hamiltonian(SpinStarParams.fig2(N=20))
        assert H.shape == (42, 42)
        assert is_hermitian(H)

    def test_hand_expanded_two_qubits(self):
        p = SpinStarParams(J=np.diag([1.0, 1.0, 0.0]), N=1)
        H = spin_star_hamiltonian(p)
        # J_xx Sx Ix + J_yy Sy Iy = (S+ I- + S- I+)/2 couples |1,down> and |0,up>
        # basis order: |1 up>, |1 down>, |0 up>, |0 down>
        expected = np.zeros((4, 4))
        expected[1, 2] = expected[2, 1] = 0.5
        np.testing.assert_allclose(H, expected, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_hermitian_for_random_draws(self, N, seed):
        rng = np.random.default_rng(seed)
        p = SpinStarParams(omega_c=rng.normal(), omega_a=rng.normal(), J=rng.normal(size=(3, 3)),
                           gamma_reduced=rng.uniform(1, 100), N=N)
        assert is_hermitian(spin_star_hamiltonian(p))


class TestPartialTrace:
    def test_product_state(self):
        rng = np.random.default_rng(0)
        sigma = random_density(2, rng) * 2.5
        rho = random_density(4, rng)
        np.testing.assert_allclose(partial_trace_central(np.kron(sigma, rho)),
                                   np.trace(sigma) * rho, atol=1e-14)
        np.testing.assert_allclose(partial_trace_ancilla(np.kron(sigma, rho)), sigma, atol=1e-14)

    def test_bell_state(self):
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(partial_trace_central(np.outer(psi, psi)), np.eye(2) / 2)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            partial_trace_central(np.eye(5))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_linear_and_trace_preserving(self, N, seed):
        rng = np.random.default_rng(seed)
        d = 2 * (N + 1)
        a, b = random_density(d, rng), random_density(d, rng)
        out = partial_trace_central(a)
        assert abs(np.trace(out) - 1) < 1e-12
        lin = partial_trace_central(0.3 * a - 1.7j * b)
        np.testing.assert_allclose(lin, 0.3 * out - 1.7j * partial_trace_central(b), atol=1e-13)
