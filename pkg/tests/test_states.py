import itertools

import numpy as np
import pytest

from ffqls import states as st
from ffqls.tensor import SubsystemLayout, check_density, permute_subsystems

X, Z = st.PAULI_X, st.PAULI_Z


class TestDicke:
    def test_two_sites(self):
        assert np.allclose(st.dicke(2, (1, 1)), np.array([0, 1, 1, 0]) / np.sqrt(2))

    def test_four_sites_two_excitations(self):
        psi = st.dicke(4, (2, 2))
        idx = [int("".join(b), 2) for b in ("0011", "0101", "0110", "1001", "1010", "1100")]
        oracle = np.zeros(16)
        oracle[idx] = 1 / np.sqrt(6)
        assert np.allclose(psi, oracle)

    def test_schmidt_split(self):
        psi = st.dicke(4, (2, 2)).reshape(2, 8)
        assert np.allclose(psi[0], np.sqrt(0.5) * st.dicke(3, (1, 2)))
        assert np.allclose(psi[1], np.sqrt(0.5) * st.dicke(3, (2, 1)))
        assert np.isclose(st.dicke_schmidt_coefficient((1, 0), (1, 2)), np.sqrt(0.5))

    def test_big_dicke(self):
        assert np.allclose(st.big_dicke(4, 2, 3), st.dicke(4, (2, 2)))
        assert np.allclose(st.big_dicke(2, 2, 2), st.dicke(2, (1, 1)))
        assert st.big_dicke_occupation(6, 3, 3) == (2, 2, 2)
        with pytest.raises(ValueError):
            st.big_dicke_occupation(5, 2, 2)

    @pytest.mark.parametrize("seed", range(10))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        psi = st.dicke(4, (1, 2, 1), 3)
        perm = list(rng.permutation(4) + 1)
        assert np.allclose(permute_subsystems(psi, perm, SubsystemLayout.qudits(4, 3)), psi)

    def test_multiplicity(self):
        assert st.dicke_multiplicity((2, 2)) == 6


class TestFamilies:
    def test_ghz(self):
        assert np.allclose(st.ghz(2), np.array([1, 0, 0, 1]) / np.sqrt(2))
        assert np.isclose(np.linalg.norm(st.ghz(5, 3)), 1)

    def test_rho_epsilon_limits(self):
        assert np.allclose(st.rho_epsilon(0.0), st.projector(st.dicke(4, (2, 2))))
        assert np.allclose(st.rho_epsilon(1.0), st.projector(st.ghz(4)))
        w = np.sort(np.linalg.eigvalsh(st.rho_epsilon(0.5)))[::-1]
        assert np.allclose(w[:2], 0.5) and np.allclose(w[2:], 0)

    def test_pseudo_pure(self):
        psi = st.dicke(4, (2, 2))
        rho = st.pseudo_pure(psi, 0.3)
        assert np.isclose(np.trace(rho).real, 1) and np.linalg.eigvalsh(rho)[0] > 0
        with pytest.raises(ValueError):
            st.pseudo_pure(psi, 1.5)

    def test_sep_line(self):
        rho = st.sep_line(3)
        assert np.isclose(rho[0, 0], 0.5) and np.isclose(rho[7, 7], 0.5)


class TestHamiltonians:
    def test_ising_open(self):
        assert np.allclose(st.hamiltonian("ISING", 2, boundary="open"), np.kron(Z, Z))

    def test_transverse(self):
        H = st.hamiltonian("TRANSVERSE_ISING", 2, g=1.0)
        oracle = -np.kron(Z, Z) - np.kron(X, np.eye(2)) - np.kron(np.eye(2), X)
        assert np.allclose(H, oracle)
        assert np.allclose(np.linalg.eigvalsh(H), np.linalg.eigvalsh(oracle))

    def test_graph_h(self):
        H = st.hamiltonian("GRAPH_H", 2, edges=[(1, 2)])
        assert np.allclose(H, -(np.kron(X, Z) + np.kron(Z, X)))

    def test_unknown(self):
        with pytest.raises(ValueError):
            st.hamiltonian("HEISENBERG", 3)


class TestGibbs:
    def test_infinite_temperature(self):
        assert np.allclose(st.gibbs(st.hamiltonian("ISING", 4), 0.0), np.eye(16) / 16)

    def test_zz(self):
        x = np.array([np.exp(-1), np.e, np.e, np.exp(-1)])
        assert np.allclose(st.gibbs(np.kron(Z, Z), 1.0), np.diag(x / x.sum()))

    def test_commutes_and_orders(self):
        H = st.hamiltonian("TRANSVERSE_ISING", 4, g=0.7)
        rho = st.gibbs(H, 1.3)
        assert np.linalg.norm(rho @ H - H @ rho) < 1e-10
        check_density(rho)
        w, v = np.linalg.eigh(H)
        pops = np.einsum("ij,jk,ki->i", v.conj().T, rho, v).real
        assert np.all(np.diff(pops) <= 1e-12)

    def test_local_thermal(self):
        rho = st.local_thermal(1.0)
        assert np.isclose(np.trace(rho @ X).real, np.tanh(1.0))

    def test_quench_is_unitary_orbit(self):
        rho = st.quench(1.0, 0.5, 1.0, 0.7, 3)
        base = st.gibbs(st.hamiltonian("TRANSVERSE_ISING", 3, 1.0), 1.0)
        assert np.allclose(np.linalg.eigvalsh(rho), np.linalg.eigvalsh(base))


class TestGraph:
    def test_no_edges(self):
        locs = [st.local_thermal(0.5)] * 3
        assert np.allclose(st.graph_product(3, [], locs), st.product(locs))

    def test_cluster_pair(self):
        plus = np.array([1, 1]) / np.sqrt(2)
        rho = st.graph_product(2, [(1, 2)], [st.projector(plus)] * 2)
        cz = np.diag([1, 1, 1, -1])
        oracle = st.projector(cz @ np.kron(plus, plus))
        assert np.allclose(rho, oracle) and np.isclose(np.trace(rho @ rho).real, 1)

    def test_edge_gate(self):
        H = st.fourier_hadamard(3)
        G = st.edge_gate(H)
        for i, j in itertools.product(range(3), repeat=2):
            assert np.isclose(G[3 * i + j, 3 * i + j], H[i, j])

    def test_gates_commute(self):
        H = st.fourier_hadamard(2)
        U1 = st.graph_circuit(3, [(1, 2), (2, 3)], H)
        U2 = st.graph_circuit(3, [(2, 3), (1, 2)], H)
        assert np.allclose(U1, U2)

    def test_bad_hadamard(self):
        with pytest.raises(ValueError):
            st.check_hadamard(np.array([[1, 1], [1, 1]]))
