import itertools

import numpy as np
import pytest

from ffqls import states as st
from ffqls.tensor import (NeighborhoodStructure, SubsystemLayout, apply_superop, check_density,
                          cptp_map_matrix, embed_neighborhood, embed_superop, liouvillian_matrix,
                          partial_trace, permute_subsystems, superop_from_map, trace_preservation_residual,
                          unvec, vec)

from conftest import random_density

X, Y, Z = st.PAULI_X, st.PAULI_Y, st.PAULI_Z
I2 = np.eye(2)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)


def brute_embed(op, N, dims):
    """Elementwise oracle: <i|O_N ⊗ I|j> = <i_N|O|j_N> δ(i_rest, j_rest)."""
    D = int(np.prod(dims))
    out = np.zeros((D, D), dtype=complex)
    rest = [a for a in range(1, len(dims) + 1) if a not in N]
    dN = [dims[a - 1] for a in N]
    for i in range(D):
        di = np.unravel_index(i, dims)
        for j in range(D):
            dj = np.unravel_index(j, dims)
            if all(di[a - 1] == dj[a - 1] for a in rest):
                r = np.ravel_multi_index([di[a - 1] for a in N], dN)
                c = np.ravel_multi_index([dj[a - 1] for a in N], dN)
                out[i, j] = op[r, c]
    return out


class TestLayout:
    def test_subset_validation(self):
        lay = SubsystemLayout.qudits(3)
        assert lay.check_subset([3, 1]) == (1, 3)
        with pytest.raises((ValueError, IndexError)):
            lay.check_subset([0])
        with pytest.raises((ValueError, IndexError)):
            lay.check_subset([1, 1])

    def test_structure_drops_contained(self):
        ns = NeighborhoodStructure(SubsystemLayout.qudits(4), ((1, 2), (1, 2, 3), (3, 4)))
        assert list(ns) == [(1, 2, 3), (3, 4)]
        assert ns.covers_all and ns.is_connected() and ns.max_size() == 3

    def test_generators(self):
        lay = SubsystemLayout.qudits(5)
        assert list(NeighborhoodStructure.nn_pairs(lay)) == [(1, 2), (2, 3), (3, 4), (4, 5)]
        assert (1, 5) in list(NeighborhoodStructure.nn_pairs(lay, periodic=True))
        assert len(NeighborhoodStructure.k_body(lay, 4)) == 2
        assert len(NeighborhoodStructure.nnn_triples(lay, periodic=True)) == 5
        g = NeighborhoodStructure.graph_induced(SubsystemLayout.qudits(4), [(1, 2), (2, 3), (3, 4)])
        assert list(g) == [(1, 2, 3), (2, 3, 4)]


class TestEmbed:
    def test_padding(self):
        assert np.allclose(embed_neighborhood(X, [1], SubsystemLayout.qudits(2)), np.kron(X, I2))

    def test_contiguous(self):
        out = embed_neighborhood(np.kron(Z, Z), [2, 3], SubsystemLayout.qudits(4))
        assert np.allclose(out, np.kron(np.kron(I2, np.kron(Z, Z)), I2))

    def test_noncontiguous_brute_force(self):
        out = embed_neighborhood(np.kron(X, Y), [1, 3], SubsystemLayout.qudits(3))
        assert np.allclose(out, brute_embed(np.kron(X, Y), [1, 3], (2, 2, 2)))
        assert np.allclose(out, np.kron(np.kron(X, I2), Y))

    def test_mixed_dims_brute_force(self, rng):
        dims = (2, 3, 2)
        op = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        out = embed_neighborhood(op, [3, 1], SubsystemLayout(dims))
        assert np.allclose(out, brute_embed(op, [1, 3], dims))


class TestPartialTrace:
    def test_product(self):
        e00 = st.projector(st.basis_vector([0, 0]))
        assert np.allclose(partial_trace(e00, [1], SubsystemLayout.qudits(2)), np.diag([1, 0]))

    def test_bell(self):
        bell = st.projector(np.array([1, 0, 0, 1]) / np.sqrt(2))
        assert np.allclose(partial_trace(bell, [1], SubsystemLayout.qudits(2)), I2 / 2)

    def test_sep_line(self):
        red = partial_trace(st.sep_line(3), [1, 2], SubsystemLayout.qudits(3))
        oracle = np.zeros((4, 4))
        oracle[0, 0] = oracle[3, 3] = 0.5
        assert np.allclose(red, oracle)

    def test_elementwise_oracle(self, rng):
        dims = (2, 3, 2)
        rho = random_density(12, rng)
        T = rho.reshape(dims + dims)
        oracle = np.einsum("abcdbf->acdf", T).reshape(4, 4)
        assert np.allclose(partial_trace(rho, [1, 3], SubsystemLayout(dims)), oracle)


class TestPermute:
    def test_swap(self):
        assert np.allclose(permute_subsystems(np.kron(X, I2), [2, 1], SubsystemLayout.qudits(2)),
                           np.kron(I2, X))

    def test_identity(self, rng):
        M = rng.standard_normal((8, 8))
        assert np.allclose(permute_subsystems(M, [1, 2, 3], SubsystemLayout.qudits(3)), M)

    def test_cycle_index_map(self):
        out = permute_subsystems(st.projector(st.basis_vector([0, 1, 1])), [2, 3, 1], SubsystemLayout.qudits(3))
        assert np.allclose(out, st.projector(st.basis_vector([1, 0, 1])))


class TestGenerators:
    def test_zero(self):
        assert np.allclose(liouvillian_matrix(np.zeros((2, 2))), 0)

    def test_hamiltonian_spectrum(self):
        ev = np.linalg.eigvals(liouvillian_matrix(Z))
        assert np.allclose(sorted(ev.imag), [-2, 0, 0, 2]) and np.allclose(ev.real, 0)

    def test_amplitude_damping(self):
        L = liouvillian_matrix(None, [SIGMA_MINUS])
        ev = np.sort(np.linalg.eigvals(L).real)
        assert np.allclose(ev, [-1, -0.5, -0.5, 0])
        assert np.allclose(L @ vec(np.diag([1, 0])), 0)

    def test_vec_convention(self, rng):
        A, B, M = (rng.standard_normal((3, 3)) for _ in range(3))
        assert np.allclose(vec(A @ M @ B), np.kron(B.T, A) @ vec(M))
        assert np.allclose(unvec(vec(M)), M)

    def test_identity_channel(self):
        assert np.allclose(cptp_map_matrix([np.eye(2)]), np.eye(4))

    def test_replacement_channel(self, rng):
        S = cptp_map_matrix([np.diag([1, 0]), np.array([[0, 1], [0, 0]])])
        assert np.allclose(apply_superop(S, random_density(2, rng)), np.diag([1, 0]))

    def test_dephasing(self):
        S = cptp_map_matrix([np.sqrt(0.75) * np.eye(2), np.sqrt(0.25) * Z])
        M = np.array([[1, 2], [3, 4]], dtype=complex)
        assert np.allclose(apply_superop(S, M), [[1, 1], [1.5, 4]])
        assert np.allclose(apply_superop(S, Z), Z)

    def test_not_trace_preserving(self):
        with pytest.raises(ValueError):
            cptp_map_matrix([2 * np.eye(2)])

    def test_embed_superop_matches_embedded_operators(self, rng):
        lay = SubsystemLayout((2, 3, 2))
        K = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        S = liouvillian_matrix(None, [K])
        glob = embed_superop(S, [3, 1], lay)
        direct = liouvillian_matrix(None, [embed_neighborhood(K, [3, 1], lay)])
        assert np.allclose(glob, direct)
        assert trace_preservation_residual(glob) < 1e-12

    def test_superop_from_map(self, rng):
        A = rng.standard_normal((3, 3))
        S = superop_from_map(lambda M: A @ M, 3)
        assert np.allclose(S, np.kron(np.eye(3), A))


def test_check_density_rejects():
    with pytest.raises(ValueError):
        check_density(np.diag([1.0, 1.0]))
    with pytest.raises(ValueError):
        check_density(np.diag([1.5, -0.5]))


@pytest.mark.parametrize("perm", list(itertools.permutations([1, 2, 3])))
def test_partial_trace_permutation_covariance(perm, rng):
    lay = SubsystemLayout((2, 3, 2))
    rho = random_density(12, rng)
    moved = permute_subsystems(rho, perm, lay)
    lay2 = SubsystemLayout(tuple(lay.dims[perm.index(k + 1)] for k in range(3)))
    assert np.allclose(partial_trace(moved, [perm[0]], lay2), partial_trace(rho, [1], lay))
