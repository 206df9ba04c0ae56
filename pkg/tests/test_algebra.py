import numpy as np
import pytest

from ffqls import states as st
from ffqls.algebra import (AlgebraError, block_components, gen_distorted_algebra, minimal_fixed_point_set,
                           modular_map, reconstruct, reconstruction_residual, wedderburn_decompose)
from ffqls.opspace import contains, orthonormalize, same_subspace, schmidt_span
from ffqls.tensor import SubsystemLayout, partial_trace

from conftest import random_density, random_unitary

X, Z = st.PAULI_X, st.PAULI_Z
LAY4 = SubsystemLayout.qudits(4)


def naive_fixed_point_dim(spanners, rho, rounds=10):
    """Independent oracle: rank-based closure under products, adjoints and ρ^{1/2}·ρ^{-1/2}."""
    w, v = np.linalg.eigh(rho)
    keep = w > 1e-10
    V, p = v[:, keep], w[keep]
    isq = np.diag(p ** -0.5)
    ops = [isq @ V.conj().T @ S @ V @ isq for S in spanners] + [np.eye(len(p))]

    def rank(mats):
        return np.linalg.matrix_rank(np.array([m.reshape(-1) for m in mats]), tol=1e-8)

    for _ in range(rounds):
        before = rank(ops)
        ops = ops + [A.conj().T for A in ops] + [A @ B for A in ops for B in ops]
        ops = ops + [np.diag(p ** 0.5) @ A @ np.diag(p ** -0.5) for A in ops]
        # prune to a basis to keep the oracle small
        M = np.array([m.reshape(-1) for m in ops])
        _, s, vh = np.linalg.svd(M, full_matrices=False)
        ops = [r.reshape(len(p), len(p)) for r in vh[s > 1e-8 * s[0]]]
        if rank(ops) == before:
            break
    return rank(ops)


class TestModularMap:
    def test_maximally_mixed(self, rng):
        Y = rng.standard_normal((3, 3))
        assert np.allclose(modular_map(Y, np.eye(3) / 3), Y)

    def test_scalar(self):
        p = 0.3
        out = modular_map(np.array([[0, 1], [0, 0]]), np.diag([p, 1 - p]))
        assert np.isclose(out[0, 1], np.sqrt(p / (1 - p))) and np.isclose(np.abs(out).sum(), abs(out[0, 1]))

    def test_rho_epsilon_schmidt_span_invariant(self):
        rho = st.rho_epsilon(0.3)
        sig = schmidt_span(rho, [2, 3, 4], LAY4)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        for B in sig.basis:
            assert contains(sig, modular_map(B, red))[1] < 1e-10

    def test_outside_support(self):
        with pytest.raises(ValueError):
            modular_map(np.eye(2), np.diag([1.0, 0.0]))


class TestDistortedAlgebra:
    def test_span_of_rho(self, rng):
        rho = random_density(3, rng)
        A = gen_distorted_algebra(orthonormalize([rho]), rho)
        assert A.dim == 1 and A.is_closed

    def test_rho_epsilon_pauli_algebra(self):
        rho = st.rho_epsilon(0.3)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        A = gen_distorted_algebra(schmidt_span(rho, [2, 3, 4], LAY4), red)
        assert A.dim == 4 and A.is_closed
        assert A.dim == naive_fixed_point_dim(list(schmidt_span(rho, [2, 3, 4], LAY4).basis), red)

    def test_generated_full(self):
        A = gen_distorted_algebra(orthonormalize([np.eye(2), X]), np.eye(2) / 2)
        assert A.dim == 2  # span{I, X} is already a commutative algebra
        B = gen_distorted_algebra(orthonormalize([X, Z]), np.eye(2) / 2)
        assert B.dim == 4


class TestMinimalFixedPointSet:
    def test_sep_already_closed(self):
        rho = st.sep_line(4)
        red = partial_trace(rho, [2, 3], LAY4)
        sig = schmidt_span(rho, [2, 3], LAY4)
        F = minimal_fixed_point_set(sig, red)
        assert F.dim == 2 and same_subspace(F.space, sig) < 1e-10

    def test_full_algebra(self, rng):
        rho = random_density(3, rng)
        F = minimal_fixed_point_set(orthonormalize(list(np.eye(9).reshape(9, 3, 3))), rho)
        assert F.dim == 9

    def test_pseudo_pure_dicke(self):
        rho = st.pseudo_pure(st.big_dicke(4, 2, 3), 0.3)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        sig = schmidt_span(rho, [2, 3, 4], LAY4)
        F = minimal_fixed_point_set(sig, red)
        assert F.dim == 5 == naive_fixed_point_dim(list(sig.basis), red)

    def test_rho_epsilon(self):
        rho = st.rho_epsilon(0.4)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        sig = schmidt_span(rho, [2, 3, 4], LAY4)
        F = minimal_fixed_point_set(sig, red)
        assert F.dim == 4 == naive_fixed_point_dim(list(sig.basis), red)

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent_and_closed(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(4, rng)
        W = orthonormalize([rho, np.diag([1, 1, 0, 0]) @ rho @ np.diag([1, 1, 0, 0])])
        F = minimal_fixed_point_set(W, rho)
        G = minimal_fixed_point_set(F.space, rho)
        assert F.is_closed and same_subspace(F.space, G.space) < 1e-8

    def test_support_violation(self):
        with pytest.raises(ValueError):
            minimal_fixed_point_set(orthonormalize([np.eye(2)]), np.diag([1.0, 0.0]))


class TestWedderburn:
    def test_full_algebra(self):
        F = minimal_fixed_point_set(orthonormalize(list(np.eye(9).reshape(9, 3, 3))), np.eye(3) / 3)
        dec = wedderburn_decompose(F)
        assert dec.dims() == [(3, 1)] and np.allclose(dec.blocks[0].tau, 1)

    def test_diagonal(self):
        F = minimal_fixed_point_set(orthonormalize([np.diag(np.eye(3)[k]) for k in range(3)]), np.eye(3) / 3)
        assert sorted(wedderburn_decompose(F).dims()) == [(1, 1)] * 3

    def test_rho_epsilon_block(self):
        eps = 0.3
        rho = st.rho_epsilon(eps)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        F = minimal_fixed_point_set(schmidt_span(rho, [2, 3, 4], LAY4), red)
        dec = wedderburn_decompose(F)
        assert dec.dims() == [(2, 2)]
        assert np.allclose(np.sort(np.linalg.eigvalsh(dec.blocks[0].tau)), [eps, 1 - eps])

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        U = random_unitary(5, rng)
        tau = random_density(2, rng)
        sigma = random_density(2, rng)
        rho = U @ np.block([[0.7 * np.kron(sigma, tau), np.zeros((4, 1))],
                            [np.zeros((1, 4)), 0.3 * np.ones((1, 1))]]) @ U.conj().T
        F = minimal_fixed_point_set(orthonormalize([rho]), rho)
        dec = wedderburn_decompose(F, seed=seed)
        assert reconstruction_residual(dec, F.space.basis) < 1e-8
        assert np.allclose(reconstruct(dec, block_components(dec, rho)), rho)

    def test_seed_reproducible(self):
        rho = st.rho_epsilon(0.3)
        red = partial_trace(rho, [2, 3, 4], LAY4)
        F = minimal_fixed_point_set(schmidt_span(rho, [2, 3, 4], LAY4), red)
        a, b = wedderburn_decompose(F, seed=7), wedderburn_decompose(F, seed=7)
        assert np.array_equal(a.blocks[0].embedding, b.blocks[0].embedding)


def test_algebra_error_is_runtime_error():
    assert issubclass(AlgebraError, RuntimeError)
