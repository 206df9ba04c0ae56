import numpy as np
import pytest

from ffqls import states as st
from ffqls.check import (CERTIFIED_FULL_RANK, CERTIFIED_GENERAL, NOT_FFQLS, UNDETERMINED, classify,
                         dqls_condition, necessary_condition, state_hash, support_condition,
                         support_intersection, upgrade_by_construction)
from ffqls.opspace import orthonormalize, same_subspace
from ffqls.tensor import NeighborhoodStructure, SubsystemLayout, permute_subsystems

from conftest import random_density

LAY4 = SubsystemLayout.qudits(4)


def test_sep_line_fails(overlapping_triples):
    ns = NeighborhoodStructure.nn_pairs(LAY4)
    ok, inter, per = necessary_condition(st.sep_line(4), ns)
    e0, e1 = st.basis_vector([0] * 4), st.basis_vector([1] * 4)
    assert not ok and inter.dim == 2
    assert same_subspace(inter, orthonormalize([np.outer(e0, e0), np.outer(e1, e1)])) < 1e-8
    assert [p.fixed_dim for p in per] == [2, 2, 2]


def test_product_single_site(rng):
    locs = [random_density(2, rng) for _ in range(3)]
    lay = SubsystemLayout.qudits(3)
    rep = classify(st.product(locs), NeighborhoodStructure.single_site(lay))
    assert rep.necessary_ok and rep.intersection_dim == 1 and rep.classification == CERTIFIED_FULL_RANK


def test_pseudo_pure(overlapping_triples):
    rho = st.pseudo_pure(st.big_dicke(4, 2, 3), 0.3)
    ok, inter, _ = necessary_condition(rho, overlapping_triples)
    assert not ok and same_subspace(inter, orthonormalize([np.eye(16), rho])) < 1e-8


class TestSupportCondition:
    def test_full_rank(self, rng, overlapping_triples):
        ok, P = support_condition(random_density(16, rng), overlapping_triples)
        assert ok and np.allclose(P, np.eye(16))

    def test_dicke(self, overlapping_triples):
        assert dqls_condition(st.big_dicke(4, 2, 3), overlapping_triples)

    def test_rho_epsilon_five_dim(self, overlapping_triples):
        ok, _ = support_condition(st.rho_epsilon(0.5), overlapping_triples)
        W = support_intersection(st.rho_epsilon(0.5), overlapping_triples)
        oracle = np.array([st.basis_vector([0] * 4), st.dicke(4, (3, 1)), st.dicke(4, (2, 2)),
                           st.dicke(4, (1, 3)), st.basis_vector([1] * 4)]).T
        assert not ok and W.shape[1] == 5
        assert np.linalg.norm(W @ W.conj().T - oracle @ oracle.T, 2) < 1e-8

    def test_ghz(self, overlapping_triples):
        assert not dqls_condition(st.ghz(4), overlapping_triples)

    def test_product_basis_state(self, overlapping_triples):
        assert dqls_condition(st.basis_vector([0] * 4), overlapping_triples)

    def test_big_dicke_connected(self):
        lay = SubsystemLayout.qudits(5, 3)
        ns = NeighborhoodStructure.k_body(lay, 3)
        assert dqls_condition(st.big_dicke(5, 3, 3), ns)

    def test_unnormalized(self, overlapping_triples):
        with pytest.raises(ValueError):
            dqls_condition(2 * st.ghz(4), overlapping_triples)


class TestClassify:
    def test_ising_nn(self):
        rho = st.gibbs(st.hamiltonian("ISING", 4), 1.0)
        rep = classify(rho, NeighborhoodStructure.nn_pairs(LAY4, periodic=True))
        assert rep.classification == NOT_FFQLS and rep.intersection_dim == 16

    def test_ising_nnn(self):
        rho = st.gibbs(st.hamiltonian("ISING", 4), 1.0)
        rep = classify(rho, NeighborhoodStructure.nnn_triples(LAY4, periodic=True))
        assert rep.classification == CERTIFIED_FULL_RANK

    def test_rho_epsilon_undetermined_then_upgraded(self, overlapping_triples):
        rep = classify(st.rho_epsilon(0.5), overlapping_triples)
        assert rep.classification == UNDETERMINED and rep.necessary_ok and not rep.support_ok
        rep = upgrade_by_construction(rep, gas_ok=True, ff_ok=True)
        assert rep.classification == CERTIFIED_GENERAL and rep.by_construction

    def test_upgrade_requires_both(self, overlapping_triples):
        rep = classify(st.rho_epsilon(0.5), overlapping_triples)
        assert upgrade_by_construction(rep, True, False).classification == UNDETERMINED

    def test_flags_consistent(self, overlapping_triples):
        for rho in (st.rho_epsilon(0.5), st.sep_line(4), st.projector(st.big_dicke(4, 2, 3))):
            rep = classify(rho, overlapping_triples)
            if not rep.necessary_ok:
                assert rep.classification == NOT_FFQLS
            elif rep.full_rank:
                assert rep.classification == CERTIFIED_FULL_RANK
            elif rep.support_ok:
                assert rep.classification == CERTIFIED_GENERAL
            else:
                assert rep.classification == UNDETERMINED

    def test_enlarging_neighborhoods_keeps_pass(self):
        rho = st.gibbs(st.hamiltonian("ISING", 4), 1.0)
        small = NeighborhoodStructure.nnn_triples(LAY4, periodic=True)
        big = NeighborhoodStructure.k_body(LAY4, 4)
        assert classify(rho, small).necessary_ok and classify(rho, big).necessary_ok

    def test_not_density(self, overlapping_triples):
        with pytest.raises(ValueError):
            classify(np.eye(16), overlapping_triples)


@pytest.mark.parametrize("seed", range(10))
def test_pure_state_tests_agree(seed, overlapping_triples):
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        vs = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(4)]
        psi = st.product([v / np.linalg.norm(v) for v in vs])
    elif kind == 1:
        psi = permute_subsystems(st.big_dicke(4, 2, 3), list(rng.permutation(4) + 1), LAY4)
    else:
        v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        psi = v / np.linalg.norm(v)
    nec, _, _ = necessary_condition(np.outer(psi, psi.conj()), overlapping_triples)
    assert dqls_condition(psi, overlapping_triples) == nec


def test_state_hash_stable():
    assert state_hash(st.sep_line(3)) == state_hash(st.sep_line(3).copy())
    assert state_hash(st.sep_line(3)) != state_hash(np.eye(8) / 8)
