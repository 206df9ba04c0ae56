"""Target states and Hamiltonians used throughout the package.

State vectors are returned as 1-D arrays, densities as 2-D arrays, all in the Kronecker
basis ordering of :mod:`ffqls.tensor`.
"""
from __future__ import annotations

import logging
from functools import reduce
from math import comb, factorial
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from sympy.utilities.iterables import multiset_permutations

from .tensor import SubsystemLayout, embed_neighborhood
from .tolerances import DEFAULT_TOL

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def basis_vector(digits: Sequence[int], d: int | Sequence[int] = 2) -> np.ndarray:
    dims = [d] * len(digits) if np.isscalar(d) else list(d)
    idx = int(np.ravel_multi_index(tuple(digits), dims))
    v = np.zeros(int(np.prod(dims)), dtype=complex)
    v[idx] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def product(local_states: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of local densities (or vectors)."""
    return reduce(np.kron, [np.asarray(s, dtype=complex) for s in local_states])


def dicke(n: int, occupation: Sequence[int], d: int | None = None) -> np.ndarray:
    """Normalized symmetrization of ``|0^{k_0} 1^{k_1} ... ⟩`` over distinct permutations."""
    occupation = [int(k) for k in occupation]
    d = len(occupation) if d is None else d
    if len(occupation) > d:
        raise ValueError(f"occupation vector longer than local dimension {d}")
    occupation += [0] * (d - len(occupation))
    if sum(occupation) != n or min(occupation) < 0:
        raise ValueError(f"occupation {occupation} does not describe {n} sites")
    word = [lvl for lvl, k in enumerate(occupation) for _ in range(k)]
    psi = np.zeros(d ** n, dtype=complex)
    for perm in multiset_permutations(word):
        psi[np.ravel_multi_index(tuple(perm), (d,) * n)] = 1.0
    return psi / np.linalg.norm(psi)


def dicke_multiplicity(occupation: Sequence[int]) -> int:
    """Number of distinct words with the given occupation."""
    out = factorial(sum(occupation))
    for k in occupation:
        out //= factorial(k)
    return out


def dicke_schmidt_coefficient(occ_A: Sequence[int], occ_B: Sequence[int]) -> float:
    """Weight of ``|Λ_A⟩|Λ_B⟩`` when ``|Λ_A + Λ_B⟩`` is split into two groups."""
    total = [a + b for a, b in zip(occ_A, occ_B)]
    return float(np.sqrt(dicke_multiplicity(occ_A) * dicke_multiplicity(occ_B) / dicke_multiplicity(total)))


def big_dicke_occupation(n: int, d: int, m: int) -> tuple[int, ...]:
    """Occupation ``(m−1, ..., m−1, r)`` with ``r = n − (d−1)(m−1)``."""
    r = n - (d - 1) * (m - 1)
    if d * (m - 1) < n or r < 1:
        raise ValueError(f"infeasible generalized Dicke parameters n={n}, d={d}, m={m}")
    return (m - 1,) * (d - 1) + (r,)


def big_dicke(n: int, d: int, m: int) -> np.ndarray:
    return dicke(n, big_dicke_occupation(n, d, m), d)


def ghz(n: int, d: int = 2) -> np.ndarray:
    psi = np.zeros(d ** n, dtype=complex)
    for lvl in range(d):
        psi[np.ravel_multi_index((lvl,) * n, (d,) * n)] = 1.0
    return psi / np.sqrt(d)


def sep_line(n: int) -> np.ndarray:
    """Equal mixture of ``|0…0⟩`` and ``|1…1⟩``."""
    return 0.5 * (projector(basis_vector([0] * n)) + projector(basis_vector([1] * n)))


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {eps}")
    if eps in (0.0, 1.0):
        logger.info("mixing weight %s is a degenerate endpoint", eps)
    return eps


def pseudo_pure(psi: np.ndarray, eps: float) -> np.ndarray:
    """``(1−ε)|ψ⟩⟨ψ| + ε I/D``."""
    eps = _check_eps(eps)
    D = len(psi)
    return (1 - eps) * projector(psi) + eps * np.eye(D) / D


def rho_epsilon(eps: float) -> np.ndarray:
    """Four-qubit mixture ``(1−ε)|(0011)⟩⟨(0011)| + ε|GHZ⟩⟨GHZ|``."""
    eps = _check_eps(eps)
    return (1 - eps) * projector(dicke(4, (2, 2))) + eps * projector(ghz(4))


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def _bonds(n: int, periodic: bool) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(1, n)]
    if periodic and n > 2:
        bonds.append((n, 1))
    return bonds


def hamiltonian_terms(tag: str, n: int, g: float = 1.0, boundary: str | None = None,
                      edges: Sequence[Sequence[int]] = ()) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Local terms ``(support, operator)`` of a qubit Hamiltonian family.

    Args:
        tag: ``"ISING"`` (``Σ Z_j Z_{j+1}``, periodic by default), ``"TRANSVERSE_ISING"``
            (``−Σ Z_j Z_{j+1} − g Σ X_j``, open by default) or ``"GRAPH_H"``
            (``−Σ_j X_j Π_{k~j} Z_k``).
        n: Number of qubits.
        g: Transverse field.
        boundary: ``"open"`` or ``"periodic"``; family default when omitted.
        edges: Graph edges (1-based) for ``GRAPH_H``.
    """
    tag = tag.upper()
    ZZ = np.kron(PAULI_Z, PAULI_Z)
    if tag == "ISING":
        periodic = (boundary or "periodic") == "periodic"
        if n <= 3:
            logger.warning("Ising family is intended for n > 3 (got n=%d)", n)
        return [(tuple(sorted(b)), ZZ) for b in _bonds(n, periodic)]
    if tag == "TRANSVERSE_ISING":
        periodic = (boundary or "open") == "periodic"
        terms = [(tuple(sorted(b)), -ZZ) for b in _bonds(n, periodic)]
        terms += [((j,), -g * PAULI_X) for j in range(1, n + 1)]
        return terms
    if tag == "GRAPH_H":
        adj = {a: set() for a in range(1, n + 1)}
        for i, j in edges:
            adj[i].add(j)
            adj[j].add(i)
        terms = []
        for a in range(1, n + 1):
            support = tuple(sorted(adj[a] | {a}))
            op = reduce(np.kron, [PAULI_X if s == a else PAULI_Z for s in support])
            terms.append((support, -op))
        return terms
    raise ValueError(f"unknown Hamiltonian tag {tag!r}")


def hamiltonian(tag: str, n: int, g: float = 1.0, boundary: str | None = None,
                edges: Sequence[Sequence[int]] = ()) -> np.ndarray:
    layout = SubsystemLayout.qudits(n, 2)
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for support, op in hamiltonian_terms(tag, n, g, boundary, edges):
        H += embed_neighborhood(op, support, layout)
    return H


def gibbs(H: np.ndarray, beta: float) -> np.ndarray:
    """``e^{−βH} / Tr e^{−βH}`` via eigendecomposition (shifted for stability)."""
    if beta < 0:
        raise ValueError("inverse temperature must be non-negative")
    H = np.asarray(H, dtype=complex)
    if np.max(np.abs(H - H.conj().T)) > DEFAULT_TOL.tol_herm:
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh((H + H.conj().T) / 2)
    x = np.exp(-beta * (w - w[0]))
    rho = (v * (x / x.sum())) @ v.conj().T
    return (rho + rho.conj().T) / 2


def local_thermal(beta: float, op: np.ndarray = PAULI_X) -> np.ndarray:
    """``e^{β op} / Tr e^{β op}`` for a single site."""
    return gibbs(-np.asarray(op, dtype=complex), beta)


def quench(g_init: float, g_final: float, beta: float, t: float, n: int,
           boundary: str | None = None) -> np.ndarray:
    """Transverse-Ising thermal state at field ``g_init`` evolved for time ``t`` at ``g_final``."""
    rho = gibbs(hamiltonian("TRANSVERSE_ISING", n, g_init, boundary), beta)
    U = expm(-1j * t * hamiltonian("TRANSVERSE_ISING", n, g_final, boundary))
    return U @ rho @ U.conj().T


# ---------------------------------------------------------------------------
# graph states
# ---------------------------------------------------------------------------

def fourier_hadamard(d: int) -> np.ndarray:
    """Unnormalized DFT matrix ``h_ij = ω^{ij}``: symmetric, unimodular, ``H†H = dI``."""
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d)


def check_hadamard(H: np.ndarray, tol: float = 1e-10) -> None:
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError("Hadamard matrix must be square")
    if np.max(np.abs(H.conj().T @ H - d * np.eye(d))) > tol:
        raise ValueError("Hadamard matrix violates H†H = dI")
    if np.max(np.abs(H - H.T)) > tol:
        raise ValueError("Hadamard matrix is not symmetric")
    if np.max(np.abs(np.abs(H) - 1)) > tol:
        raise ValueError("Hadamard matrix entries are not unimodular")


def edge_gate(H: np.ndarray) -> np.ndarray:
    """Two-site diagonal gate ``|ij⟩ ↦ h_ij |ij⟩``."""
    return np.diag(np.asarray(H, dtype=complex).reshape(-1))


def graph_circuit(n: int, edges: Sequence[Sequence[int]], H: np.ndarray | None = None,
                  d: int = 2) -> np.ndarray:
    """Product of edge gates over ``edges`` (1-based)."""
    H = fourier_hadamard(d) if H is None else np.asarray(H, dtype=complex)
    check_hadamard(H)
    d = H.shape[0]
    layout = SubsystemLayout.qudits(n, d)
    U = np.eye(layout.total_dim, dtype=complex)
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop on vertex {i}")
        if i > j:  # keep the gate's index order aligned with sorted embedding
            i, j = j, i
            gate = edge_gate(H.T)
        else:
            gate = edge_gate(H)
        U = embed_neighborhood(gate, (i, j), layout) @ U
    return U


def graph_product(n: int, edges: Sequence[Sequence[int]], local_states: Sequence[np.ndarray],
                  H: np.ndarray | None = None) -> np.ndarray:
    """``U_G (⊗ ρ_j) U_G†``."""
    d = np.asarray(local_states[0]).shape[0]
    U = graph_circuit(n, edges, H, d)
    rho = product(local_states)
    return U @ rho @ U.conj().T
