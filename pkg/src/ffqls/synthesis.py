"""Construction of stabilizing quasi-local generators.

Every neighborhood component is purely dissipative, of the form ``E − id`` with ``E`` a CPTP
map on the neighborhood, so its Lindblad operators are the Kraus operators of ``E``.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import states as st
from .algebra import (BlockDecomposition, DistortedAlgebra, block_components, gen_distorted_algebra,
                      minimal_fixed_point_set,
                      reconstruct, wedderburn_decompose)
from .opspace import schmidt_span
from .tensor import (NeighborhoodStructure, SubsystemLayout, check_density, embed_neighborhood,
                     embed_superop, liouvillian_matrix, partial_trace, superop_from_map,
                     trace_preservation_residual, unvec, vec)
from .tolerances import DEFAULT_TOL, Tolerances

logger = logging.getLogger(__name__)

COND_EXP = "COND_EXP"
COND_EXP_COMPOSED = "COND_EXP_COMPOSED"
GRAPH_PRODUCT = "GRAPH_PRODUCT"
CUSTOM = "CUSTOM"


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Component:
    """One neighborhood generator ``L_N`` acting on ``B(H_N)``."""

    neighborhood: tuple[int, ...]
    superop: np.ndarray
    tag: str = CUSTOM
    lindblads: tuple = ()


@dataclass(eq=False)
class GeneratorBundle:
    """Quasi-local generator ``L = Σ_j L_{N_j} ⊗ id`` with its components."""

    layout: SubsystemLayout
    components: list
    meta: dict = field(default_factory=dict)
    _global: np.ndarray | None = None

    @property
    def global_matrix(self) -> np.ndarray:
        if self._global is None:
            D = self.layout.total_dim
            L = np.zeros((D * D, D * D), dtype=complex)
            for c in self.components:
                L += embed_superop(c.superop, c.neighborhood, self.layout)
            self._global = L
        return self._global

    def component_global(self, k: int) -> np.ndarray:
        c = self.components[k]
        return embed_superop(c.superop, c.neighborhood, self.layout)

    def apply_component(self, k: int, X: np.ndarray) -> np.ndarray:
        c = self.components[k]
        return apply_local_superop(c.superop, c.neighborhood, self.layout, X)

    def apply(self, X: np.ndarray, weights: Sequence[float] | None = None) -> np.ndarray:
        w = np.ones(len(self.components)) if weights is None else weights
        return sum(wk * self.apply_component(k, X) for k, wk in enumerate(w))

    def global_hash(self) -> str:
        # rounded so that the hash is stable under last-bit noise
        data = np.round(self.global_matrix, 10) + 0.0
        return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()[:16]

    @property
    def neighborhoods(self) -> list[tuple[int, ...]]:
        return [c.neighborhood for c in self.components]


def apply_local_superop(S: np.ndarray, N: Sequence[int], layout: SubsystemLayout,
                        X: np.ndarray) -> np.ndarray:
    """``(S ⊗ id)(X)`` without forming the global superoperator."""
    N = layout.check_subset(N)
    n = layout.n
    dN = layout.dim_of(N)
    D = layout.total_dim
    dC = D // dN
    front = [a - 1 for a in N]
    rest = [a for a in range(n) if a not in front]
    order = front + rest
    T = np.asarray(X).reshape(layout.dims * 2).transpose(order + [n + a for a in order])
    T = T.reshape(dN, dC, dN, dC)
    S4 = S.reshape(dN, dN, dN, dN, order="F")
    Y = np.einsum("abcd,cxdy->axby", S4, T)
    inv = np.argsort(order)
    dims_perm = [layout.dims[a] for a in order]
    Y = Y.reshape(dims_perm * 2).transpose(list(inv) + [n + i for i in inv])
    return Y.reshape(D, D)


# ---------------------------------------------------------------------------
# neighborhood maps
# ---------------------------------------------------------------------------

def conditional_expectation(dec: BlockDecomposition, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Superoperator of ``X ↦ ⊕_ℓ Π_ℓ (Tr_B(Π_ℓ† X Π_ℓ) ⊗ τ_ℓ) Π_ℓ†``.

    The map is trace preserving when the blocks cover the whole factor; otherwise it is
    trace preserving on operators supported in the blocks.
    """
    d = dec.factor_dim
    S = superop_from_map(lambda X: reconstruct(dec, block_components(dec, X)), d)
    idem = np.linalg.norm(S @ S - S) / max(1.0, np.linalg.norm(S))
    if idem > tol.block_tol:
        raise SynthesisError(f"conditional expectation not idempotent (residual {idem:.3e})")
    cover = sum(b.embedding @ b.embedding.conj().T for b in dec.blocks)
    if np.linalg.norm(cover - np.eye(d)) <= tol.block_tol:
        tp = trace_preservation_residual(S, generator=False)
        if tp > tol.block_tol:
            raise SynthesisError(f"conditional expectation not trace preserving (residual {tp:.3e})")
    return S


def neighborhood_generator(E: np.ndarray) -> np.ndarray:
    """``E − id``."""
    return E - np.eye(E.shape[0])


def support_herding_map(P: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Superoperator of ``X ↦ P X P + P · Tr(P^⊥ X) / Tr(P)``."""
    P = np.asarray(P, dtype=complex)
    d = P.shape[0]
    if np.linalg.norm(P @ P - P) > tol.tol_lin * max(1, d) or np.linalg.norm(P - P.conj().T) > tol.tol_lin * d:
        raise ValueError("support_herding_map needs a Hermitian projector")
    rank = np.trace(P).real
    if rank < 0.5:
        raise ValueError("zero projector rejected")
    Q = np.eye(d) - P
    return np.kron(P.T, P) + np.outer(vec(P) / rank, vec(Q.T))


def kraus_from_superop(S: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> list[np.ndarray]:
    """Kraus operators of a CP map from the eigendecomposition of its Choi matrix."""
    d = int(round(np.sqrt(S.shape[0])))
    choi = S.reshape(d, d, d, d, order="F").transpose(2, 0, 3, 1).reshape(d * d, d * d)
    choi = (choi + choi.conj().T) / 2
    w, v = np.linalg.eigh(choi)
    if w[0] < -1e3 * tol.tol_psd * max(1.0, w[-1]):
        raise SynthesisError(f"map is not completely positive (Choi eigenvalue {w[0]:.3e})")
    keep = w > tol.rank_tol * w[-1]
    return [np.sqrt(wk) * vk.reshape(d, d).T for wk, vk in zip(w[keep], v[:, keep].T)]


# ---------------------------------------------------------------------------
# synthesis pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NeighborhoodData:
    neighborhood: tuple[int, ...]
    reduced: np.ndarray
    schmidt: object
    fixed: DistortedAlgebra
    blocks: BlockDecomposition | None = None


def neighborhood_data(rho: np.ndarray, N: Sequence[int], layout: SubsystemLayout,
                      tol: Tolerances = DEFAULT_TOL, modular: bool = True) -> NeighborhoodData:
    """Schmidt span and minimal fixed-point set for one neighborhood.

    With ``modular=False`` only the distorted-algebra closure is taken (diagnostic use; the
    result need not be the fixed-point set of any CPTP map).
    """
    rN = partial_trace(rho, N, layout)
    sig = schmidt_span(rho, N, layout, tol)
    F = minimal_fixed_point_set(sig, rN, tol) if modular else gen_distorted_algebra(sig, rN, tol)
    return NeighborhoodData(tuple(N), rN, sig, F)


def is_full_rank(rho: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    return bool(w[0] > tol.rank_tol * w[-1])


def synthesize(rho: np.ndarray, structure: NeighborhoodStructure, mode: str | None = None,
               seed: int = 0, tol: Tolerances = DEFAULT_TOL, with_lindblads: bool = True) -> GeneratorBundle:
    """Build ``L = Σ_j (E_j ∘ E⁰_j − id)`` from the minimal fixed-point sets of the target.

    Args:
        rho: Target density.
        structure: Neighborhoods.
        mode: ``"FULL_RANK"`` or ``"GENERAL"``; defaults by the rank of ``rho``.
        seed: Seed for the random elements used in block splitting.
        tol: Tolerances.
        with_lindblads: Also extract Kraus/Lindblad operators for each component.
    """
    layout = structure.layout
    rho = check_density(rho, tol)
    full = is_full_rank(rho, tol)
    mode = (mode or ("FULL_RANK" if full else "GENERAL")).upper()
    if mode not in ("FULL_RANK", "GENERAL"):
        raise ValueError(f"unknown synthesis mode {mode!r}")
    if mode == "FULL_RANK" and not full:
        raise SynthesisError("FULL_RANK synthesis requested for a rank-deficient target")
    comps = []
    for N in structure:
        try:
            data = neighborhood_data(rho, N, layout, tol)
            dec = wedderburn_decompose(data.fixed, seed=seed, tol=tol)
            E = conditional_expectation(dec, tol)
            tag = COND_EXP
            if mode == "GENERAL":
                V = data.fixed.support
                P = V @ V.conj().T
                if V.shape[1] < V.shape[0]:
                    E = E @ support_herding_map(P, tol)
                    tag = COND_EXP_COMPOSED
            tp = trace_preservation_residual(E, generator=False)
            if tp > tol.block_tol:
                raise SynthesisError(f"neighborhood map not trace preserving (residual {tp:.3e})")
            kraus = tuple(kraus_from_superop(E, tol)) if with_lindblads else ()
            comps.append(Component(tuple(N), neighborhood_generator(E), tag, kraus))
        except Exception as exc:
            raise SynthesisError(f"neighborhood {list(N)}: {exc}") from exc
    bundle = GeneratorBundle(layout, comps, {"mode": mode, "seed": seed, "construction": "conditional expectation"})
    ff = max(np.linalg.norm(bundle.apply_component(k, rho)) for k in range(len(comps)))
    bundle.meta["target_residual"] = float(ff)
    if ff > 1e3 * tol.tol_lin:
        logger.warning("synthesized components do not annihilate the target (residual %.3e)", ff)
    return bundle


# ---------------------------------------------------------------------------
# circuits and graph states
# ---------------------------------------------------------------------------

def _sub_layout(layout: SubsystemLayout, support: Sequence[int]) -> SubsystemLayout:
    return SubsystemLayout(tuple(layout.dims[a - 1] for a in support))


def _local_positions(outer: Sequence[int], inner: Sequence[int]) -> list[int]:
    return [list(outer).index(a) + 1 for a in inner]


def circuit_conjugate(bundle: GeneratorBundle, circuit: Sequence[tuple[Sequence[int], np.ndarray]],
                      tol: Tolerances = DEFAULT_TOL) -> GeneratorBundle:
    """Conjugate every component by a circuit of pairwise commuting neighborhood unitaries.

    Each output neighborhood is the input one enlarged by every circuit neighborhood that
    overlaps it.
    """
    layout = bundle.layout
    gates = []
    for support, U in circuit:
        support = layout.check_subset(support)
        U = np.asarray(U, dtype=complex)
        if np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])) > tol.tol_lin * U.shape[0]:
            raise ValueError(f"circuit element on {list(support)} is not unitary")
        gates.append((support, U))
    globals_ = [embed_neighborhood(U, s, layout) for s, U in gates]
    for i in range(len(gates)):
        for j in range(i + 1, len(gates)):
            if set(gates[i][0]) & set(gates[j][0]):
                res = np.linalg.norm(globals_[i] @ globals_[j] - globals_[j] @ globals_[i])
                if res > tol.tol_lin:
                    raise ValueError(f"circuit elements {list(gates[i][0])} and {list(gates[j][0])}"
                                     f" do not commute (residual {res:.3e})")
    comps = []
    for c in bundle.components:
        touching = [(s, U) for s, U in gates if set(s) & set(c.neighborhood)]
        out = tuple(sorted(set(c.neighborhood).union(*[set(s) for s, _ in touching])))
        sub = _sub_layout(layout, out)
        S = embed_superop(c.superop, _local_positions(out, c.neighborhood), sub)
        U = np.eye(sub.total_dim, dtype=complex)
        for s, G in touching:
            U = embed_neighborhood(G, _local_positions(out, s), sub) @ U
        ad = np.kron(U.conj(), U)
        S = ad @ S @ ad.conj().T
        lind = tuple(U @ embed_neighborhood(K, _local_positions(out, c.neighborhood), sub) @ U.conj().T
                     for K in c.lindblads)
        comps.append(Component(out, S, c.tag, lind))
    return GeneratorBundle(layout, comps, dict(bundle.meta, circuit=len(gates)))


def graph_product_lindblads(n: int, edges: Sequence[Sequence[int]], local_states: Sequence[np.ndarray],
                            H: np.ndarray | None = None, tol: Tolerances = DEFAULT_TOL) -> GeneratorBundle:
    """Ladder Lindblad operators, conjugated by the local edge gates, for a graph product state."""
    d = np.asarray(local_states[0]).shape[0]
    H = st.fourier_hadamard(d) if H is None else np.asarray(H, dtype=complex)
    st.check_hadamard(H)
    layout = SubsystemLayout.qudits(n, d)
    adj = {a: {a} for a in range(1, n + 1)}
    for i, j in edges:
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise IndexError(f"invalid edge ({i}, {j}) for {n} vertices")
        adj[i].add(j)
        adj[j].add(i)
    comps = []
    for j in range(1, n + 1):
        rho_j = check_density(local_states[j - 1], tol)
        gam, Vj = np.linalg.eigh(rho_j)
        gam = np.clip(gam, 0, None)
        Nj = tuple(sorted(adj[j]))
        sub = _sub_layout(layout, Nj)
        pos = Nj.index(j) + 1
        U = np.eye(sub.total_dim, dtype=complex)
        for k in Nj:
            if k == j:
                continue
            a, b = sorted((j, k))
            gate = st.edge_gate(H)
            U = embed_neighborhood(gate, (Nj.index(a) + 1, Nj.index(b) + 1), sub) @ U
        ops = []
        for i in range(d - 1):
            down = np.zeros((d, d), dtype=complex)
            down[i, i + 1] = 1.0
            for rate, op in ((gam[i], down), (gam[i + 1], down.T)):
                if rate > tol.rank_tol:
                    loc = np.sqrt(rate) * Vj @ op @ Vj.conj().T
                    ops.append(U @ embed_neighborhood(loc, (pos,), sub) @ U.conj().T)
        S = liouvillian_matrix(None, ops, dim=sub.total_dim)
        comps.append(Component(Nj, S, GRAPH_PRODUCT, tuple(ops)))
    return GeneratorBundle(layout, comps, {"construction": "graph product", "edges": [list(e) for e in edges]})
