"""Multipartite bookkeeping: layouts, neighborhoods, embeddings, partial traces
and vectorized superoperators.

Conventions
-----------
* Subsystem indices are 1-based in every public function and 0-based inside.
* Global basis ordering is the Kronecker one: subsystem 1 is the most
  significant tensor factor.
* Operators are vectorized column-major, ``vec(X) = X.reshape(-1, order="F")``,
  so that ``vec(A X B) = (B^T kron A) vec(X)``.  Every superoperator matrix in
  the package acts on vectors produced this way.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tolerances import DEFAULT_TOL, Tolerances


@dataclass(frozen=True)
class SubsystemLayout:
    """Tensor factorization ``H = H_1 ⊗ ... ⊗ H_n`` with ``dim(H_a) = dims[a-1]``."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise ValueError("layout needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise ValueError(f"all subsystem dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def qudits(cls, n: int, d: int = 2) -> "SubsystemLayout":
        return cls((d,) * n)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def dim_of(self, subset: Iterable[int]) -> int:
        return int(np.prod([self.dims[a - 1] for a in subset])) if subset else 1

    def complement(self, subset: Iterable[int]) -> tuple[int, ...]:
        s = set(subset)
        return tuple(a for a in range(1, self.n + 1) if a not in s)

    def check_subset(self, subset: Iterable[int]) -> tuple[int, ...]:
        """Return ``subset`` sorted and validated (1-based indices)."""
        raw = [int(a) for a in subset]
        out = tuple(sorted(set(raw)))
        if len(out) != len(raw):
            raise ValueError(f"repeated index in subset {raw}")
        if not out:
            raise ValueError("empty subsystem subset")
        if out[0] < 1 or out[-1] > self.n:
            raise IndexError(f"subset {out} out of range for n={self.n}")
        return out


@dataclass(frozen=True)
class NeighborhoodStructure:
    """List of neighborhoods ``N_j`` (1-based index tuples) on a layout.

    Neighborhoods contained in another one are dropped on construction so the
    structure is always in normalized form.
    """

    layout: SubsystemLayout
    neighborhoods: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        checked = [self.layout.check_subset(N) for N in self.neighborhoods]
        if not checked:
            raise ValueError("need at least one neighborhood")
        unique = list(dict.fromkeys(checked))
        kept = [N for N in unique
                if not any(set(N) < set(M) for M in unique)]
        object.__setattr__(self, "neighborhoods", tuple(kept))

    def __iter__(self):
        return iter(self.neighborhoods)

    def __len__(self):
        return len(self.neighborhoods)

    @property
    def covers_all(self) -> bool:
        return set().union(*map(set, self.neighborhoods)) == set(range(1, self.layout.n + 1))

    def is_connected(self) -> bool:
        """True if every bipartition of the subsystems is straddled by some neighborhood."""
        n = self.layout.n
        parent = list(range(n + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for N in self.neighborhoods:
            for a in N[1:]:
                parent[find(a)] = find(N[0])
        return len({find(a) for a in range(1, n + 1)}) == 1

    def max_size(self) -> int:
        return max(len(N) for N in self.neighborhoods)

    # generator tags used by problem files
    @classmethod
    def single_site(cls, layout: SubsystemLayout) -> "NeighborhoodStructure":
        return cls(layout, tuple((a,) for a in range(1, layout.n + 1)))

    @classmethod
    def k_body(cls, layout: SubsystemLayout, k: int, periodic: bool = False) -> "NeighborhoodStructure":
        """Contiguous windows of ``k`` sites along a line (or ring)."""
        n = layout.n
        if k >= n:
            return cls(layout, (tuple(range(1, n + 1)),))
        if periodic:
            windows = [tuple(((s + i) % n) + 1 for i in range(k)) for s in range(n)]
        else:
            windows = [tuple(range(s, s + k)) for s in range(1, n - k + 2)]
        return cls(layout, tuple(windows))

    @classmethod
    def nn_pairs(cls, layout: SubsystemLayout, periodic: bool = False) -> "NeighborhoodStructure":
        return cls.k_body(layout, 2, periodic)

    @classmethod
    def nnn_triples(cls, layout: SubsystemLayout, periodic: bool = False) -> "NeighborhoodStructure":
        return cls.k_body(layout, 3, periodic)

    @classmethod
    def graph_induced(cls, layout: SubsystemLayout, edges: Sequence[Sequence[int]]) -> "NeighborhoodStructure":
        """Vertex ``j`` together with its graph neighbors, for every ``j``."""
        adj = {a: {a} for a in range(1, layout.n + 1)}
        for i, j in edges:
            adj[i].add(j)
            adj[j].add(i)
        return cls(layout, tuple(tuple(sorted(adj[a])) for a in range(1, layout.n + 1)))

    def relabeled(self, perm: Sequence[int]) -> "NeighborhoodStructure":
        """Image under the relabeling ``a -> perm[a-1]``."""
        dims = [0] * self.layout.n
        for a, pa in enumerate(perm, start=1):
            dims[pa - 1] = self.layout.dims[a - 1]
        lay = SubsystemLayout(tuple(dims))
        return NeighborhoodStructure(lay, tuple(tuple(perm[a - 1] for a in N) for N in self.neighborhoods))


# ---------------------------------------------------------------------------
# vectorization helpers
# ---------------------------------------------------------------------------

def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def apply_superop(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    return unvec(S @ vec(X), X.shape[0])


def is_hermitian(M: np.ndarray, tol: float = DEFAULT_TOL.tol_herm) -> bool:
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


def check_density(rho: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Raise ``ValueError`` unless ``rho`` is a density matrix within tolerances."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol.tol_herm:
        raise ValueError(f"density not Hermitian (residual {herm:.3e})")
    ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if ev[0] < -tol.tol_psd:
        raise ValueError(f"density not PSD (min eigenvalue {ev[0]:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > tol.tol_trace:
        raise ValueError(f"density trace {tr!r} != 1")
    return rho


def _perm_index(layout: SubsystemLayout, front: Sequence[int]) -> np.ndarray:
    """``p[k_nat] = k_perm`` for the reordering that brings ``front`` (0-based) first."""
    order = list(front) + [a for a in range(layout.n) if a not in front]
    nat_of_perm = np.arange(layout.total_dim).reshape(layout.dims).transpose(order).ravel()
    return np.argsort(nat_of_perm)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def embed_neighborhood(op: np.ndarray, N: Iterable[int], layout: SubsystemLayout) -> np.ndarray:
    """Return ``op ⊗ I`` with ``op`` acting on the (sorted) subsystems ``N``."""
    N = layout.check_subset(N)
    dN = layout.dim_of(N)
    op = np.asarray(op)
    if op.shape != (dN, dN):
        raise ValueError(f"operator shape {op.shape} does not match neighborhood dim {dN}")
    dC = layout.total_dim // dN
    X_perm = np.kron(op, np.eye(dC))
    p = _perm_index(layout, [a - 1 for a in N])
    return X_perm[np.ix_(p, p)]


def partial_trace(M: np.ndarray, keep: Iterable[int], layout: SubsystemLayout) -> np.ndarray:
    """Trace out every subsystem not in ``keep``; result is ordered like sorted ``keep``."""
    keep = layout.check_subset(keep)
    D = layout.total_dim
    M = np.asarray(M)
    if M.shape != (D, D):
        raise ValueError(f"matrix shape {M.shape} does not match layout dim {D}")
    n = layout.n
    T = M.reshape(layout.dims + layout.dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for a in range(n):
        if a + 1 not in keep:
            cols[a] = rows[a]
    out = "".join(rows[a - 1] for a in keep) + "".join(cols[a - 1] for a in keep)
    dk = layout.dim_of(keep)
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, T).reshape(dk, dk)


def permute_subsystems(M: np.ndarray, perm: Sequence[int], layout: SubsystemLayout) -> np.ndarray:
    """Conjugate ``M`` (or map a state vector) by the subsystem permutation ``V_π``.

    ``perm[a-1] = π(a)``: the content of subsystem ``a`` ends up at position ``π(a)``.
    """
    n = layout.n
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{n}")
    inv = [0] * n
    for a, pa in enumerate(perm):
        inv[pa - 1] = a
    M = np.asarray(M)
    D = layout.total_dim
    if M.ndim == 1:
        return M.reshape(layout.dims).transpose(inv).reshape(D)
    T = M.reshape(layout.dims + layout.dims)
    T = T.transpose(inv + [n + i for i in inv])
    return T.reshape(D, D)


def liouvillian_matrix(H: np.ndarray | None, lindblads: Sequence[np.ndarray] = (),
                       dim: int | None = None, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Column-major matrix of ``-i[H,·] + Σ L·L† - ½{L†L, ·}``."""
    ops = ([H] if H is not None else []) + list(lindblads)
    if dim is None:
        if not ops:
            raise ValueError("need H, a Lindblad operator, or an explicit dim")
        dim = ops[0].shape[0]
    for op in ops:
        if op.shape != (dim, dim):
            raise ValueError(f"operator shape {op.shape} != ({dim}, {dim})")
    eye = np.eye(dim)
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    if H is not None:
        if not is_hermitian(H, tol.tol_herm):
            raise ValueError("Hamiltonian is not Hermitian")
        L += -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for Lk in lindblads:
        LdL = Lk.conj().T @ Lk
        L += np.kron(Lk.conj(), Lk) - 0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye)
    return L


def cptp_map_matrix(kraus: Sequence[np.ndarray], unital: bool = False,
                    tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Column-major matrix ``Σ conj(M_k) ⊗ M_k`` of ``X -> Σ M_k X M_k†``.

    Trace preservation is checked (or unitality with ``unital=True``).
    """
    kraus = [np.asarray(M, dtype=complex) for M in kraus]
    d = kraus[0].shape[0]
    if unital:
        res = np.linalg.norm(sum(M @ M.conj().T for M in kraus) - np.eye(d))
        what = "unital"
    else:
        res = np.linalg.norm(sum(M.conj().T @ M for M in kraus) - np.eye(d))
        what = "trace-preserving"
    if res > max(tol.tol_lin, 1e-12) * max(1.0, d):
        raise ValueError(f"Kraus set is not {what} (residual {res:.3e})")
    return sum(np.kron(M.conj(), M) for M in kraus)


def embed_superop(S: np.ndarray, N: Iterable[int], layout: SubsystemLayout) -> np.ndarray:
    """Global matrix of ``S_N ⊗ id_{N̄}`` for a local superoperator ``S_N`` on ``B(H_N)``."""
    N = layout.check_subset(N)
    dN = layout.dim_of(N)
    D = layout.total_dim
    dC = D // dN
    if S.shape != (dN * dN, dN * dN):
        raise ValueError(f"superoperator shape {S.shape} does not match neighborhood dim {dN}")
    S4 = S.reshape(dN, dN, dN, dN, order="F")
    eye = np.eye(dC)
    G = np.einsum("acbd,ik,jl->aicjbkdl", S4, eye, eye).reshape(D, D, D, D)
    G = G.reshape(D * D, D * D, order="F")
    p = _perm_index(layout, [a - 1 for a in N])
    q = (p[:, None] + D * p[None, :]).reshape(-1, order="F")
    return G[np.ix_(q, q)]


def superop_from_map(fn, d: int) -> np.ndarray:
    """Matrix of a linear map on ``d x d`` matrices, by action on the unit basis."""
    S = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d * d):
        E = np.zeros(d * d, dtype=complex)
        E[k] = 1.0
        S[:, k] = vec(fn(unvec(E, d)))
    return S


def trace_preservation_residual(S: np.ndarray, generator: bool = True) -> float:
    """``‖vec(I)† S‖`` for generators, ``‖vec(I)† S − vec(I)†‖`` for maps."""
    d = int(round(np.sqrt(S.shape[0])))
    row = vec(np.eye(d)).conj() @ S
    if not generator:
        row = row - vec(np.eye(d)).conj()
    return float(np.linalg.norm(row))


def hermiticity_preservation_residual(S: np.ndarray) -> float:
    """Residual of ``S(X†) = S(X)†`` via the vectorized adjoint involution."""
    d = int(round(np.sqrt(S.shape[0])))
    idx = np.arange(d * d).reshape(d, d, order="F").T.reshape(-1, order="F")
    # J vec(X) = vec(X^T); adjoint is J composed with conjugation
    SJ = S[:, idx]
    JS = S[idx, :]
    return float(np.linalg.norm(JS.conj() - SJ))


def all_subsets(n: int, k: int) -> list[tuple[int, ...]]:
    return [tuple(c) for c in itertools.combinations(range(1, n + 1), k)]
