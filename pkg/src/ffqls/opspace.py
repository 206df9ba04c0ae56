"""Operator subspaces under the Hilbert-Schmidt inner product ``<A, B> = Tr(A† B)``."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensor import SubsystemLayout, _perm_index
from .tolerances import DEFAULT_TOL, Tolerances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OperatorSubspace:
    """HS-orthonormal basis of a subspace of ``B(C^d)``.

    Attributes:
        factor_dim: Dimension ``d`` of the carrier space.
        basis: Array of shape ``(k, d, d)``; ``Tr(basis[i]† basis[j]) = δ_ij``.
        label: Free-form provenance string.
    """

    factor_dim: int
    basis: np.ndarray
    label: str = ""

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.size == 0:
            b = np.zeros((0, self.factor_dim, self.factor_dim), dtype=complex)
        if b.ndim != 3 or b.shape[1:] != (self.factor_dim, self.factor_dim):
            raise ValueError(f"basis shape {b.shape} incompatible with factor_dim {self.factor_dim}")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self):
        return self.dim

    def vectors(self) -> np.ndarray:
        """Basis as columns of a ``(d², k)`` matrix (row-major flattening)."""
        return self.basis.reshape(self.dim, self.factor_dim ** 2).T

    def gram_residual(self) -> float:
        V = self.vectors()
        return float(np.max(np.abs(V.conj().T @ V - np.eye(self.dim)), initial=0.0))

    def projector(self) -> np.ndarray:
        """HS projector on row-major flattened operators, shape ``(d², d²)``."""
        V = self.vectors()
        return V @ V.conj().T

    def project(self, M: np.ndarray) -> np.ndarray:
        V = self.vectors()
        return (V @ (V.conj().T @ np.asarray(M).reshape(-1))).reshape(M.shape)

    def relabel(self, label: str) -> "OperatorSubspace":
        return OperatorSubspace(self.factor_dim, self.basis, label)


def _orth_columns(A: np.ndarray, rank_tol: float, absolute: float | None = None) -> np.ndarray:
    """Orthonormal basis for the column range of ``A`` by SVD."""
    if A.size == 0 or A.shape[1] == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    cut = rank_tol * s[0] if absolute is None else absolute
    return U[:, s > cut]


def orthonormalize(spanners: Iterable[np.ndarray], rank_tol: float = DEFAULT_TOL.rank_tol,
                   label: str = "") -> OperatorSubspace:
    """Orthonormal basis of ``span(spanners)``; singular values ``<= rank_tol·σ_max`` are dropped."""
    mats = [np.asarray(M, dtype=complex) for M in spanners]
    if not mats:
        raise ValueError("need at least one spanning operator")
    d = mats[0].shape[0]
    if any(M.shape != (d, d) for M in mats):
        raise ValueError("spanning operators must share one square shape")
    cols = _orth_columns(np.stack([M.reshape(-1) for M in mats], axis=1), rank_tol)
    return OperatorSubspace(d, cols.T.reshape(-1, d, d), label)


def from_columns(cols: np.ndarray, d: int, label: str = "") -> OperatorSubspace:
    return OperatorSubspace(d, np.asarray(cols).T.reshape(-1, d, d), label)


def schmidt_span(rho: np.ndarray, N: Iterable[int], layout: SubsystemLayout,
                 tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """Span of ``Tr_{N̄}((I_N ⊗ B) ρ)`` over all ``B``: the operator-Schmidt factors on ``N``."""
    N = layout.check_subset(N)
    D = layout.total_dim
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (D, D):
        raise ValueError(f"state shape {rho.shape} does not match layout dim {D}")
    dN = layout.dim_of(N)
    dC = D // dN
    if dC == 1:
        return orthonormalize([rho], tol.rank_tol, label=f"Schmidt span on {list(N)}")
    p = _perm_index(layout, [a - 1 for a in N])
    inv = np.argsort(p)  # inv[k_perm] = k_nat
    R = rho[np.ix_(inv, inv)].reshape(dN, dC, dN, dC).transpose(0, 2, 1, 3).reshape(dN * dN, dC * dC)
    cols = _orth_columns(R, tol.rank_tol)
    return from_columns(cols, dN, label=f"Schmidt span on {list(N)}")


def operator_schmidt_rank(rho: np.ndarray, N: Iterable[int], layout: SubsystemLayout,
                          tol: Tolerances = DEFAULT_TOL) -> int:
    return schmidt_span(rho, N, layout, tol).dim


def intersect_columns(bases: Sequence[np.ndarray], intersect_tol: float = DEFAULT_TOL.intersect_tol) -> np.ndarray:
    """Intersection of column spaces given orthonormal column bases.

    Uses the eigenvectors of the average projector with eigenvalue ``>= 1 - intersect_tol``;
    the Gram form is used when the stacked bases are narrower than the ambient space.
    """
    if not bases:
        raise ValueError("need at least one subspace")
    n = bases[0].shape[0]
    m = len(bases)
    if any(B.shape[1] == 0 for B in bases):
        return np.zeros((n, 0), dtype=complex)
    if m == 1:
        return bases[0]
    A = np.concatenate(bases, axis=1) / np.sqrt(m)
    if A.shape[1] < n:
        w, v = np.linalg.eigh(A.conj().T @ A)
        keep = w >= 1 - intersect_tol
        out = A @ v[:, keep] / np.sqrt(w[keep])
    else:
        w, v = np.linalg.eigh(A @ A.conj().T)
        out = v[:, w >= 1 - intersect_tol]
    # re-orthonormalize to clean up the Gram route
    if out.shape[1]:
        q, _ = np.linalg.qr(out)
        out = q
    return out


def subspace_intersection(spaces: Sequence[OperatorSubspace], tol: Tolerances = DEFAULT_TOL,
                          label: str = "intersection") -> OperatorSubspace:
    """Orthonormal basis of ``⋂ spaces``."""
    if not spaces:
        raise ValueError("need at least one subspace")
    d = spaces[0].factor_dim
    if any(s.factor_dim != d for s in spaces):
        raise ValueError("subspaces live on different carriers")
    cols = intersect_columns([s.vectors() for s in spaces], tol.intersect_tol)
    return from_columns(cols, d, label)


def extend_to_global(sub: OperatorSubspace, N: Iterable[int], layout: SubsystemLayout,
                     tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """``sub ⊗ B(H_{N̄})`` expressed on the global space."""
    N = layout.check_subset(N)
    dN = layout.dim_of(N)
    if sub.factor_dim != dN:
        raise ValueError(f"subspace carrier {sub.factor_dim} does not match neighborhood dim {dN}")
    D = layout.total_dim
    dC = D // dN
    k = sub.dim * dC * dC
    if k > tol.max_extended_dim:
        raise MemoryError(f"extended subspace would have {k} elements (cap {tol.max_extended_dim});"
                          " use fewer subsystems or raise max_extended_dim")
    # kron(X, E_ab) for every basis element X and complement matrix unit E_ab
    T = np.zeros((sub.dim, dC, dC, dN, dC, dN, dC), dtype=complex)
    for a in range(dC):
        for b in range(dC):
            T[:, a, b, :, a, :, b] = sub.basis
    T = T.reshape(k, D, D)
    p = _perm_index(layout, [a - 1 for a in N])
    T = T[:, p][:, :, p]
    return OperatorSubspace(D, T, label=f"{sub.label} ⊗ B(complement)")


def support_of(sub: OperatorSubspace | Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Projector onto the union of supports: range of ``Σ B_i B_i† + B_i† B_i``.

    The row and column ranges coincide for Hermitian-closed spaces; including both keeps the
    result meaningful for non-Hermitian input.
    """
    basis = sub.basis if isinstance(sub, OperatorSubspace) else np.asarray(sub)
    if len(basis) == 0:
        raise ValueError("support of an empty subspace is undefined")
    S = np.einsum("kij,klj->il", basis, basis.conj()) + np.einsum("kji,kjl->il", basis.conj(), basis)
    return range_projector(S, tol.rank_tol)


def range_basis(M: np.ndarray, rank_tol: float = DEFAULT_TOL.rank_tol) -> np.ndarray:
    """Orthonormal eigenvectors of PSD ``M`` with eigenvalue above ``rank_tol·max``."""
    M = (M + M.conj().T) / 2
    w, v = np.linalg.eigh(M)
    if w[-1] <= 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    return v[:, w > rank_tol * w[-1]]


def range_projector(M: np.ndarray, rank_tol: float = DEFAULT_TOL.rank_tol) -> np.ndarray:
    V = range_basis(M, rank_tol)
    return V @ V.conj().T


def contains(sub: OperatorSubspace, M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> tuple[bool, float]:
    """Membership test with relative residual ``‖M − P(M)‖_F / ‖M‖_F``."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (sub.factor_dim, sub.factor_dim):
        raise ValueError(f"matrix shape {M.shape} does not match carrier {sub.factor_dim}")
    nrm = np.linalg.norm(M)
    if nrm == 0:
        return True, 0.0
    res = float(np.linalg.norm(M - sub.project(M)) / nrm)
    return res <= tol.member_tol, res


def same_subspace(a: OperatorSubspace, b: OperatorSubspace) -> float:
    """Spectral-norm distance between the two HS projectors."""
    if a.dim != b.dim:
        return float("inf") if a.dim and b.dim else 1.0
    if a.dim == 0:
        return 0.0
    # ‖P_a − P_b‖₂ = sin of the largest principal angle = ‖(1 − P_b) A‖₂ (accurate for small angles)
    A, B = a.vectors(), b.vectors()
    return float(np.linalg.norm(A - B @ (B.conj().T @ A), 2))
