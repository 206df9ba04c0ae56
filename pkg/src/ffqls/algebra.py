"""Distorted algebras, the modular map, minimal fixed-point sets and block decompositions.

A ρ-distorted algebra is the image of an ordinary *-algebra ``Ã`` on ``supp(ρ)`` under
``Ã ↦ ρ^{1/2} Ã ρ^{1/2}``; the distorted product ``X ρ⁺ Y`` maps to the ordinary product
and the modular map ``ρ^{1/2} · ρ^{-1/2}`` acts identically in both pictures.  All closure
work is therefore done in the undistorted picture, compressed to ``supp(ρ)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .opspace import OperatorSubspace, _orth_columns, orthonormalize
from .tolerances import DEFAULT_TOL, Tolerances

logger = logging.getLogger(__name__)


class AlgebraError(RuntimeError):
    """Raised when a computed set fails to be an algebra at tolerance."""


def _psd_eig(rho: np.ndarray, tol: Tolerances):
    rho = (np.asarray(rho, dtype=complex) + np.asarray(rho, dtype=complex).conj().T) / 2
    w, v = np.linalg.eigh(rho)
    if w[-1] <= 0:
        raise ValueError("reference state has no positive eigenvalue")
    if w[0] < -tol.tol_psd * max(1.0, w[-1]):
        raise ValueError(f"reference state not PSD (min eigenvalue {w[0]:.3e})")
    keep = w > tol.rank_tol * w[-1]
    return w[keep], v[:, keep]


def modular_map(X: np.ndarray, rho: np.ndarray, lam: float = 0.5,
                tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``ρ^λ X (ρ⁺)^λ`` with Moore-Penrose powers on the support of ``ρ``."""
    X = np.asarray(X, dtype=complex)
    p, V = _psd_eig(rho, tol)
    P = V @ V.conj().T
    nrm = max(np.linalg.norm(X), 1e-300)
    leak = max(np.linalg.norm(X - P @ X), np.linalg.norm(X - X @ P)) / nrm
    if leak > tol.member_tol:
        raise ValueError(f"operator not supported in supp(rho) (leak {leak:.3e})")
    left = (V * p ** lam) @ V.conj().T
    right = (V * p ** (-lam)) @ V.conj().T
    return left @ X @ right


@dataclass(frozen=True, eq=False)
class DistortedAlgebra:
    """A ρ-distorted algebra together with its undistorted compressed picture.

    Attributes:
        space: HS-orthonormal basis of the distorted algebra on the full factor.
        rho: Reference density.
        support: Isometry ``V`` onto ``supp(ρ)`` (columns are eigenvectors of ρ).
        weights: Positive eigenvalues of ρ matching the columns of ``support``.
        undistorted: HS-orthonormal basis ``(k, r, r)`` of the *-algebra ``V† ρ^{-1/2} X ρ^{-1/2} V``.
        closed_flags: ``{"adjoint", "product", "modular"}`` mapped to ``(ok, residual)``.
        iterations: Number of closure rounds (for minimal fixed-point sets).
        dim_trace: Dimension after each round.
    """

    space: OperatorSubspace
    rho: np.ndarray
    support: np.ndarray
    weights: np.ndarray
    undistorted: np.ndarray
    closed_flags: dict = field(default_factory=dict)
    iterations: int = 0
    dim_trace: tuple = ()

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def is_closed(self) -> bool:
        return all(ok for ok, _ in self.closed_flags.values())


def _undistort(basis: np.ndarray, p: np.ndarray, V: np.ndarray) -> np.ndarray:
    s = p ** -0.5
    return np.einsum("i,ai,kab,bj,j->kij", s, V.conj(), basis, V, s)


def _redistort(basis: np.ndarray, p: np.ndarray, V: np.ndarray) -> np.ndarray:
    s = p ** 0.5
    Vs = V * s
    return np.einsum("ai,kij,bj->kab", Vs, basis, Vs.conj())


def _orth_ops(ops: np.ndarray, rank_tol: float) -> np.ndarray:
    r = ops.shape[-1]
    if len(ops) == 0:
        return np.zeros((0, r, r), dtype=complex)
    cols = _orth_columns(ops.reshape(len(ops), -1).T, rank_tol)
    return cols.T.reshape(-1, r, r)


def _extend(basis: np.ndarray, cand: np.ndarray, thresh: float) -> np.ndarray:
    """Append the directions of ``cand`` not already in span(basis), keeping orthonormality."""
    if len(cand) == 0:
        return basis
    r = cand.shape[-1]
    # inputs are products of unit-norm operators, so an absolute threshold on the residual
    # ignores rounding noise without amplifying it through normalization
    C = cand.reshape(len(cand), -1).T
    if basis.shape[0]:
        B = basis.reshape(len(basis), -1).T
        for _ in range(2):  # re-orthogonalize once for stability
            C = C - B @ (B.conj().T @ C)
    if C.shape[1] == 0:
        return basis
    U, s, _ = np.linalg.svd(C, full_matrices=False)
    new = U[:, s > thresh].T.reshape(-1, r, r)
    return np.concatenate([basis, new]) if len(new) else basis


def _generate_star_algebra(gens: np.ndarray, thresh: float, unital: bool = True) -> np.ndarray:
    """HS-orthonormal basis of the *-algebra generated by ``gens`` (shape ``(k, r, r)``)."""
    r = gens.shape[-1]
    g = np.concatenate([gens, gens.conj().transpose(0, 2, 1)])
    g = _orth_ops(g, thresh)
    basis = np.zeros((0, r, r), dtype=complex)
    if unital:
        basis = _extend(basis, np.eye(r)[None], thresh)
    basis = _extend(basis, g, thresh)
    frontier = basis
    while len(frontier) and len(basis) < r * r:
        prods = np.einsum("aij,bjk->abik", frontier, g).reshape(-1, r, r)
        prods2 = np.einsum("aij,bjk->abik", g, frontier).reshape(-1, r, r)
        before = len(basis)
        basis = _extend(basis, np.concatenate([prods, prods2]), thresh)
        frontier = basis[before:]
        if len(basis) > r * r:
            raise AlgebraError("algebra closure exceeded the full matrix algebra dimension")
    return basis


def _closure_residuals(und: np.ndarray, p: np.ndarray) -> dict:
    """Adjoint, product and modular closure residuals in the undistorted picture."""
    k, r, _ = und.shape
    B = und.reshape(k, -1).T

    def leak(ops):
        ops = ops.reshape(len(ops), -1).T
        res = ops - B @ (B.conj().T @ ops)
        return float(np.max(np.linalg.norm(res, axis=0), initial=0.0))

    adj = leak(und.conj().transpose(0, 2, 1))
    prod = leak(np.einsum("aij,bjk->abik", und, und).reshape(-1, r, r))
    mod = leak(np.einsum("i,kij,j->kij", p ** 0.5, und, p ** -0.5))
    return {"adjoint": adj, "product": prod, "modular": mod}


def _build(und: np.ndarray, rho, p, V, tol: Tolerances, label: str, iterations=0, dim_trace=()):
    res = _closure_residuals(und, p)
    flags = {k: (v <= tol.member_tol, v) for k, v in res.items()}
    dist = _redistort(und, p, V)
    space = orthonormalize(list(dist), tol.rank_tol, label=label)
    if space.dim != len(und):
        raise AlgebraError(f"distortion changed dimension {len(und)} -> {space.dim}")
    return DistortedAlgebra(space, np.asarray(rho), V, p, und, flags, iterations, tuple(dim_trace))


def _check_support(W: OperatorSubspace, V: np.ndarray, tol: Tolerances):
    P = V @ V.conj().T
    for B in W.basis:
        nrm = max(np.linalg.norm(B), 1e-300)
        leak = max(np.linalg.norm(B - P @ B), np.linalg.norm(B - B @ P)) / nrm
        if leak > tol.member_tol:
            raise ValueError(f"subspace not supported in supp(rho) (leak {leak:.3e})")


def gen_distorted_algebra(W: OperatorSubspace, rho: np.ndarray,
                          tol: Tolerances = DEFAULT_TOL) -> DistortedAlgebra:
    """Smallest subspace containing ``W`` and ``ρ``, closed under adjoint and ``X ρ⁺ Y``."""
    p, V = _psd_eig(rho, tol)
    _check_support(W, V, tol)
    und = _undistort(W.basis, p, V)
    basis = _generate_star_algebra(und, tol.member_tol)
    return _build(basis, rho, p, V, tol, label=f"alg_rho({W.label})")


def minimal_fixed_point_set(W: OperatorSubspace, rho: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                            max_iter: int = 64) -> DistortedAlgebra:
    """Smallest modular-invariant ρ-distorted algebra containing ``W``.

    Iterates ``F ← alg_ρ(F ∪ M_{1/2}(F))`` until the dimension stops growing.
    """
    p, V = _psd_eig(rho, tol)
    _check_support(W, V, tol)
    und = _generate_star_algebra(_undistort(W.basis, p, V), tol.member_tol)
    trace = [len(und)]
    sq, isq = p ** 0.5, p ** -0.5
    for it in range(1, max_iter + 1):
        if len(und) == len(p) ** 2:  # already the full algebra on the support
            trace.append(len(und))
            return _build(und, rho, p, V, tol, label=f"F_rho({W.label})", iterations=it,
                          dim_trace=trace)
        moved = np.einsum("i,kij,j->kij", sq, und, isq)
        nxt = _generate_star_algebra(np.concatenate([und, moved]), tol.member_tol)
        trace.append(len(nxt))
        if len(nxt) == len(und):
            logger.debug("minimal fixed-point set converged: dims %s", trace)
            return _build(nxt, rho, p, V, tol, label=f"F_rho({W.label})", iterations=it,
                          dim_trace=trace)
        und = nxt
    raise AlgebraError(f"minimal fixed-point iteration did not converge; dims {trace}")


# ---------------------------------------------------------------------------
# Wedderburn decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Block:
    """One Wedderburn block ``Π (B(C^{d_A}) ⊗ τ) Π†``.

    ``isometry @ factor_basis`` maps ``C^{d_A} ⊗ C^{d_B}`` into the factor space.
    """

    isometry: np.ndarray
    factor_basis: np.ndarray
    d_A: int
    d_B: int
    tau: np.ndarray

    @property
    def embedding(self) -> np.ndarray:
        return self.isometry @ self.factor_basis


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    blocks: tuple
    residual: float
    seed: int
    factor_dim: int

    def dims(self) -> list[tuple[int, int]]:
        return [(b.d_A, b.d_B) for b in self.blocks]


def _clusters(w: np.ndarray, gap: float) -> list[np.ndarray]:
    """Group sorted eigenvalues whose consecutive gaps are below ``gap·scale``."""
    scale = max(1.0, float(np.max(np.abs(w))))
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > gap * scale:
            groups.append(np.array(cur))
            cur = []
        cur.append(i)
    groups.append(np.array(cur))
    return groups


def _random_hermitian(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    X = np.einsum("k,kij->ij", c, basis)
    return (X + X.conj().T) / 2


def _center(und: np.ndarray, tol: float) -> np.ndarray:
    """Basis of ``A ∩ A′`` for a *-algebra ``A`` given by an orthonormal basis."""
    k, r, _ = und.shape
    comm = (np.einsum("aij,bjk->abik", und, und) - np.einsum("bij,ajk->abik", und, und))
    M = comm.reshape(k, -1).T  # column a: all commutators [A_a, A_b]
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    s = np.concatenate([s, np.zeros(k - len(s))])
    null = vh.conj().T[:, s <= tol * max(1.0, s[0] if len(s) else 1.0)]
    Z = np.einsum("ka,kij->aij", null, und)
    return _orth_ops(Z, 1e-12)


def _split_block(und: np.ndarray, Q: np.ndarray, rng, tol: Tolerances):
    """Factorize the compressed block algebra ``Q† A Q`` as ``B(C^{d_A}) ⊗ I``."""
    m = Q.shape[1]
    comp = np.einsum("ai,kab,bj->kij", Q.conj(), und, Q)
    B = _orth_ops(comp, tol.block_tol)
    dim = len(B)
    d_A = int(round(np.sqrt(dim)))
    if d_A * d_A != dim or m % d_A:
        raise AlgebraError(f"block of size {m} with algebra dim {dim} is not a full matrix factor")
    d_B = m // d_A
    if d_A == 1:
        return np.eye(m, dtype=complex), d_A, d_B
    w, v = np.linalg.eigh(_random_hermitian(B, rng))
    groups = _clusters(w, tol.cluster_gap)
    if len(groups) != d_A or any(len(g) != d_B for g in groups):
        return None
    E = [v[:, g] for g in groups]
    Y = np.einsum("k,kij->ij", rng.standard_normal(dim) + 1j * rng.standard_normal(dim), B)
    cols = [E[0]]
    for Ei in E[1:]:
        T = Ei @ (Ei.conj().T @ Y @ E[0])
        c = np.linalg.norm(T) / np.sqrt(d_B)
        if c < 1e-6 * np.linalg.norm(Y):
            return None
        cols.append(T / c)
    W = np.stack(cols, axis=1).reshape(m, m)  # column index = i·d_B + b
    if np.linalg.norm(W.conj().T @ W - np.eye(m)) > tol.block_tol * m:
        return None
    return W, d_A, d_B


def wedderburn_decompose(A: DistortedAlgebra, seed: int = 0, tol: Tolerances = DEFAULT_TOL,
                         max_retries: int = 8) -> BlockDecomposition:
    """Block decomposition ``⊕_ℓ Π_ℓ (B(C^{d_A}) ⊗ τ_ℓ) Π_ℓ†`` of a closed distorted algebra."""
    if not A.is_closed:
        raise AlgebraError(f"algebra is not closed: {A.closed_flags}")
    und, V, p = A.undistorted, A.support, A.weights
    r = V.shape[1]
    Z = _center(und, tol.block_tol)
    last_err = "unknown"
    for attempt in range(max_retries + 1):
        rng = np.random.default_rng(seed + attempt)
        w, v = np.linalg.eigh(_random_hermitian(Z, rng))
        groups = _clusters(w, tol.cluster_gap)
        if len(groups) != len(Z):
            last_err = f"central element split into {len(groups)} clusters, center dim {len(Z)}"
            continue
        blocks, ok = [], True
        for g in groups:
            Q = v[:, g]
            split = _split_block(und, Q, rng, tol)
            if split is None:
                ok = False
                last_err = "degenerate draw inside a block"
                break
            W, d_A, d_B = split
            blocks.append((Q, W, d_A, d_B))
        if not ok:
            continue
        if sum(dA * dA for _, _, dA, _ in blocks) != len(und):
            last_err = "block dimensions do not add up to the algebra dimension"
            continue
        out = []
        rho_c = np.diag(p).astype(complex)
        for Q, W, d_A, d_B in blocks:
            emb = Q @ W
            R = (emb.conj().T @ rho_c @ emb).reshape(d_A, d_B, d_A, d_B)
            tau = np.einsum("iaib->ab", R)
            tau = tau / np.trace(tau).real
            out.append(Block(V @ Q, W, d_A, d_B, (tau + tau.conj().T) / 2))
        dec = BlockDecomposition(tuple(out), 0.0, seed + attempt, V.shape[0])
        resid = reconstruction_residual(dec, A.space.basis)
        resid = max(resid, reconstruction_residual(dec, [A.rho / np.linalg.norm(A.rho)]))
        if resid > tol.block_tol:
            raise AlgebraError(f"not an algebra at tolerance (reconstruction residual {resid:.3e})")
        for b in out:
            if np.linalg.eigvalsh(b.tau)[0] <= tol.rank_tol:
                raise AlgebraError("block state tau is not full rank")
        logger.debug("Wedderburn split with seed %d: %s", seed + attempt, [(b.d_A, b.d_B) for b in out])
        return BlockDecomposition(tuple(out), resid, seed + attempt, V.shape[0])
    raise AlgebraError(f"Wedderburn decomposition failed after {max_retries + 1} draws: {last_err}")


def block_components(dec: BlockDecomposition, X: np.ndarray) -> list[np.ndarray]:
    """``Tr_B(Π_ℓ† X Π_ℓ)`` for every block."""
    out = []
    for b in dec.blocks:
        E = b.embedding
        R = (E.conj().T @ X @ E).reshape(b.d_A, b.d_B, b.d_A, b.d_B)
        out.append(np.einsum("iaja->ij", R))
    return out


def reconstruct(dec: BlockDecomposition, comps: list[np.ndarray]) -> np.ndarray:
    X = np.zeros((dec.factor_dim, dec.factor_dim), dtype=complex)
    for b, a in zip(dec.blocks, comps):
        E = b.embedding
        X += E @ np.kron(a, b.tau) @ E.conj().T
    return X


def reconstruction_residual(dec: BlockDecomposition, elements) -> float:
    """Worst relative error of ``X ≈ ⊕ Tr_B(Π†XΠ) ⊗ τ``."""
    worst = 0.0
    for X in elements:
        nrm = np.linalg.norm(X)
        if nrm == 0:
            continue
        worst = max(worst, float(np.linalg.norm(X - reconstruct(dec, block_components(dec, X))) / nrm))
    return worst
