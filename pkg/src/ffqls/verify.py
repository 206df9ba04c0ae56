"""Post-hoc verification of generators."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .opspace import OperatorSubspace, orthonormalize, range_basis, same_subspace
from .synthesis import GeneratorBundle
from .tensor import unvec, vec
from .tolerances import DEFAULT_TOL, Tolerances

logger = logging.getLogger(__name__)


class UndefinedGapError(ValueError):
    """The generator has no nonzero eigenvalue."""


@dataclass(frozen=True, eq=False)
class KernelResult:
    space: OperatorSubspace
    bracket: tuple  # (largest discarded singular value, smallest kept)
    residual: float


def kernel(L: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> KernelResult:
    """Null space of a superoperator matrix, as operators (HS-orthonormal).

    Singular values ``<= rank_tol·σ_max`` are treated as zero.
    """
    L = np.asarray(L)
    d = int(round(np.sqrt(L.shape[0])))
    if L.shape != (d * d, d * d):
        raise ValueError(f"superoperator shape {L.shape} is not square over d x d matrices")
    _, s, vh = np.linalg.svd(L)
    smax = s[0] if s.size else 0.0
    if smax == 0:
        null = np.eye(d * d, dtype=complex)
        bracket = (float("inf"), 0.0)
    else:
        zero = s <= tol.rank_tol * smax
        null = vh[zero].conj().T
        kept = s[~zero]
        bracket = (float(kept[-1]) if kept.size else 0.0, float(s[zero][0]) if zero.any() else 0.0)
    ops = null.T.reshape(-1, d, d).transpose(0, 2, 1)  # column-major devectorization
    space = OperatorSubspace(d, ops, "kernel") if len(ops) else OperatorSubspace(d, np.zeros((0, d, d)), "kernel")
    residual = float(np.linalg.norm(L @ null)) if null.size else 0.0
    return KernelResult(space, bracket, residual)


def hermitian_kernel_basis(space: OperatorSubspace) -> list[np.ndarray]:
    """Hermitian spanning set of a Hermitian-closed operator space."""
    herm = []
    for B in space.basis:
        herm += [(B + B.conj().T) / 2, (B - B.conj().T) / 2j]
    return list(orthonormalize(herm).basis) if herm else []


def kernel_state(space: OperatorSubspace) -> np.ndarray:
    """Unit-trace representative of a one-dimensional kernel."""
    if space.dim != 1:
        raise ValueError(f"kernel has dimension {space.dim}, expected 1")
    X = space.basis[0]
    X = X / np.trace(X)
    return (X + X.conj().T) / 2


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    M = a - b
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((M + M.conj().T) / 2))))


def is_frustration_free(bundle: GeneratorBundle, tol: Tolerances = DEFAULT_TOL,
                        ker: KernelResult | None = None) -> tuple[bool, list[float]]:
    """Every kernel element of the global generator is annihilated by every component."""
    ker = ker or kernel(bundle.global_matrix, tol)
    res = []
    for k in range(len(bundle.components)):
        worst = 0.0
        for X in ker.space.basis:
            worst = max(worst, float(np.linalg.norm(bundle.apply_component(k, X))))
        res.append(worst)
    ff_tol = max(tol.tol_lin, 10 * ker.residual)
    return all(r <= ff_tol for r in res), res


@dataclass
class GapResult:
    raw: float
    spectral_normalized: float
    frobenius_normalized: float
    spectral_norm: float
    frobenius_norm: float
    max_imag_on_axis: float
    max_real_part: float


def spectrum(L: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(L)
    return ev[np.lexsort((ev.imag, ev.real))]


def gap_details(L: np.ndarray, tol: Tolerances = DEFAULT_TOL, eigenvalues=None) -> GapResult:
    ev = spectrum(L) if eigenvalues is None else np.asarray(eigenvalues)
    nz = ev[np.abs(ev) > tol.spec_tol]
    if nz.size == 0:
        raise UndefinedGapError("generator has no nonzero eigenvalue; gap undefined")
    raw = float(-np.max(nz.real))
    sn = float(np.linalg.norm(L, 2))
    fn = float(np.linalg.norm(L))
    axis = nz[np.abs(nz.real) <= tol.spec_tol]
    return GapResult(raw, raw / sn, raw / fn, sn, fn,
                     float(np.max(np.abs(axis.imag), initial=0.0)), float(np.max(ev.real)))


def spectral_gap(L: np.ndarray, normalize: bool = False, tol: Tolerances = DEFAULT_TOL,
                 norm: str = "spectral") -> float:
    """``min −Re λ`` over eigenvalues with ``|λ| > spec_tol``.

    With ``normalize`` the generator is first scaled to unit spectral norm (largest
    singular value), or unit Frobenius norm when ``norm="frobenius"``.
    """
    g = gap_details(L, tol)
    if not normalize:
        return g.raw
    return g.spectral_normalized if norm == "spectral" else g.frobenius_normalized


def _psd_sqrt(rho: np.ndarray, tol: Tolerances):
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0, None)
    keep = w > tol.rank_tol * w[-1]
    return v[:, keep], w[keep]


@dataclass
class DualKernelResult:
    ok: bool
    residual: float
    branch: str
    commutant_ok: bool | None = None
    commutant_residual: float | None = None


def _commutant(ops: Sequence[np.ndarray], d: int, tol: Tolerances) -> np.ndarray:
    eye = np.eye(d)
    rows = []
    for A in ops:
        for B in (A, A.conj().T):
            rows.append(np.kron(eye, B) - np.kron(B.T, eye))
    M = np.concatenate(rows)
    _, s, vh = np.linalg.svd(M)
    s = np.concatenate([s, np.zeros(vh.shape[0] - len(s))])
    return vh[s <= tol.rank_tol * max(1.0, s[0])].conj().T


def dual_kernel_check(L: np.ndarray, rho: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                      hamiltonian: np.ndarray | None = None,
                      lindblads: Sequence[np.ndarray] = ()) -> DualKernelResult:
    """Compare ``ker L`` with ``ρ^{1/2} ker(L†) ρ^{1/2}``.

    For rank-deficient ``ρ`` both sides are taken on ``supp(ρ)`` after compressing the
    generator there.  When the Hamiltonian/Lindblad operators are given, also checks that
    the commutant of ``{H, L_k, L_k†}`` lies in ``ker(L†)``.
    """
    L = np.asarray(L)
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    inv = np.linalg.norm(L @ vec(rho)) / max(1.0, np.linalg.norm(L))
    if inv > 1e3 * tol.tol_lin:
        raise ValueError(f"rho is not invariant under L (residual {inv:.3e})")
    V, w = _psd_sqrt(rho, tol)
    r = V.shape[1]
    branch = "full-rank" if r == d else "support"
    # work in the eigenbasis of ρ, compressed to B(supp ρ): X ↦ V† L(V X V†) V
    inject = np.kron(V.conj(), V)
    Lr = inject.conj().T @ L @ inject
    if r < d:
        leak = np.linalg.norm(L @ inject - inject @ Lr) / max(1.0, np.linalg.norm(L))
        if leak > 1e3 * tol.tol_lin:
            return DualKernelResult(False, float(leak), branch)
    sq = np.diag(np.sqrt(w)).astype(complex)
    k1 = kernel(Lr, tol).space
    k2 = kernel(Lr.conj().T, tol).space
    mapped = orthonormalize([sq @ X @ sq for X in k2.basis], tol.rank_tol) if k2.dim else k2
    res = same_subspace(k1, mapped)
    ok = res <= tol.block_tol
    out = DualKernelResult(bool(ok), float(res), branch)
    if hamiltonian is not None or lindblads:
        ops = ([hamiltonian] if hamiltonian is not None else []) + list(lindblads)
        C = _commutant(ops, d, tol)
        leak = float(np.linalg.norm(L.conj().T @ C)) if C.size else 0.0
        out.commutant_ok = leak <= 1e3 * tol.tol_lin
        out.commutant_residual = leak
    return out


@dataclass
class Sample:
    t: float
    state: np.ndarray
    trace_distance: float
    lyapunov: float | None


def evolve(L: np.ndarray, rho0: np.ndarray, t_grid: Sequence[float], target: np.ndarray | None = None,
           support_projector: np.ndarray | None = None) -> list[Sample]:
    """``e^{Lt}(ρ0)`` on a time grid, with trace distance to ``target`` and ``V = 1 − Tr(Pρ_t)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise ValueError("time grid must be non-negative and increasing")
    d = rho0.shape[0]
    v0 = vec(np.asarray(rho0, dtype=complex))
    out = []
    uniform = len(t_grid) > 1 and np.allclose(np.diff(t_grid), t_grid[1] - t_grid[0])
    if uniform:  # one Krylov-free sweep along the whole grid
        vs = expm_multiply(L, v0, start=t_grid[0], stop=t_grid[-1], num=len(t_grid), endpoint=True)
    else:
        vs = [expm_multiply(L * t, v0) for t in t_grid]
    for t, v in zip(t_grid, vs):
        X = unvec(v, d)
        X = (X + X.conj().T) / 2
        ev = np.linalg.eigvalsh(X)
        if ev[0] < -1e-8 or abs(np.trace(X).real - 1) > 1e-8:
            logger.warning("evolved operator at t=%g is not a density within 1e-8", t)
        td = trace_distance(X, target) if target is not None else float("nan")
        V = float(1 - np.trace(support_projector @ X).real) if support_projector is not None else None
        out.append(Sample(float(t), X, td, V))
    return out


@dataclass
class VerifyReport:
    kernel_dim: int
    kernel_hash: str
    kernel_bracket: tuple
    kernel_contains_target: bool
    kernel_target_distance: float
    ff_ok: bool
    ff_residuals: list
    gas_ok: bool
    gap_raw: float | None
    gap_spectral_normalized: float | None
    gap_frobenius_normalized: float | None
    gap_status: str
    spectrum_ok: bool
    dual_kernel_ok: bool | None
    dual_kernel_residual: float | None
    convergence: list
    monotone_ok: bool
    tolerances: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _kernel_hash(space: OperatorSubspace) -> str:
    P = np.round(space.projector(), 8) + 0.0 if space.dim else np.zeros(1)
    return hashlib.sha256(np.ascontiguousarray(P).tobytes()).hexdigest()[:16]


def _random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    R = G @ G.conj().T
    return R / np.trace(R).real


def _random_product_pure(dims: Sequence[int], rng) -> np.ndarray:
    psi = np.ones(1, dtype=complex)
    for dk in dims:
        v = rng.standard_normal(dk) + 1j * rng.standard_normal(dk)
        psi = np.kron(psi, v / np.linalg.norm(v))
    return np.outer(psi, psi.conj())


def verify_bundle(bundle: GeneratorBundle, rho: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                  seed: int = 0, n_times: int = 9, t_final: float | None = None,
                  convergence_tol: float = 1e-6) -> VerifyReport:
    """Kernel, frustration freeness, gap, dual kernel and trajectories from three initial states."""
    L = bundle.global_matrix
    rho = np.asarray(rho, dtype=complex)
    D = rho.shape[0]
    notes = []
    ker = kernel(L, tol)
    kdim = ker.space.dim
    target_dist = float("nan")
    contains_target = False
    if kdim >= 1:
        res = np.linalg.norm(rho - ker.space.project(rho)) / np.linalg.norm(rho)
        contains_target = bool(res <= tol.member_tol)
    if kdim == 1:
        target_dist = trace_distance(kernel_state(ker.space), rho)
    ff_ok, ff_res = is_frustration_free(bundle, tol, ker)
    ev = spectrum(L)
    gap_status = "ok"
    try:
        g = gap_details(L, tol, ev)
        gap_raw, gap_sn, gap_fn = g.raw, g.spectral_normalized, g.frobenius_normalized
        spectrum_ok = g.max_real_part <= tol.spec_tol and g.max_imag_on_axis == 0.0 and gap_raw > tol.spec_tol
    except UndefinedGapError:
        gap_raw = gap_sn = gap_fn = None
        gap_status = "undefined"
        spectrum_ok = False
        notes.append("generator has no nonzero eigenvalue")
    try:
        dk = dual_kernel_check(L, rho, tol)
        dual_ok, dual_res = dk.ok, dk.residual
    except ValueError as exc:
        dual_ok, dual_res = None, None
        notes.append(f"dual kernel check skipped: {exc}")
    rng = np.random.default_rng(seed)
    inits = {"maximally_mixed": np.eye(D) / D,
             "random_product": _random_product_pure(bundle.layout.dims, rng),
             "random_density": _random_density(D, rng)}
    if t_final is None:
        t_final = 40.0 / gap_raw if gap_raw else 10.0
    grid = np.linspace(0.0, t_final, n_times)
    Vs = range_basis(rho, tol.rank_tol)
    P = Vs @ Vs.conj().T
    conv, monotone = [], True
    converged = True
    for name, r0 in inits.items():
        samples = evolve(L, r0, grid, rho, P)
        tds = [s.trace_distance for s in samples]
        if np.any(np.diff(tds) > 1e-9):
            monotone = False
        if tds[-1] > convergence_tol:
            converged = False
        conv.append({"initial": name, "t": [s.t for s in samples], "trace_distance": tds,
                     "V": [s.lyapunov for s in samples]})
    gas_ok = bool(kdim == 1 and contains_target and spectrum_ok and converged)
    return VerifyReport(kdim, _kernel_hash(ker.space), ker.bracket, contains_target, target_dist,
                        ff_ok, ff_res, gas_ok, gap_raw, gap_sn, gap_fn, gap_status, bool(spectrum_ok),
                        dual_ok, dual_res, conv, monotone, tol.as_dict(), notes)
