"""Decision procedures for frustration-free quasi-local stabilizability."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .opspace import (OperatorSubspace, contains, extend_to_global, intersect_columns, range_basis,
                      subspace_intersection)
from .synthesis import NeighborhoodData, is_full_rank, neighborhood_data
from .tensor import NeighborhoodStructure, SubsystemLayout, _perm_index, check_density, partial_trace
from .tolerances import DEFAULT_TOL, Tolerances

logger = logging.getLogger(__name__)

CERTIFIED_FULL_RANK = "CERTIFIED_FULL_RANK"
CERTIFIED_GENERAL = "CERTIFIED_GENERAL"
NOT_FFQLS = "NOT_FFQLS"
UNDETERMINED = "UNDETERMINED"


def state_hash(rho: np.ndarray) -> str:
    data = np.round(np.asarray(rho, dtype=complex), 12) + 0.0
    return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()[:16]


@dataclass
class NeighborhoodDims:
    neighborhood: list
    schmidt_dim: int
    fixed_dim: int
    extended_dim: int
    iterations: int


@dataclass
class CheckReport:
    target_hash: str
    neighborhoods: list
    per_neighborhood: list
    intersection_dim: int
    necessary_ok: bool
    support_ok: bool
    full_rank: bool
    classification: str
    support_intersection_dim: int
    eigen_extremes: tuple
    tolerances: dict
    by_construction: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _extended_fixed_sets(rho, structure, tol, modular=True):
    layout = structure.layout
    per, spaces = [], []
    for N in structure:
        data: NeighborhoodData = neighborhood_data(rho, N, layout, tol, modular)
        ext = extend_to_global(data.fixed.space, N, layout, tol)
        spaces.append(ext)
        per.append(NeighborhoodDims(list(N), data.schmidt.dim, data.fixed.dim, ext.dim,
                                    data.fixed.iterations))
    return per, spaces


def necessary_condition(rho: np.ndarray, structure: NeighborhoodStructure,
                        tol: Tolerances = DEFAULT_TOL, modular: bool = True
                        ) -> tuple[bool, OperatorSubspace, list]:
    """Whether ``span(ρ) = ⋂_j F_{ρ_{N_j}}(Σ_{N_j}(ρ)) ⊗ B(H_{N̄_j})``.

    Args:
        rho: Target density.
        structure: Neighborhoods.
        tol: Tolerances.
        modular: Close under the modular map (the actual condition).  ``False`` gives the
            weaker distorted-algebra-only intersection, useful as a diagnostic.

    Returns:
        ``(ok, intersection, per-neighborhood dimensions)``.
    """
    rho = check_density(rho, tol)
    per, spaces = _extended_fixed_sets(rho, structure, tol, modular)
    inter = subspace_intersection(spaces, tol, label="intersection of extended fixed-point sets")
    ok = inter.dim == 1 and contains(inter, rho, tol)[0]
    return ok, inter, per


def _support_columns(rho_N: np.ndarray, N, layout: SubsystemLayout, tol: Tolerances) -> np.ndarray:
    """Orthonormal basis of ``supp(ρ_N) ⊗ H_{N̄}`` in the global ordering."""
    V = range_basis(rho_N, tol.rank_tol)
    dC = layout.total_dim // layout.dim_of(N)
    cols = np.kron(V, np.eye(dC))
    p = _perm_index(layout, [a - 1 for a in N])
    return cols[p]


def support_intersection(rho: np.ndarray, structure: NeighborhoodStructure,
                         tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of ``⋂_j supp(ρ_{N_j} ⊗ I)``."""
    layout = structure.layout
    bases = [_support_columns(partial_trace(rho, N, layout), N, layout, tol) for N in structure]
    return intersect_columns(bases, tol.intersect_tol)


def support_condition(rho: np.ndarray, structure: NeighborhoodStructure,
                      tol: Tolerances = DEFAULT_TOL) -> tuple[bool, np.ndarray]:
    """Whether ``supp(ρ) = ⋂_j supp(ρ_{N_j} ⊗ I)``; returns the intersection projector too."""
    rho = np.asarray(rho, dtype=complex)
    W = support_intersection(rho, structure, tol)
    P = W @ W.conj().T
    S = range_basis(rho, tol.rank_tol)
    Q = S @ S.conj().T
    ok = W.shape[1] == S.shape[1] and np.linalg.norm(P - Q, 2) <= max(tol.tol_lin, tol.intersect_tol)
    return bool(ok), P


def dqls_condition(psi: np.ndarray, structure: NeighborhoodStructure,
                   tol: Tolerances = DEFAULT_TOL) -> bool:
    """Pure-state test: ``span{ψ} = ⋂_j supp(ρ_{N_j} ⊗ I)``."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-8:
        raise ValueError(f"state vector not normalized (norm {nrm})")
    ok, _ = support_condition(np.outer(psi, psi.conj()), structure, tol)
    return ok


def classify(rho: np.ndarray, structure: NeighborhoodStructure, tol: Tolerances = DEFAULT_TOL) -> CheckReport:
    """Run the necessary and support conditions and classify the target."""
    rho = check_density(rho, tol)
    nec, inter, per = necessary_condition(rho, structure, tol)
    sup_ok, P = support_condition(rho, structure, tol)
    full = is_full_rank(rho, tol)
    w = np.linalg.eigvalsh(rho)
    if not nec:
        cls = NOT_FFQLS
    elif full:
        cls = CERTIFIED_FULL_RANK
    elif sup_ok:
        cls = CERTIFIED_GENERAL
    else:
        cls = UNDETERMINED
    logger.info("classification %s (intersection dim %d)", cls, inter.dim)
    return CheckReport(
        target_hash=state_hash(rho),
        neighborhoods=[list(N) for N in structure],
        per_neighborhood=per,
        intersection_dim=inter.dim,
        necessary_ok=nec,
        support_ok=sup_ok,
        full_rank=full,
        classification=cls,
        support_intersection_dim=int(round(np.trace(P).real)),
        eigen_extremes=(float(w[0]), float(w[-1])),
        tolerances=tol.as_dict(),
    )


def upgrade_by_construction(report: CheckReport, gas_ok: bool, ff_ok: bool) -> CheckReport:
    """Promote an UNDETERMINED verdict once a synthesized generator verified FF and GAS."""
    if report.classification == UNDETERMINED and gas_ok and ff_ok:
        report.classification = CERTIFIED_GENERAL
        report.by_construction = True
        report.notes.append("certified by a verified frustration-free stabilizing generator")
    return report
