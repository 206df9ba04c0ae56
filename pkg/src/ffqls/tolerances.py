"""Numerical cutoffs shared by every module.

All values are absolute on unit-scaled matrices unless noted as relative.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    tol_lin: float = 1e-10
    tol_herm: float = 1e-10
    tol_psd: float = 1e-9
    tol_trace: float = 1e-9
    rank_tol: float = 1e-9  # relative to the largest singular value
    member_tol: float = 1e-8  # relative to ||M||_F
    intersect_tol: float = 1e-8
    block_tol: float = 1e-7
    spec_tol: float = 1e-7
    cluster_gap: float = 1e-7  # relative eigenvalue gap for merging clusters
    max_extended_dim: int = 65536

    def with_overrides(self, **kwargs) -> "Tolerances":
        unknown = set(kwargs) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        cast = {k: type(getattr(self, k))(v) for k, v in kwargs.items()}
        return replace(self, **cast)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_TOL = Tolerances()
