"""JSON (de)serialization of matrices, subspaces, block decompositions, bundles and reports."""
from __future__ import annotations

import dataclasses
import json
import math
from typing import Any

import numpy as np

from .algebra import BlockDecomposition
from .opspace import OperatorSubspace
from .synthesis import Component, GeneratorBundle
from .tensor import SubsystemLayout


def matrix_to_json(M: np.ndarray) -> dict:
    """``{"rows", "cols", "re", "im"}`` with row-major entry lists."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]),
            "re": [float(x) for x in M.real.reshape(-1)],
            "im": [float(x) for x in M.imag.reshape(-1)]}


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", [0.0] * (rows * cols)), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError("matrix dump has inconsistent sizes")
    return (re + 1j * im).reshape(rows, cols)


def subspace_to_json(sub: OperatorSubspace) -> dict:
    return {"label": sub.label, "dim": sub.dim, "basis": [matrix_to_json(B) for B in sub.basis]}


def blocks_to_json(dec: BlockDecomposition) -> dict:
    return {"blocks": [{"dA": b.d_A, "dB": b.d_B, "isometry": matrix_to_json(b.isometry),
                        "tau": matrix_to_json(b.tau), "factor_basis": matrix_to_json(b.factor_basis)}
                       for b in dec.blocks],
            "residual": dec.residual, "seed": dec.seed}


def bundle_to_json(bundle: GeneratorBundle) -> dict:
    return {"layout": list(bundle.layout.dims),
            "components": [{"neighborhood": list(c.neighborhood), "superop": matrix_to_json(c.superop),
                            "lindblads": [matrix_to_json(K) for K in c.lindblads], "tag": c.tag}
                           for c in bundle.components],
            "meta": bundle.meta,
            "global_hash": bundle.global_hash()}


def bundle_from_json(obj: dict) -> GeneratorBundle:
    layout = SubsystemLayout(tuple(obj["layout"]))
    comps = []
    for c in obj["components"]:
        comps.append(Component(tuple(c["neighborhood"]), matrix_from_json(c["superop"]), c.get("tag", "CUSTOM"),
                               tuple(matrix_from_json(K) for K in c.get("lindblads", []))))
    return GeneratorBundle(layout, comps, dict(obj.get("meta", {})))


def _clean(obj: Any) -> Any:
    """Convert numpy scalars/arrays and dataclasses to plain JSON-compatible values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj) and obj.ndim == 2:
            return matrix_to_json(obj)
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, round-trip float repr)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False)
