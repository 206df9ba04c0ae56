"""Problem files: target state, neighborhoods, tolerance overrides and seed.

Example::

    {"state": {"family": "RHO_EPSILON", "epsilon": 0.5},
     "neighborhoods": [[1, 2, 3], [2, 3, 4]],
     "tolerances": {"rank_tol": 1e-9},
     "seed": 0}

State families: PRODUCT, SEP_LINE, PSEUDO_PURE, DICKE, BIG_DICKE, GHZ, GRAPH_PRODUCT, GIBBS,
RHO_EPSILON, QUENCH, CUSTOM.  Neighborhood tags: NN_PAIRS, NNN_TRIPLES, K_BODY, GRAPH_INDUCED,
SINGLE_SITE (each may carry ``"periodic": true``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import states as st
from .io import matrix_from_json
from .tensor import NeighborhoodStructure, SubsystemLayout
from .tolerances import DEFAULT_TOL, Tolerances


class ProblemError(ValueError):
    """Schema or consistency error in a problem file."""


_LOCAL = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


@dataclass
class Problem:
    rho: np.ndarray
    layout: SubsystemLayout
    structure: NeighborhoodStructure
    tol: Tolerances = DEFAULT_TOL
    seed: int = 0
    state_spec: dict = field(default_factory=dict)
    psi: np.ndarray | None = None
    graph: dict | None = None
    mode: str | None = None


def _local_states(spec: dict, n: int) -> list[np.ndarray]:
    if "local_states" in spec:
        return [matrix_from_json(m) for m in spec["local_states"]]
    if "sites" in spec:
        return [st.projector(_LOCAL[s]) for s in spec["sites"]]
    kind = spec.get("local", "plus")
    if kind == "thermal":
        return [st.local_thermal(float(spec.get("beta", 1.0)))] * n
    if kind == "plus":
        return [st.projector(_LOCAL["+"])] * n
    raise ProblemError(f"unknown local state kind {kind!r}")


def build_state(spec: dict) -> tuple[np.ndarray, SubsystemLayout, np.ndarray | None, dict | None]:
    """Return ``(rho, layout, psi or None, graph or None)`` for a state spec."""
    fam = str(spec.get("family", "")).upper()
    psi = None
    graph = None
    if fam == "RHO_EPSILON":
        rho, layout = st.rho_epsilon(float(spec["epsilon"])), SubsystemLayout.qudits(4)
    elif fam == "SEP_LINE":
        n = int(spec["n"])
        rho, layout = st.sep_line(n), SubsystemLayout.qudits(n)
    elif fam in ("DICKE", "BIG_DICKE", "GHZ"):
        n, d = int(spec["n"]), int(spec.get("d", 2))
        if fam == "DICKE":
            psi = st.dicke(n, spec["occupation"], d)
        elif fam == "BIG_DICKE":
            psi = st.big_dicke(n, d, int(spec["m"]))
        else:
            psi = st.ghz(n, d)
        rho, layout = st.projector(psi), SubsystemLayout.qudits(n, d)
    elif fam == "PSEUDO_PURE":
        base, layout, bpsi, _ = build_state(spec["base"])
        if bpsi is None:
            raise ProblemError("PSEUDO_PURE needs a pure base state")
        rho = st.pseudo_pure(bpsi, float(spec["epsilon"]))
    elif fam == "PRODUCT":
        n = len(spec.get("sites", spec.get("local_states", [])))
        locs = _local_states(spec, n)
        rho = st.product(locs)
        layout = SubsystemLayout(tuple(s.shape[0] for s in locs))
    elif fam == "GRAPH_PRODUCT":
        graph = spec["graph"]
        n = int(graph["n"])
        edges = [tuple(e) for e in graph["edges"]]
        locs = _local_states(spec, n)
        H = matrix_from_json(spec["hadamard"]) if "hadamard" in spec else None
        rho = st.graph_product(n, edges, locs, H)
        layout = SubsystemLayout.qudits(n, locs[0].shape[0])
    elif fam == "GIBBS":
        n = int(spec["n"])
        edges = [tuple(e) for e in spec.get("graph", {}).get("edges", [])]
        H = st.hamiltonian(spec.get("hamiltonian", "ISING"), n, float(spec.get("g", 1.0)),
                           spec.get("boundary"), edges)
        rho, layout = st.gibbs(H, float(spec.get("beta", 1.0))), SubsystemLayout.qudits(n)
    elif fam == "QUENCH":
        n = int(spec["n"])
        rho = st.quench(float(spec["g"]), float(spec["g_final"]), float(spec.get("beta", 1.0)),
                        float(spec["t"]), n, spec.get("boundary"))
        layout = SubsystemLayout.qudits(n)
    elif fam == "CUSTOM":
        rho = matrix_from_json(spec["rho"])
        layout = SubsystemLayout(tuple(spec["dims"]))
    else:
        raise ProblemError(f"unknown state family {fam!r}")
    if rho.shape[0] != layout.total_dim:
        raise ProblemError("state dimension does not match its layout")
    return rho, layout, psi, graph


def build_structure(spec, layout: SubsystemLayout, graph: dict | None = None) -> NeighborhoodStructure:
    if isinstance(spec, list):
        return NeighborhoodStructure(layout, tuple(tuple(N) for N in spec))
    if not isinstance(spec, dict) or "tag" not in spec:
        raise ProblemError("neighborhoods must be a list of index lists or an object with a tag")
    tag = spec["tag"].upper()
    periodic = bool(spec.get("periodic", False))
    if tag == "NN_PAIRS":
        return NeighborhoodStructure.nn_pairs(layout, periodic)
    if tag == "NNN_TRIPLES":
        return NeighborhoodStructure.nnn_triples(layout, periodic)
    if tag == "K_BODY":
        return NeighborhoodStructure.k_body(layout, int(spec["k"]), periodic)
    if tag == "SINGLE_SITE":
        return NeighborhoodStructure.single_site(layout)
    if tag == "GRAPH_INDUCED":
        edges = spec.get("edges") or (graph or {}).get("edges")
        if edges is None:
            raise ProblemError("GRAPH_INDUCED needs edges (inline or from a graph state)")
        return NeighborhoodStructure.graph_induced(layout, edges)
    raise ProblemError(f"unknown neighborhood tag {tag!r}")


def parse_problem(obj: dict, tol_overrides: dict | None = None, seed: int | None = None) -> Problem:
    if not isinstance(obj, dict) or "state" not in obj or "neighborhoods" not in obj:
        raise ProblemError("problem must be an object with 'state' and 'neighborhoods'")
    try:
        rho, layout, psi, graph = build_state(obj["state"])
        structure = build_structure(obj["neighborhoods"], layout, graph)
        tol = DEFAULT_TOL.with_overrides(**dict(obj.get("tolerances", {}), **(tol_overrides or {})))
    except ProblemError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProblemError(f"invalid problem: {exc!r}") from exc
    return Problem(rho, layout, structure, tol, int(obj.get("seed", 0) if seed is None else seed),
                   obj["state"], psi, graph, obj.get("mode"))


def load_problem(path: str | Path, tol_overrides: dict | None = None, seed: int | None = None) -> Problem:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemError(f"cannot read problem file {path}: {exc}") from exc
    return parse_problem(obj, tol_overrides, seed)
