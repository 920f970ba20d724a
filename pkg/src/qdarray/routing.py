"""Lookahead SWAP insertion onto a dot-array coupling graph.

Gates are scanned in program order. A two-qubit gate whose operands are not
coupled blocks the scan; SWAPs are then inserted one at a time. Each
candidate lies on a data-graph edge touching one of the blocked operands and
must shorten the blocked pair's distance. Among those, the SWAP leaving the
most of the next ``lookahead_depth`` two-qubit gates executable wins; ties
go to the larger count over ``lookahead_depth + 1`` gates, then to the
lexicographically smallest edge.
"""

from __future__ import annotations

import itertools
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuits import Circuit, Gate, equivalent_up_to_permutation

log = logging.getLogger(__name__)

ROLES = ("data", "ancilla", "unused")
DEFAULT_LOOKAHEAD = 4


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplingGraph:
    n_nodes: int
    edges: frozenset[tuple[int, int]]
    roles: tuple[str, ...]
    positions: tuple[tuple[int, int], ...] = ()
    name: str = ""

    def __post_init__(self):
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on node {a}")
            if not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise ValueError(f"edge ({a}, {b}) references a missing node")
            edges.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(edges))
        roles = tuple(self.roles)
        if len(roles) != self.n_nodes:
            raise ValueError(f"{len(roles)} roles for {self.n_nodes} nodes")
        bad = set(roles) - set(ROLES)
        if bad:
            raise ValueError(f"unknown roles {sorted(bad)}")
        object.__setattr__(self, "roles", roles)

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, node: int, role: str | None = None) -> list[int]:
        out = []
        for a, b in self.edges:
            if node in (a, b):
                other = b if a == node else a
                if role is None or self.roles[other] == role:
                    out.append(other)
        return sorted(out)

    def nodes_with_role(self, role: str) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == role]

    @property
    def data_nodes(self) -> list[int]:
        return self.nodes_with_role("data")

    def subgraph_edges(self, nodes: Iterable[int]) -> list[tuple[int, int]]:
        keep = set(nodes)
        return sorted(e for e in self.edges if e[0] in keep and e[1] in keep)

    def distances(self, nodes: Iterable[int] | None = None) -> dict[int, dict[int, int]]:
        """All-pairs hop counts by BFS within ``nodes`` (data nodes by default)."""
        keep = set(self.data_nodes if nodes is None else nodes)
        adj = {n: [] for n in keep}
        for a, b in self.subgraph_edges(keep):
            adj[a].append(b)
            adj[b].append(a)
        dist = {}
        for s in keep:
            d = {s: 0}
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in adj[u]:
                    if v not in d:
                        d[v] = d[u] + 1
                        queue.append(v)
            dist[s] = d
        return dist

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": [
                {"id": i, "role": r, **({"row": self.positions[i][0], "col": self.positions[i][1]} if self.positions else {})}
                for i, r in enumerate(self.roles)
            ],
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CouplingGraph":
        allowed = {"name", "nodes", "edges"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown graph keys: {sorted(unknown)}")
        nodes = sorted(data["nodes"], key=lambda n: n["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))):
            raise ValueError("node ids must be 0..N-1")
        for n in nodes:
            extra = set(n) - {"id", "role", "row", "col"}
            if extra:
                raise ValueError(f"unknown node keys: {sorted(extra)}")
        positions = tuple((n["row"], n["col"]) for n in nodes) if all("row" in n for n in nodes) else ()
        return cls(
            len(nodes),
            frozenset(tuple(e) for e in data["edges"]),
            tuple(n.get("role", "data") for n in nodes),
            positions,
            data.get("name", ""),
        )


def _grid_edges(rows: int, cols: int) -> set[tuple[int, int]]:
    edges = set()
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.add((k, k + 1))
            if r + 1 < rows:
                edges.add((k, k + cols))
    return edges


FIG3B_DATA = (0, 1, 3, 4)
FIG3C_DATA = (0, 1, 2, 3)


def grid_graph_fig3b(data_nodes: Sequence[int] = FIG3B_DATA, unused: Sequence[int] = (8,)) -> CouplingGraph:
    """3x3 nearest-neighbour grid; node k sits at (k // 3, k % 3).

    Default: data on the top-left 2x2 plaquette, the bottom-right dot idle,
    the remaining four dots are readout ancillas.
    """
    roles = ["ancilla"] * 9
    for k in data_nodes:
        roles[k] = "data"
    for k in unused:
        roles[k] = "unused"
    return CouplingGraph(9, frozenset(_grid_edges(3, 3)), tuple(roles), tuple(divmod(k, 3) for k in range(9)), "fig3b")


def chain_graph_fig3c(data_nodes: Sequence[int] = FIG3C_DATA) -> CouplingGraph:
    """2x4 array: a row of four data dots above a row of four readout ancillas."""
    roles = ["ancilla"] * 8
    for k in data_nodes:
        roles[k] = "data"
    return CouplingGraph(8, frozenset(_grid_edges(2, 4)), tuple(roles), tuple(divmod(k, 4) for k in range(8)), "fig3c")


# Logical qubit q starts on physical node DEFAULT_MAPPINGS[graph][q]. Picked by
# exhaustive search over the 24 placements (see tests/test_routing.py).
DEFAULT_MAPPINGS = {
    "fig3b": (0, 1, 3, 4),
    "fig3c": (0, 1, 2, 3),
}


@dataclass
class RoutedCircuit:
    circuit: Circuit
    initial: tuple[int, ...]
    final: tuple[int, ...]
    swap_count: int
    two_qubit_count: int
    inserted: tuple[int, ...] = ()  # positions of router-inserted SWAPs in circuit.gates
    lookahead_depth: int = DEFAULT_LOOKAHEAD

    def to_dict(self) -> dict:
        return {
            "swap_count": self.swap_count,
            "two_qubit_count": self.two_qubit_count,
            "initial_mapping": list(self.initial),
            "final_mapping": list(self.final),
            "lookahead_depth": self.lookahead_depth,
            "n_physical": self.circuit.n_qubits,
            "inserted_swaps": list(self.inserted),
            "gates": [g.to_text() for g in self.circuit.gates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def without_inserted_swaps(self) -> Circuit:
        drop = set(self.inserted)
        return Circuit(self.circuit.n_qubits, [g for k, g in enumerate(self.circuit.gates) if k not in drop])


def _validate_mapping(initial: Sequence[int], n_logical: int, graph: CouplingGraph, allowed: set[int]) -> tuple[int, ...]:
    mapping = tuple(int(p) for p in initial)
    if len(mapping) != n_logical:
        raise RoutingError(f"mapping covers {len(mapping)} qubits, circuit has {n_logical}")
    if len(set(mapping)) != len(mapping):
        raise RoutingError(f"mapping {mapping} is not injective")
    outside = [p for p in mapping if p not in allowed]
    if outside:
        raise RoutingError(f"mapping uses nodes {outside} outside the routable set")
    return mapping


def route(
    circuit: Circuit,
    graph: CouplingGraph,
    initial: Sequence[int] | None = None,
    lookahead_depth: int = DEFAULT_LOOKAHEAD,
    roles: Sequence[str] = ("data",),
    max_stall: int | None = None,
) -> RoutedCircuit:
    """Insert SWAPs so every two-qubit gate acts on a graph edge.

    ``initial[q]`` is the physical node of logical qubit q; it defaults to the
    routable nodes in ascending order. Only nodes whose role is in ``roles``
    take part. The output circuit is indexed by physical node.
    """
    if lookahead_depth < 0:
        raise ValueError("lookahead_depth must be >= 0")
    allowed = {k for k, r in enumerate(graph.roles) if r in roles}
    if circuit.n_qubits > len(allowed):
        raise RoutingError(f"{circuit.n_qubits} qubits but only {len(allowed)} routable nodes")
    if initial is None:
        initial = sorted(allowed)[: circuit.n_qubits]
    l2p = list(_validate_mapping(initial, circuit.n_qubits, graph, allowed))
    start = tuple(l2p)
    dist = graph.distances(allowed)
    edges = graph.subgraph_edges(allowed)
    incident: dict[int, list[tuple[int, int]]] = {n: [] for n in allowed}
    for e in edges:
        incident[e[0]].append(e)
        incident[e[1]].append(e)
    p2l = {p: None for p in allowed}
    for q, p in enumerate(l2p):
        p2l[p] = q

    two_q = [k for k, g in enumerate(circuit.gates) if g.is_two_qubit]
    next_2q = {k: i for i, k in enumerate(two_q)}
    out = Circuit(graph.n_nodes)
    inserted = []
    stall_limit = max_stall if max_stall is not None else 4 * len(allowed) ** 2

    def d(a: int, b: int) -> float:
        return dist[a].get(b, float("inf"))

    def window_score(mapping: list[int], start_idx: int, width: int) -> int:
        window = two_q[start_idx : start_idx + width]
        return sum(graph.has_edge(mapping[circuit.gates[k].qubits[0]], mapping[circuit.gates[k].qubits[1]]) for k in window)

    def swapped(mapping: list[int], edge: tuple[int, int]) -> list[int]:
        a, b = edge
        m = list(mapping)
        qa, qb = p2l[a], p2l[b]
        if qa is not None:
            m[qa] = b
        if qb is not None:
            m[qb] = a
        return m

    for k, gate in enumerate(circuit.gates):
        if not gate.is_two_qubit:
            out.append(gate.on(l2p[gate.qubits[0]]))
            continue
        qa, qb = gate.qubits
        if d(l2p[qa], l2p[qb]) == float("inf"):
            raise RoutingError(f"gate {k} ({gate.to_text()}): nodes {l2p[qa]} and {l2p[qb]} are disconnected")
        stalls = 0
        while not graph.has_edge(l2p[qa], l2p[qb]):
            here = d(l2p[qa], l2p[qb])
            touching = sorted(set(incident[l2p[qa]]) | set(incident[l2p[qb]]))
            cands = [e for e in touching if (lambda m: d(m[qa], m[qb]))(swapped(l2p, e)) < here]
            if not cands:
                # stall guard: widen to every edge touching the pair
                stalls += 1
                if stalls > stall_limit:
                    raise RoutingError(f"gate {k} ({gate.to_text()}): no progress after {stalls} SWAPs")
                cands = touching
            i = next_2q[k]
            best = max(
                cands,
                key=lambda e: (
                    window_score(swapped(l2p, e), i, lookahead_depth),
                    window_score(swapped(l2p, e), i, lookahead_depth + 1),
                    tuple(-v for v in e),
                ),
            )
            a, b = best
            l2p = swapped(l2p, best)
            p2l[a], p2l[b] = p2l[b], p2l[a]
            inserted.append(len(out.gates))
            out.append(Gate("swap", best))
        out.append(gate.on(l2p[qa], l2p[qb]))

    return RoutedCircuit(
        circuit=out,
        initial=start,
        final=tuple(l2p),
        swap_count=len(inserted),
        two_qubit_count=out.two_qubit_count,
        inserted=tuple(inserted),
        lookahead_depth=lookahead_depth,
    )


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _node_permutation(routed: RoutedCircuit, nodes: Sequence[int]) -> dict[int, int]:
    """Where the content of each node ends up after the inserted SWAPs."""
    where = {n: n for n in nodes}  # content originally at key now sits at value
    at = {n: n for n in nodes}  # node -> original owner of its content
    for k in routed.inserted:
        a, b = routed.circuit.gates[k].qubits
        oa, ob = at[a], at[b]
        at[a], at[b] = ob, oa
        where[oa], where[ob] = b, a
    return where


def verify_routing(
    input_circuit: Circuit,
    routed: RoutedCircuit,
    graph: CouplingGraph,
    check_unitary: bool = True,
) -> VerificationResult:
    """Edge legality of every two-qubit gate, then unitary equivalence up to the final permutation."""
    for k, g in enumerate(routed.circuit.gates):
        if g.is_two_qubit and not graph.has_edge(*g.qubits):
            return VerificationResult(False, f"gate {k} ({g.to_text()}) is not on a graph edge")
    nodes = sorted(set(routed.initial) | {q for g in routed.circuit.gates for q in g.qubits})
    compact = {p: i for i, p in enumerate(nodes)}
    try:
        for k in routed.inserted:
            if routed.circuit.gates[k].kind != "swap":
                return VerificationResult(False, f"gate {k} recorded as inserted SWAP is {routed.circuit.gates[k].kind}")
        moved = _node_permutation(routed, nodes)
    except (IndexError, KeyError) as exc:
        return VerificationResult(False, f"inconsistent inserted-SWAP record: {exc}")
    for q, (p0, p1) in enumerate(zip(routed.initial, routed.final)):
        if moved[p0] != p1:
            return VerificationResult(False, f"logical qubit {q} should end on node {moved[p0]}, report says {p1}")
    if not check_unitary:
        return VerificationResult(True)
    n = len(nodes)
    lhs = input_circuit.relabeled([compact[p] for p in routed.initial], n_qubits=n)
    rhs = routed.circuit.relabeled(compact, n_qubits=n)
    perm = [compact[moved[p]] for p in nodes]
    if not equivalent_up_to_permutation(lhs, rhs, perm):
        return VerificationResult(False, "routed unitary differs from the input up to the final permutation")
    return VerificationResult(True)


def logical_probabilities(state: np.ndarray, final: Sequence[int], n_logical: int) -> np.ndarray:
    """Marginal distribution over logical basis indices after routing.

    Bit q of the logical index reads physical qubit ``final[q]``.
    """
    n_phys = int(state.size).bit_length() - 1
    probs = np.abs(state) ** 2
    out = np.zeros(2**n_logical)
    idx = np.arange(2**n_phys)
    logical = np.zeros_like(idx)
    for q, p in enumerate(final):
        logical |= ((idx >> p) & 1) << q
    np.add.at(out, logical, probs)
    return out


def search_initial_mappings(
    circuit: Circuit, graph: CouplingGraph, lookahead_depth: int = DEFAULT_LOOKAHEAD
) -> dict[tuple[int, ...], int]:
    """SWAP count for every placement of the circuit's qubits on the data nodes."""
    results = {}
    for perm in itertools.permutations(graph.data_nodes, circuit.n_qubits):
        results[perm] = route(circuit, graph, perm, lookahead_depth).swap_count
    return results
