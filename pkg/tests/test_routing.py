import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdarray.circuits import Circuit, Gate, grover4, mcx_gray, probabilities, simulate, toffoli4
from qdarray.routing import (
    DEFAULT_MAPPINGS,
    CouplingGraph,
    RoutedCircuit,
    RoutingError,
    chain_graph_fig3c,
    grid_graph_fig3b,
    logical_probabilities,
    route,
    search_initial_mappings,
    verify_routing,
)

from oracles import optimal_swaps


def pairs_of(circuit):
    return [g.qubits for g in circuit.gates if g.is_two_qubit]


def test_fig3b_graph_audit():
    g = grid_graph_fig3b()
    assert g.n_nodes == 9 and len(g.edges) == 12
    assert g.data_nodes == [0, 1, 3, 4]
    assert g.nodes_with_role("unused") == [8]
    assert len(g.nodes_with_role("ancilla")) == 4
    # every ancilla sits next to a data dot for readout
    for n in g.nodes_with_role("ancilla"):
        assert len(g.neighbors(n, "data")) == 1
    # the data nodes form a 4-cycle
    assert sorted(g.subgraph_edges(g.data_nodes)) == [(0, 1), (0, 3), (1, 4), (3, 4)]


def test_fig3c_graph_audit():
    g = chain_graph_fig3c()
    assert g.n_nodes == 8 and len(g.edges) == 10
    assert sorted(g.subgraph_edges(g.data_nodes)) == [(0, 1), (1, 2), (2, 3)]
    for n in g.data_nodes:
        assert g.neighbors(n, "ancilla") == [n + 4]


def test_distances_bfs():
    g = grid_graph_fig3b()
    d = g.distances(range(9))
    assert d[0][8] == 4 and d[4][0] == 2 and d[2][6] == 4
    sub = g.distances(g.data_nodes)
    assert sub[0][4] == 2 and 2 not in sub[0]


def test_graph_validation_and_round_trip():
    with pytest.raises(ValueError):
        CouplingGraph(2, frozenset({(0, 0)}), ("data", "data"))
    with pytest.raises(ValueError):
        CouplingGraph(2, frozenset({(0, 2)}), ("data", "data"))
    with pytest.raises(ValueError):
        CouplingGraph(2, frozenset({(0, 1)}), ("data", "boss"))
    g = grid_graph_fig3b()
    assert CouplingGraph.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        CouplingGraph.from_dict({**g.to_dict(), "colour": "red"})


def test_no_swaps_when_every_gate_is_local():
    g = chain_graph_fig3c()
    c = Circuit(4).cx(0, 1).cx(1, 2).cx(3, 2).h(0).cx(1, 0)
    r = route(c, g)
    assert r.swap_count == 0 and r.final == r.initial
    assert verify_routing(c, r, g)


def test_fig3b_counts():
    g = grid_graph_fig3b()
    r = route(toffoli4(), g, DEFAULT_MAPPINGS["fig3b"])
    assert verify_routing(toffoli4(), r, g)
    # the exact optimum on the data 4-cycle is 3 SWAPs, and the router reaches it
    assert r.swap_count == 3 and r.two_qubit_count == 16


def test_fig3c_counts():
    g = chain_graph_fig3c()
    r = route(toffoli4(), g, DEFAULT_MAPPINGS["fig3c"])
    assert (r.swap_count, r.two_qubit_count) == (5, 18)
    assert verify_routing(toffoli4(), r, g)


def test_default_mappings_are_best_placements():
    for g in (grid_graph_fig3b(), chain_graph_fig3c()):
        counts = search_initial_mappings(toffoli4(), g)
        assert len(counts) == 24
        assert counts[DEFAULT_MAPPINGS[g.name]] == min(counts.values())


@pytest.mark.parametrize("make", [grid_graph_fig3b, chain_graph_fig3c])
def test_exact_optimum_oracle(make):
    g = make()
    edges = g.subgraph_edges(g.data_nodes)
    pairs = pairs_of(toffoli4())
    best = min(optimal_swaps(pairs, edges, p) for p in itertools.permutations(g.data_nodes))
    routed = min(search_initial_mappings(toffoli4(), g).values())
    assert routed >= best
    expected = {"fig3b": 3, "fig3c": 5}[g.name]
    assert best == expected and routed == expected


def test_two_swaps_need_a_branching_placement():
    # with data on a T of the 3x3 grid the generic schedule routes in 2 SWAPs
    c = mcx_gray((1, 2, 3), 0)
    pairs = pairs_of(c)
    square = grid_graph_fig3b()
    tee = grid_graph_fig3b(data_nodes=(1, 3, 4, 5))
    assert min(optimal_swaps(pairs, square.subgraph_edges(square.data_nodes), p) for p in itertools.permutations(square.data_nodes)) > 2
    assert optimal_swaps(pairs, tee.subgraph_edges(tee.data_nodes), (1, 3, 5, 4)) == 2
    r = route(c, tee, (1, 3, 5, 4))
    assert (r.swap_count, r.two_qubit_count) == (2, 15)
    assert verify_routing(c, r, tee)


def test_deleting_a_swap_breaks_verification():
    for g in (grid_graph_fig3b(), chain_graph_fig3c()):
        r = route(toffoli4(), g, DEFAULT_MAPPINGS[g.name])
        k = r.inserted[0]
        gates = [x for i, x in enumerate(r.circuit.gates) if i != k]
        shift = [i - (i > k) for i in r.inserted if i != k]
        broken = RoutedCircuit(Circuit(r.circuit.n_qubits, gates), r.initial, r.final, r.swap_count - 1, r.two_qubit_count - 1, tuple(shift))
        assert not verify_routing(toffoli4(), broken, g)


def test_wrong_final_mapping_is_caught():
    g = grid_graph_fig3b()
    r = route(toffoli4(), g, DEFAULT_MAPPINGS["fig3b"])
    bad = RoutedCircuit(r.circuit, r.initial, r.initial, r.swap_count, r.two_qubit_count, r.inserted)
    res = verify_routing(toffoli4(), bad, g)
    assert not res and "should end" in res.reason


def test_illegal_edge_is_caught():
    g = chain_graph_fig3c()
    c = Circuit(4).cx(0, 3)
    fake = RoutedCircuit(Circuit(8).cx(0, 3), (0, 1, 2, 3), (0, 1, 2, 3), 0, 1)
    assert "not on a graph edge" in verify_routing(c, fake, g).reason


def test_deterministic_output():
    g = grid_graph_fig3b()
    a = route(toffoli4(), g, DEFAULT_MAPPINGS["fig3b"]).to_json()
    b = route(toffoli4(), g, DEFAULT_MAPPINGS["fig3b"]).to_json()
    assert a == b


def test_mapping_validation():
    g = grid_graph_fig3b()
    with pytest.raises(RoutingError):
        route(toffoli4(), g, (0, 1, 3))
    with pytest.raises(RoutingError):
        route(toffoli4(), g, (0, 1, 3, 3))
    with pytest.raises(RoutingError):
        route(toffoli4(), g, (0, 1, 3, 2))  # 2 is an ancilla
    with pytest.raises(RoutingError):
        route(Circuit(5).cx(0, 4), g)


def test_disconnected_graph_raises():
    g = CouplingGraph(4, frozenset({(0, 1), (2, 3)}), ("data",) * 4)
    with pytest.raises(RoutingError, match="disconnected"):
        route(Circuit(4).cx(0, 2), g)


def test_routed_grover_probability():
    g = grid_graph_fig3b()
    c = grover4(13, measure=False)
    r = route(c, g, DEFAULT_MAPPINGS["fig3b"])
    assert verify_routing(c, r, g)
    # simulate on the compact set of touched nodes
    nodes = sorted({q for x in r.circuit.gates for q in x.qubits} | set(r.initial))
    compact = {p: i for i, p in enumerate(nodes)}
    state = simulate(r.circuit.relabeled(compact, n_qubits=len(nodes)))
    p = logical_probabilities(state, [compact[x] for x in r.final], 4)
    assert p[13] == pytest.approx(121 / 256, abs=1e-9)
    np.testing.assert_allclose(p, probabilities(simulate(c)), atol=1e-12)


def test_route_runtime():
    t = time.perf_counter()
    for g in (grid_graph_fig3b(), chain_graph_fig3c()):
        r = route(toffoli4(), g, DEFAULT_MAPPINGS[g.name])
        verify_routing(toffoli4(), r, g)
    assert time.perf_counter() - t < 5


@st.composite
def random_circuits(draw, n=4):
    gates = []
    for _ in range(draw(st.integers(1, 12))):
        if draw(st.booleans()):
            gates.append(Gate("h", (draw(st.integers(0, n - 1)),)))
        else:
            a, b = draw(st.permutations(range(n)))[:2]
            gates.append(Gate(draw(st.sampled_from(["cx", "cz"])), (a, b)))
    return Circuit(n, gates)


@settings(max_examples=40, deadline=None)
@given(random_circuits(), st.sampled_from(["fig3b", "fig3c"]), st.permutations([0, 1, 2, 3]), st.integers(0, 5))
def test_random_circuits_route_correctly(c, name, order, depth):
    g = grid_graph_fig3b() if name == "fig3b" else chain_graph_fig3c()
    initial = [g.data_nodes[i] for i in order]
    r = route(c, g, initial, lookahead_depth=depth)
    assert r.two_qubit_count == c.two_qubit_count + r.swap_count
    assert verify_routing(c, r, g)
    # the inserted SWAPs on their own count is never below the exact optimum
    assert r.swap_count >= optimal_swaps(pairs_of(c), g.subgraph_edges(g.data_nodes), initial)


@pytest.mark.parametrize("make", [grid_graph_fig3b, chain_graph_fig3c])
def test_lookahead_no_worse_than_greedy_baseline(make):
    g = make()
    base = route(toffoli4(), g, DEFAULT_MAPPINGS[g.name], lookahead_depth=0)
    ahead = route(toffoli4(), g, DEFAULT_MAPPINGS[g.name])
    assert ahead.swap_count <= base.swap_count
