"""Route the four-qubit Toffoli onto the two readout-aware layouts and run Grover.

Run with ``python3 demos/toffoli_routing.py``.
"""

import itertools

from qdarray.circuits import grover4, mcx_gray, probabilities, simulate, toffoli4
from qdarray.routing import (
    DEFAULT_MAPPINGS,
    chain_graph_fig3c,
    grid_graph_fig3b,
    logical_probabilities,
    route,
    search_initial_mappings,
    verify_routing,
)

c = toffoli4()
print(f"toffoli4: {c.two_qubit_count} two-qubit gates before routing")
print(c.to_text())

for g in (grid_graph_fig3b(), chain_graph_fig3c()):
    r = route(c, g, DEFAULT_MAPPINGS[g.name])
    ok = verify_routing(c, r, g)
    counts = search_initial_mappings(c, g)
    print(f"{g.name}: data nodes {g.data_nodes}, {r.swap_count} SWAPs, {r.two_qubit_count} two-qubit gates, verified {bool(ok)}")
    print(f"  over all 24 placements the router needs {min(counts.values())} to {max(counts.values())} SWAPs")

# The square plaquette cannot do better than three SWAPs; a T of data dots can.
tee = grid_graph_fig3b(data_nodes=(1, 3, 4, 5))
best = min(itertools.permutations(tee.data_nodes), key=lambda m: route(mcx_gray((1, 2, 3), 0), tee, m).swap_count)
r = route(mcx_gray((1, 2, 3), 0), tee, best)
print(f"T placement {tee.data_nodes} with mapping {best}: {r.swap_count} SWAPs, {r.two_qubit_count} two-qubit gates")

# Grover for |1101>, once on ideal hardware and once after routing.
g = grid_graph_fig3b()
circ = grover4(13, measure=False)
ideal = probabilities(simulate(circ))
routed = route(circ, g, DEFAULT_MAPPINGS["fig3b"])
nodes = sorted({q for x in routed.circuit.gates for q in x.qubits} | set(routed.initial))
compact = {n: i for i, n in enumerate(nodes)}
state = simulate(routed.circuit.relabeled(compact, n_qubits=len(nodes)))
after = logical_probabilities(state, [compact[n] for n in routed.final], 4)
print(f"\nGrover P(13): ideal {ideal[13]:.6f}, routed {after[13]:.6f}, exact 121/256 = {121 / 256:.6f}")
