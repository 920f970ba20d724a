"""Design checks for two-dimensional Si quantum-dot spin-qubit arrays.

Modules:
    magnetostatics: closed-form fields of uniformly magnetised prisms.
    geometry: dot layouts, micromagnet and gate-stack builders.
    addressability: b_trans, B_long, Rabi and resonance metrics.
    electrostatics: finite-difference Laplace solve of the gate stack.
    circuits: gate IR, statevector simulation, Toffoli-4 and Grover-4.
    routing: coupling graphs and lookahead SWAP insertion.
"""

from .addressability import addressability_report, b_long_at, b_trans_at, delta_fr, rabi_frequency
from .circuits import Circuit, Gate, equivalent_up_to_permutation, grover4, simulate, toffoli4
from .electrostatics import BoxParams, discretize, find_wells, solve_laplace
from .geometry import (
    build_co_gate_array,
    build_dot_layout,
    build_gate_stack_3x3,
    build_large_co_magnet,
    build_mm_3x3,
)
from .magnetostatics import MagnetAssembly, PrismMagnet, assembly_field, field_gradient, prism_field
from .routing import CouplingGraph, RoutedCircuit, chain_graph_fig3c, grid_graph_fig3b, route, verify_routing

__version__ = "0.1.0"
