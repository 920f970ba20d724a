"""Solve the 3x3 overlapping-gate potential and watch a well respond to its plunger.

Run with ``python3 demos/gate_stack_wells.py`` (about 15 s).
"""

import numpy as np

from qdarray.electrostatics import discretize, find_wells, match_wells, solve_laplace
from qdarray.geometry import NM, build_gate_stack_3x3

stack = build_gate_stack_3x3()
box = discretize(stack)
print(f"grid {box.shape} at {box.h / NM:g} nm, {len(box.electrode_names)} electrodes")

grid = solve_laplace(box)
print(f"solved in {grid.iterations} CG iterations, residual {grid.residual:.1e}")
wells = find_wells(grid)
print(f"{len(wells)} wells in the quantum-well plane:")
for w in sorted(wells, key=lambda w: (-w.y, w.x)):
    x, y = (round(v / NM, 1) + 0.0 for v in (w.x, w.y))
    print(f"  ({x:7.1f}, {y:7.1f}) nm  phi {w.phi:.4f} V")
dist = match_wells(wells, stack.dot_centers)
print(f"largest offset from a plunger centre: {dist.max() / NM:.1f} nm")

# Raise one plunger: its well gets the highest potential (lowest electron energy).
raised = solve_laplace(discretize(stack.with_voltages({"P13": 0.8})))
top = find_wells(raised)[0]
print(f"\nP13 at 0.8 V: deepest well now at ({top.x / NM:.1f}, {top.y / NM:.1f}) nm, P13 centre {np.array(stack.by_name('P13').center) / NM}")
