"""Walk through the three magnet designs and what they buy in Rabi rate and addressability.

Run with ``python3 demos/magnet_addressability.py``.
"""

import numpy as np

from qdarray.addressability import addressability_report, nearest_neighbor_slopes
from qdarray.geometry import NM, build_co_gate_array, build_dot_layout, build_large_co_magnet, build_mm_3x3


def show(title, report):
    print(f"\n== {title}")
    print(f"{'dot':>4} {'b_trans':>9} {'B_long':>9} {'f_Rabi':>8}")
    for d in report.dots:
        print(f"{d.label:>4} {d.b_trans:9.3f} {d.b_long:9.2f} {d.f_rabi:8.2f}")
    print(f"min pairwise delta f_r {report.min_pairwise_delta:.1f} MHz, max f_Rabi {report.max_f_rabi:.2f} MHz")
    print(f"addressable at margin {report.margin:g}: {report.addressable} (ratio {report.ratio:.1f})")


# 1. A single grooved plate over a 3x3 array. The groove breaks the mirror
# symmetry so that all nine dots see a different longitudinal field.
mm = addressability_report(build_mm_3x3(), build_dot_layout(3, 3))
show("grooved plate over 3x3 dots (units: mT/nm, mT, MHz)", mm)

# 2. Magnetic gates right above every dot: much larger slopes, hence faster
# rotations, but a symmetric array gives degenerate resonances on its own.
co = addressability_report(build_co_gate_array(5, 5), build_dot_layout(5, 5))
print(f"\n== Co gates over 5x5 dots: mean f_Rabi {co.mean_f_rabi:.1f} MHz, {co.mean_f_rabi / mm.mean_f_rabi:.1f}x the plate")

# 3. A large block beside the array supplies the resonance spread instead.
large = build_large_co_magnet()
layout = build_dot_layout(40, 40)
sx, sy = nearest_neighbor_slopes(large, layout)
print("\n== 30 x 30 x 5 um block beside a 40 x 40 dot window")
print(f"B_long slope between x neighbours: {sx.min():.4f} to {sx.max():.4f} mT/nm")
print(f"smallest neighbour delta f_r along x: {28.0 * sx.min() * layout.pitch / NM:.0f} MHz")
print(f"y slopes stay small ({np.median(sy):.4f} mT/nm median), so the spread is usable along x only")
