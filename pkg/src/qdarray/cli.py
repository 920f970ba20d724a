"""Command-line front end.

Each subcommand writes its data product (CSV or JSON) to ``--output`` or
stdout and a short human summary to stderr. ``--check`` compares the run
against the reproduction targets and exits 4 on a miss.

Exit codes: 0 success, 2 bad config, 3 solver non-convergence, 4 target miss.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import io as qio
from .addressability import (
    C_DRIVE_DEFAULT,
    DEFAULT_MARGIN,
    GAMMA_DEFAULT,
    addressability_report,
    nearest_neighbor_slopes,
)
from .circuits import Circuit, CircuitError, grover4, grover_success_probability, simulate, toffoli4
from .electrostatics import ConvergenceError, discretize, find_wells, match_wells, solve_laplace
from .geometry import NM, PRESETS, build_dot_layout, build_gate_stack_3x3, preset_assembly, preset_params
from .magnetostatics import MagnetAssembly, field_map
from .routing import (
    DEFAULT_LOOKAHEAD,
    DEFAULT_MAPPINGS,
    RoutingError,
    chain_graph_fig3c,
    grid_graph_fig3b,
    logical_probabilities,
    route,
    verify_routing,
)

log = logging.getLogger("qdarray")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_CHECK = 0, 2, 3, 4

# reproduction targets used by --check
MM3X3_BTRANS_RANGE = (0.4, 1.5)  # mT/nm
MM3X3_MIN_DELTA_B = 5.0  # mT
CO_GATES_MEAN_RABI = (20.0, 60.0)  # MHz
CO_GATES_SPEEDUP = 2.0
LARGE_CO_MIN_DELTA_F = 100.0  # MHz between neighbours
LARGE_CO_DOTS = 40  # 40 x 40 dots at 120 nm fill the 5 um window
ROUTE_TARGETS = {"fig3b": (2, 15), "fig3c": (5, 18)}
WELL_COUNT, WELL_RADIUS = 9, 20 * NM

GRAPHS = {"fig3b": grid_graph_fig3b, "fig3c": chain_graph_fig3c}
CIRCUITS = {"toffoli4": toffoli4, "grover4": lambda: grover4(13, measure=False)}

_DEFAULT_WINDOW_NM = {"large-co": 2500.0}


# ---------------------------------------------------------------------------
# option plumbing


def _merge(args: argparse.Namespace, defaults: Mapping[str, Any], extra: Sequence[str] = ()) -> dict[str, Any]:
    """Flag value if given, else config value, else default. Unknown config keys are errors."""
    cfg = {}
    if args.config:
        raw = qio.load_yaml(args.config) or {}
        if not isinstance(raw, Mapping):
            raise qio.ConfigError(f"{args.config}: expected a mapping at top level")
        cfg = {str(k).replace("-", "_"): v for k, v in raw.items()}
        qio.check_keys(cfg, list(defaults) + list(extra), str(args.config))
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, default)
    for key in extra:
        out[key] = cfg.get(key)
    return out


def _parse_sets(items: Sequence[str] | None) -> dict[str, Any]:
    """``key=value`` pairs; values parsed as YAML scalars or lists."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise qio.ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip().replace("-", "_")] = qio.yaml.safe_load(value)
    return out


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _check(ok: bool, label: str, detail: str, failures: list[str]) -> None:
    _say(f"check {'PASS' if ok else 'FAIL'}: {label} ({detail})")
    if not ok:
        failures.append(label)


def _json(doc: Any) -> str:
    return json.dumps(_round(doc), indent=2, sort_keys=True) + "\n"


def _round(obj, digits: int = 10):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    return obj


def _assembly(opts: Mapping[str, Any], rows: int, cols: int) -> MagnetAssembly:
    if opts.get("assembly"):
        return qio.load_assembly(opts["assembly"])
    overrides = {**(opts.get("overrides") or {}), **opts.get("sets", {})}
    return preset_assembly(opts["preset"], qio.preset_overrides(opts["preset"], overrides), rows, cols)


def _layout_for(preset: str, rows: int, cols: int):
    params = preset_params(preset) if preset != "none" else None
    pitch = getattr(params, "pitch", None) or 120 * NM
    b_ext = getattr(params, "b_ext_dir", (1.0, 0.0, 0.0))
    return build_dot_layout(rows, cols, pitch, 0.0, b_ext)


def _large_co_neighbour_delta(source, gamma: float) -> tuple[float, float]:
    """(min x-bond slope mT/nm, matching delta f_r MHz) over the full dot window."""
    layout = build_dot_layout(LARGE_CO_DOTS, LARGE_CO_DOTS)
    sx, _ = nearest_neighbor_slopes(source, layout)
    slope = float(sx.min())
    return slope, gamma * slope * layout.pitch / NM


# ---------------------------------------------------------------------------
# subcommands


FIELD_MAP_DEFAULTS = {
    "preset": "mm3x3",
    "assembly": None,
    "rows": 5,
    "cols": 5,
    "plane_z": 0.0,
    "x_min": None,
    "x_max": None,
    "y_min": None,
    "y_max": None,
    "n": 41,
    "gamma": GAMMA_DEFAULT,
    "output": None,
}


def cmd_field_map(args) -> int:
    opts = _merge(args, FIELD_MAP_DEFAULTS, ["overrides"])
    opts["sets"] = _parse_sets(args.set)
    assembly = _assembly(opts, opts["rows"], opts["cols"])
    half = _DEFAULT_WINDOW_NM.get(opts["preset"], 300.0)
    lims = [opts[k] if opts[k] is not None else d for k, d in (("x_min", -half), ("x_max", half), ("y_min", -half), ("y_max", half))]
    n = int(opts["n"])
    if n < 2:
        raise qio.ConfigError("n must be at least 2")
    xs = np.linspace(lims[0], lims[1], n) * NM
    ys = np.linspace(lims[2], lims[3], n) * NM
    z = float(opts["plane_z"]) * NM
    pts = [(x, y, z) for y in ys for x in xs]
    samples = field_map(assembly, pts)
    _emit(qio.field_map_csv(samples), opts["output"])
    good = [s.field for s in samples if s.field is not None]
    bmax = max((float(np.linalg.norm(b)) for b in good), default=0.0) * 1e3
    _say(f"field-map: {len(samples)} points, {len(samples) - len(good)} singular, max |B| {bmax:.4g} mT")
    failures: list[str] = []
    if opts["preset"] == "large-co" and not opts["assembly"]:
        slope, df = _large_co_neighbour_delta(assembly, float(opts["gamma"]))
        _say(f"large-co: min nearest-neighbour slope {slope:.4f} mT/nm (delta f_r {df:.1f} MHz) over {LARGE_CO_DOTS}x{LARGE_CO_DOTS} dots")
        if args.check:
            _check(df > LARGE_CO_MIN_DELTA_F, "neighbour delta f_r > 100 MHz", f"{df:.1f} MHz", failures)
    elif args.check:
        _say(f"no field-map targets for preset {opts['preset']}")
    return EXIT_CHECK if failures else EXIT_OK


REPORT_DEFAULTS = {
    "preset": "mm3x3",
    "assembly": None,
    "rows": None,
    "cols": None,
    "margin": DEFAULT_MARGIN,
    "gamma": GAMMA_DEFAULT,
    "c_drive": C_DRIVE_DEFAULT,
    "format": "json",
    "output": None,
}


def cmd_report(args) -> int:
    opts = _merge(args, REPORT_DEFAULTS, ["overrides"])
    opts["sets"] = _parse_sets(args.set)
    preset = opts["preset"]
    if preset == "stack3x3":
        raise qio.ConfigError("stack3x3 is a gate stack, not a magnet; use the potential subcommand")
    size = 3 if preset == "mm3x3" else 5
    rows = int(opts["rows"] or size)
    cols = int(opts["cols"] or size)
    assembly = _assembly(opts, rows, cols)
    layout = _layout_for(preset, rows, cols)
    kw = dict(gamma=float(opts["gamma"]), c_drive=float(opts["c_drive"]))
    rep = addressability_report(assembly, layout, float(opts["margin"]), **kw)
    if opts["format"] == "csv":
        _emit(rep.to_csv(), opts["output"])
    else:
        _emit(rep.to_json(), opts["output"])
    _say(
        f"report {preset} {rows}x{cols}: addressable {str(rep.addressable).lower()}, "
        f"min delta f_r {rep.min_pairwise_delta:.4g} MHz, max f_Rabi {rep.max_f_rabi:.4g} MHz, "
        f"ratio {rep.ratio:.4g} (margin {rep.margin:g}), mean f_Rabi {rep.mean_f_rabi:.4g} MHz"
    )
    if not args.check:
        return EXIT_OK
    failures: list[str] = []
    if preset == "mm3x3":
        bt = [d.b_trans for d in rep.dots]
        lo, hi = MM3X3_BTRANS_RANGE
        _check(all(lo <= b <= hi for b in bt), "b_trans in [0.4, 1.5] mT/nm", f"{min(bt):.3f}-{max(bt):.3f}", failures)
        bl = np.array([d.b_long for d in rep.dots])
        dmin = float(np.min(np.abs(bl[:, None] - bl[None, :])[~np.eye(bl.size, dtype=bool)]))
        _check(dmin >= MM3X3_MIN_DELTA_B, "min |dB_long| >= 5 mT", f"{dmin:.2f} mT", failures)
        _check(rep.addressable, "addressable", f"ratio {rep.ratio:.2f}", failures)
    elif preset == "co-gates":
        lo, hi = CO_GATES_MEAN_RABI
        mean = rep.mean_f_rabi
        _check(lo <= mean <= hi, "mean f_Rabi in [20, 60] MHz", f"{mean:.1f} MHz", failures)
        ref = addressability_report(preset_assembly("mm3x3"), _layout_for("mm3x3", 3, 3), **kw).mean_f_rabi
        _check(mean > CO_GATES_SPEEDUP * ref, "mean f_Rabi > 2x mm3x3", f"{mean:.1f} vs {ref:.1f} MHz", failures)
    elif preset == "large-co":
        slope, df = _large_co_neighbour_delta(assembly, kw["gamma"])
        _check(df > LARGE_CO_MIN_DELTA_F, "neighbour delta f_r > 100 MHz", f"{df:.1f} MHz", failures)
    else:
        _say(f"no report targets for preset {preset}")
    return EXIT_CHECK if failures else EXIT_OK


ROUTE_DEFAULTS = {
    "circuit": "toffoli4",
    "graph": "fig3b",
    "initial": None,
    "lookahead": DEFAULT_LOOKAHEAD,
    "roles": "data",
    "output": None,
}


def _load_circuit(spec: str) -> Circuit:
    if spec in CIRCUITS:
        return CIRCUITS[spec]()
    return Circuit.from_text(Path(spec).read_text())


def _load_graph(spec: str):
    if spec in GRAPHS:
        return GRAPHS[spec]()
    return qio.load_graph(spec)


def _parse_initial(value) -> tuple[int, ...] | None:
    if value is None:
        return None
    if isinstance(value, str):
        return tuple(int(v) for v in value.replace(" ", "").split(",") if v)
    return tuple(int(v) for v in value)


def _initial_for(graph, n_qubits: int, value):
    """Explicit mapping, else the documented default for the named fixtures."""
    initial = _parse_initial(value)
    if initial is None and len(DEFAULT_MAPPINGS.get(graph.name, ())) == n_qubits:
        initial = DEFAULT_MAPPINGS[graph.name]
    return initial


def cmd_route(args) -> int:
    opts = _merge(args, ROUTE_DEFAULTS)
    circuit = _load_circuit(opts["circuit"]).without_measurements()
    graph = _load_graph(opts["graph"])
    roles = tuple(r.strip() for r in str(opts["roles"]).split(","))
    initial = _initial_for(graph, circuit.n_qubits, opts["initial"])
    routed = route(circuit, graph, initial, int(opts["lookahead"]), roles)
    doc = routed.to_dict()
    doc["graph"] = graph.name or str(opts["graph"])
    check_unitary = len(set(routed.initial) | {q for g in routed.circuit.gates for q in g.qubits}) <= 6
    result = verify_routing(circuit, routed, graph, check_unitary=check_unitary)
    doc["verified"] = bool(result)
    _emit(_json(doc), opts["output"])
    _say(
        f"route {opts['circuit']} on {doc['graph']}: swap_count {routed.swap_count}, "
        f"two_qubit_count {routed.two_qubit_count}, verify {'ok' if result else 'FAILED: ' + result.reason}"
    )
    if not args.check:
        return EXIT_OK
    failures: list[str] = []
    _check(bool(result), "verify_routing", result.reason or "edges legal, unitary matches", failures)
    key = (graph.name or opts["graph"]) if opts["circuit"] == "toffoli4" else None
    if key in ROUTE_TARGETS:
        s, t = ROUTE_TARGETS[key]
        _check(
            (routed.swap_count, routed.two_qubit_count) == (s, t),
            f"{key} swap_count {s} / two_qubit_count {t}",
            f"got {routed.swap_count} / {routed.two_qubit_count}",
            failures,
        )
    return EXIT_CHECK if failures else EXIT_OK


GROVER_DEFAULTS = {
    "marked": 13,
    "routed": False,
    "graph": "fig3b",
    "initial": None,
    "lookahead": DEFAULT_LOOKAHEAD,
    "output": None,
}


def cmd_grover(args) -> int:
    opts = _merge(args, GROVER_DEFAULTS)
    marked = int(opts["marked"])
    if not 0 <= marked < 16:
        raise qio.ConfigError("marked must be in 0..15")
    circ = grover4(marked, measure=False)
    failures: list[str] = []
    if opts["routed"]:
        graph = _load_graph(opts["graph"])
        routed = route(circ, graph, _initial_for(graph, 4, opts["initial"]), int(opts["lookahead"]))
        result = verify_routing(circ, routed, graph, check_unitary=False)
        probs = logical_probabilities(simulate(routed.circuit), routed.final, 4)
        _say(f"grover routed on {graph.name or opts['graph']}: {routed.swap_count} SWAPs, verify {'ok' if result else result.reason}")
        if args.check:
            _check(bool(result), "routing legal", result.reason or "ok", failures)
    else:
        probs = np.abs(simulate(circ)) ** 2
    lines = ["index,probability"] + [f"{k},{p:.12f}" for k, p in enumerate(probs)]
    _emit("\n".join(lines) + "\n", opts["output"])
    target = grover_success_probability()
    _say(f"grover: P({marked}) = {probs[marked]:.10f} (analytic {target:.10f})")
    if args.check:
        _check(abs(probs[marked] - target) < 1e-9, "P(marked) = 121/256", f"{probs[marked]:.12f}", failures)
    return EXIT_CHECK if failures else EXIT_OK


POTENTIAL_DEFAULTS = {
    "h": None,
    "qw_depth": None,
    "plane_z": 0.0,
    "uniform_voltage": None,
    "method": "amg",
    "omega": 1.9,
    "tol": 1e-10,
    "max_iter": 20000,
    "csv": None,
    "output": None,
}


def cmd_potential(args) -> int:
    opts = _merge(args, POTENTIAL_DEFAULTS, ["stack", "box", "voltages"])
    stack_over = {**(opts["stack"] or {}), **_parse_sets(args.set)}
    params = preset_params("stack3x3", qio.preset_overrides("stack3x3", stack_over))
    box_raw = dict(opts["box"] or {})
    if opts["h"] is not None:
        box_raw["h"] = opts["h"]
    if opts["qw_depth"] is not None:
        box_raw["qw_depth"] = opts["qw_depth"]
    bp = qio.box_params(box_raw)
    stack = build_gate_stack_3x3(params)
    voltages = {**(opts["voltages"] or {}), **_parse_sets(args.voltage)}
    if voltages:
        stack = stack.with_voltages({str(k): float(v) for k, v in voltages.items()})
    if opts["uniform_voltage"] is not None:
        stack = stack.with_uniform_voltage(float(opts["uniform_voltage"]))
    box = discretize(stack, bp)
    grid = solve_laplace(box, float(opts["tol"]), int(opts["max_iter"]), opts["method"], float(opts["omega"]))
    plane = float(opts["plane_z"]) * NM
    wells = find_wells(grid, plane)
    dist = match_wells(wells, stack.dot_centers)
    extra = {
        "grid_shape": list(box.shape),
        "h_nm": bp.h / NM,
        "iterations": grid.iterations,
        "plane_z_nm": plane / NM,
        "residual": float(f"{grid.residual:.3g}"),
        "method": grid.method,
    }
    _emit(qio.wells_json(wells, extra), opts["output"])
    if opts["csv"]:
        Path(opts["csv"]).write_text(qio.potential_csv(grid, plane))
    finite = dist[np.isfinite(dist)]
    _say(
        f"potential: grid {box.shape}, {grid.iterations} iterations, residual {grid.residual:.2e}, "
        f"{len(wells)} wells, max offset from plunger centres "
        + (f"{finite.max() / NM:.1f} nm" if finite.size else "n/a")
    )
    if not args.check:
        return EXIT_OK
    failures: list[str] = []
    _check(len(wells) == WELL_COUNT, "exactly 9 wells", f"{len(wells)} found", failures)
    _check(bool(np.all(dist <= WELL_RADIUS)), "wells within 20 nm of plunger centres", f"max {dist.max() / NM:.1f} nm", failures)
    viol = grid.max_principle_violation()
    _check(viol <= 1e-9, "discrete maximum principle", f"excess {viol:.1e} V", failures)
    return EXIT_CHECK if failures else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdarray", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML file whose keys mirror the long options (flags win)")
        p.add_argument("-o", "--output", help="data output path (default: stdout)")
        p.add_argument("--check", action="store_true", help="assert reproduction targets; exit 4 on a miss")

    p = sub.add_parser("field-map", help="sample B on a plane and write CSV")
    common(p)
    p.add_argument("--preset", choices=PRESETS, help="magnet preset (default mm3x3)")
    p.add_argument("--assembly", help="YAML prism list instead of a preset")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="preset override in nm / kA/m")
    p.add_argument("--rows", type=int, help="co-gates rows (default 5)")
    p.add_argument("--cols", type=int, help="co-gates cols (default 5)")
    p.add_argument("--plane-z", type=float, help="sampling plane height in nm (default 0, the QW)")
    for k in ("x-min", "x-max", "y-min", "y-max"):
        p.add_argument(f"--{k}", type=float, help="window edge in nm (default +-300, +-2500 for large-co)")
    p.add_argument("--n", type=int, help="points per axis (default 41)")
    p.add_argument("--gamma", type=float, help=f"MHz/mT (default {GAMMA_DEFAULT})")
    p.set_defaults(func=cmd_field_map)

    p = sub.add_parser("report", help="addressability report as JSON or CSV")
    common(p)
    p.add_argument("--preset", choices=[x for x in PRESETS if x != "stack3x3"], help="magnet preset (default mm3x3)")
    p.add_argument("--assembly", help="YAML prism list instead of a preset")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="preset override in nm / kA/m")
    p.add_argument("--rows", type=int, help="dot rows (default 3 for mm3x3, else 5)")
    p.add_argument("--cols", type=int, help="dot cols (default 3 for mm3x3, else 5)")
    p.add_argument("--margin", type=float, help=f"addressability margin (default {DEFAULT_MARGIN:g})")
    p.add_argument("--gamma", type=float, help=f"MHz/mT (default {GAMMA_DEFAULT})")
    p.add_argument("--c-drive", type=float, help=f"MHz nm/mT (default {C_DRIVE_DEFAULT})")
    p.add_argument("--format", choices=("json", "csv"), help="default json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("route", help="insert SWAPs and write the routing report as JSON")
    common(p)
    p.add_argument("--circuit", help="toffoli4, grover4 or a circuit text file (default toffoli4)")
    p.add_argument("--graph", help="fig3b, fig3c or a graph YAML/JSON file (default fig3b)")
    p.add_argument("--initial", help="comma-separated physical node per logical qubit (default: documented mapping)")
    p.add_argument("--lookahead", type=int, help=f"lookahead depth (default {DEFAULT_LOOKAHEAD})")
    p.add_argument("--roles", help="node roles usable for routing, comma separated (default data)")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("grover", help="four-qubit Grover probabilities as CSV")
    common(p)
    p.add_argument("--marked", type=int, help="marked basis index (default 13)")
    p.add_argument("--routed", action="store_true", default=None, help="route onto --graph first")
    p.add_argument("--graph", help="fig3b, fig3c or a graph file (default fig3b)")
    p.add_argument("--initial", help="comma-separated initial mapping")
    p.add_argument("--lookahead", type=int, help=f"lookahead depth (default {DEFAULT_LOOKAHEAD})")
    p.set_defaults(func=cmd_grover)

    p = sub.add_parser("potential", help="solve the 3x3 gate-stack potential; wells as JSON")
    common(p)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="stack3x3 parameter override")
    p.add_argument("--voltage", action="append", metavar="GATE=V", help="per-electrode voltage, e.g. P22=0.8")
    p.add_argument("--uniform-voltage", type=float, help="put every electrode at this voltage")
    p.add_argument("--h", type=float, help="grid spacing in nm (default 5, at most 5)")
    p.add_argument("--qw-depth", type=float, help="QW depth below the semiconductor surface in nm (default 30)")
    p.add_argument("--plane-z", type=float, help="well-search plane in nm (default 0, the QW)")
    p.add_argument("--method", choices=("amg", "sor"), help="linear solver (default amg)")
    p.add_argument("--omega", type=float, help="SOR over-relaxation (default 1.9)")
    p.add_argument("--tol", type=float, help="relative residual target (default 1e-10)")
    p.add_argument("--max-iter", type=int, help="iteration cap (default 20000)")
    p.add_argument("--csv", help="write the plane potential as x_nm,y_nm,phi_V")
    p.set_defaults(func=cmd_potential)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        _say(f"error: {exc}")
        return EXIT_NONCONVERGED
    except (qio.ConfigError, KeyError, ValueError, TypeError, CircuitError, RoutingError, OSError) as exc:
        _say(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
