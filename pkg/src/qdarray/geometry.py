"""Parametric builders for the device geometries.

Conventions: x points along the external field (and the default drive
direction), y is in-plane perpendicular to it, z points up from the quantum
well toward the gates and magnets. Dot (row, col) uses row 0 at the top
(+y) and col 0 on the left (-x), mirroring the Q11..Q33 labelling.

Dimensions that are not known for the real device (groove rectangle, plate
extent, Co gate thickness and standoff, quantum-well depth) are parameters
whose defaults were calibrated against target field metrics; they are
reconstructions, not measured values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np
from numpy.typing import NDArray

from .magnetostatics import MagnetAssembly, PrismMagnet

NM = 1e-9
UM = 1e-6
CO_MAGNETIZATION = 1.4e6  # A/m
DOT_PITCH = 120 * NM  # 70 nm dot region + 50 nm barrier


def _unit(v, name: str) -> NDArray[np.float64]:
    arr = np.asarray(v, dtype=float)
    n = np.linalg.norm(arr)
    if arr.shape != (3,) or not np.isfinite(n) or n == 0:
        raise ValueError(f"{name} must be a nonzero 3-vector, got {v}")
    return arr / n


@dataclass(frozen=True, eq=False)
class DotLayout:
    rows: int
    cols: int
    pitch: float
    qw_plane_z: float
    dot_positions: NDArray[np.float64]
    b_ext_dir: NDArray[np.float64]
    drive_dir: NDArray[np.float64]

    @property
    def n_dots(self) -> int:
        return self.rows * self.cols

    def index(self, dot: tuple[int, int] | int) -> int:
        if isinstance(dot, (int, np.integer)):
            k = int(dot)
        else:
            r, c = dot
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise IndexError(f"dot {dot} outside {self.rows}x{self.cols} layout")
            k = r * self.cols + c
        if not 0 <= k < self.n_dots:
            raise IndexError(f"dot index {k} outside layout of {self.n_dots} dots")
        return k

    def dot_ids(self) -> list[tuple[int, int]]:
        return [(r, c) for r in range(self.rows) for c in range(self.cols)]

    def label(self, dot) -> str:
        r, c = divmod(self.index(dot), self.cols)
        return f"Q{r + 1}{c + 1}" if self.rows < 10 and self.cols < 10 else f"Q{r + 1}_{c + 1}"

    def position(self, dot) -> NDArray[np.float64]:
        return self.dot_positions[self.index(dot)]

    def nearest_neighbor_pairs(self) -> list[tuple[int, int]]:
        """Flat-index pairs of horizontally and vertically adjacent dots."""
        pairs = []
        for r in range(self.rows):
            for c in range(self.cols):
                k = r * self.cols + c
                if c + 1 < self.cols:
                    pairs.append((k, k + 1))
                if r + 1 < self.rows:
                    pairs.append((k, k + self.cols))
        return pairs

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.cols - 1) * self.pitch, (self.rows - 1) * self.pitch)


def build_dot_layout(
    rows: int,
    cols: int,
    pitch: float = DOT_PITCH,
    qw_plane_z: float = 0.0,
    b_ext_dir=(1.0, 0.0, 0.0),
    drive_dir=None,
) -> DotLayout:
    """Grid of dot centres in the quantum-well plane, centred on the origin.

    ``drive_dir`` defaults to ``b_ext_dir``: the microwave drive sits on the
    barrier gate next to the dot along the external field.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be positive integers, got {rows}x{cols}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    rows, cols = int(rows), int(cols)
    b_ext = _unit(b_ext_dir, "b_ext_dir")
    drive = b_ext if drive_dir is None else _unit(drive_dir, "drive_dir")
    xs = (np.arange(cols) - (cols - 1) / 2) * pitch
    ys = ((rows - 1) / 2 - np.arange(rows)) * pitch
    pos = np.array([(x, y, qw_plane_z) for y in ys for x in xs], dtype=float)
    pos.setflags(write=False)
    return DotLayout(rows, cols, float(pitch), float(qw_plane_z), pos, b_ext, drive)


# ---------------------------------------------------------------------------
# Micromagnets


@dataclass(frozen=True)
class MM3x3Params:
    """Grooved plate micromagnet over the 3x3 array (lengths in m).

    The plate is centred on the array in x and shifted by ``plate_offset_y``
    in y. The groove is a box cut upward from the plate's bottom face, centred
    at (``groove_offset_x``, ``groove_offset_y``) in absolute coordinates.
    """

    plate_size_x: float = 780 * NM
    plate_size_y: float = 1370 * NM
    plate_offset_y: float = 280 * NM
    thickness: float = 250 * NM
    standoff: float = 143 * NM
    groove_size_x: float = 170 * NM
    groove_size_y: float = 810 * NM
    groove_offset_x: float = -150 * NM
    groove_offset_y: float = 40 * NM
    groove_depth: float = 210 * NM
    magnetization: float = CO_MAGNETIZATION
    qw_plane_z: float = 0.0
    b_ext_dir: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @property
    def mirror_symmetric(self) -> bool:
        return self.groove_offset_x == 0.0


def build_mm_3x3(params: MM3x3Params | None = None) -> MagnetAssembly:
    """Host plate plus a negated groove prism (omitted when the groove is empty)."""
    p = params or MM3x3Params()
    if p.thickness <= 0 or p.plate_size_x <= 0 or p.plate_size_y <= 0:
        raise ValueError("plate dimensions must be positive")
    m = p.magnetization * _unit(p.b_ext_dir, "b_ext_dir")
    z0 = p.qw_plane_z + p.standoff
    z1 = z0 + p.thickness
    host = PrismMagnet(
        (-p.plate_size_x / 2, p.plate_offset_y - p.plate_size_y / 2, z0),
        (p.plate_size_x / 2, p.plate_offset_y + p.plate_size_y / 2, z1),
        m,
    )
    assembly = MagnetAssembly((host,))
    if min(p.groove_size_x, p.groove_size_y, p.groove_depth) <= 0:
        return assembly
    if p.groove_depth > p.thickness:
        raise ValueError("groove deeper than the plate")
    lo = (p.groove_offset_x - p.groove_size_x / 2, p.groove_offset_y - p.groove_size_y / 2, z0)
    hi = (p.groove_offset_x + p.groove_size_x / 2, p.groove_offset_y + p.groove_size_y / 2, z0 + p.groove_depth)
    tol = 1e-15
    if np.any(np.asarray(lo) < host.corner_min - tol) or np.any(np.asarray(hi) > host.corner_max + tol):
        raise ValueError("groove must lie within the plate")
    lo = np.maximum(lo, host.corner_min)
    hi = np.minimum(hi, host.corner_max)
    return assembly.with_groove(0, lo, hi)


@dataclass(frozen=True)
class LargeCoParams:
    """30 x 30 x 5 um^3 Co block beside the array; ``offset`` is its centre."""

    size: tuple[float, float, float] = (30 * UM, 30 * UM, 5 * UM)
    offset: tuple[float, float, float] = (-18.0 * UM, 0.0, 1.5 * UM)
    magnetization: float = CO_MAGNETIZATION
    b_ext_dir: tuple[float, float, float] = (1.0, 0.0, 0.0)
    array_window: float = 5 * UM
    qw_plane_z: float = 0.0


def build_large_co_magnet(params: LargeCoParams | None = None, offset=None) -> MagnetAssembly:
    """Single Co prism; rejected if its footprint overlaps the array window."""
    p = params or LargeCoParams()
    if offset is not None:
        p = replace(p, offset=tuple(float(v) for v in offset))
    center = np.asarray(p.offset, dtype=float)
    size = np.asarray(p.size, dtype=float)
    half_w = p.array_window / 2
    lo, hi = center - size / 2, center + size / 2
    overlaps_xy = lo[0] < half_w and hi[0] > -half_w and lo[1] < half_w and hi[1] > -half_w
    if overlaps_xy:
        raise ValueError("large magnet footprint overlaps the dot-array window")
    m = p.magnetization * _unit(p.b_ext_dir, "b_ext_dir")
    return MagnetAssembly((PrismMagnet(lo, hi, m),))


@dataclass(frozen=True)
class CoGateParams:
    """Co plunger/barrier gates above each dot (lengths in m).

    Plungers are 60 x 60 nm; barriers are 40 nm along the bond and 60 nm
    across it. Thickness and standoff are not published.
    """

    pitch: float = DOT_PITCH
    plunger_size: float = 60 * NM
    barrier_length: float = 40 * NM
    barrier_width: float = 60 * NM
    thickness: float = 40 * NM
    standoff: float = 25 * NM
    magnetization: float = CO_MAGNETIZATION
    b_ext_dir: tuple[float, float, float] = (1.0, 0.0, 0.0)
    qw_plane_z: float = 0.0


def build_co_gate_array(rows: int, cols: int, params: CoGateParams | None = None) -> MagnetAssembly:
    """One plunger prism per dot, then one barrier prism per nearest-neighbour bond."""
    p = params or CoGateParams()
    layout = build_dot_layout(rows, cols, p.pitch, p.qw_plane_z)
    m = p.magnetization * _unit(p.b_ext_dir, "b_ext_dir")
    z0 = p.qw_plane_z + p.standoff
    dz = p.thickness
    prisms = [
        PrismMagnet.from_center((x, y, z0 + dz / 2), (p.plunger_size, p.plunger_size, dz), m)
        for x, y, _ in layout.dot_positions
    ]
    for a, b in layout.nearest_neighbor_pairs():
        mid = (layout.dot_positions[a] + layout.dot_positions[b]) / 2
        along_x = b == a + 1
        size = (p.barrier_length, p.barrier_width, dz) if along_x else (p.barrier_width, p.barrier_length, dz)
        prisms.append(PrismMagnet.from_center((mid[0], mid[1], z0 + dz / 2), size, m))
    return MagnetAssembly(tuple(prisms))


# ---------------------------------------------------------------------------
# Overlapping gate stack

LAYER_DIMENSIONS_NM = {1: (50, 15), 2: (90, 25), 3: (60, 40), 4: (70, 60)}
DOT_REGION = 70 * NM
BARRIER_GAP = 50 * NM


@dataclass(frozen=True)
class Electrode:
    """One gate: an xy rectangle on a stack layer held at a fixed voltage."""

    name: str
    kind: str  # "plunger" | "barrier" | "reservoir"
    layer: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    width: float
    height: float
    voltage: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def footprint(self) -> list[tuple[float, float]]:
        return [(self.x_min, self.y_min), (self.x_max, self.y_min), (self.x_max, self.y_max), (self.x_min, self.y_max)]


@dataclass(frozen=True)
class GateStack:
    electrodes: tuple[Electrode, ...]
    dot_centers: tuple[tuple[float, float], ...] = ()

    def by_kind(self, kind: str) -> list[Electrode]:
        return [e for e in self.electrodes if e.kind == kind]

    def by_name(self, name: str) -> Electrode:
        for e in self.electrodes:
            if e.name == name:
                return e
        raise KeyError(name)

    def with_voltages(self, overrides: Mapping[str, float]) -> "GateStack":
        """Copy with per-electrode voltages replaced by name."""
        unknown = set(overrides) - {e.name for e in self.electrodes}
        if unknown:
            raise KeyError(f"unknown electrodes: {sorted(unknown)}")
        return replace(
            self,
            electrodes=tuple(replace(e, voltage=float(overrides.get(e.name, e.voltage))) for e in self.electrodes),
        )

    def with_uniform_voltage(self, v: float) -> "GateStack":
        return replace(self, electrodes=tuple(replace(e, voltage=float(v)) for e in self.electrodes))


@dataclass(frozen=True)
class StackParams:
    plunger_voltage: float = 0.6
    interdot_barrier_voltage: float = 0.4
    reservoir_barrier_voltage: float = 0.3
    reservoir_voltage: float = 0.6
    # lateral length of reservoir pads and how far barriers extend past the dot region
    reservoir_length: float = 120 * NM
    barrier_overhang: float = 50 * NM


def build_gate_stack_3x3(params: StackParams | None = None) -> GateStack:
    """Electrode set of the 3x3 device on four overlapping layers.

    Layer 1: inter-dot barriers of rows 1 and 3 and the dot-reservoir barriers.
    Layer 2: the eight outer plungers. Layer 3: the inter-row barriers and the
    row-2 barriers. Layer 4: the centre plunger. Reservoir pads ride on
    layer 2 left of Q11/Q31 and right of Q13/Q33.
    """
    p = params or StackParams()
    pitch = DOT_PITCH
    half_dot = DOT_REGION / 2
    centers = [((c - 1) * pitch, (1 - r) * pitch) for r in range(3) for c in range(3)]
    electrodes: list[Electrode] = []

    def dims(layer):
        w, h = LAYER_DIMENSIONS_NM[layer]
        return w * NM, h * NM

    def add(name, kind, layer, cx, cy, sx, sy, voltage):
        w, h = dims(layer)
        electrodes.append(Electrode(name, kind, layer, cx - sx / 2, cx + sx / 2, cy - sy / 2, cy + sy / 2, w, h, voltage))

    # barrier length across the bond: dot region plus an overhang each side
    across = DOT_REGION + 2 * p.barrier_overhang
    for r in range(3):
        for c in range(3):
            cx, cy = centers[r * 3 + c]
            label = f"{r + 1}{c + 1}"
            if (r, c) == (1, 1):
                w, _ = dims(4)
                add("P22", "plunger", 4, cx, cy, w, w, p.plunger_voltage)
            else:
                w, _ = dims(2)
                add(f"P{label}", "plunger", 2, cx, cy, w, w, p.plunger_voltage)
    for r in range(3):
        for c in range(2):
            (x0, y0), (x1, _) = centers[r * 3 + c], centers[r * 3 + c + 1]
            layer = 3 if r == 1 else 1
            w, _ = dims(layer)
            add(f"B{r + 1}{c + 1}-{r + 1}{c + 2}", "barrier", layer, (x0 + x1) / 2, y0, w, across, p.interdot_barrier_voltage)
    for r in range(2):
        for c in range(3):
            (x0, y0), (_, y1) = centers[r * 3 + c], centers[(r + 1) * 3 + c]
            w, _ = dims(3)
            add(f"B{r + 1}{c + 1}-{r + 2}{c + 1}", "barrier", 3, x0, (y0 + y1) / 2, across, w, p.interdot_barrier_voltage)
    reservoirs = [("r1", 0, -1), ("r2", 2, +1), ("r3", 6, -1), ("r4", 8, +1)]
    for name, k, side in reservoirs:
        cx, cy = centers[k]
        label = f"{k // 3 + 1}{k % 3 + 1}"
        w1, _ = dims(1)
        bx = cx + side * (half_dot + BARRIER_GAP / 2)
        add(f"B{name}-{label}", "barrier", 1, bx, cy, w1, across, p.reservoir_barrier_voltage)
        rx = cx + side * (half_dot + BARRIER_GAP + p.reservoir_length / 2)
        _, h2 = dims(2)
        electrodes.append(
            Electrode(
                f"R{name[1:]}", "reservoir", 2,
                rx - p.reservoir_length / 2, rx + p.reservoir_length / 2,
                cy - half_dot, cy + half_dot,
                DOT_REGION, h2, p.reservoir_voltage,
            )
        )
    return GateStack(tuple(electrodes), tuple(centers))


# ---------------------------------------------------------------------------
# Presets with field-by-field overrides

PRESETS = ("mm3x3", "co-gates", "large-co", "stack3x3", "none")
_PARAM_TYPES = {"mm3x3": MM3x3Params, "co-gates": CoGateParams, "large-co": LargeCoParams, "stack3x3": StackParams}


def preset_params(name: str, overrides: Mapping[str, Any] | None = None):
    """Default parameter object for a preset, with overrides applied.

    Unknown override keys raise ``KeyError`` so typos in configs surface.
    """
    if name not in _PARAM_TYPES:
        if name == "none" and not overrides:
            return None
        raise KeyError(f"unknown preset {name!r} (known: {', '.join(PRESETS)})")
    cls = _PARAM_TYPES[name]
    overrides = dict(overrides or {})
    names = {f.name for f in fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise KeyError(f"unknown {name} parameters: {sorted(unknown)}")
    clean = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    return replace(cls(), **clean)


def preset_assembly(name: str, overrides: Mapping[str, Any] | None = None, rows: int = 5, cols: int = 5) -> MagnetAssembly:
    if name == "none":
        return MagnetAssembly(())
    params = preset_params(name, overrides)
    if name == "mm3x3":
        return build_mm_3x3(params)
    if name == "large-co":
        return build_large_co_magnet(params)
    if name == "co-gates":
        return build_co_gate_array(rows, cols, params)
    raise KeyError(f"preset {name!r} is not a magnet assembly")
