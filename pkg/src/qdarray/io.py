"""Config ingestion and file emitters.

Configs are YAML. Lengths are written in nm, magnetisation in kA/m and
voltages in V; everything is converted to SI on the way in. Unknown keys are
errors. Numeric output uses fixed formats so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .electrostatics import BoxParams, PotentialGrid, Well
from .geometry import NM, PRESETS, preset_params
from .magnetostatics import FieldSample, MagnetAssembly, PrismMagnet
from .routing import CouplingGraph

KA_PER_M = 1e3
FIELD_HEADER = "x_nm,y_nm,z_nm,Bx_mT,By_mT,Bz_mT"
POTENTIAL_HEADER = "x_nm,y_nm,phi_V"

# parameters that are not lengths; everything else in a preset is nm
_PLAIN_KEYS = {
    "b_ext_dir",
    "plunger_voltage",
    "interdot_barrier_voltage",
    "reservoir_barrier_voltage",
    "reservoir_voltage",
    "etch",
    "extend_reservoirs",
    "eps_r",
}


class ConfigError(ValueError):
    pass


def load_yaml(source: str | Path) -> Any:
    """Parse a YAML file (or a string holding YAML when it contains a newline)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc


def check_keys(data: Mapping, allowed: Iterable[str], where: str) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _to_si(key: str, value: Any) -> Any:
    if key in _PLAIN_KEYS or value is None:
        return value
    if key == "magnetization":
        return float(value) * KA_PER_M
    if isinstance(value, (list, tuple)):
        return tuple(float(v) * NM for v in value)
    return float(value) * NM


def _from_si(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _PLAIN_KEYS:
        return list(value) if isinstance(value, tuple) else value
    if key == "magnetization":
        return value / KA_PER_M
    if isinstance(value, (list, tuple)):
        return [v / NM for v in value]
    return value / NM


def preset_overrides(preset: str, raw: Mapping[str, Any] | None) -> dict[str, Any]:
    """Convert config-unit overrides for ``preset`` to SI, rejecting unknown fields."""
    raw = dict(raw or {})
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (known: {', '.join(PRESETS)})")
    if preset == "none":
        if raw:
            raise ConfigError("preset 'none' takes no overrides")
        return {}
    params = preset_params(preset)
    check_keys(raw, [f.name for f in fields(params)], f"{preset} overrides")
    return {k: _to_si(k, v) for k, v in raw.items()}


def params_to_config(params) -> dict[str, Any]:
    """Inverse of :func:`preset_overrides`: every field in config units."""
    return {f.name: _from_si(f.name, getattr(params, f.name)) for f in fields(params)}


def box_params(raw: Mapping[str, Any] | None) -> BoxParams:
    raw = dict(raw or {})
    check_keys(raw, [f.name for f in fields(BoxParams)], "box")
    kw = {k: _to_si(k, v) for k, v in raw.items()}
    if "eps_r" in kw:
        kw["eps_r"] = {**BoxParams().eps_r, **dict(kw["eps_r"])}
    return BoxParams(**kw)


# ---------------------------------------------------------------------------
# Magnet assemblies


def assembly_from_config(data: Mapping[str, Any]) -> MagnetAssembly:
    """Assembly from ``{"prisms": [{"corner_min": [..nm], "corner_max": [..nm], "magnetization": [..kA/m]}]}``."""
    check_keys(data, ["prisms"], "assembly")
    prisms = []
    for k, entry in enumerate(data.get("prisms") or []):
        check_keys(entry, ["corner_min", "corner_max", "magnetization"], f"prisms[{k}]")
        try:
            prisms.append(
                PrismMagnet(
                    np.asarray(entry["corner_min"], float) * NM,
                    np.asarray(entry["corner_max"], float) * NM,
                    np.asarray(entry["magnetization"], float) * KA_PER_M,
                )
            )
        except KeyError as exc:
            raise ConfigError(f"prisms[{k}]: missing {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"prisms[{k}]: {exc}") from exc
    return MagnetAssembly(tuple(prisms))


def assembly_to_config(assembly: MagnetAssembly) -> dict[str, Any]:
    return {
        "prisms": [
            {
                "corner_min": [float(v / NM) for v in p.corner_min],
                "corner_max": [float(v / NM) for v in p.corner_max],
                "magnetization": [float(v / KA_PER_M) for v in p.magnetization],
            }
            for p in assembly
        ]
    }


def load_assembly(path: str | Path) -> MagnetAssembly:
    return assembly_from_config(load_yaml(path))


# ---------------------------------------------------------------------------
# CSV / JSON writers


def _fmt(v: float, digits: int = 9) -> str:
    s = f"{float(v):.{digits}g}"
    return "0" if s in ("-0", "0") else s


def field_map_csv(samples: Sequence[FieldSample]) -> str:
    """Rows in the input order; singular points are written as ``nan``."""
    lines = [FIELD_HEADER]
    for s in samples:
        x, y, z = (_fmt(v / NM) for v in s.point)
        if s.field is None:
            b = ("nan", "nan", "nan")
        else:
            b = tuple(_fmt(v * 1e3) for v in s.field)
        lines.append(",".join((x, y, z) + b))
    return "\n".join(lines) + "\n"


def read_field_map_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """(points_m, B_T) arrays back from :func:`field_map_csv` output."""
    lines = text.strip().splitlines()
    if lines[0] != FIELD_HEADER:
        raise ConfigError(f"unexpected header {lines[0]!r}")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]]).reshape(-1, 6)
    return data[:, :3] * NM, data[:, 3:] * 1e-3


def potential_csv(grid: PotentialGrid, plane_z: float = 0.0) -> str:
    p = grid.plane(plane_z)
    x, y = grid.box.x, grid.box.y
    lines = [POTENTIAL_HEADER]
    for j in range(y.size):
        for i in range(x.size):
            lines.append(f"{_fmt(x[i] / NM)},{_fmt(y[j] / NM)},{p[i, j]:.9f}")
    return "\n".join(lines) + "\n"


def wells_json(wells: Sequence[Well], extra: Mapping[str, Any] | None = None) -> str:
    doc = {"n_wells": len(wells), "wells": [{k: round(v, 6) for k, v in w.to_dict().items()} for w in wells]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Coupling graphs


def load_graph(path: str | Path) -> CouplingGraph:
    """Graph config: ``nodes: [{id, role, row?, col?}]``, ``edges: [[a, b], ...]``."""
    data = load_yaml(path)
    try:
        return CouplingGraph.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"graph config: {exc}") from exc


def graph_to_yaml(graph: CouplingGraph) -> str:
    return yaml.safe_dump(graph.to_dict(), sort_keys=False)
