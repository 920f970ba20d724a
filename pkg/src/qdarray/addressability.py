"""Qubit metrics from micromagnet fields.

For every dot: the transverse slope b_trans that drives EDSR, the
longitudinal field B_long that sets its resonance frequency, the Rabi
frequency and the resonance shift. The array is addressable when the
smallest pairwise resonance difference exceeds ``margin`` times the
fastest Rabi frequency.

Reported units: mT, mT/nm, MHz.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numpy.typing import NDArray

from .geometry import DotLayout
from .magnetostatics import DEFAULT_GRADIENT_STEP, MagnetAssembly, assembly_field, field_gradient

C_DRIVE_DEFAULT = 12.0  # MHz nm / mT
GAMMA_DEFAULT = 28.0  # GHz/T == MHz/mT
DEFAULT_MARGIN = 5.0

T_TO_MT = 1e3
T_PER_M_TO_MT_PER_NM = 1e-6

FieldSource = Union[MagnetAssembly, Callable[[NDArray[np.float64]], NDArray[np.float64]]]


def _field(source: FieldSource, points: NDArray[np.float64]) -> NDArray[np.float64]:
    if callable(source):
        return np.asarray(source(np.atleast_2d(points)), dtype=float)
    return np.atleast_2d(assembly_field(source, points))


def _select(layout: DotLayout, dots) -> NDArray[np.float64]:
    if dots is None:
        return layout.dot_positions
    return np.array([layout.position(d) for d in dots])


def b_trans_values(source: FieldSource, layout: DotLayout, dots=None, step: float = DEFAULT_GRADIENT_STEP) -> NDArray[np.float64]:
    """b_trans (mT/nm) for the given dots, all dots by default."""
    pts = _select(layout, dots)
    grad = field_gradient(source, pts, step)
    slope = grad @ layout.drive_dir
    e = layout.b_ext_dir
    transverse = slope - np.outer(slope @ e, e)
    return np.linalg.norm(transverse, axis=1) * T_PER_M_TO_MT_PER_NM


def b_long_values(source: FieldSource, layout: DotLayout, dots=None) -> NDArray[np.float64]:
    """Field component along the external field (mT)."""
    return _field(source, _select(layout, dots)) @ layout.b_ext_dir * T_TO_MT


def b_trans_at(source: FieldSource, layout: DotLayout, dot, step: float = DEFAULT_GRADIENT_STEP) -> float:
    """|dB_perp/du| at one dot, u along the drive direction (mT/nm)."""
    return float(b_trans_values(source, layout, [dot], step)[0])


def b_long_at(source: FieldSource, layout: DotLayout, dot) -> float:
    return float(b_long_values(source, layout, [dot])[0])


def rabi_frequency(b_trans, c_drive: float = C_DRIVE_DEFAULT):
    """f_Rabi (MHz) = c_drive (MHz nm/mT) * b_trans (mT/nm)."""
    b = np.asarray(b_trans, dtype=float)
    if np.any(b < 0):
        raise ValueError("b_trans must be non-negative")
    f = c_drive * b
    return float(f) if f.ndim == 0 else f


def delta_fr(b_long_i, b_long_j, gamma: float = GAMMA_DEFAULT):
    """Resonance-frequency difference (MHz) for two B_long values in mT."""
    d = gamma * np.abs(np.asarray(b_long_i, dtype=float) - np.asarray(b_long_j, dtype=float))
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class DotMetrics:
    dot: tuple[int, int]
    label: str
    b_trans: float  # mT/nm
    b_long: float  # mT
    f_rabi: float  # MHz
    f_r_shift: float  # MHz, relative to the reference dot


@dataclass(frozen=True, eq=False)
class AddressabilityReport:
    dots: tuple[DotMetrics, ...]
    delta_fr: NDArray[np.float64]
    min_pairwise_delta: float
    max_f_rabi: float
    margin: float
    addressable: bool
    reference: tuple[int, int]
    gamma: float = GAMMA_DEFAULT
    c_drive: float = C_DRIVE_DEFAULT
    nearest_neighbor_pairs: tuple[tuple[int, int], ...] = field(default=())

    @property
    def mean_f_rabi(self) -> float:
        return float(np.mean([d.f_rabi for d in self.dots]))

    @property
    def ratio(self) -> float:
        """min pairwise delta f_r over max f_Rabi (inf when nothing drives)."""
        if self.max_f_rabi == 0:
            return float("inf") if self.min_pairwise_delta > 0 else 0.0
        return self.min_pairwise_delta / self.max_f_rabi

    def min_nearest_neighbor_delta(self) -> float:
        if not self.nearest_neighbor_pairs:
            return float("inf")
        return float(min(self.delta_fr[a, b] for a, b in self.nearest_neighbor_pairs))

    def to_dict(self) -> dict:
        return {
            "addressable": bool(self.addressable),
            "margin": self.margin,
            "min_pairwise_delta_fr_MHz": _finite(self.min_pairwise_delta),
            "max_f_rabi_MHz": self.max_f_rabi,
            "mean_f_rabi_MHz": self.mean_f_rabi,
            "ratio": _finite(self.ratio),
            "min_nearest_neighbor_delta_fr_MHz": _finite(self.min_nearest_neighbor_delta()),
            "gamma_MHz_per_mT": self.gamma,
            "c_drive_MHz_nm_per_mT": self.c_drive,
            "reference_dot": list(self.reference),
            "dots": [
                {
                    "row": d.dot[0],
                    "col": d.dot[1],
                    "label": d.label,
                    "b_trans_mT_per_nm": d.b_trans,
                    "b_long_mT": d.b_long,
                    "f_rabi_MHz": d.f_rabi,
                    "f_r_shift_MHz": d.f_r_shift,
                }
                for d in self.dots
            ],
        }

    def to_json(self) -> str:
        return json.dumps(_round_floats(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "label", "b_trans_mT_per_nm", "b_long_mT", "f_rabi_MHz", "f_r_shift_MHz"])
        for d in self.dots:
            w.writerow([d.dot[0], d.dot[1], d.label, f"{d.b_trans:.6g}", f"{d.b_long:.6g}", f"{d.f_rabi:.6g}", f"{d.f_r_shift:.6g}"])
        return buf.getvalue()


def _finite(x: float):
    return None if not np.isfinite(x) else float(x)


def _round_floats(obj, digits: int = 10):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v, digits) for v in obj]
    return obj


def addressability_report(
    source: FieldSource,
    layout: DotLayout,
    margin: float = DEFAULT_MARGIN,
    *,
    reference=None,
    gamma: float = GAMMA_DEFAULT,
    c_drive: float = C_DRIVE_DEFAULT,
    step: float = DEFAULT_GRADIENT_STEP,
    pairwise: bool = True,
) -> AddressabilityReport:
    """Per-dot metrics plus the crosstalk verdict.

    ``reference`` selects the dot that f_r shifts are measured from (centre
    dot by default). With ``pairwise=False`` the full delta matrix is skipped
    and only nearest neighbours are compared, for large layouts.
    """
    if not margin > 1:
        raise ValueError(f"margin must exceed 1, got {margin}")
    if reference is None:
        reference = (layout.rows // 2, layout.cols // 2)
    ref = layout.index(reference)
    bt = b_trans_values(source, layout, step=step)
    bl = b_long_values(source, layout)
    fr = rabi_frequency(bt, c_drive)
    shift = gamma * (bl - bl[ref])
    n = layout.n_dots
    nn = tuple(layout.nearest_neighbor_pairs())
    if pairwise:
        matrix = delta_fr(bl[:, None], bl[None, :], gamma)
        np.fill_diagonal(matrix, 0.0)
        min_delta = float(np.min(matrix[~np.eye(n, dtype=bool)])) if n > 1 else float("inf")
    else:
        matrix = np.full((n, n), np.nan)
        for a, b in nn:
            matrix[a, b] = matrix[b, a] = delta_fr(bl[a], bl[b], gamma)
        np.fill_diagonal(matrix, 0.0)
        min_delta = float(min((matrix[a, b] for a, b in nn), default=float("inf")))
    max_rabi = float(np.max(fr))
    metrics = tuple(
        DotMetrics(dot, layout.label(dot), float(bt[k]), float(bl[k]), float(fr[k]), float(shift[k]))
        for k, dot in enumerate(layout.dot_ids())
    )
    return AddressabilityReport(
        dots=metrics,
        delta_fr=matrix,
        min_pairwise_delta=min_delta,
        max_f_rabi=max_rabi,
        margin=margin,
        addressable=bool(min_delta > margin * max_rabi),
        reference=tuple(layout.dot_ids()[ref]),
        gamma=gamma,
        c_drive=c_drive,
        nearest_neighbor_pairs=nn,
    )


def nearest_neighbor_slopes(source: FieldSource, layout: DotLayout) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """|dB_long| / pitch (mT/nm) across horizontal and vertical neighbour bonds."""
    bl = b_long_values(source, layout).reshape(layout.rows, layout.cols)
    pitch_nm = layout.pitch * 1e9
    return np.abs(np.diff(bl, axis=1)) / pitch_nm, np.abs(np.diff(bl, axis=0)) / pitch_nm
