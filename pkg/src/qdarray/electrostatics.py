"""Finite-difference Laplace solver for the gate-defined potential.

The device is voxelised on a uniform grid with cell centres at integer
multiples of ``h`` (so the quantum-well plane z = 0 and the dot centres are
cell centres). Metal cells are Dirichlet, the outer box faces are
zero-flux, and the variable-permittivity operator div(eps grad phi) uses
harmonic-mean face coefficients on the 7-point stencil.

Vertical layout, from the bottom: SiGe buffer, Si quantum well centred on
z = 0, SiGe spacer up to ``qw_depth``, gate oxide, then four gate layers
that ride conformally over earlier layers with a thin oxide in between. All
non-metal space above the semiconductor is SiO2. Outside the active mesa the
semiconductor is etched and refilled with SiO2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .geometry import BARRIER_GAP, DOT_PITCH, DOT_REGION, NM, GateStack

log = logging.getLogger(__name__)

MAX_SPACING = 5 * NM
EPS_R_DEFAULT = {"Si": 11.7, "SiO2": 3.9, "SiGe": 13.0}
MATERIALS = ("metal", "SiO2", "Si", "SiGe")


class ConvergenceError(RuntimeError):
    """Solver hit max_iter; ``history`` holds the relative residuals seen."""

    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class BoxParams:
    h: float = 5 * NM
    qw_depth: float = 30 * NM  # QW centre to semiconductor surface
    qw_thickness: float = 10 * NM
    gate_oxide: float = 10 * NM
    interlayer_oxide: float = 5 * NM
    buffer_depth: float = 20 * NM  # SiGe kept below the QW centre
    cap_oxide: float = 20 * NM  # above the tallest gate
    lateral_margin: float = 60 * NM  # beyond the outermost non-reservoir electrode
    etch: bool = True
    etch_depth: float | None = None  # below the surface; None etches the whole modelled semiconductor
    extend_reservoirs: bool = True  # reservoir pads run into the box edge (ohmic side)
    eps_r: Mapping[str, float] = field(default_factory=lambda: dict(EPS_R_DEFAULT))


@dataclass(frozen=True, eq=False)
class SimulationBox:
    """Voxelised device. Arrays are indexed [ix, iy, iz]."""

    h: float
    origin: NDArray[np.float64]  # centre of cell (0, 0, 0)
    eps: NDArray[np.float64]  # relative permittivity, nan on metal
    metal: NDArray[np.bool_]
    voltage: NDArray[np.float64]  # nan off metal
    material: NDArray[np.int8]  # index into MATERIALS
    electrode_id: NDArray[np.int16]  # -1 off metal
    electrode_names: tuple[str, ...] = ()

    def __post_init__(self):
        if np.any(self.metal & ~np.isfinite(self.voltage)):
            raise ValueError("metal cell without a voltage")
        if np.any(self.eps[~self.metal] < 1):
            raise ValueError("relative permittivity below 1")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.metal.shape

    def axis(self, k: int) -> NDArray[np.float64]:
        return self.origin[k] + self.h * np.arange(self.shape[k])

    @property
    def x(self):
        return self.axis(0)

    @property
    def y(self):
        return self.axis(1)

    @property
    def z(self):
        return self.axis(2)

    def cells_of(self, name: str) -> NDArray[np.bool_]:
        return self.electrode_id == self.electrode_names.index(name)


def uniform_box(shape, h: float = MAX_SPACING, eps_r: float = 1.0) -> SimulationBox:
    """All-dielectric box; set metal with :func:`with_metal`."""
    shape = tuple(int(n) for n in shape)
    return SimulationBox(
        h=h,
        origin=np.zeros(3),
        eps=np.full(shape, float(eps_r)),
        metal=np.zeros(shape, bool),
        voltage=np.full(shape, np.nan),
        material=np.full(shape, MATERIALS.index("SiO2"), np.int8),
        electrode_id=np.full(shape, -1, np.int16),
    )


def with_metal(box: SimulationBox, mask: NDArray[np.bool_], voltage: float, name: str = "") -> SimulationBox:
    """Copy of ``box`` with ``mask`` cells turned into an electrode at ``voltage``."""
    mask = np.asarray(mask, bool)
    names = box.electrode_names + (name or f"E{len(box.electrode_names)}",)
    eps, metal, volt = box.eps.copy(), box.metal.copy(), box.voltage.copy()
    mat, eid = box.material.copy(), box.electrode_id.copy()
    eps[mask] = np.nan
    metal[mask] = True
    volt[mask] = voltage
    mat[mask] = MATERIALS.index("metal")
    eid[mask] = len(names) - 1
    return replace(box, eps=eps, metal=metal, voltage=volt, material=mat, electrode_id=eid, electrode_names=names)


def _closed(axis: NDArray, lo: float, hi: float, h: float) -> NDArray[np.bool_]:
    tol = 1e-6 * h
    return (axis >= lo - tol) & (axis <= hi + tol)


def _half_open(axis: NDArray, lo: float, hi: float, h: float) -> NDArray[np.bool_]:
    tol = 1e-6 * h
    return (axis >= lo - tol) & (axis < hi - tol)


def discretize(stack: GateStack, params: BoxParams | None = None) -> SimulationBox:
    """Voxelise a gate stack.

    Lateral footprints are closed intervals on cell centres so structures
    centred on a dot stay symmetric; vertical extents are half-open so a
    15 nm gate takes exactly 15 nm at 5 nm spacing.
    """
    p = params or BoxParams()
    h = p.h
    if h > MAX_SPACING * (1 + 1e-9):
        raise ValueError(f"grid spacing {h * 1e9:.3g} nm too coarse; the thinnest gate layer needs <= 5 nm")
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    eps_r = {**EPS_R_DEFAULT, **dict(p.eps_r)}
    unknown = set(eps_r) - set(EPS_R_DEFAULT)
    if unknown:
        raise KeyError(f"unknown materials {sorted(unknown)}")

    electrodes = list(stack.electrodes)
    core = [e for e in electrodes if e.kind != "reservoir"] or electrodes
    if not p.extend_reservoirs:
        core = electrodes
    if core:
        reach_x = max(max(abs(e.x_min), abs(e.x_max)) for e in core)
        reach_y = max(max(abs(e.y_min), abs(e.y_max)) for e in core)
    else:
        reach_x = reach_y = 1.5 * DOT_PITCH + DOT_REGION / 2
    half_x = np.ceil((reach_x + p.lateral_margin) / h) * h
    half_y = np.ceil((reach_y + p.lateral_margin) / h) * h
    nx = int(round(2 * half_x / h)) + 1
    ny = int(round(2 * half_y / h)) + 1

    surface = p.qw_depth
    gate_plane = surface + p.gate_oxide
    tallest = gate_plane + sum(
        e.height + p.interlayer_oxide for e in sorted({e.layer: e for e in electrodes}.values(), key=lambda e: e.layer)
    )
    z_lo = -np.ceil(p.buffer_depth / h) * h
    z_hi = np.ceil((tallest + p.cap_oxide) / h) * h
    nz = int(round((z_hi - z_lo) / h)) + 1
    origin = np.array([-half_x, -half_y, z_lo])
    x = origin[0] + h * np.arange(nx)
    y = origin[1] + h * np.arange(ny)
    z = origin[2] + h * np.arange(nz)

    mat = np.full((nx, ny, nz), MATERIALS.index("SiO2"), np.int8)
    zi = MATERIALS.index
    semi = z < surface - 1e-6 * h
    mat[:, :, semi] = zi("SiGe")
    mat[:, :, _half_open(z, -p.qw_thickness / 2, p.qw_thickness / 2, h)] = zi("Si")
    if p.etch and electrodes:
        active = _active_mesa(stack, x, y, h, half_x)
        depth = surface - z[0] + h if p.etch_depth is None else p.etch_depth
        etched = ~active[:, :, None] & _half_open(z, surface - depth, surface, h)[None, None, :]
        mat[etched] = zi("SiO2")
    eps = np.empty(mat.shape)
    for name in ("SiO2", "Si", "SiGe"):
        eps[mat == zi(name)] = eps_r[name]

    box = SimulationBox(
        h=h,
        origin=origin,
        eps=eps,
        metal=np.zeros(mat.shape, bool),
        voltage=np.full(mat.shape, np.nan),
        material=mat,
        electrode_id=np.full(mat.shape, -1, np.int16),
    )
    # conformal stacking: top[ix, iy] is the highest metal surface so far
    top = np.full((nx, ny), np.nan)
    for layer in sorted({e.layer for e in electrodes}):
        new_top = top.copy()
        for e in (e for e in electrodes if e.layer == layer):
            x_min, x_max = e.x_min, e.x_max
            if e.kind == "reservoir" and p.extend_reservoirs:
                if e.x_min > 0:
                    x_max = half_x
                else:
                    x_min = -half_x
            foot = _closed(x, x_min, x_max, h)[:, None] & _closed(y, e.y_min, e.y_max, h)[None, :]
            base = np.where(np.isnan(top), gate_plane, top + p.interlayer_oxide)
            zc = z[None, None, :]
            b = base[:, :, None]
            mask = foot[:, :, None] & (zc >= b - 1e-6 * h) & (zc < b + e.height - 1e-6 * h)
            if np.any(mask & box.metal & (box.voltage != e.voltage)):
                raise ValueError(f"{e.name} touches another electrode held at a different voltage")
            box = with_metal(box, mask, e.voltage, e.name)
            new_top = np.where(foot, np.fmax(new_top, base + e.height), new_top)
        top = new_top
    return box


def _active_mesa(stack: GateStack, x, y, h, half) -> NDArray[np.bool_]:
    """Unetched semiconductor: the dot block plus reservoir channels."""
    if stack.dot_centers:
        cx = np.array([c[0] for c in stack.dot_centers])
        cy = np.array([c[1] for c in stack.dot_centers])
        lo_x, hi_x = cx.min() - DOT_REGION / 2, cx.max() + DOT_REGION / 2
        lo_y, hi_y = cy.min() - DOT_REGION / 2, cy.max() + DOT_REGION / 2
        active = _closed(x, lo_x, hi_x, h)[:, None] & _closed(y, lo_y, hi_y, h)[None, :]
    else:
        active = np.zeros((x.size, y.size), bool)
    for e in stack.by_kind("reservoir"):
        x_min, x_max = (e.x_min - BARRIER_GAP, half) if e.x_min > 0 else (-half, e.x_max + BARRIER_GAP)
        active |= _closed(x, x_min, x_max, h)[:, None] & _closed(y, e.y_min, e.y_max, h)[None, :]
    return active


# ---------------------------------------------------------------------------
# Linear system


def face_weights(box: SimulationBox) -> list[NDArray[np.float64]]:
    """Coupling between each cell and its +axis neighbour, per axis.

    Harmonic mean of the two permittivities; a metal side takes the other
    cell's value. Metal-metal faces and faces leaving the box carry zero.
    """
    out = []
    for k in range(3):
        a = np.moveaxis(box.eps, k, 0)
        e1, e2 = a[:-1], a[1:]
        m1, m2 = np.isnan(e1), np.isnan(e2)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = 2 * e1 * e2 / (e1 + e2)
        w = np.where(m1 & ~m2, e2, w)
        w = np.where(m2 & ~m1, e1, w)
        w = np.where(m1 & m2, 0.0, w)
        out.append(np.moveaxis(w, 0, k))
    return out


def assemble(box: SimulationBox) -> tuple[sp.csr_matrix, NDArray[np.float64], NDArray[np.int64]]:
    """Sparse system A phi_free = b over non-metal cells.

    Returns (A, b, free) with ``free`` the flat indices of the unknowns.
    """
    shape = box.shape
    n = int(np.prod(shape))
    free = np.flatnonzero(~box.metal.ravel())
    pos = np.full(n, -1, np.int64)
    pos[free] = np.arange(free.size)
    idx = np.arange(n).reshape(shape)
    vflat = np.nan_to_num(box.voltage.ravel())
    mflat = box.metal.ravel()
    diag = np.zeros(free.size)
    b = np.zeros(free.size)
    rows, cols, vals = [], [], []
    for k, w in enumerate(face_weights(box)):
        lo = np.take(idx, np.arange(shape[k] - 1), axis=k).ravel()
        hi = np.take(idx, np.arange(1, shape[k]), axis=k).ravel()
        w = w.ravel()
        keep = w > 0
        lo, hi, w = lo[keep], hi[keep], w[keep]
        for i, j in ((lo, hi), (hi, lo)):
            fi = ~mflat[i]
            np.add.at(diag, pos[i[fi]], w[fi])
            both = fi & ~mflat[j]
            rows.append(pos[i[both]])
            cols.append(pos[j[both]])
            vals.append(-w[both])
            dj = fi & mflat[j]
            np.add.at(b, pos[i[dj]], w[dj] * vflat[j[dj]])
    rows.append(np.arange(free.size))
    cols.append(np.arange(free.size))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(free.size, free.size))
    return A, b, free


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    phi: NDArray[np.float64]
    box: SimulationBox
    residual: float
    iterations: int
    residual_history: tuple[float, ...] = ()
    method: str = ""

    def plane(self, z: float) -> NDArray[np.float64]:
        """phi on the horizontal plane at height z, linear in z between cell layers."""
        zs = self.box.z
        if not zs[0] <= z <= zs[-1]:
            raise ValueError(f"plane z={z:g} outside the box [{zs[0]:g}, {zs[-1]:g}]")
        t = (z - zs[0]) / self.box.h
        k = min(int(np.floor(t)), zs.size - 2)
        f = t - k
        if f < 1e-9:
            return self.phi[:, :, k].copy()
        return (1 - f) * self.phi[:, :, k] + f * self.phi[:, :, k + 1]

    def max_principle_violation(self) -> float:
        """How far the free-cell potential strays outside the metal voltage range (V)."""
        if not self.box.metal.any():
            return 0.0
        v = self.box.voltage[self.box.metal]
        free = self.phi[~self.box.metal]
        if free.size == 0:
            return 0.0
        return float(max(free.max() - v.max(), v.min() - free.min(), 0.0))


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def solve_laplace(
    box: SimulationBox,
    tol: float = 1e-10,
    max_iter: int = 20000,
    method: str = "amg",
    omega: float = 1.9,
    initial: NDArray[np.float64] | None = None,
) -> PotentialGrid:
    """Solve div(eps grad phi) = 0 with metal cells fixed.

    ``method``: ``"amg"`` (conjugate gradients with a smoothed-aggregation
    preconditioner, the default) or ``"sor"`` (red-black successive
    over-relaxation with factor ``omega``, fixed sweep order). Both stop on
    the relative 2-norm residual ||b - A phi|| / ||b|| < tol.

    Raises:
        ValueError: no metal cells, or bad arguments.
        ConvergenceError: tolerance not reached within ``max_iter``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not box.metal.any():
        raise ValueError("need at least one metal cell to fix the potential")
    A, b, free = assemble(box)
    phi = np.where(box.metal, box.voltage, 0.0)
    if initial is not None:
        x0 = np.asarray(initial, float).ravel()[free]
    else:
        # mean metal voltage: exact when every electrode sits at the same value
        x0 = np.full(free.size, float(np.mean(box.voltage[box.metal])))
    if free.size == 0:
        return PotentialGrid(phi, box, 0.0, 0, (0.0,), method)
    if method == "amg":
        x, history = _solve_amg(A, b, x0, tol, max_iter)
    elif method == "sor":
        if not 0 < omega < 2:
            raise ValueError("omega must lie in (0, 2)")
        x, history = _solve_sor(box, phi, x0, free, A, b, tol, max_iter, omega)
    else:
        raise ValueError(f"unknown method {method!r}")
    flat = phi.ravel()
    flat[free] = x
    phi = flat.reshape(box.shape)
    res = _relative_residual(A, x, b)
    log.debug("laplace %s: %d iterations, residual %.3g", method, len(history) - 1, res)
    return PotentialGrid(phi, box, res, len(history) - 1, tuple(history), method)


def _solve_amg(A, b, x0, tol, max_iter):
    import pyamg

    history = [_relative_residual(A, x0, b)]
    if history[0] < tol:
        return x0, history
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
    M = ml.aspreconditioner(cycle="V")
    nb = np.linalg.norm(b) or 1.0

    def record(xk):
        history.append(float(np.linalg.norm(b - A @ xk) / nb))

    x, info = spla.cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=record)
    if info != 0 or _relative_residual(A, x, b) >= tol:
        raise ConvergenceError(f"CG did not reach rtol {tol:g} in {max_iter} iterations (last {history[-1]:.3g})", history)
    return x, history


def _solve_sor(box, phi, x0, free, A, b, tol, max_iter, omega):
    shape = box.shape
    flat = phi.ravel().copy()
    flat[free] = x0
    u = flat.reshape(shape)
    w = face_weights(box)
    # neighbour weights in the six directions, zero at box faces
    wm = [np.zeros(shape) for _ in range(3)]
    wp = [np.zeros(shape) for _ in range(3)]
    for k in range(3):
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[k] = slice(0, shape[k] - 1)
        sl_hi[k] = slice(1, shape[k])
        wp[k][tuple(sl_lo)] = w[k]
        wm[k][tuple(sl_hi)] = w[k]
    diag = sum(wm) + sum(wp)
    free_mask = ~box.metal & (diag > 0)
    ii, jj, kk = np.indices(shape)
    colors = [free_mask & ((ii + jj + kk) % 2 == c) for c in (0, 1)]
    pad = np.zeros(tuple(s + 2 for s in shape))
    history = [_relative_residual(A, u.ravel()[free], b)]
    it = 0
    while history[-1] >= tol:
        if it >= max_iter:
            raise ConvergenceError(f"SOR did not reach {tol:g} in {max_iter} sweeps (last {history[-1]:.3g})", history)
        for mask in colors:
            pad[1:-1, 1:-1, 1:-1] = u
            s = (
                wm[0] * pad[:-2, 1:-1, 1:-1] + wp[0] * pad[2:, 1:-1, 1:-1]
                + wm[1] * pad[1:-1, :-2, 1:-1] + wp[1] * pad[1:-1, 2:, 1:-1]
                + wm[2] * pad[1:-1, 1:-1, :-2] + wp[2] * pad[1:-1, 1:-1, 2:]
            )
            gs = np.divide(s, diag, out=np.zeros(shape), where=diag > 0)
            u[mask] += omega * (gs[mask] - u[mask])
        it += 1
        history.append(_relative_residual(A, u.ravel()[free], b))
    return u.ravel()[free].copy(), history


# ---------------------------------------------------------------------------
# Wells


@dataclass(frozen=True)
class Well:
    x: float
    y: float
    phi: float

    def to_dict(self) -> dict:
        return {"x_nm": self.x * 1e9, "y_nm": self.y * 1e9, "phi_V": self.phi}


def _parabolic_offset(fm: float, f0: float, fp: float) -> float:
    den = fm - 2 * f0 + fp
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (fm - fp) / den, -0.5, 0.5))


def local_maxima(plane: NDArray[np.float64], atol: float = 1e-9) -> list[tuple[int, int]]:
    """Interior cells strictly above all 8 neighbours by more than ``atol``."""
    p = np.asarray(plane, float)
    if p.shape[0] < 3 or p.shape[1] < 3:
        return []
    c = p[1:-1, 1:-1]
    ok = np.ones(c.shape, bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == dy == 0:
                continue
            nb = p[1 + dx : p.shape[0] - 1 + dx, 1 + dy : p.shape[1] - 1 + dy]
            ok &= c > nb + atol
    i, j = np.nonzero(ok)
    return [(int(a) + 1, int(b) + 1) for a, b in zip(i, j)]


def find_wells(grid: PotentialGrid, plane_z: float = 0.0, atol: float = 1e-9) -> list[Well]:
    """Potential maxima (electron energy minima) in the plane at ``plane_z``.

    Positions are refined to sub-cell accuracy with a parabola through each
    maximum and its two neighbours along x and y. Sorted by phi, highest first.
    """
    p = grid.plane(plane_z)
    x, y, h = grid.box.x, grid.box.y, grid.box.h
    wells = []
    for i, j in local_maxima(p, atol):
        dx = _parabolic_offset(p[i - 1, j], p[i, j], p[i + 1, j])
        dy = _parabolic_offset(p[i, j - 1], p[i, j], p[i, j + 1])
        wells.append(Well(float(x[i] + dx * h), float(y[j] + dy * h), float(p[i, j])))
    wells.sort(key=lambda w: (-w.phi, w.x, w.y))
    return wells


def match_wells(wells: Sequence[Well], centers: Sequence[tuple[float, float]]) -> NDArray[np.float64]:
    """Distance from each centre to its nearest well (inf when there are none)."""
    if not wells:
        return np.full(len(centers), np.inf)
    w = np.array([(v.x, v.y) for v in wells])
    c = np.asarray(centers, float)
    return np.min(np.linalg.norm(c[:, None, :] - w[None, :, :], axis=2), axis=1)
