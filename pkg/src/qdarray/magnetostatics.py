"""Stray fields of uniformly magnetized, axis-aligned rectangular prisms.

Every magnet in this package is a union of boxes, so the field is evaluated
with the exact magnetic-surface-charge closed form: each magnetization
component charges the two faces normal to it with sigma = +-M, and the field
of a uniformly charged rectangle integrates to logarithm and arctangent terms
over its four corners.

Units are SI throughout (m, A/m, T). Reporting code converts to nm / mT.
Grooves and holes are expressed by superposing a prism with negated
magnetization over the host.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.constants import mu_0

MU_0: float = mu_0
MAX_MAGNETIZATION: float = 2.0e6  # A/m, sanity bound (Co saturates near 1.4e6)
DEFAULT_EDGE_EPS: float = 1e-12  # m
DEFAULT_GRADIENT_STEP: float = 1e-9  # m

# Local axis order (in-plane u, in-plane v, normal) for a magnetization
# component along axis a. Cyclic so the local frame stays right-handed.
_LOCAL_AXES = ((1, 2, 0), (2, 0, 1), (0, 1, 2))


class SingularPointError(ValueError):
    """Raised when a field is requested on (or within eps of) a prism edge."""

    def __init__(self, point, prism_index: int | None = None, distance: float = 0.0):
        self.point = tuple(float(c) for c in np.asarray(point, dtype=float))
        self.prism_index = prism_index
        self.distance = distance
        where = "" if prism_index is None else f" of prism {prism_index}"
        super().__init__(
            f"point {self.point} lies {distance:.3g} m from an edge{where}; "
            "the closed-form field is singular there"
        )


def _as_vec3(value: ArrayLike, name: str) -> NDArray[np.float64]:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have three components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def _as_points(points: ArrayLike) -> tuple[NDArray[np.float64], bool]:
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 3 or pts.ndim != 2:
        raise ValueError(f"points must have shape (3,) or (N, 3), got {np.shape(points)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts, single


@dataclass(frozen=True, eq=False)
class PrismMagnet:
    """Axis-aligned box ``corner_min..corner_max`` with uniform magnetization (A/m)."""

    corner_min: NDArray[np.float64]
    corner_max: NDArray[np.float64]
    magnetization: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        lo = _as_vec3(self.corner_min, "corner_min")
        hi = _as_vec3(self.corner_max, "corner_max")
        m = _as_vec3(self.magnetization, "magnetization")
        if not np.all(lo < hi):
            raise ValueError(f"corner_min {lo} must be < corner_max {hi} componentwise")
        if np.linalg.norm(m) > MAX_MAGNETIZATION:
            raise ValueError(
                f"|magnetization| = {np.linalg.norm(m):.3g} A/m exceeds {MAX_MAGNETIZATION:.1e} A/m"
            )
        for name, arr in (("corner_min", lo), ("corner_max", hi), ("magnetization", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_center(cls, center, size, magnetization) -> "PrismMagnet":
        c = _as_vec3(center, "center")
        s = _as_vec3(size, "size")
        return cls(c - s / 2, c + s / 2, magnetization)

    def __eq__(self, other):
        if not isinstance(other, PrismMagnet):
            return NotImplemented
        return (
            np.array_equal(self.corner_min, other.corner_min)
            and np.array_equal(self.corner_max, other.corner_max)
            and np.array_equal(self.magnetization, other.magnetization)
        )

    def __hash__(self):
        return hash((self.corner_min.tobytes(), self.corner_max.tobytes(), self.magnetization.tobytes()))

    @property
    def size(self) -> NDArray[np.float64]:
        return self.corner_max - self.corner_min

    @property
    def center(self) -> NDArray[np.float64]:
        return (self.corner_max + self.corner_min) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    @property
    def moment(self) -> NDArray[np.float64]:
        """Total dipole moment M*V (A m^2)."""
        return self.magnetization * self.volume

    def negated(self) -> "PrismMagnet":
        return PrismMagnet(self.corner_min, self.corner_max, -self.magnetization)

    def scaled(self, k: float) -> "PrismMagnet":
        return PrismMagnet(self.corner_min, self.corner_max, k * self.magnetization)

    def translated(self, offset) -> "PrismMagnet":
        d = _as_vec3(offset, "offset")
        return PrismMagnet(self.corner_min + d, self.corner_max + d, self.magnetization)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        """Strict interior test, vectorized over points."""
        pts, _ = _as_points(points)
        return np.all((pts > self.corner_min) & (pts < self.corner_max), axis=1)

    def distance_to_surface(self, points: ArrayLike) -> NDArray[np.float64]:
        """Euclidean distance from each exterior point to the box (0 inside)."""
        pts, _ = _as_points(points)
        d = np.maximum(np.maximum(self.corner_min - pts, pts - self.corner_max), 0.0)
        return np.linalg.norm(d, axis=1)

    def edge_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        """Distance from each point to the nearest of the 12 box edges."""
        pts, _ = _as_points(points)
        best = np.full(len(pts), np.inf)
        lo, hi = self.corner_min, self.corner_max
        for a in range(3):
            b, c = [k for k in range(3) if k != a]
            along = np.maximum(np.maximum(lo[a] - pts[:, a], pts[:, a] - hi[a]), 0.0)
            for eb in (lo[b], hi[b]):
                for ec in (lo[c], hi[c]):
                    d = np.sqrt(along**2 + (pts[:, b] - eb) ** 2 + (pts[:, c] - ec) ** 2)
                    best = np.minimum(best, d)
        return best


def _log_diff(v_a, r_a, v_b, r_b, rho2):
    """ln(v_a + r_a) - ln(v_b + r_b) without cancellation for negative v.

    Both terms share the same rho2 = r^2 - v^2. For v < 0 the identity
    v + r = rho2 / (r - v) is used; rho2 cancels when both v are negative.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        both_pos = np.log((v_a + r_a) / (v_b + r_b))
        both_neg = np.log((r_b - v_b) / (r_a - v_a))
        la = np.where(v_a >= 0, np.log(v_a + r_a), np.log(rho2) - np.log(r_a - v_a))
        lb = np.where(v_b >= 0, np.log(v_b + r_b), np.log(rho2) - np.log(r_b - v_b))
        mixed = la - lb
    return np.where((v_a >= 0) & (v_b >= 0), both_pos, np.where((v_a < 0) & (v_b < 0), both_neg, mixed))


def _face_pair_h(pts_local, lo, hi, m_normal):
    """H of the two faces charged by a magnetization component normal to them.

    ``pts_local`` columns are (u-axis, v-axis, normal) in the local frame;
    ``lo``/``hi`` are the prism bounds in the same frame.
    """
    x, y, z = pts_local[:, 0], pts_local[:, 1], pts_local[:, 2]
    h = np.zeros_like(pts_local)
    for zk, sigma in ((lo[2], -m_normal), (hi[2], m_normal)):
        w = z - zk
        for xi, si in ((lo[0], 1.0), (hi[0], -1.0)):
            u = x - xi
            # d/dx: pair over y corners, sharing (u, w)
            v1, v2 = y - lo[1], y - hi[1]
            r1 = np.sqrt(u * u + v1 * v1 + w * w)
            r2 = np.sqrt(u * u + v2 * v2 + w * w)
            h[:, 0] += sigma * si * _log_diff(v2, r2, v1, r1, u * u + w * w)
        for yj, sj in ((lo[1], 1.0), (hi[1], -1.0)):
            v = y - yj
            u1, u2 = x - lo[0], x - hi[0]
            r1 = np.sqrt(u1 * u1 + v * v + w * w)
            r2 = np.sqrt(u2 * u2 + v * v + w * w)
            h[:, 1] += sigma * sj * _log_diff(u2, r2, u1, r1, v * v + w * w)
        sw, aw = np.sign(w), np.abs(w)
        for xi, si in ((lo[0], 1.0), (hi[0], -1.0)):
            u = x - xi
            for yj, sj in ((lo[1], 1.0), (hi[1], -1.0)):
                v = y - yj
                r = np.sqrt(u * u + v * v + w * w)
                h[:, 2] += sigma * si * sj * np.arctan2(u * v * sw, aw * r)
    return h / (4 * np.pi)


def _prism_b(prism: PrismMagnet, pts: NDArray[np.float64]) -> NDArray[np.float64]:
    h = np.zeros_like(pts)
    for a in range(3):
        m_a = prism.magnetization[a]
        if m_a == 0.0:
            continue
        axes = _LOCAL_AXES[a]
        local = pts[:, axes]
        h_local = _face_pair_h(local, prism.corner_min[list(axes)], prism.corner_max[list(axes)], m_a)
        h[:, axes] += h_local
    inside = prism.contains(pts)
    return MU_0 * (h + np.outer(inside, prism.magnetization))


def prism_field(prism: PrismMagnet, point: ArrayLike, eps: float = DEFAULT_EDGE_EPS) -> NDArray[np.float64]:
    """Flux density B (T) of one prism at ``point`` (shape (3,) or (N, 3)).

    Inside the prism B = mu0 (H + M). Raises :class:`SingularPointError` for
    points within ``eps`` of an edge or corner.
    """
    pts, single = _as_points(point)
    if np.any(prism.magnetization):
        dist = prism.edge_distance(pts)
        bad = np.flatnonzero(dist < eps)
        if bad.size:
            raise SingularPointError(pts[bad[0]], distance=float(dist[bad[0]]))
        b = _prism_b(prism, pts)
    else:
        b = np.zeros_like(pts)
    return b[0] if single else b


@dataclass(frozen=True)
class MagnetAssembly:
    """Ordered collection of prisms whose fields superpose."""

    prisms: tuple[PrismMagnet, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "prisms", tuple(self.prisms))
        for p in self.prisms:
            if not isinstance(p, PrismMagnet):
                raise TypeError(f"assembly members must be PrismMagnet, got {type(p).__name__}")

    def __len__(self) -> int:
        return len(self.prisms)

    def __iter__(self):
        return iter(self.prisms)

    def __add__(self, other: "MagnetAssembly") -> "MagnetAssembly":
        return MagnetAssembly(self.prisms + tuple(other.prisms))

    def scaled(self, k: float) -> "MagnetAssembly":
        return MagnetAssembly(tuple(p.scaled(k) for p in self.prisms))

    def translated(self, offset) -> "MagnetAssembly":
        return MagnetAssembly(tuple(p.translated(offset) for p in self.prisms))

    def negated(self) -> "MagnetAssembly":
        return self.scaled(-1.0)

    def with_groove(self, host_index: int, corner_min, corner_max) -> "MagnetAssembly":
        """Carve a box out of prism ``host_index`` by adding its negated twin."""
        host = self.prisms[host_index]
        groove = PrismMagnet(corner_min, corner_max, -host.magnetization)
        if np.any(groove.corner_min < host.corner_min) or np.any(groove.corner_max > host.corner_max):
            raise ValueError("groove must lie within its host prism")
        return MagnetAssembly(self.prisms + (groove,))

    def distance_to_surface(self, points: ArrayLike) -> NDArray[np.float64]:
        pts, _ = _as_points(points)
        if not self.prisms:
            return np.full(len(pts), np.inf)
        return np.min([p.distance_to_surface(pts) for p in self.prisms], axis=0)


def assembly_field(assembly: MagnetAssembly, point: ArrayLike, eps: float = DEFAULT_EDGE_EPS) -> NDArray[np.float64]:
    """Sum of :func:`prism_field` over the assembly members.

    A singular evaluation is re-raised with the offending prism index attached.
    """
    pts, single = _as_points(point)
    total = np.zeros_like(pts)
    for i, prism in enumerate(assembly.prisms):
        try:
            total += prism_field(prism, pts, eps)
        except SingularPointError as exc:
            raise SingularPointError(exc.point, prism_index=i, distance=exc.distance) from None
    return total[0] if single else total


def field_gradient(
    assembly: MagnetAssembly,
    point: ArrayLike,
    step: float = DEFAULT_GRADIENT_STEP,
    eps: float = DEFAULT_EDGE_EPS,
) -> NDArray[np.float64]:
    """Gradient tensor G[i, j] = dB_i/dr_j (T/m) by central differences.

    Accepts one point (returns 3x3) or an (N, 3) array (returns N x 3 x 3).
    ``assembly`` may also be any callable mapping (N, 3) points to (N, 3) B,
    which lets analytic test fields stand in for a magnet.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    pts, single = _as_points(point)
    offsets = np.concatenate([np.eye(3), -np.eye(3)]) * step
    stencil = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
    if callable(assembly):
        b = np.asarray(assembly(stencil), dtype=float)
    else:
        b = assembly_field(assembly, stencil, eps)
    b = b.reshape(len(pts), 6, 3)
    # b[:, j] is B at +h e_j, b[:, 3+j] at -h e_j; transpose to [i, j]
    grad = np.transpose(b[:, :3, :] - b[:, 3:, :], (0, 2, 1)) / (2 * step)
    return grad[0] if single else grad


def richardson_change(
    assembly: MagnetAssembly, point: ArrayLike, step: float = DEFAULT_GRADIENT_STEP
) -> float:
    """Largest entry change when the gradient step is halved, relative to max |G|."""
    g1 = field_gradient(assembly, point, step)
    g2 = field_gradient(assembly, point, step / 2)
    scale = np.max(np.abs(g2))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(g1 - g2)) / scale)


class FieldSample(NamedTuple):
    point: NDArray[np.float64]
    field: NDArray[np.float64] | None
    error: Exception | None = None


def field_map(
    assembly: MagnetAssembly, points: Iterable[ArrayLike], eps: float = DEFAULT_EDGE_EPS
) -> list[FieldSample]:
    """Evaluate B at each point, preserving order.

    A singular point yields a sample with ``field=None`` and the error attached;
    the rest of the map is still computed.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    if not pts:
        return []
    arr, _ = _as_points(np.stack(pts))
    bad = np.zeros(len(arr), dtype=bool)
    errors: dict[int, Exception] = {}
    for i, prism in enumerate(assembly.prisms):
        if not np.any(prism.magnetization):
            continue
        dist = prism.edge_distance(arr)
        for k in np.flatnonzero((dist < eps) & ~bad):
            errors[int(k)] = SingularPointError(arr[k], prism_index=i, distance=float(dist[k]))
        bad |= dist < eps
    good = np.flatnonzero(~bad)
    b = np.zeros_like(arr)
    if good.size:
        b[good] = assembly_field(assembly, arr[good], eps)
    return [
        FieldSample(arr[k], None, errors[k]) if bad[k] else FieldSample(arr[k], b[k])
        for k in range(len(arr))
    ]


def dipole_field(moment: ArrayLike, center: ArrayLike, point: ArrayLike) -> NDArray[np.float64]:
    """Point-dipole flux density, for far-field comparisons."""
    m = _as_vec3(moment, "moment")
    pts, single = _as_points(point)
    r = pts - _as_vec3(center, "center")
    rn = np.linalg.norm(r, axis=1, keepdims=True)
    rhat = r / rn
    b = MU_0 / (4 * np.pi) * (3 * rhat * (rhat @ m)[:, None] - m) / rn**3
    return b[0] if single else b


def make_assembly(prisms: Sequence[PrismMagnet] = ()) -> MagnetAssembly:
    return MagnetAssembly(tuple(prisms))
