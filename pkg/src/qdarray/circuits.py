"""Gate-list circuits, a dense statevector simulator, and the Toffoli-4 / Grover-4 builders.

Basis ordering is little-endian: qubit 0 is the least significant bit of the
basis index, so the ket |q3 q2 q1 q0> = |1101> is amplitude index 13.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

MAX_SIM_QUBITS = 14
MAX_UNITARY_QUBITS = 6

ONE_QUBIT = {"h", "x", "z", "phase", "measure"}
TWO_QUBIT = {"cx", "cz", "cphase", "cv", "cvdg", "swap"}
ANGLE_KINDS = {"phase", "cphase"}
ROOT_KINDS = {"cv", "cvdg"}
KINDS = ONE_QUBIT | TWO_QUBIT


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    """One operation. ``root`` r makes ``cv`` a controlled X**(1/r); ``cvdg`` is its inverse."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    root: int | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 1 if kind in ONE_QUBIT else 2
        if len(self.qubits) != arity:
            raise CircuitError(f"{kind} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{kind} operands must be distinct, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if kind in ANGLE_KINDS and self.angle is None:
            raise CircuitError(f"{kind} needs an angle")
        if kind in ROOT_KINDS:
            if self.root is None or int(self.root) != self.root or self.root < 1:
                raise CircuitError(f"{kind} needs a positive integer root, got {self.root}")
            object.__setattr__(self, "root", int(self.root))

    @property
    def arity(self) -> int:
        return len(self.qubits)

    @property
    def is_two_qubit(self) -> bool:
        return self.arity == 2

    def on(self, *qubits: int) -> "Gate":
        return Gate(self.kind, tuple(qubits), self.angle, self.root)

    def relabeled(self, mapping: Mapping[int, int] | Sequence[int]) -> "Gate":
        return self.on(*(mapping[q] for q in self.qubits))

    def inverse(self) -> "Gate":
        if self.kind == "cv":
            return Gate("cvdg", self.qubits, root=self.root)
        if self.kind == "cvdg":
            return Gate("cv", self.qubits, root=self.root)
        if self.kind in ANGLE_KINDS:
            return Gate(self.kind, self.qubits, -self.angle)
        if self.kind == "measure":
            raise CircuitError("measurement has no inverse")
        return self

    def to_text(self) -> str:
        parts = [self.kind, *map(str, self.qubits)]
        if self.kind in ROOT_KINDS:
            parts.append(str(self.root))
        if self.kind in ANGLE_KINDS:
            parts.append(repr(float(self.angle)))
        return " ".join(parts)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError("a circuit needs at least one qubit")
        self.gates = list(self.gates)
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate):
        if max(gate.qubits) >= self.n_qubits:
            raise CircuitError(f"gate {gate.to_text()!r} exceeds {self.n_qubits} qubits")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.n_qubits, other.n_qubits), self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.gates == other.gates

    # builder shorthands
    def h(self, q): return self.append(Gate("h", (q,)))
    def x(self, q): return self.append(Gate("x", (q,)))
    def z(self, q): return self.append(Gate("z", (q,)))
    def phase(self, q, theta): return self.append(Gate("phase", (q,), theta))
    def cx(self, c, t): return self.append(Gate("cx", (c, t)))
    def cz(self, a, b): return self.append(Gate("cz", (a, b)))
    def cphase(self, a, b, theta): return self.append(Gate("cphase", (a, b), theta))
    def cv(self, c, t, root): return self.append(Gate("cv", (c, t), root=root))
    def cvdg(self, c, t, root): return self.append(Gate("cvdg", (c, t), root=root))
    def swap(self, a, b): return self.append(Gate("swap", (a, b)))
    def measure(self, q): return self.append(Gate("measure", (q,)))

    @property
    def two_qubit_count(self) -> int:
        return sum(g.is_two_qubit for g in self.gates)

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def relabeled(self, mapping: Mapping[int, int] | Sequence[int], n_qubits: int | None = None) -> "Circuit":
        n = n_qubits if n_qubits is not None else self.n_qubits
        return Circuit(n, [g.relabeled(mapping) for g in self.gates])

    def without_measurements(self) -> "Circuit":
        return Circuit(self.n_qubits, [g for g in self.gates if g.kind != "measure"])

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.without_measurements().gates)])

    def to_text(self) -> str:
        lines = [f"# qubits {self.n_qubits}"]
        lines += [g.to_text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "Circuit":
        """Parse the one-gate-per-line format (``cx 0 1``, ``cv 1 0 4``, ``# comment``)."""
        gates = []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line, _, comment = raw.partition("#")
            words = comment.split()
            if len(words) == 2 and words[0] == "qubits" and not line.strip():
                declared = int(words[1])
            parts = line.split()
            if not parts:
                continue
            kind, args = parts[0].lower(), parts[1:]
            try:
                if kind in ROOT_KINDS:
                    gates.append(Gate(kind, (int(args[0]), int(args[1])), root=int(args[2])))
                    extra = args[3:]
                elif kind in ANGLE_KINDS:
                    arity = 1 if kind == "phase" else 2
                    gates.append(Gate(kind, tuple(int(a) for a in args[:arity]), float(args[arity])))
                    extra = args[arity + 1:]
                elif kind in KINDS:
                    arity = 1 if kind in ONE_QUBIT else 2
                    gates.append(Gate(kind, tuple(int(a) for a in args[:arity])))
                    extra = args[arity:]
                else:
                    raise CircuitError(f"unknown gate {kind!r}")
                if extra:
                    raise CircuitError(f"unexpected operands {extra}")
            except (IndexError, ValueError) as exc:
                raise CircuitError(f"line {lineno}: {raw.strip()!r}: {exc}") from None
        used = 1 + max((max(g.qubits) for g in gates), default=0)
        n = n_qubits or declared or used
        return cls(max(n, used) if n_qubits is None else n, gates)


# ---------------------------------------------------------------------------
# Statevector simulation

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def x_root(root: int, inverse: bool = False) -> NDArray[np.complex128]:
    """Principal root X**(1/root) = H diag(1, exp(i pi / root)) H."""
    phi = cmath.exp((-1j if inverse else 1j) * math.pi / root)
    return _H @ np.diag([1, phi]) @ _H


def _controlled(u: NDArray) -> NDArray[np.complex128]:
    m = np.eye(4, dtype=complex)
    m[2:, 2:] = u
    return m


def gate_matrix(gate: Gate) -> NDArray[np.complex128]:
    """Matrix in the operand basis; for two qubits the first operand is the high bit."""
    k = gate.kind
    if k == "h":
        return _H
    if k == "x":
        return _X
    if k == "z":
        return _Z
    if k == "phase":
        return np.diag([1, cmath.exp(1j * gate.angle)])
    if k == "cx":
        return _controlled(_X)
    if k == "cz":
        return _controlled(_Z)
    if k == "cphase":
        return _controlled(np.diag([1, cmath.exp(1j * gate.angle)]))
    if k == "cv":
        return _controlled(x_root(gate.root))
    if k == "cvdg":
        return _controlled(x_root(gate.root, inverse=True))
    if k == "swap":
        return _SWAP
    raise CircuitError(f"{k} has no unitary matrix")


def zero_state(n: int) -> NDArray[np.complex128]:
    return basis_state(n, 0)


def basis_state(n: int, index: int) -> NDArray[np.complex128]:
    if not 0 <= index < 2**n:
        raise CircuitError(f"basis index {index} out of range for {n} qubits")
    psi = np.zeros(2**n, dtype=complex)
    psi[index] = 1.0
    return psi


def _n_from_state(state: NDArray) -> int:
    n = int(state.size).bit_length() - 1
    if state.ndim != 1 or 2**n != state.size:
        raise CircuitError(f"state length {state.size} is not a power of two")
    return n


def apply_gate(state: NDArray[np.complex128], gate: Gate) -> NDArray[np.complex128]:
    """New state after ``gate``; measurement is a no-op here."""
    n = _n_from_state(state)
    if max(gate.qubits) >= n:
        raise CircuitError(f"gate {gate.to_text()!r} exceeds {n} qubits")
    if gate.kind == "measure":
        return state.copy()
    u = gate_matrix(gate).reshape([2] * (2 * gate.arity))
    # tensor axis of qubit q is n-1-q in a C-ordered reshape of a little-endian vector
    axes = [n - 1 - q for q in gate.qubits]
    psi = state.reshape([2] * n)
    out = np.tensordot(u, psi, axes=(list(range(gate.arity, 2 * gate.arity)), axes))
    out = np.moveaxis(out, list(range(gate.arity)), axes)
    return np.ascontiguousarray(out).reshape(-1)


def simulate(circuit: Circuit, initial: NDArray[np.complex128] | None = None) -> NDArray[np.complex128]:
    n = circuit.n_qubits
    if n > MAX_SIM_QUBITS:
        raise CircuitError(f"{n} qubits exceeds the simulator cap of {MAX_SIM_QUBITS}")
    state = zero_state(n) if initial is None else np.asarray(initial, dtype=complex).copy()
    if state.size != 2**n:
        raise CircuitError(f"initial state has {state.size} amplitudes, circuit needs {2**n}")
    for g in circuit.gates:
        state = apply_gate(state, g)
    return state


def probabilities(state: NDArray[np.complex128]) -> NDArray[np.float64]:
    return np.abs(state) ** 2


def unitary_of(circuit: Circuit) -> NDArray[np.complex128]:
    n = circuit.n_qubits
    if n > MAX_UNITARY_QUBITS:
        raise CircuitError(f"unitary construction capped at {MAX_UNITARY_QUBITS} qubits, got {n}")
    dim = 2**n
    return np.column_stack([simulate(circuit, basis_state(n, i)) for i in range(dim)])


def permutation_matrix(perm: Sequence[int]) -> NDArray[np.float64]:
    """Unitary moving the state of qubit q onto qubit perm[q]."""
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise CircuitError(f"{perm} is not a permutation of range({n})")
    dim = 2**n
    p = np.zeros((dim, dim))
    for i in range(dim):
        j = sum(((i >> q) & 1) << perm[q] for q in range(n))
        p[j, i] = 1.0
    return p


def equal_up_to_phase(a: NDArray, b: NDArray, atol: float = 1e-9) -> bool:
    return max_deviation_up_to_phase(a, b) < atol


def max_deviation_up_to_phase(a: NDArray, b: NDArray) -> float:
    """max |a - e^{i phi} b| with phi aligned on b's largest entry."""
    if a.shape != b.shape:
        return float("inf")
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) == 0:
        return float(np.max(np.abs(a)))
    phase = a[k] / b[k]
    phase /= abs(phase) if abs(phase) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def equivalent_up_to_permutation(c1: Circuit, c2: Circuit, perm: Sequence[int], atol: float = 1e-9) -> bool:
    """True iff U(c2) = P(perm) U(c1) up to a global phase."""
    if c1.n_qubits != c2.n_qubits:
        raise CircuitError("circuits act on different qubit counts")
    u1 = unitary_of(c1.without_measurements())
    u2 = unitary_of(c2.without_measurements())
    return equal_up_to_phase(u2, permutation_matrix(perm) @ u1, atol)


# ---------------------------------------------------------------------------
# Toffoli-4 and Grover-4


def mcx_gray(controls: Sequence[int], target: int, n_qubits: int | None = None) -> Circuit:
    """Multi-controlled X from controlled X**(+-1/2**(k-1)) steps in Gray-code order.

    Each nonempty control subset contributes V or V^dagger (odd or even
    weight) on the parity of that subset, which CNOTs accumulate into the
    subset's first control. Uses 2**k - 1 controlled roots and 2**k - 2 CNOTs.
    """
    k = len(controls)
    if k < 1:
        raise CircuitError("need at least one control")
    n = n_qubits if n_qubits is not None else max(*controls, target) + 1
    root = 2 ** (k - 1)
    circ = Circuit(n)
    prev = None
    for code in range(1, 2**k):
        gray = code ^ (code >> 1)
        bits = [(gray >> (k - 1 - i)) & 1 for i in range(k)]
        lead = bits.index(1)
        if prev is not None:
            changed = next(i for i in range(k) if bits[i] != prev[i])
            if changed != lead:
                circ.cx(controls[changed], controls[lead])
            else:
                for i in range(lead + 1, k):
                    if bits[i]:
                        circ.cx(controls[i], controls[lead])
        if sum(bits) % 2:
            circ.cv(controls[lead], target, root)
        else:
            circ.cvdg(controls[lead], target, root)
        prev = bits
    return circ


TOFFOLI4_CONTROLS = (1, 2, 3)
TOFFOLI4_TARGET = 0


# Parity schedule {1}, {2,3}, {1,2,3}, {1,3}, {3}, {1,2}, {2}: the same
# 7 + 6 structure as mcx_gray, but the target only ever pairs with one
# control at a time for long stretches, which routes better on sparse graphs.
_TOFFOLI4_TEXT = """\
cv 1 0 4
cx 3 2
cvdg 2 0 4
cx 1 2
cv 2 0 4
cx 1 3
cvdg 3 0 4
cx 1 3
cv 3 0 4
cx 3 2
cvdg 2 0 4
cx 1 2
cv 2 0 4
"""


def toffoli4() -> Circuit:
    """C3X on target q0 with controls q1, q2, q3: 7 controlled X**(+-1/4) and 6 CNOTs."""
    return Circuit.from_text(_TOFFOLI4_TEXT, n_qubits=4)


def ccc_z() -> Circuit:
    """Triply-controlled Z: the Toffoli-4 conjugated by H on its target."""
    c = Circuit(4).h(TOFFOLI4_TARGET)
    c.extend(toffoli4().gates)
    return c.h(TOFFOLI4_TARGET)


def grover4(marked: int = 13, measure: bool = True) -> Circuit:
    """One Grover iteration on four qubits amplifying basis index ``marked``."""
    if not 0 <= int(marked) < 16:
        raise CircuitError(f"marked index must be in [0, 15], got {marked}")
    zeros = [q for q in range(4) if not (marked >> q) & 1]
    c = Circuit(4)
    for q in range(4):
        c.h(q)
    for q in zeros:
        c.x(q)
    c.extend(ccc_z().gates)
    for q in zeros:
        c.x(q)
    for q in range(4):
        c.h(q)
    for q in range(4):
        c.x(q)
    c.extend(ccc_z().gates)
    for q in range(4):
        c.x(q)
    for q in range(4):
        c.h(q)
    if measure:
        for q in range(4):
            c.measure(q)
    return c


def grover_success_probability(n_qubits: int = 4, iterations: int = 1) -> float:
    """sin^2((2k+1) theta) with sin(theta) = 2**(-n/2), single marked item."""
    theta = math.asin(2 ** (-n_qubits / 2))
    return math.sin((2 * iterations + 1) * theta) ** 2


def mcx_matrix(n_qubits: int, controls: Sequence[int], target: int) -> NDArray[np.float64]:
    """Dense multi-controlled X, built directly from its basis action."""
    dim = 2**n_qubits
    m = np.zeros((dim, dim))
    cmask = sum(1 << c for c in controls)
    for i in range(dim):
        j = i ^ (1 << target) if (i & cmask) == cmask else i
        m[j, i] = 1.0
    return m
