"""Gate lists and the two benchmark circuit families (QFT and layered RQC)."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import kernels as K
from .amplitude import StateVector
from .scheduler import Scheduler

SINGLE_KINDS = ("H", "X", "Y", "Z", "T", "PHASE", "U")
TWO_KINDS = ("CNOT", "CPHASE", "SWAP")
KINDS = SINGLE_KINDS + TWO_KINDS
_ANGLED = ("PHASE", "CPHASE")


@dataclass(frozen=True)
class Gate:
    """One gate record.

    For SWAP the second qubit sits in ``control``.  ``matrix`` (U only) holds
    the 2x2 entries as 8 floats: re/im of m00, m01, m10, m11.
    """

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None
    matrix: tuple[float, ...] | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (kind in TWO_KINDS) != (self.control is not None):
            raise ValueError(f"{kind} {'needs' if kind in TWO_KINDS else 'takes no'} second qubit")
        if self.control is not None and self.control == self.target:
            raise ValueError(f"{kind}: qubits must differ (both {self.target})")
        if (kind in _ANGLED) != (self.angle is not None):
            raise ValueError(f"{kind} {'needs' if kind in _ANGLED else 'takes no'} angle")
        if (kind == "U") != (self.matrix is not None):
            raise ValueError("U gates (and only U gates) carry a matrix")
        if self.matrix is not None:
            if len(self.matrix) != 8:
                raise ValueError("U matrix needs 8 floats")
            object.__setattr__(self, "matrix", tuple(float(x) for x in self.matrix))
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def unitary(cls, target: int, m) -> "Gate":
        return cls("U", target, matrix=K.SingleQubitGate.from_matrix(m).params())

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.target, self.control)

    def matrix2(self) -> np.ndarray:
        m = np.asarray(self.matrix, dtype=np.float64)
        return (m[0::2] + 1j * m[1::2]).reshape(2, 2)

    def inverse(self) -> "Gate":
        if self.kind in ("PHASE", "CPHASE"):
            return Gate(self.kind, self.target, self.control, -self.angle)
        if self.kind == "T":
            return Gate("PHASE", self.target, angle=-math.pi / 4)
        if self.kind == "U":
            return Gate.unitary(self.target, self.matrix2().conj().T)
        return self

    def to_text(self) -> str:
        parts = [self.kind, str(self.target)]
        if self.control is not None:
            parts.append(str(self.control))
        if self.angle is not None:
            parts.append(repr(self.angle))
        if self.matrix is not None:
            parts += [repr(x) for x in self.matrix]
        return " ".join(parts)

    @classmethod
    def from_text(cls, line: str) -> "Gate":
        tok = line.split()
        if not tok:
            raise ValueError("empty gate line")
        kind = tok[0].upper()
        if kind not in KINDS:
            raise ValueError(f"unknown gate kind {tok[0]!r}")
        pos = 1
        target = int(tok[pos])
        pos += 1
        control = None
        if kind in TWO_KINDS:
            control = int(tok[pos])
            pos += 1
        angle = matrix = None
        if kind in _ANGLED:
            angle = float(tok[pos])
            pos += 1
        if kind == "U":
            matrix = tuple(float(x) for x in tok[pos:pos + 8])
            pos += 8
        if pos != len(tok):
            raise ValueError(f"malformed gate line {line!r}")
        return cls(kind, target, control, angle, matrix)


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        for q in gate.qubits:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"{gate.to_text()!r}: qubit {q} out of range for "
                                 f"{self.num_qubits} qubits")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def counts(self) -> Counter:
        return Counter(g.kind for g in self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.inverse() for g in reversed(self.gates)])

    def to_text(self) -> str:
        lines = [f"# qubits {self.num_qubits}"] + [g.to_text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, num_qubits: int | None = None) -> "Circuit":
        gates = []
        for raw in text.splitlines():
            line = raw.strip()
            if line.startswith("#"):
                tok = line[1:].split()
                if len(tok) == 2 and tok[0] == "qubits" and num_qubits is None:
                    num_qubits = int(tok[1])
                continue
            if line:
                gates.append(Gate.from_text(line))
        if num_qubits is None:
            num_qubits = 1 + max((q for g in gates for q in g.qubits), default=0)
        return cls(num_qubits, gates)


# ---------------------------------------------------------------------------
# QFT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QftVariant:
    kind: str
    block_factor: int | None = None

    def __post_init__(self):
        if self.kind not in ("recursive", "iterative", "blocked"):
            raise ValueError(f"unknown QFT variant {self.kind!r}")
        if self.kind == "blocked":
            if self.block_factor is None or self.block_factor < 1:
                raise ValueError("blocked QFT needs block_factor >= 1")
        elif self.block_factor is not None:
            raise ValueError(f"{self.kind} QFT takes no block factor")

    @classmethod
    def recursive(cls):
        return cls("recursive")

    @classmethod
    def iterative(cls):
        return cls("iterative")

    @classmethod
    def blocked(cls, block_factor: int):
        return cls("blocked", block_factor)

    @property
    def label(self) -> str:
        return f"blocked{self.block_factor}" if self.kind == "blocked" else self.kind


def _qft_stage(k: int, relabel=lambda q: q) -> list[Gate]:
    # H on k, then rotations controlled by every lower qubit
    gates = [Gate("H", relabel(k))]
    for j in range(1, k + 1):
        gates.append(Gate("CPHASE", relabel(k), relabel(k - j), math.pi / (1 << j)))
    return gates


def _reversal(n: int) -> list[Gate]:
    return [Gate("SWAP", i, n - 1 - i) for i in range(n // 2)]


def _qft_recursive(k: int, out: list[Gate]) -> None:
    if k < 0:
        return
    out.extend(_qft_stage(k))
    _qft_recursive(k - 1, out)


def _qft_blocked(n: int, b: int) -> list[Gate]:
    # Stages are taken b at a time.  Entering a window, the reversal swaps the
    # window's stages need are emitted first; from then on every gate acts on
    # the swapped (physical) labels.  Stage k's Hadamard therefore lands on
    # qubit n-1-k, and window w's targets are the contiguous run [w*b, w*b+b).
    phys = list(range(n))
    done: set[int] = set()
    gates: list[Gate] = []
    stages = list(range(n - 1, -1, -1))
    for w in range(0, n, b):
        for k in stages[w:w + b]:
            lo = min(k, n - 1 - k)
            if lo != n - 1 - lo and lo not in done:
                done.add(lo)
                gates.append(Gate("SWAP", lo, n - 1 - lo))
                phys[lo], phys[n - 1 - lo] = phys[n - 1 - lo], phys[lo]
        for k in stages[w:w + b]:
            gates.extend(_qft_stage(k, relabel=phys.__getitem__))
    return gates


def build_qft(n: int, variant: QftVariant | str = "iterative") -> Circuit:
    """QFT on ``n`` qubits: ``|x> -> 2**(-n/2) sum_y exp(2 pi i x y / 2**n) |y>``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(variant, str):
        variant = QftVariant(variant)
    if variant.kind == "iterative":
        gates = [g for k in range(n - 1, -1, -1) for g in _qft_stage(k)] + _reversal(n)
    elif variant.kind == "recursive":
        gates = []
        _qft_recursive(n - 1, gates)
        gates += _reversal(n)
    else:
        gates = _qft_blocked(n, variant.block_factor)
    return Circuit(n, gates)


# ---------------------------------------------------------------------------
# random circuits
# ---------------------------------------------------------------------------

DEFAULT_RQC_GATES = ("H", "X", "Y", "T")


@dataclass(frozen=True)
class RqcSpec:
    n: int
    layers: int = 5
    seed: int = 0
    gate_set: tuple[str, ...] = DEFAULT_RQC_GATES

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("RQC needs n >= 2 (the CNOT ring i -> i+1 mod n)")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        gate_set = tuple(g.upper() for g in self.gate_set)
        if not gate_set:
            raise ValueError("gate set must be non-empty")
        for g in gate_set:
            if g not in ("H", "X", "Y", "Z", "T"):
                raise ValueError(f"unsupported RQC gate {g!r}")
        object.__setattr__(self, "gate_set", gate_set)


def build_rqc(spec: RqcSpec) -> Circuit:
    """Layers of one random gate per qubit followed by the CNOT ring.

    Choices come from the raw PCG64 stream seeded with ``spec.seed``, reduced
    modulo the gate-set size, so the circuit is a pure function of the spec.
    """
    n = spec.n
    draws = np.random.PCG64(spec.seed).random_raw(n * spec.layers)
    size = len(spec.gate_set)
    gates: list[Gate] = []
    for layer in range(spec.layers):
        for q in range(n):
            gates.append(Gate(spec.gate_set[int(draws[layer * n + q]) % size], q))
        for q in range(n):
            gates.append(Gate("CNOT", (q + 1) % n, q))
    return Circuit(n, gates)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def apply_gate(state: StateVector, gate: Gate, variant=K.KernelVariant.OPTIMIZED,
               config: K.KernelConfig | None = None,
               scheduler: Scheduler | None = None) -> None:
    kind, t, c = gate.kind, gate.target, gate.control
    kw = dict(variant=variant, config=config, scheduler=scheduler)
    if kind == "H":
        K.apply_hadamard(state, t, **kw)
    elif kind == "X":
        K.apply_pauli_x(state, t, **kw)
    elif kind == "Y":
        K.apply_pauli_y(state, t, **kw)
    elif kind == "Z":
        K.apply_phase_shift(state, t, math.pi, **kw)
    elif kind == "T":
        K.apply_phase_shift(state, t, math.pi / 4, **kw)
    elif kind == "PHASE":
        K.apply_phase_shift(state, t, gate.angle, **kw)
    elif kind == "U":
        K.apply_single_qubit_unitary(state, t, K.SingleQubitGate.from_matrix(gate.matrix2()), **kw)
    elif kind == "CNOT":
        K.apply_controlled_not(state, c, t, **kw)
    elif kind == "CPHASE":
        K.apply_controlled_phase(state, c, t, gate.angle, **kw)
    else:
        K.apply_swap(state, t, c, **kw)


def run_circuit(state: StateVector, circuit: Circuit, variant=K.KernelVariant.OPTIMIZED,
                config: K.KernelConfig | None = None,
                scheduler: Scheduler | None = None) -> None:
    if circuit.num_qubits > state.num_qubits:
        raise ValueError(f"circuit needs {circuit.num_qubits} qubits, state has "
                         f"{state.num_qubits}")
    config = config or K.KernelConfig.from_env()
    variant = K.KernelVariant.parse(variant)
    for gate in circuit:
        apply_gate(state, gate, variant, config, scheduler)


def run_qft(state: StateVector, variant: QftVariant | str = "iterative",
            kernel=K.KernelVariant.OPTIMIZED, config: K.KernelConfig | None = None,
            scheduler: Scheduler | None = None) -> None:
    run_circuit(state, build_qft(state.num_qubits, variant), kernel, config, scheduler)


def run_builtin_qft_proxy(state: StateVector, config: K.KernelConfig | None = None,
                          scheduler: Scheduler | None = None) -> None:
    """Stand-in for an external library's own QFT: iterative order, scalar kernels."""
    run_qft(state, "iterative", K.KernelVariant.SCALAR_BASELINE, config, scheduler)
