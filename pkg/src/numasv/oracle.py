"""Brute-force reference simulator.

Every gate is written as a sum of Kronecker products of 2x2 factors
(``{qubit: factor}`` per term, identity elsewhere) and applied either as an
explicit ``2**n x 2**n`` matrix (small n) or by contracting each factor into
the state reshaped as an n-way tensor.  Nothing here shares index arithmetic
with the kernels.
"""
from __future__ import annotations

import math
from functools import reduce

import numpy as np

from .circuits import Circuit, Gate

DENSE_MAX_QUBITS = 8
MAX_QUBITS = 14

_I2 = np.eye(2, dtype=np.complex128)
_P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
_E01 = np.array([[0, 1], [0, 0]], dtype=np.complex128)
_E10 = np.array([[0, 0], [1, 0]], dtype=np.complex128)

_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]).astype(np.complex128),
}


class OracleSizeError(ValueError):
    pass


def _phase(theta: float) -> np.ndarray:
    return np.diag([1, np.exp(1j * theta)]).astype(np.complex128)


def gate_matrix(gate: Gate) -> np.ndarray:
    """The 2x2 factor of a single-qubit gate (or the controlled block)."""
    if gate.kind in _FIXED:
        return _FIXED[gate.kind]
    if gate.kind in ("PHASE", "CPHASE"):
        return _phase(gate.angle)
    if gate.kind == "CNOT":
        return _FIXED["X"]
    if gate.kind == "U":
        return gate.matrix2()
    raise ValueError(f"{gate.kind} has no single 2x2 factor")


def gate_terms(gate: Gate) -> list[dict[int, np.ndarray]]:
    if gate.kind == "SWAP":
        a, b = gate.target, gate.control
        # SWAP = sum_{x,y} |x><y|_a (x) |y><x|_b
        return [{a: _P0, b: _P0}, {a: _P1, b: _P1}, {a: _E01, b: _E10}, {a: _E10, b: _E01}]
    if gate.kind in ("CNOT", "CPHASE"):
        return [{gate.control: _P0}, {gate.control: _P1, gate.target: gate_matrix(gate)}]
    return [{gate.target: gate_matrix(gate)}]


def dense_operator(gate: Gate, n: int) -> np.ndarray:
    if n > DENSE_MAX_QUBITS:
        raise OracleSizeError(f"dense operator limited to n <= {DENSE_MAX_QUBITS}")
    total = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    for term in gate_terms(gate):
        # np.kron(A, B): A acts on the more significant index bits
        total += reduce(np.kron, [term.get(q, _I2) for q in range(n - 1, -1, -1)])
    return total


def _contract(amps: np.ndarray, term: dict[int, np.ndarray], n: int) -> np.ndarray:
    psi = amps.reshape((2,) * n)
    for q, m in term.items():
        axis = n - 1 - q  # C-order: axis 0 is the most significant bit
        psi = np.moveaxis(np.tensordot(m, psi, axes=([1], [axis])), 0, axis)
    return psi.reshape(-1)


def _num_qubits(amps: np.ndarray) -> int:
    n = amps.size.bit_length() - 1
    if amps.ndim != 1 or amps.size != 1 << n or n < 1:
        raise ValueError("dense state must be a 1-D array of length 2**n, n >= 1")
    return n


def oracle_apply(amps, gate: Gate, *, method: str = "auto") -> np.ndarray:
    """Return a new dense state with ``gate`` applied."""
    amps = np.asarray(amps, dtype=np.complex128)
    n = _num_qubits(amps)
    if n > MAX_QUBITS:
        raise OracleSizeError(f"oracle limited to n <= {MAX_QUBITS}, got {n}")
    for q in gate.qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n} qubits")
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_QUBITS else "tensor"
    if method == "dense":
        return dense_operator(gate, n) @ amps
    if method == "tensor":
        return sum(_contract(amps, term, n) for term in gate_terms(gate))
    raise ValueError(f"unknown method {method!r}")


def replay(circuit: Circuit | str, initial=None, *, method: str = "auto") -> np.ndarray:
    if isinstance(circuit, str):
        circuit = Circuit.from_text(circuit)
    amps = zero_state(circuit.num_qubits) if initial is None else np.array(initial, dtype=np.complex128)
    if amps.size != 1 << circuit.num_qubits:
        raise ValueError("initial state size does not match the circuit")
    for gate in circuit:
        amps = oracle_apply(amps, gate, method=method)
    return amps


def zero_state(n: int) -> np.ndarray:
    return basis_state(n, 0)


def basis_state(n: int, k: int) -> np.ndarray:
    if not 0 <= k < 1 << n:
        raise ValueError("basis index out of range")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[k] = 1.0
    return amps


def dft_matrix(n: int) -> np.ndarray:
    """``F[y, x] = exp(2 pi i x y / N) / sqrt(N)``."""
    size = 1 << n
    idx = np.arange(size)
    return np.exp(2j * np.pi * np.outer(idx, idx) / size) / math.sqrt(size)


def compare_states(a, b) -> float:
    """Max over indices of ``|a_i - b_i|``."""
    a = a.to_numpy() if hasattr(a, "to_numpy") else np.asarray(a, dtype=np.complex128)
    b = b.to_numpy() if hasattr(b, "to_numpy") else np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def self_check(max_qubits: int = 6, seed: int = 0) -> float:
    """Largest disagreement between the dense and tensor paths on random gates."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(2, max_qubits + 1):
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        q = rng.choice(n, size=2, replace=False)
        u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        for gate in (Gate("H", int(q[0])), Gate("Y", int(q[0])), Gate.unitary(int(q[0]), u),
                     Gate("CNOT", int(q[0]), int(q[1])), Gate("CPHASE", int(q[0]), int(q[1]), 0.3),
                     Gate("SWAP", int(q[0]), int(q[1]))):
            d = compare_states(oracle_apply(amps, gate, method="dense"),
                               oracle_apply(amps, gate, method="tensor"))
            worst = max(worst, d)
    return worst
