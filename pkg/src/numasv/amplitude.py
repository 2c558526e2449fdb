"""State-vector storage: one aligned buffer of interleaved (re, im) doubles.

Amplitude ``k`` is the basis state whose bit ``q`` is the value of qubit ``q``
(qubit 0 is the least significant bit).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from .numa import (ALIGNMENT, AllocPolicy, NodeTopology, NumaBuffer, PlacementReport,
                   allocate_bound, audit_placement, detect_topology)
from .scheduler import SERIAL, Scheduler

AMP_BYTES = 16
# AoS element: re and im adjacent; bit-compatible with complex128
AMP_DTYPE = np.dtype([("re", "<f8"), ("im", "<f8")])


class ComplexAmp(NamedTuple):
    re: float
    im: float


class StateVector:
    """``2**num_qubits`` amplitudes in a single placed buffer.

    ``amps`` is a complex128 view and ``doubles`` the interleaved float64 view
    the kernels work on; both alias the same memory.
    """

    def __init__(self, num_qubits: int, buffer: NumaBuffer, placement: PlacementReport,
                 policy: AllocPolicy, topology: NodeTopology):
        self.num_qubits = num_qubits
        self.policy = policy
        self.placement = placement
        self.topology = topology
        self._buffer = buffer
        count = 1 << num_qubits
        self.amps: np.ndarray | None = buffer.view(np.complex128)[:count]
        self.doubles: np.ndarray | None = buffer.view(np.float64)[:2 * count]

    def __len__(self) -> int:
        return 1 << self.num_qubits

    def __repr__(self) -> str:
        state = "destroyed" if self.destroyed else f"{self.policy.value}"
        return f"StateVector(num_qubits={self.num_qubits}, {state})"

    @property
    def destroyed(self) -> bool:
        return self.amps is None

    @property
    def address(self) -> int:
        return self._buffer.address

    @property
    def nbytes(self) -> int:
        return AMP_BYTES << self.num_qubits

    def records(self) -> np.ndarray:
        """Structured (re, im) view of the same memory."""
        self._check_alive()
        return self.amps.view(AMP_DTYPE)

    def to_numpy(self) -> np.ndarray:
        self._check_alive()
        return self.amps.copy()

    def load(self, values) -> None:
        """Overwrite every amplitude (no renormalisation)."""
        self._check_alive()
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (len(self),):
            raise ValueError(f"expected {len(self)} amplitudes, got shape {values.shape}")
        self.amps[:] = values

    def audit(self) -> PlacementReport:
        self._check_alive()
        return audit_placement(self._buffer, self.topology, self.policy,
                               requested_bytes=self.placement.requested_bytes,
                               fallback_taken=self.placement.fallback_taken)

    def destroy(self) -> None:
        """Release the buffer.  Idempotent."""
        if self.destroyed:
            return
        self.amps = None
        self.doubles = None
        self._buffer.close()

    def _check_alive(self) -> None:
        if self.destroyed:
            raise RuntimeError("state vector has been destroyed")


@njit(nogil=True, cache=True)
def _zero_fill(sv, start, end):
    # start/end in amplitudes
    for k in range(2 * start, 2 * end):
        sv[k] = 0.0


def create_state(num_qubits: int, policy: AllocPolicy | str = AllocPolicy.DEFAULT, *,
                 topology: NodeTopology | None = None, scheduler: Scheduler | None = None,
                 strict: bool = False) -> StateVector:
    """Allocate and initialise ``|0...0>``.

    Pages are first touched by the scheduler's workers, each writing the range
    it will later compute on, so first-touch placement follows the plan.
    """
    if isinstance(num_qubits, bool) or not isinstance(num_qubits, (int, np.integer)):
        raise TypeError("num_qubits must be an integer")
    if num_qubits < 1:
        raise ValueError(f"num_qubits must be >= 1, got {num_qubits}")
    policy = AllocPolicy.parse(policy)
    scheduler = scheduler or SERIAL
    topology = topology or scheduler.topology or detect_topology()

    buffer, placement = allocate_bound(AMP_BYTES << int(num_qubits), policy, topology,
                                       strict=strict)
    state = StateVector(int(num_qubits), buffer, placement, policy, topology)
    assert state.address % ALIGNMENT == 0

    sv = state.doubles
    num_tasks = len(state) >> 1
    plan = scheduler.plan(num_tasks, state.num_qubits - 1)
    # task t owns amplitudes [2t, 2t + 2): contiguous slices in thread order,
    # the same slices a low-target gate sweep gives each worker
    scheduler.run(plan, lambda s, e: _zero_fill(sv, 2 * s, 2 * e))
    sv[0] = 1.0
    return state


def state_from_array(values, policy: AllocPolicy | str = AllocPolicy.DEFAULT, **kwargs) -> StateVector:
    values = np.asarray(values, dtype=np.complex128)
    n = values.size.bit_length() - 1
    if values.ndim != 1 or values.size != 1 << n or n < 1:
        raise ValueError("need a 1-D array whose length is a power of two >= 2")
    state = create_state(n, policy, **kwargs)
    state.load(values)
    return state


def total_probability(state: StateVector) -> float:
    state._check_alive()
    return float(np.dot(state.doubles, state.doubles))


def _check_index(state: StateVector, idx: int) -> int:
    state._check_alive()
    if not 0 <= idx < len(state):
        raise IndexError(f"amplitude index {idx} out of range for {state.num_qubits} qubits")
    return int(idx)


def get_amp(state: StateVector, idx: int) -> ComplexAmp:
    idx = _check_index(state, idx)
    return ComplexAmp(float(state.doubles[2 * idx]), float(state.doubles[2 * idx + 1]))


def set_amp(state: StateVector, idx: int, value) -> None:
    idx = _check_index(state, idx)
    if isinstance(value, complex):
        re, im = value.real, value.imag
    else:
        re, im = value
    state.doubles[2 * idx] = re
    state.doubles[2 * idx + 1] = im


def destroy_state(state: StateVector) -> None:
    state.destroy()
