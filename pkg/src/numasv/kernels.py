"""Gate kernels in two variants.

``SCALAR_BASELINE`` walks the task space exactly like the reference loop:
one pair per task, block and offset recovered with a division and a modulo.

``OPTIMIZED`` walks blocks of ``2 * 2**q`` amplitudes.  Inside a half-block
it runs an unrolled loop of vector batches (``vector_complexes`` amplitudes
per batch, ``unroll`` amplitudes per unrolled chunk) with software prefetch
on both streams, then single batches, then a scalar tail.  Half-blocks that
are narrower than one batch (targets 0 and 1 with the default batch of 4)
never enter the vector loops and are handled entirely by the tail.

Controlled gates and SWAP reuse the pair sweep with a filter bit: only pairs
whose ``indexUp`` has that bit set are visited, and qualifying runs are batched
without touching the skipped amplitudes.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import _simd
from .amplitude import StateVector
from .scheduler import SERIAL, Scheduler, task_granularity


class GateError(ValueError):
    pass


class KernelVariant(enum.Enum):
    SCALAR_BASELINE = "scalar"
    OPTIMIZED = "opt"

    @classmethod
    def parse(cls, value) -> "KernelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        return {"baseline": cls.SCALAR_BASELINE, "optimized": cls.OPTIMIZED}.get(key) or cls(key)


@lru_cache(maxsize=None)
def _detected_isa() -> str:
    forced = os.environ.get("NUMASV_ISA")
    if forced:
        if forced not in _simd.ISA_PATHS:
            raise ValueError(f"NUMASV_ISA must be one of {_simd.ISA_PATHS}")
        return forced
    return _simd.host_isa()


@dataclass(frozen=True)
class KernelConfig:
    """Tuning knobs of the optimized kernels; none of them changes results.

    Prefetch distances are counted in doubles (16 doubles = 2 cache lines).
    """

    unroll: int = 16
    prefetch_near: int = 16
    prefetch_far: int = 32
    vector_complexes: int = 4
    isa: str = field(default_factory=_detected_isa)

    def __post_init__(self):
        if self.vector_complexes < 1:
            raise ValueError("vector_complexes must be >= 1")
        if self.unroll < self.vector_complexes or self.unroll % self.vector_complexes:
            raise ValueError(f"unroll ({self.unroll}) must be a positive multiple of "
                             f"vector_complexes ({self.vector_complexes})")
        if not 0 <= self.prefetch_near <= self.prefetch_far:
            raise ValueError("need 0 <= prefetch_near <= prefetch_far")
        if self.isa not in _simd.ISA_PATHS:
            raise ValueError(f"isa must be one of {_simd.ISA_PATHS}")

    @classmethod
    def from_env(cls, environ=None) -> "KernelConfig":
        """Defaults overridden by ``PREFETCH_AHEAD`` (far distance) and ``UNROLL``."""
        env = os.environ if environ is None else environ
        kwargs = {}
        if env.get("PREFETCH_AHEAD"):
            far = int(env["PREFETCH_AHEAD"])
            kwargs["prefetch_far"] = far
            kwargs["prefetch_near"] = far // 2
        if env.get("UNROLL"):
            kwargs["unroll"] = int(env["UNROLL"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class SingleQubitGate:
    m00: complex
    m01: complex
    m10: complex
    m11: complex

    @classmethod
    def from_matrix(cls, m) -> "SingleQubitGate":
        m = np.asarray(m, dtype=np.complex128)
        if m.shape != (2, 2):
            raise GateError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @classmethod
    def hadamard(cls):
        return cls(_INV_SQRT2, _INV_SQRT2, _INV_SQRT2, -_INV_SQRT2)

    @classmethod
    def pauli_x(cls):
        return cls(0, 1, 1, 0)

    @classmethod
    def pauli_y(cls):
        return cls(0, -1j, 1j, 0)

    @classmethod
    def pauli_z(cls):
        return cls(1, 0, 0, -1)

    @classmethod
    def phase(cls, theta: float):
        return cls(1, 0, 0, complex(math.cos(theta), math.sin(theta)))

    @classmethod
    def t(cls):
        return cls.phase(math.pi / 4)

    def matrix(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=np.complex128)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.matrix()
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)

    def params(self) -> tuple[float, ...]:
        out = []
        for z in (self.m00, self.m01, self.m10, self.m11):
            z = complex(z)
            out += [z.real, z.imag]
        return tuple(out)


def pair_indices(task: int, target: int) -> tuple[int, int]:
    """Amplitude pair updated by ``task`` for a gate on ``target``."""
    size_half = 1 << target
    size_block = 2 * size_half
    this_block = task // size_half
    index_up = this_block * size_block + task % size_half
    return index_up, index_up + size_half


# ---------------------------------------------------------------------------
# scalar baseline (array-of-structures, one pair per task)
# ---------------------------------------------------------------------------

@njit(nogil=True, cache=True)
def _hadamard_scalar(sv, start, end, target):
    size_half = 1 << target
    size_block = 2 * size_half
    rec_root2 = 1.0 / math.sqrt(2.0)
    for task in range(start, end):
        this_block = task // size_half
        up = 2 * (this_block * size_block + task % size_half)
        lo = up + 2 * size_half
        re_up = sv[up]
        im_up = sv[up + 1]
        re_lo = sv[lo]
        im_lo = sv[lo + 1]
        sv[up] = rec_root2 * (re_up + re_lo)
        sv[up + 1] = rec_root2 * (im_up + im_lo)
        sv[lo] = rec_root2 * (re_up - re_lo)
        sv[lo + 1] = rec_root2 * (im_up - im_lo)


@njit(nogil=True, cache=True)
def _unitary_scalar(sv, start, end, target, m):
    a00, b00, a01, b01, a10, b10, a11, b11 = m
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        up = 2 * (this_block * size_block + task % size_half)
        lo = up + 2 * size_half
        re_up = sv[up]
        im_up = sv[up + 1]
        re_lo = sv[lo]
        im_lo = sv[lo + 1]
        sv[up] = a00 * re_up - b00 * im_up + a01 * re_lo - b01 * im_lo
        sv[up + 1] = a00 * im_up + b00 * re_up + a01 * im_lo + b01 * re_lo
        sv[lo] = a10 * re_up - b10 * im_up + a11 * re_lo - b11 * im_lo
        sv[lo + 1] = a10 * im_up + b10 * re_up + a11 * im_lo + b11 * re_lo


@njit(nogil=True, cache=True)
def _pauli_x_scalar(sv, start, end, target):
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        up = 2 * (this_block * size_block + task % size_half)
        lo = up + 2 * size_half
        re_up = sv[up]
        im_up = sv[up + 1]
        sv[up] = sv[lo]
        sv[up + 1] = sv[lo + 1]
        sv[lo] = re_up
        sv[lo + 1] = im_up


@njit(nogil=True, cache=True)
def _pauli_y_scalar(sv, start, end, target):
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        up = 2 * (this_block * size_block + task % size_half)
        lo = up + 2 * size_half
        re_up = sv[up]
        im_up = sv[up + 1]
        sv[up] = sv[lo + 1]
        sv[up + 1] = -sv[lo]
        sv[lo] = -im_up
        sv[lo + 1] = re_up


@njit(nogil=True, cache=True)
def _phase_scalar(sv, start, end, target, a, b):
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        lo = 2 * (this_block * size_block + task % size_half + size_half)
        re_lo = sv[lo]
        im_lo = sv[lo + 1]
        sv[lo] = a * re_lo - b * im_lo
        sv[lo + 1] = a * im_lo + b * re_lo


@njit(nogil=True, cache=True)
def _cnot_scalar(sv, start, end, control, target):
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        index_up = this_block * size_block + task % size_half
        if (index_up >> control) & 1 == 0:
            continue
        up = 2 * index_up
        lo = up + 2 * size_half
        re_up = sv[up]
        im_up = sv[up + 1]
        sv[up] = sv[lo]
        sv[up + 1] = sv[lo + 1]
        sv[lo] = re_up
        sv[lo + 1] = im_up


@njit(nogil=True, cache=True)
def _cphase_scalar(sv, start, end, control, target, a, b):
    size_half = 1 << target
    size_block = 2 * size_half
    for task in range(start, end):
        this_block = task // size_half
        index_up = this_block * size_block + task % size_half
        if (index_up >> control) & 1 == 0:
            continue
        lo = 2 * (index_up + size_half)
        re_lo = sv[lo]
        im_lo = sv[lo + 1]
        sv[lo] = a * re_lo - b * im_lo
        sv[lo + 1] = a * im_lo + b * re_lo


@njit(nogil=True, cache=True)
def _swap_scalar(sv, start, end, low, high):
    # pair space of `high`; partner flips both bits
    size_half = 1 << high
    size_block = 2 * size_half
    offset = 2 * (size_half - (1 << low))
    for task in range(start, end):
        this_block = task // size_half
        index_up = this_block * size_block + task % size_half
        if (index_up >> low) & 1 == 0:
            continue
        up = 2 * index_up
        other = up + offset
        re_up = sv[up]
        im_up = sv[up + 1]
        sv[up] = sv[other]
        sv[up + 1] = sv[other + 1]
        sv[other] = re_up
        sv[other + 1] = im_up


# ---------------------------------------------------------------------------
# optimized sweep
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _sweep(kind: str, isa: str, vector_complexes: int, unroll: int):
    """Compile the blocked sweep for one op kind and one tuning point."""
    batch = _simd.batch_op(kind, isa, vector_complexes)
    tail = _simd.TAILS[kind]
    prefetch = _simd.prefetch
    vc = vector_complexes
    step = 2 * vc

    if isa == "generic":
        # compiler-guided path: plain contiguous loop, no manual unroll/prefetch
        @njit(nogil=True, inline="always")
        def span(sv, up, count, offset, p, near, far):
            for k in range(count):
                i = 2 * (up + k)
                tail(sv, i, i + 2 * offset, p)
    else:
        @njit(nogil=True, inline="always")
        def span(sv, up, count, offset, p, near, far):
            k = 0
            d_off = 2 * offset
            while k + unroll <= count:
                i = 2 * (up + k)
                for j in range(0, 2 * unroll, step):
                    prefetch(sv, i + j + near)
                    prefetch(sv, i + j + d_off + near)
                    prefetch(sv, i + j + far)
                    prefetch(sv, i + j + d_off + far)
                    batch(sv, i + j, i + j + d_off, p)
                k += unroll
            while k + vc <= count:
                i = 2 * (up + k)
                batch(sv, i, i + d_off, p)
                k += vc
            while k < count:
                i = 2 * (up + k)
                prefetch(sv, i + d_off + step)
                tail(sv, i, i + d_off, p)
                k += 1

    @njit(nogil=True)
    def sweep(sv, start, end, qubit, control, offset, p, near, far):
        half = 1 << qubit
        if control < 0 and half < vc:
            # half-block narrower than one batch: everything is scalar tail
            d_off = 2 * offset
            for t in range(start, end):
                i = 2 * (t + ((t >> qubit) << qubit))
                tail(sv, i, i + d_off, p)
            return
        t = start
        while t < end:
            block = t >> qubit
            i = t - (block << qubit)
            stop = min(half, i + end - t)
            base = block << (qubit + 1)
            if control < 0:
                span(sv, base + i, stop - i, offset, p, near, far)
            elif control > qubit:
                if (base >> control) & 1:
                    span(sv, base + i, stop - i, offset, p, near, far)
            else:
                while i < stop:
                    if (i >> control) & 1 == 0:
                        i = ((i >> control) | 1) << control
                        continue
                    run_end = min((((i >> control) | 1) + 1) << control, stop)
                    span(sv, base + i, run_end - i, offset, p, near, far)
                    i = run_end
            t = (block << qubit) + stop

    return sweep


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _check_qubit(state: StateVector, q: int, what: str = "target") -> int:
    state._check_alive()
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise GateError(f"{what} must be an integer qubit index")
    if not 0 <= q < state.num_qubits:
        raise GateError(f"{what} {q} out of range for {state.num_qubits} qubits")
    return int(q)


def _check_pair(state: StateVector, a: int, b: int, names=("control", "target")) -> tuple[int, int]:
    a = _check_qubit(state, a, names[0])
    b = _check_qubit(state, b, names[1])
    if a == b:
        raise GateError(f"{names[0]} and {names[1]} must differ (both {a})")
    return a, b


def _execute(state, pair_qubit, fn, config, scheduler):
    scheduler = scheduler or SERIAL
    plan = scheduler.plan(len(state) >> 1, pair_qubit, task_granularity(pair_qubit, config.unroll))
    scheduler.run(plan, fn)


def _run_optimized(state, kind, qubit, control, offset, params, config, scheduler):
    sweep = _sweep(kind, config.isa, config.vector_complexes, config.unroll)
    sv = state.doubles
    near, far = config.prefetch_near, config.prefetch_far
    p = tuple(float(x) for x in params)
    _execute(state, qubit,
             lambda s, e: sweep(sv, s, e, qubit, control, offset, p, near, far),
             config, scheduler)


def _resolve(variant, config):
    return KernelVariant.parse(variant), config or KernelConfig.from_env()


def apply_hadamard(state: StateVector, target: int, variant=KernelVariant.OPTIMIZED,
                   config: KernelConfig | None = None, scheduler: Scheduler | None = None) -> None:
    target = _check_qubit(state, target)
    variant, config = _resolve(variant, config)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _hadamard_scalar(sv, s, e, target), config, scheduler)
    else:
        _run_optimized(state, "hadamard", target, -1, 1 << target, (_INV_SQRT2,), config, scheduler)


def apply_single_qubit_unitary(state: StateVector, target: int, gate: SingleQubitGate,
                               variant=KernelVariant.OPTIMIZED, config: KernelConfig | None = None,
                               scheduler: Scheduler | None = None, *,
                               allow_non_unitary: bool = False) -> None:
    target = _check_qubit(state, target)
    if not isinstance(gate, SingleQubitGate):
        gate = SingleQubitGate.from_matrix(gate)
    if not allow_non_unitary and not gate.is_unitary():
        raise GateError("gate matrix is not unitary (pass allow_non_unitary=True to override)")
    variant, config = _resolve(variant, config)
    params = gate.params()
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _unitary_scalar(sv, s, e, target, params),
                 config, scheduler)
    else:
        _run_optimized(state, "unitary", target, -1, 1 << target, params, config, scheduler)


def apply_pauli_x(state: StateVector, target: int, variant=KernelVariant.OPTIMIZED,
                  config: KernelConfig | None = None, scheduler: Scheduler | None = None) -> None:
    target = _check_qubit(state, target)
    variant, config = _resolve(variant, config)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _pauli_x_scalar(sv, s, e, target), config, scheduler)
    else:
        _run_optimized(state, "swap", target, -1, 1 << target, (0.0,), config, scheduler)


def apply_pauli_y(state: StateVector, target: int, variant=KernelVariant.OPTIMIZED,
                  config: KernelConfig | None = None, scheduler: Scheduler | None = None) -> None:
    target = _check_qubit(state, target)
    variant, config = _resolve(variant, config)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _pauli_y_scalar(sv, s, e, target), config, scheduler)
    else:
        _run_optimized(state, "pauli_y", target, -1, 1 << target, (0.0,), config, scheduler)


def apply_phase_shift(state: StateVector, target: int, angle: float,
                      variant=KernelVariant.OPTIMIZED, config: KernelConfig | None = None,
                      scheduler: Scheduler | None = None) -> None:
    """Multiply every amplitude with bit ``target`` set by ``exp(i * angle)``."""
    target = _check_qubit(state, target)
    variant, config = _resolve(variant, config)
    a, b = math.cos(angle), math.sin(angle)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _phase_scalar(sv, s, e, target, a, b),
                 config, scheduler)
    else:
        _run_optimized(state, "phase", target, -1, 1 << target, (a, b), config, scheduler)


def apply_controlled_not(state: StateVector, control: int, target: int,
                         variant=KernelVariant.OPTIMIZED, config: KernelConfig | None = None,
                         scheduler: Scheduler | None = None) -> None:
    control, target = _check_pair(state, control, target)
    variant, config = _resolve(variant, config)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _cnot_scalar(sv, s, e, control, target),
                 config, scheduler)
    else:
        _run_optimized(state, "swap", target, control, 1 << target, (0.0,), config, scheduler)


def apply_controlled_phase(state: StateVector, control: int, target: int, angle: float,
                           variant=KernelVariant.OPTIMIZED, config: KernelConfig | None = None,
                           scheduler: Scheduler | None = None) -> None:
    control, target = _check_pair(state, control, target)
    variant, config = _resolve(variant, config)
    a, b = math.cos(angle), math.sin(angle)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, target, lambda s, e: _cphase_scalar(sv, s, e, control, target, a, b),
                 config, scheduler)
    else:
        _run_optimized(state, "phase", target, control, 1 << target, (a, b), config, scheduler)


def apply_swap(state: StateVector, q1: int, q2: int, variant=KernelVariant.OPTIMIZED,
               config: KernelConfig | None = None, scheduler: Scheduler | None = None) -> None:
    q1, q2 = _check_pair(state, q1, q2, ("q1", "q2"))
    low, high = min(q1, q2), max(q1, q2)
    variant, config = _resolve(variant, config)
    if variant is KernelVariant.SCALAR_BASELINE:
        sv = state.doubles
        _execute(state, high, lambda s, e: _swap_scalar(sv, s, e, low, high), config, scheduler)
    else:
        _run_optimized(state, "swap", high, low, (1 << high) - (1 << low), (0.0,), config,
                       scheduler)
