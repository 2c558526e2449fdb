"""NUMA-aware, vectorised state-vector simulator."""
from __future__ import annotations

from .amplitude import (ComplexAmp, StateVector, create_state, destroy_state, get_amp, set_amp,
                        state_from_array, total_probability)
from .circuits import Circuit, Gate, QftVariant, RqcSpec, build_qft, build_rqc, run_circuit, run_qft
from .kernels import (GateError, KernelConfig, KernelVariant, SingleQubitGate, apply_controlled_not,
                      apply_controlled_phase, apply_hadamard, apply_pauli_x, apply_pauli_y,
                      apply_phase_shift, apply_single_qubit_unitary, apply_swap, pair_indices)
from .numa import AllocationError, AllocPolicy, NodeTopology, PlacementReport, detect_topology
from .scheduler import Scheduler, ThreadPlan, make_plan, run_parallel

__version__ = "0.1.0"
