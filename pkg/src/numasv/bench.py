"""Benchmark harness: warmup, ten timed reps, min/mean, oracle gate first."""
from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels as K
from .amplitude import create_state, destroy_state
from .circuits import Circuit, Gate, QftVariant, RqcSpec, build_qft, build_rqc, run_circuit
from .numa import AllocPolicy, PlacementReport
from .oracle import compare_states, replay
from .scheduler import Scheduler

DEFAULT_REPS = 10
ORACLE_MAX_QUBITS = 10
ORACLE_TOLERANCE = 1e-10
CSV_COLUMNS = ("scenario", "n", "variant", "policy", "threads", "pinned", "reps",
               "min_ns", "mean_ns")
MODES = ("per-gate", "end-to-end")

# Speedups measured on a dual-socket 26-core Xeon host.  Hardware dependent:
# reference targets only, not expectations for any other machine.
REFERENCE_SPEEDUPS = {
    "single_qubit_gates": (5.5, 6.5),
    "two_qubit_gates": 4.5,
    "rqc": 4.0,
    "qft_recursive_n23": 1.79,
    "qft_builtin_n23": 1.67,
}


class CorrectnessGateError(RuntimeError):
    def __init__(self, scenario: str, max_abs_diff: float):
        super().__init__(f"{scenario}: oracle mismatch {max_abs_diff:.3e} > {ORACLE_TOLERANCE:g}")
        self.scenario = scenario
        self.max_abs_diff = max_abs_diff


@dataclass
class BenchmarkResult:
    scenario: str
    n: int
    variant: str
    policy: str
    threads: int
    pinned: bool
    reps: int
    min_ns: int
    mean_ns: float
    all_reps_ns: list[int]
    placement: dict
    config: dict
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps != len(self.all_reps_ns):
            raise ValueError("reps must equal the number of timings")
        if self.all_reps_ns and self.min_ns != min(self.all_reps_ns):
            raise ValueError("min_ns must be the minimum timing")

    @classmethod
    def from_timings(cls, timings: list[int], **kw) -> "BenchmarkResult":
        return cls(reps=len(timings), min_ns=min(timings), mean_ns=statistics.fmean(timings),
                   all_reps_ns=list(timings), **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkResult":
        return cls(**d)

    def csv_row(self) -> dict:
        row = {k: getattr(self, k) for k in CSV_COLUMNS}
        row["pinned"] = str(self.pinned).lower()
        return row


def speedup(baseline: BenchmarkResult, optimized: BenchmarkResult) -> float:
    """Ratio of minimum times (baseline / optimized)."""
    return baseline.min_ns / optimized.min_ns


@dataclass
class RunSetup:
    """What every scenario shares: kernels, placement and threading."""

    variant: K.KernelVariant = K.KernelVariant.OPTIMIZED
    policy: AllocPolicy = AllocPolicy.DEFAULT
    threads: int = 1
    pin: bool = False
    cores: tuple[int, ...] | None = None
    reps: int = DEFAULT_REPS
    mode: str = "per-gate"
    config: K.KernelConfig | None = None
    seed: int = 0

    def __post_init__(self):
        self.variant = K.KernelVariant.parse(self.variant)
        self.policy = AllocPolicy.parse(self.policy)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.config = self.config or K.KernelConfig.from_env()
        self.scheduler = Scheduler(self.threads, pin=self.pin, cores=self.cores)

    def new_state(self, n: int):
        return create_state(n, self.policy, scheduler=self.scheduler)

    def run(self, state, circuit: Circuit) -> None:
        run_circuit(state, circuit, self.variant, self.config, self.scheduler)


def correctness_gate(setup: RunSetup, circuit: Circuit, scenario: str) -> float | None:
    """Replay ``circuit`` on a random state against the oracle; skipped above 10 qubits."""
    n = circuit.num_qubits
    if n > ORACLE_MAX_QUBITS:
        return None
    rng = np.random.default_rng(setup.seed)
    init = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    init /= np.linalg.norm(init)
    state = setup.new_state(n)
    try:
        state.load(init)
        setup.run(state, circuit)
        diff = compare_states(state, replay(circuit, init))
    finally:
        destroy_state(state)
    if not diff <= ORACLE_TOLERANCE:
        raise CorrectnessGateError(scenario, diff)
    return diff


def _measure(setup: RunSetup, n: int, make_circuit, *, regenerate: bool) -> tuple[list[int], PlacementReport]:
    """Warmup once, then ``setup.reps`` timed reps with a monotonic clock."""
    circuit = make_circuit()
    timings: list[int] = []
    if setup.mode == "end-to-end":
        placement = None
        for rep in range(setup.reps + 1):
            t0 = time.perf_counter_ns()
            state = setup.new_state(n)
            setup.run(state, make_circuit() if regenerate else circuit)
            placement = state.placement
            destroy_state(state)
            dt = time.perf_counter_ns() - t0
            if rep:
                timings.append(dt)
        return timings, placement
    state = setup.new_state(n)
    try:
        setup.run(state, circuit)
        for _ in range(setup.reps):
            t0 = time.perf_counter_ns()
            setup.run(state, circuit)
            timings.append(time.perf_counter_ns() - t0)
        return timings, state.placement
    finally:
        destroy_state(state)


def _result(setup: RunSetup, scenario: str, n: int, timings, placement, params) -> BenchmarkResult:
    sched = setup.scheduler
    params = dict(params, mode=setup.mode, pin_requested=setup.pin,
                  pin_fallback=sched.pin_fallback)
    return BenchmarkResult.from_timings(
        timings, scenario=scenario, n=n, variant=setup.variant.value, policy=setup.policy.value,
        threads=setup.threads, pinned=bool(sched.pinned), placement=placement.to_dict(),
        config=setup.config.to_dict(), params=params)


def gate_circuit(gate: str, n: int, target: int, control: int | None = None) -> Circuit:
    kind = gate.upper()
    if kind in ("CNOT", "CPHASE", "SWAP"):
        if control is None:
            control = target + 1 if target + 1 < n else target - 1
        g = Gate(kind, target, control, np.pi / 4 if kind == "CPHASE" else None)
    else:
        if control is not None:
            raise ValueError(f"{kind} takes no control qubit")
        g = Gate(kind, target)
    return Circuit(n, [g])


def run_gate_bench(gate: str, n: int, target: int, setup: RunSetup,
                   control: int | None = None) -> BenchmarkResult:
    circuit = gate_circuit(gate, n, target, control)
    g = circuit.gates[0]
    scenario = f"gate-{g.kind.lower()}"
    diff = correctness_gate(setup, circuit, scenario)
    timings, placement = _measure(setup, n, lambda: circuit, regenerate=False)
    return _result(setup, scenario, n, timings, placement,
                   {"target": g.target, "control": g.control, "oracle_diff": diff})


def run_qft_bench(n: int, qft: QftVariant | str, setup: RunSetup) -> BenchmarkResult:
    qft = QftVariant(qft) if isinstance(qft, str) else qft
    circuit = build_qft(n, qft)
    scenario = f"qft-{qft.label}"
    diff = correctness_gate(setup, circuit, scenario)
    timings, placement = _measure(setup, n, lambda: circuit, regenerate=False)
    return _result(setup, scenario, n, timings, placement,
                   {"qft": qft.label, "gates": len(circuit), "oracle_diff": diff})


def run_rqc_bench(spec: RqcSpec, setup: RunSetup, *, generation: str = "per-rep") -> BenchmarkResult:
    """``generation='per-rep'`` rebuilds the circuit inside each end-to-end rep."""
    if generation not in ("per-rep", "once"):
        raise ValueError("generation must be 'per-rep' or 'once'")
    circuit = build_rqc(spec)
    scenario = f"rqc-L{spec.layers}"
    diff = correctness_gate(setup, circuit, scenario)
    regenerate = generation == "per-rep" and setup.mode == "end-to-end"
    timings, placement = _measure(setup, spec.n, lambda: build_rqc(spec), regenerate=regenerate)
    return _result(setup, scenario, spec.n, timings, placement,
                   {"layers": spec.layers, "seed": spec.seed, "gates": len(circuit),
                    "generation": generation, "oracle_diff": diff})


def emit(results: list[BenchmarkResult], fmt: str = "csv", out: str | Path | None = None) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerow(r.csv_row())
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([r.to_dict() for r in results], indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out is not None:
        Path(out).write_text(text)
    return text


def load_json(text: str) -> list[BenchmarkResult]:
    return [BenchmarkResult.from_dict(d) for d in json.loads(text)]
