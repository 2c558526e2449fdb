"""``numasv-bench``: run gate / QFT / RQC benchmarks and print CSV or JSON.

Exit codes: 0 ok, 2 invalid arguments, 3 allocation failure,
4 correctness-gate failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .circuits import QftVariant, RqcSpec
from .kernels import GateError, KernelConfig, KernelVariant
from .numa import AllocationError, AllocPolicy
from .scheduler import shutdown_pools

EXIT_OK, EXIT_ARGS, EXIT_ALLOC, EXIT_GATE = 0, 2, 3, 4


class _ArgError(Exception):
    pass


def parse_qubits(text: str) -> list[int]:
    """``N`` or an inclusive range ``N..M``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or N..M, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid qubit range {text!r}")
    return list(range(lo, hi + 1))


def _cores(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(",") if c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated core ids, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="numasv-bench", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--bench", choices=("gate", "qft", "rqc"), required=True)
    p.add_argument("--gate", choices=("h", "x", "y", "cnot"), default="h")
    p.add_argument("--qubits", type=parse_qubits, required=True, metavar="N[..M]")
    p.add_argument("--target", type=int, default=1,
                   help="target qubit for --bench gate (default 1, the second qubit)")
    p.add_argument("--control", type=int, default=None)
    p.add_argument("--kernel", choices=("scalar", "opt"), default="opt")
    p.add_argument("--policy", choices=("default", "local", "split"), default="default")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--pin", choices=("on", "off"), default="off")
    p.add_argument("--cores", type=_cores, default=None, help="explicit core list, e.g. 0,2,4")
    p.add_argument("--qft", choices=("recursive", "iterative", "blocked"), default="iterative")
    p.add_argument("--block-factor", type=int, default=16)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=bench.DEFAULT_REPS)
    p.add_argument("--mode", choices=bench.MODES, default="per-gate")
    p.add_argument("--rqc-gen", choices=("per-rep", "once"), default="per-rep",
                   help="end-to-end RQC: regenerate the circuit inside every rep or once")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    return p


def _run(args) -> list[bench.BenchmarkResult]:
    try:
        config = KernelConfig.from_env()
        setup = bench.RunSetup(variant=KernelVariant.parse(args.kernel),
                               policy=AllocPolicy.parse(args.policy), threads=args.threads,
                               pin=args.pin == "on", cores=args.cores, reps=args.reps,
                               mode=args.mode, config=config, seed=args.seed)
        qft = (QftVariant.blocked(args.block_factor) if args.qft == "blocked"
               else QftVariant(args.qft))
    except ValueError as exc:
        raise _ArgError(str(exc)) from exc

    results = []
    for n in args.qubits:
        try:
            if args.bench == "gate":
                if not 0 <= args.target < n:
                    raise _ArgError(f"--target {args.target} out of range for {n} qubits")
                control = args.control if args.gate == "cnot" else None
                results.append(bench.run_gate_bench(args.gate, n, args.target, setup, control))
            elif args.bench == "qft":
                results.append(bench.run_qft_bench(n, qft, setup))
            else:
                spec = RqcSpec(n, args.layers, args.seed)
                results.append(bench.run_rqc_bench(spec, setup, generation=args.rqc_gen))
        except (GateError, ValueError) as exc:
            if isinstance(exc, _ArgError):
                raise
            raise _ArgError(str(exc)) from exc
    return results


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        results = _run(args)
        text = bench.emit(results, args.format, args.out)
        if args.out is None:
            sys.stdout.write(text)
        return EXIT_OK
    except _ArgError as exc:
        print(f"numasv-bench: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except AllocationError as exc:
        print(json.dumps({"error": "allocation", **exc.as_record()}), file=sys.stderr)
        return EXIT_ALLOC
    except bench.CorrectnessGateError as exc:
        print(json.dumps({"error": "correctness-gate", "scenario": exc.scenario,
                          "max_abs_diff": exc.max_abs_diff,
                          "tolerance": bench.ORACLE_TOLERANCE}), file=sys.stderr)
        return EXIT_GATE
    except OSError as exc:
        print(f"numasv-bench: cannot write output: {exc}", file=sys.stderr)
        return EXIT_ARGS
    finally:
        shutdown_pools()


if __name__ == "__main__":
    sys.exit(main())
