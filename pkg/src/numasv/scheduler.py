"""Locality-aware worker pool.

Threads are split across NUMA nodes in order (node 0 takes the first
``ceil(T / nodes)`` threads, and so on), and task ranges are handed out
contiguously in thread order, so node-0 threads cover the low end of the
amplitude array, which is where split allocation puts node 0's pages.

Workers pin themselves with ``sched_setaffinity`` on their own thread id.
Kernels are numba ``nogil`` functions, so plain Python threads run them in
parallel.
"""
from __future__ import annotations

import logging
import os
import queue
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from typing import Callable, Sequence

from .numa import NodeTopology, detect_topology

log = logging.getLogger(__name__)

DEFAULT_GRANULARITY_CAP = 16


@dataclass(frozen=True)
class Assignment:
    node: int
    start: int
    end: int
    core: int | None = None

    @property
    def size(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class ThreadPlan:
    num_tasks: int
    granularity: int
    assignments: tuple[Assignment, ...]

    @property
    def num_threads(self) -> int:
        return len(self.assignments)


def _near_equal(total: int, parts: int) -> list[int]:
    share, extra = divmod(total, parts)
    return [share + (1 if k < extra else 0) for k in range(parts)]


def task_granularity(target: int, cap: int = DEFAULT_GRANULARITY_CAP) -> int:
    """Tasks per indivisible chunk: one half-block, at most one unrolled chunk."""
    return min(1 << target, cap)


def make_plan(num_threads: int, topo: NodeTopology, num_tasks: int, target: int,
              *, granularity: int | None = None,
              cores: Sequence[int] | None = None) -> ThreadPlan:
    num_threads = max(1, int(num_threads))
    num_tasks = max(1, int(num_tasks))
    gran = granularity if granularity is not None else task_granularity(target)
    gran = max(1, gran)

    chunks = -(-num_tasks // gran)
    bounds = [0]
    for size in _near_equal(chunks, num_threads):
        bounds.append(min(bounds[-1] + size * gran, num_tasks))

    if cores:
        thread_cores = [cores[t % len(cores)] for t in range(num_threads)]
        thread_nodes = [topo.node_of_core(c) for c in thread_cores]
    else:
        thread_cores = [None] * num_threads
        thread_nodes = []
        for node, count in enumerate(_near_equal(num_threads, topo.num_nodes)):
            thread_nodes.extend([node] * count)

    assignments = tuple(
        Assignment(thread_nodes[t], bounds[t], bounds[t + 1], thread_cores[t])
        for t in range(num_threads)
    )
    return ThreadPlan(num_tasks, gran, assignments)


class _Worker(threading.Thread):
    def __init__(self, index: int, cpus: frozenset[int] | None):
        super().__init__(name=f"numasv-worker-{index}", daemon=True)
        self.cpus = cpus
        self.jobs: queue.SimpleQueue = queue.SimpleQueue()
        self.pinned = False
        self.ready = threading.Event()

    def run(self):
        if self.cpus:
            try:
                os.sched_setaffinity(0, self.cpus)
                self.pinned = True
            except (OSError, AttributeError) as exc:
                log.warning("could not pin %s to %s: %s", self.name, sorted(self.cpus), exc)
        self.ready.set()
        while True:
            job = self.jobs.get()
            if job is None:
                return
            fn, start, end, fut = job
            try:
                fn(start, end)
            except BaseException as exc:  # noqa: B036 - surfaced to caller
                fut.set_exception(exc)
            else:
                fut.set_result(None)


class WorkerPool:
    """Fixed set of (optionally pinned) threads, one per plan slot."""

    def __init__(self, cpu_sets: Sequence[frozenset[int] | None]):
        self.workers = [_Worker(i, cpus) for i, cpus in enumerate(cpu_sets)]
        for w in self.workers:
            w.start()
        for w in self.workers:
            w.ready.wait()

    @property
    def pinned(self) -> bool:
        return all(w.pinned for w in self.workers)

    def run(self, plan: ThreadPlan, fn: Callable[[int, int], None]) -> None:
        futures = []
        for worker, a in zip(self.workers, plan.assignments):
            if a.size <= 0:
                continue
            fut: Future = Future()
            worker.jobs.put((fn, a.start, a.end, fut))
            futures.append(fut)
        errors = [f.exception() for f in futures]
        for exc in errors:
            if exc is not None:
                raise exc

    def close(self) -> None:
        for w in self.workers:
            w.jobs.put(None)
        for w in self.workers:
            w.join()


_POOLS: dict[tuple, WorkerPool] = {}
_POOLS_LOCK = threading.Lock()


def _cpu_sets(plan: ThreadPlan, topo: NodeTopology, pin: bool) -> tuple:
    if not pin:
        return (None,) * plan.num_threads
    sets = []
    for a in plan.assignments:
        if a.core is not None:
            sets.append(frozenset({a.core}))
        elif topo.num_nodes > 1 and topo.cores[a.node]:
            sets.append(frozenset(topo.cores[a.node]))
        else:
            sets.append(None)
    return tuple(sets)


def get_pool(cpu_sets: tuple) -> WorkerPool:
    """Process-wide pool for this exact binding layout, created on first use."""
    with _POOLS_LOCK:
        pool = _POOLS.get(cpu_sets)
        if pool is None:
            pool = _POOLS[cpu_sets] = WorkerPool(cpu_sets)
        return pool


def shutdown_pools() -> None:
    with _POOLS_LOCK:
        for pool in _POOLS.values():
            pool.close()
        _POOLS.clear()


def run_parallel(plan: ThreadPlan, fn: Callable[[int, int], None], *,
                 topo: NodeTopology | None = None, pin: bool = False) -> bool:
    """Run ``fn(start, end)`` for every assignment; returns whether workers were pinned.

    Returns only after every subrange finished.  Pinning that is impossible
    (single-node host without an explicit core list, or an OS refusal) falls
    back to unpinned execution; the return value reports it.
    """
    if plan.num_threads == 1 and not pin:
        a = plan.assignments[0]
        if a.size > 0:
            fn(a.start, a.end)
        return False
    topo = topo or detect_topology()
    sets = _cpu_sets(plan, topo, pin)
    pool = get_pool(sets)
    pool.run(plan, fn)
    return pin and all(s is not None for s in sets) and pool.pinned


class Scheduler:
    """Thread count, binding choice and a plan cache for one run configuration."""

    def __init__(self, num_threads: int = 1, topology: NodeTopology | None = None,
                 pin: bool = False, cores: Sequence[int] | None = None):
        self.num_threads = max(1, int(num_threads))
        self.topology = topology or detect_topology()
        self.pin = pin
        self.cores = tuple(cores) if cores else None
        self.pinned: bool | None = None
        self._plans: dict[tuple[int, int, int], ThreadPlan] = {}

    @property
    def pin_fallback(self) -> bool:
        """Pinning was requested but could not be applied."""
        return bool(self.pin and self.pinned is False)

    def plan(self, num_tasks: int, target: int, granularity: int | None = None) -> ThreadPlan:
        gran = granularity if granularity is not None else task_granularity(target)
        key = (num_tasks, target, gran)
        plan = self._plans.get(key)
        if plan is None:
            plan = self._plans[key] = make_plan(self.num_threads, self.topology, num_tasks,
                                                target, granularity=gran, cores=self.cores)
        return plan

    def run(self, plan: ThreadPlan, fn: Callable[[int, int], None]) -> None:
        pinned = run_parallel(plan, fn, topo=self.topology, pin=self.pin)
        if self.pin and pinned is False and self.pinned is None:
            log.warning("thread pinning unavailable; running unpinned")
        self.pinned = pinned if self.pinned is None else (self.pinned and pinned)

    def describe(self) -> dict:
        return {"threads": self.num_threads, "pin": self.pin,
                "pinned": bool(self.pinned), "pin_fallback": self.pin_fallback,
                "cores": list(self.cores) if self.cores else None}


SERIAL = Scheduler(1)
