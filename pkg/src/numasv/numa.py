"""NUMA topology discovery, page-bound allocation and residency audit.

Buffers are anonymous ``mmap`` regions (page-aligned, hence 64-byte aligned).
Binding uses the ``mbind`` syscall on sub-ranges of the mapped region; the
audit asks the kernel where each page lives via ``move_pages`` (query mode),
or via ``mincore`` on single-node hosts.  Every OS facility is optional: when
one is missing the code degrades to a plain allocation and says so.
"""
from __future__ import annotations

import ctypes
import enum
import errno
import logging
import mmap
import os
import platform
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ALIGNMENT = 64
_NODE_ROOT = Path("/sys/devices/system/node")

# (mbind, move_pages) syscall numbers
_SYSCALLS = {
    "x86_64": (237, 279),
    "aarch64": (235, 239),
    "ppc64le": (259, 301),
}
_MPOL_BIND = 2
_AUDIT_CHUNK = 1 << 16


class AllocPolicy(enum.Enum):
    DEFAULT = "default"
    LOCAL_FIRST = "local"
    SPLIT_EVEN = "split"

    @classmethod
    def parse(cls, value: "str | AllocPolicy") -> "AllocPolicy":
        if isinstance(value, cls):
            return value
        aliases = {"v1": cls.LOCAL_FIRST, "v2": cls.SPLIT_EVEN, "local_first": cls.LOCAL_FIRST,
                   "split_even": cls.SPLIT_EVEN}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


class AllocationError(MemoryError):
    """Raised when a buffer cannot be provided.

    Carries the request and what each node had free so callers can report it.
    """

    def __init__(self, message: str, requested_bytes: int, free_bytes: tuple[int, ...] = ()):
        super().__init__(message)
        self.requested_bytes = requested_bytes
        self.free_bytes = tuple(free_bytes)

    def as_record(self) -> dict:
        return {
            "error": "allocation",
            "message": str(self),
            "requested_bytes": self.requested_bytes,
            "free_bytes": list(self.free_bytes),
        }


class BindingUnavailableError(AllocationError):
    """Strict mode asked for page binding and the OS refused."""


@dataclass(frozen=True)
class NodeTopology:
    num_nodes: int
    free_bytes: tuple[int, ...]
    cores: tuple[tuple[int, ...], ...]
    page_size: int

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("num_nodes must be >= 1")
        if len(self.free_bytes) != self.num_nodes or len(self.cores) != self.num_nodes:
            raise ValueError("per-node lists must have num_nodes entries")
        if self.page_size <= 0 or self.page_size & (self.page_size - 1):
            raise ValueError(f"page_size {self.page_size} is not a power of two")

    @property
    def total_free(self) -> int:
        return sum(self.free_bytes)

    def node_of_core(self, core: int) -> int:
        for node, cores in enumerate(self.cores):
            if core in cores:
                return node
        return 0


@dataclass
class PlacementReport:
    """Where the pages of one buffer live (or are meant to live).

    ``node_pages[k]`` pages sit on node k; ``unplaced_pages`` are not bound or
    not yet resident (first-touch pending).  ``source`` is ``"plan"`` for the
    binding applied at allocation, ``"audit"`` for a kernel query and
    ``"unknown"`` when no query facility was usable.
    """

    node_pages: tuple[int, ...]
    requested_bytes: int
    rounded_bytes: int
    policy_used: str
    fallback_taken: bool
    page_size: int
    unplaced_pages: int = 0
    source: str = "plan"

    @property
    def total_pages(self) -> int:
        return self.rounded_bytes // self.page_size

    def fractions(self) -> list[float]:
        total = self.total_pages
        return [p / total for p in self.node_pages]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["node_pages"] = list(self.node_pages)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementReport":
        d = dict(d)
        d["node_pages"] = tuple(d["node_pages"])
        return cls(**d)


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------

def _parse_cpulist(text: str) -> list[int]:
    cpus: list[int] = []
    for part in text.strip().split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-")
            cpus.extend(range(int(lo), int(hi) + 1))
        else:
            cpus.append(int(part))
    return cpus


def _meminfo_kb(path: Path, key: str) -> int | None:
    try:
        text = path.read_text()
    except OSError:
        return None
    m = re.search(rf"{key}:\s+(\d+)\s*kB", text)
    return int(m.group(1)) if m else None


def _system_free_bytes(page_size: int) -> int:
    kb = _meminfo_kb(Path("/proc/meminfo"), "MemAvailable")
    if kb is not None:
        return kb * 1024
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * page_size
    except (ValueError, OSError):
        return 0


def detect_topology() -> NodeTopology:
    """Describe the host's NUMA nodes; a single node when NUMA is absent."""
    page_size = mmap.PAGESIZE
    total_cpus = os.cpu_count() or 1
    nodes: list[tuple[int, int, list[int]]] = []
    try:
        entries = sorted(
            (int(p.name[4:]), p) for p in _NODE_ROOT.iterdir()
            if p.name.startswith("node") and p.name[4:].isdigit()
        )
    except OSError:
        entries = []
    for node_id, path in entries:
        free_kb = _meminfo_kb(path / "meminfo", "MemFree")
        try:
            cpus = _parse_cpulist((path / "cpulist").read_text())
        except OSError:
            cpus = []
        nodes.append((node_id, (free_kb or 0) * 1024, cpus))

    if len(nodes) <= 1:
        free = _system_free_bytes(page_size)
        if nodes:
            free = max(free, nodes[0][1])
        return NodeTopology(1, (free,), (tuple(range(total_cpus)),), page_size)

    # node ids are assumed dense 0..k-1 (true on Linux unless nodes are offline)
    seen = {c for _, _, cpus in nodes for c in cpus}
    stray = [c for c in range(total_cpus) if c not in seen]
    cores = [list(cpus) for _, _, cpus in nodes]
    cores[0].extend(stray)
    return NodeTopology(
        num_nodes=len(nodes),
        free_bytes=tuple(f for _, f, _ in nodes),
        cores=tuple(tuple(sorted(c)) for c in cores),
        page_size=page_size,
    )


# ---------------------------------------------------------------------------
# placement planning (pure)
# ---------------------------------------------------------------------------

def round_to_pages(nbytes: int, page_size: int) -> int:
    return -(-nbytes // page_size) * page_size


def plan_segments(nbytes: int, policy: AllocPolicy, topo: NodeTopology) -> tuple[int, list[tuple[int, int]]]:
    """Return ``(rounded_bytes, [(node, pages), ...])`` in address order.

    Default, and every policy on a single-node topology, yields no segments:
    placement is then left to first touch.
    """
    if nbytes <= 0:
        raise ValueError(f"allocation size must be positive, got {nbytes}")
    page = topo.page_size
    pages = -(-nbytes // page)

    if policy is AllocPolicy.SPLIT_EVEN and topo.num_nodes > 1:
        # every segment keeps at least one page
        pages = max(pages, topo.num_nodes)
    rounded = pages * page
    if rounded > topo.total_free:
        raise AllocationError(
            f"need {rounded} bytes but only {topo.total_free} free across {topo.num_nodes} node(s)",
            nbytes, topo.free_bytes)
    if policy is AllocPolicy.DEFAULT or topo.num_nodes == 1:
        return rounded, []

    if policy is AllocPolicy.SPLIT_EVEN:
        share, extra = divmod(pages, topo.num_nodes)
        segments = [(k, share + (1 if k < extra else 0)) for k in range(topo.num_nodes)]
        for node, count in segments:
            if count * page > topo.free_bytes[node]:
                raise AllocationError(
                    f"node {node} cannot hold its {count * page}-byte share",
                    nbytes, topo.free_bytes)
        return rounded, segments

    # LOCAL_FIRST: lowest node that holds everything; otherwise fill in id order
    for node, free in enumerate(topo.free_bytes):
        if rounded <= free:
            return rounded, [(node, pages)]
    segments = []
    remaining = pages
    for node, free in enumerate(topo.free_bytes):
        take = min(remaining, free // page)
        if take:
            segments.append((node, take))
            remaining -= take
        if not remaining:
            break
    if remaining:
        raise AllocationError("node capacities cannot cover the request page-wise",
                              nbytes, topo.free_bytes)
    return rounded, segments


# ---------------------------------------------------------------------------
# OS facilities
# ---------------------------------------------------------------------------

_libc = None


def _get_libc():
    global _libc
    if _libc is None:
        _libc = ctypes.CDLL(None, use_errno=True)
        _libc.syscall.restype = ctypes.c_long
        _libc.mincore.argtypes = [ctypes.c_void_p, ctypes.c_size_t, ctypes.c_void_p]
        _libc.mincore.restype = ctypes.c_int
    return _libc


def _syscall_numbers():
    if platform.system() != "Linux":
        return None
    return _SYSCALLS.get(platform.machine())


def _mbind(addr: int, length: int, node: int) -> None:
    nums = _syscall_numbers()
    if nums is None:
        raise OSError(errno.ENOSYS, "mbind unavailable on this platform")
    words = node // 64 + 1
    mask = (ctypes.c_ulong * words)()
    mask[node // 64] = 1 << (node % 64)
    libc = _get_libc()
    rc = libc.syscall(ctypes.c_long(nums[0]), ctypes.c_void_p(addr), ctypes.c_ulong(length),
                      ctypes.c_int(_MPOL_BIND), mask, ctypes.c_ulong(words * 64 + 1),
                      ctypes.c_uint(0))
    if rc != 0:
        err = ctypes.get_errno()
        raise OSError(err, f"mbind to node {node} failed: {os.strerror(err)}")


def _query_nodes(addr: int, npages: int, page: int) -> np.ndarray:
    """Node id per page, negative errno for pages not resident."""
    nums = _syscall_numbers()
    if nums is None:
        raise OSError(errno.ENOSYS, "move_pages unavailable on this platform")
    libc = _get_libc()
    out = np.empty(npages, dtype=np.int32)
    for start in range(0, npages, _AUDIT_CHUNK):
        count = min(_AUDIT_CHUNK, npages - start)
        ptrs = (addr + (start + np.arange(count, dtype=np.uint64)) * page).astype(np.uint64)
        status = np.empty(count, dtype=np.int32)
        rc = libc.syscall(ctypes.c_long(nums[1]), ctypes.c_int(0), ctypes.c_ulong(count),
                          ctypes.c_void_p(ptrs.ctypes.data), ctypes.c_void_p(None),
                          ctypes.c_void_p(status.ctypes.data), ctypes.c_int(0))
        if rc < 0:
            err = ctypes.get_errno()
            raise OSError(err, f"move_pages query failed: {os.strerror(err)}")
        out[start:start + count] = status
    return out


def _resident(addr: int, npages: int, page: int) -> np.ndarray:
    vec = np.zeros(npages, dtype=np.uint8)
    rc = _get_libc().mincore(ctypes.c_void_p(addr), ctypes.c_size_t(npages * page),
                             ctypes.c_void_p(vec.ctypes.data))
    if rc != 0:
        err = ctypes.get_errno()
        raise OSError(err, f"mincore failed: {os.strerror(err)}")
    return (vec & 1).astype(bool)


def binding_available() -> bool:
    return _syscall_numbers() is not None


# ---------------------------------------------------------------------------
# buffers
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class NumaBuffer:
    """One anonymous mapping.  Views taken with :meth:`view` must be dropped
    before :meth:`close` can unmap it; otherwise unmapping is left to the GC."""

    nbytes: int
    _map: mmap.mmap = field(repr=False)
    _bytes: np.ndarray = field(repr=False)

    @property
    def address(self) -> int:
        return self._bytes.ctypes.data

    @property
    def closed(self) -> bool:
        return self._map.closed

    def view(self, dtype) -> np.ndarray:
        return self._bytes.view(dtype)

    def close(self) -> bool:
        """Unmap; False when outstanding views keep the mapping alive."""
        if self._map.closed:
            return True
        self._bytes = np.empty(0, dtype=np.uint8)
        try:
            self._map.close()
        except BufferError:
            return False
        return True


def _map_anonymous(rounded: int, requested: int, topo: NodeTopology) -> NumaBuffer:
    try:
        mm = mmap.mmap(-1, rounded, flags=mmap.MAP_PRIVATE | mmap.MAP_ANONYMOUS,
                       prot=mmap.PROT_READ | mmap.PROT_WRITE)
    except (OSError, OverflowError, MemoryError) as exc:
        raise AllocationError(f"mmap of {rounded} bytes failed: {exc}", requested,
                              topo.free_bytes) from exc
    buf = NumaBuffer(rounded, mm, np.frombuffer(mm, dtype=np.uint8))
    if buf.address % topo.page_size or buf.address % ALIGNMENT:
        buf.close()
        raise AllocationError(f"mapping at {buf.address:#x} is not page aligned", requested,
                              topo.free_bytes)
    return buf


def allocate_bound(nbytes: int, policy: AllocPolicy, topo: NodeTopology | None = None,
                   *, strict: bool = False) -> tuple[NumaBuffer, PlacementReport]:
    """Map ``nbytes`` (rounded up to whole pages) and bind pages per ``policy``."""
    policy = AllocPolicy.parse(policy)
    topo = topo or detect_topology()
    rounded, segments = plan_segments(nbytes, policy, topo)
    total_pages = rounded // topo.page_size

    if policy is not AllocPolicy.DEFAULT and topo.num_nodes > 1 and strict and not binding_available():
        raise BindingUnavailableError("page binding is not supported on this platform",
                                      nbytes, topo.free_bytes)

    buf = _map_anonymous(rounded, nbytes, topo)
    report = PlacementReport(
        node_pages=(0,) * topo.num_nodes,
        requested_bytes=nbytes,
        rounded_bytes=rounded,
        policy_used=policy.value,
        fallback_taken=policy is not AllocPolicy.DEFAULT and not segments,
        page_size=topo.page_size,
        unplaced_pages=total_pages,
    )
    if not segments:
        return buf, report

    offset = 0
    counts = [0] * topo.num_nodes
    try:
        for node, pages in segments:
            _mbind(buf.address + offset, pages * topo.page_size, node)
            counts[node] += pages
            offset += pages * topo.page_size
    except OSError as exc:
        if strict:
            buf.close()
            raise BindingUnavailableError(str(exc), nbytes, topo.free_bytes) from exc
        log.warning("page binding failed (%s); using first-touch placement", exc)
        report.fallback_taken = True
        return buf, report

    report.node_pages = tuple(counts)
    report.unplaced_pages = 0
    # LOCAL_FIRST spilling onto a second node is the documented fallback
    report.fallback_taken = policy is AllocPolicy.LOCAL_FIRST and len(segments) > 1
    return buf, report


def audit_placement(buf: NumaBuffer, topo: NodeTopology | None = None,
                    policy: AllocPolicy | str = "default", requested_bytes: int | None = None,
                    fallback_taken: bool = False) -> PlacementReport:
    """Count resident pages per node as the kernel reports them right now."""
    topo = topo or detect_topology()
    page = topo.page_size
    npages = buf.nbytes // page
    report = PlacementReport(
        node_pages=(0,) * topo.num_nodes,
        requested_bytes=buf.nbytes if requested_bytes is None else requested_bytes,
        rounded_bytes=buf.nbytes,
        policy_used=AllocPolicy.parse(policy).value,
        fallback_taken=fallback_taken,
        page_size=page,
        unplaced_pages=npages,
        source="unknown",
    )
    try:
        status = _query_nodes(buf.address, npages, page)
    except OSError:
        status = None
    if status is not None:
        placed = status >= 0
        counts = np.bincount(status[placed], minlength=topo.num_nodes)[:topo.num_nodes]
        # a node id outside the topology would be a topology bug; count it as unplaced
        report.node_pages = tuple(int(c) for c in counts)
        report.unplaced_pages = npages - int(counts.sum())
        report.source = "audit"
        return report
    if topo.num_nodes == 1:
        try:
            resident = int(_resident(buf.address, npages, page).sum())
        except OSError:
            return report
        report.node_pages = (resident,)
        report.unplaced_pages = npages - resident
        report.source = "audit"
    return report
