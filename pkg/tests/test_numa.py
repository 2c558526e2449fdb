from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from numasv.amplitude import create_state
from numasv.kernels import apply_hadamard
from numasv.numa import (AllocationError, AllocPolicy, NodeTopology, PlacementReport,
                         allocate_bound, audit_placement, detect_topology, plan_segments,
                         round_to_pages)

from conftest import fake_topology


def test_policy_parse_aliases():
    assert AllocPolicy.parse("v1") is AllocPolicy.LOCAL_FIRST
    assert AllocPolicy.parse("split") is AllocPolicy.SPLIT_EVEN
    with pytest.raises(ValueError):
        AllocPolicy.parse("bogus")


def test_detect_topology_sane():
    t = detect_topology()
    assert t.num_nodes >= 1
    assert all(f >= 0 for f in t.free_bytes)
    assert sum(len(c) for c in t.cores) >= 1


@pytest.mark.parametrize("bad", [dict(num_nodes=0, free_bytes=(), cores=(), page_size=4096),
                                 dict(num_nodes=2, free_bytes=(1,), cores=((0,), (1,)), page_size=4096),
                                 dict(num_nodes=1, free_bytes=(1,), cores=((0,),), page_size=3000)])
def test_topology_validation(bad):
    with pytest.raises(ValueError):
        NodeTopology(**bad)


def test_round_to_pages():
    assert round_to_pages(1, 4096) == 4096
    assert round_to_pages(4096, 4096) == 4096
    assert round_to_pages(4097, 4096) == 8192


def test_local_first_single_node_when_fits():
    topo = fake_topology()
    rounded, seg = plan_segments(1 << 20, AllocPolicy.LOCAL_FIRST, topo)
    assert rounded == 1 << 20 and seg == [(0, 256)]


def test_local_first_spills_in_node_order():
    topo = fake_topology(free=(8 * 4096, 1 << 30))
    _, seg = plan_segments(20 * 4096, AllocPolicy.LOCAL_FIRST, topo)
    assert seg == [(1, 20)]  # node 1 fits everything
    topo = fake_topology(free=(8 * 4096, 16 * 4096))
    _, seg = plan_segments(20 * 4096, AllocPolicy.LOCAL_FIRST, topo)
    assert seg == [(0, 8), (1, 12)]


def test_split_even_counts():
    topo = fake_topology()
    _, seg = plan_segments(5 * 4096, AllocPolicy.SPLIT_EVEN, topo)
    assert seg == [(0, 3), (1, 2)]


def test_split_even_per_node_capacity():
    topo = fake_topology(free=(2 * 4096, 1 << 30))
    with pytest.raises(AllocationError):
        plan_segments(10 * 4096, AllocPolicy.SPLIT_EVEN, topo)


def test_over_capacity_raises():
    topo = fake_topology(free=(4096, 4096))
    for policy in AllocPolicy:
        with pytest.raises(AllocationError):
            plan_segments(3 * 4096, policy, topo)


@given(st.integers(1, 1 << 26), st.integers(2, 6), st.sampled_from(list(AllocPolicy)))
def test_plan_covers_request(nbytes, nodes, policy):
    topo = fake_topology(free=(1 << 28,) * nodes, cores=tuple((k,) for k in range(nodes)))
    rounded, seg = plan_segments(nbytes, policy, topo)
    assert rounded >= nbytes and rounded % 4096 == 0
    if seg:
        assert sum(p for _, p in seg) * 4096 == rounded
    if policy is AllocPolicy.SPLIT_EVEN:
        counts = [p for _, p in seg]
        assert max(counts) - min(counts) <= 1 and len(counts) == nodes
    if policy is AllocPolicy.LOCAL_FIRST:
        assert seg == [(0, rounded // 4096)]


def test_single_node_host_falls_back():
    topo = detect_topology()
    if topo.num_nodes > 1:
        pytest.skip("multi-node host")
    for policy in (AllocPolicy.LOCAL_FIRST, AllocPolicy.SPLIT_EVEN):
        buf, rep = allocate_bound(1 << 16, policy, topo)
        assert rep.fallback_taken
        assert (sum(rep.node_pages) + rep.unplaced_pages) * rep.page_size == rep.rounded_bytes
        buf.close()
    buf, rep = allocate_bound(1 << 16, AllocPolicy.DEFAULT, topo)
    assert not rep.fallback_taken
    buf.close()


def test_audit_counts_touched_pages():
    topo = detect_topology()
    buf, _ = allocate_bound(64 * topo.page_size, AllocPolicy.DEFAULT, topo)
    before = audit_placement(buf, topo)
    if before.source != "audit":
        pytest.skip("no residency query available")
    buf.view(np.uint8)[:] = 1
    after = audit_placement(buf, topo)
    assert sum(after.node_pages) == 64 and after.unplaced_pages == 0
    buf.close()


def test_placement_report_roundtrip():
    rep = PlacementReport((3, 2), 20000, 20480, "split", False, 4096)
    assert PlacementReport.from_dict(rep.to_dict()) == rep
    assert rep.fractions() == [0.6, 0.4]


def test_policies_give_identical_results():
    out = []
    for policy in AllocPolicy:
        s = create_state(12, policy)
        for t in range(12):
            apply_hadamard(s, t)
        out.append(s.to_numpy())
    for other in out[1:]:
        np.testing.assert_array_equal(out[0], other)
