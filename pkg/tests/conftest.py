from __future__ import annotations

import numpy as np
import pytest

from numasv.numa import NodeTopology


def random_amps(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def fake_topology(free=(1 << 30, 1 << 30), cores=((0, 1), (2, 3)), page=4096) -> NodeTopology:
    return NodeTopology(len(free), tuple(free), tuple(tuple(c) for c in cores), page)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
