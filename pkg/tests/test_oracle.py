from __future__ import annotations

import math

import numpy as np
import pytest

from numasv.amplitude import create_state
from numasv.circuits import Circuit, Gate, build_qft
from numasv.oracle import (OracleSizeError, basis_state, compare_states, dense_operator,
                           dft_matrix, oracle_apply, replay, self_check, zero_state)

from conftest import random_amps, random_unitary


def test_h_on_zero():
    np.testing.assert_allclose(oracle_apply(zero_state(1), Gate("H", 0)), [2 ** -0.5] * 2)


def test_cnot_truth():
    out = oracle_apply(basis_state(2, 2), Gate("CNOT", 0, 1))
    np.testing.assert_array_equal(out, basis_state(2, 3))


def test_self_check():
    assert self_check(6) <= 1e-14


@pytest.mark.parametrize("k", range(16))
def test_qft_replay_matches_dft(k):
    out = replay(build_qft(4), basis_state(4, k))
    expected = np.exp(2j * np.pi * np.arange(16) * k / 16) / 4
    assert compare_states(out, expected) <= 1e-12


def test_dft_matrix_unitary():
    F = dft_matrix(5)
    np.testing.assert_allclose(F.conj().T @ F, np.eye(32), atol=1e-12)


@pytest.mark.parametrize("gate", [Gate("H", 1), Gate("SWAP", 0, 2), Gate("CPHASE", 2, 0, 0.4),
                                  Gate("CNOT", 2, 1)])
def test_dense_operators_unitary(gate):
    U = dense_operator(gate, 3)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(8), atol=1e-12)


def test_swap_is_bit_exchange():
    U = dense_operator(Gate("SWAP", 0, 2), 3)
    for k in range(8):
        b0, b2 = k & 1, (k >> 2) & 1
        kk = (k & 0b010) | (b0 << 2) | b2
        assert U[kk, k] == 1


def test_norm_preserved(rng):
    v = random_amps(9, rng)
    for g in (Gate("H", 8), Gate.unitary(3, random_unitary(rng)), Gate("SWAP", 1, 7)):
        v = oracle_apply(v, g)
        assert abs(np.linalg.norm(v) - 1) <= 1e-12


def test_compare_states_cases():
    s = create_state(3)
    assert compare_states(s, zero_state(3)) == 0.0
    a = random_amps(3, np.random.default_rng(1))
    b = a.copy()
    b[5] += 1e-13
    assert compare_states(a, b) == pytest.approx(1e-13, rel=1e-3)
    with pytest.raises(ValueError):
        compare_states(zero_state(2), zero_state(3))


def test_size_guard():
    with pytest.raises(OracleSizeError):
        oracle_apply(np.zeros(1 << 15, complex), Gate("H", 0))
    with pytest.raises(OracleSizeError):
        dense_operator(Gate("H", 0), 9)


def test_replay_text():
    text = "# qubits 2\nH 0\nCNOT 1 0\n"
    out = replay(text)
    np.testing.assert_allclose(out, [2 ** -0.5, 0, 0, 2 ** -0.5], atol=1e-15)


def test_tensor_path_large(rng):
    v = random_amps(12, rng)
    g = Gate("CPHASE", 11, 3, math.pi / 3)
    out = oracle_apply(v, g)
    idx = np.arange(1 << 12)
    mask = ((idx >> 11) & 1) & ((idx >> 3) & 1)
    expected = np.where(mask == 1, v * np.exp(1j * math.pi / 3), v)
    assert compare_states(out, expected) <= 1e-15
