from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from numasv import kernels as K
from numasv.amplitude import create_state, state_from_array, total_probability
from numasv.circuits import Gate
from numasv.oracle import compare_states, oracle_apply

from conftest import random_amps, random_unitary

VARIANTS = list(K.KernelVariant)
ISAS = ("avx512", "avx2", "generic")


def _isa_ok(isa):
    order = {"generic": 0, "avx2": 1, "avx512": 2}
    return order[isa] <= order[K.KernelConfig().isa]


CONFIGS = [K.KernelConfig(isa=i) for i in ISAS if _isa_ok(i)] + [
    K.KernelConfig(unroll=4, prefetch_near=0, prefetch_far=0),
    K.KernelConfig(unroll=32, prefetch_near=64, prefetch_far=128),
    K.KernelConfig(unroll=8, vector_complexes=2),
]


# -- index math ---------------------------------------------------------------

@pytest.mark.parametrize("task,target,expected", [
    (0, 0, (0, 1)),
    (5, 2, (9, 13)),
    (7, 3, (7, 15)),
    (3, 0, (6, 7)),
])
def test_pair_indices_examples(task, target, expected):
    assert K.pair_indices(task, target) == expected


@given(st.integers(1, 10), st.data())
def test_pair_indices_bijection(n, data):
    target = data.draw(st.integers(0, n - 1))
    pairs = [K.pair_indices(t, target) for t in range(1 << (n - 1))]
    flat = [i for p in pairs for i in p]
    assert sorted(flat) == list(range(1 << n))
    for up, lo in pairs:
        assert not (up >> target) & 1 and (lo >> target) & 1 and lo - up == 1 << target


# -- config -------------------------------------------------------------------

def test_config_defaults_and_env():
    c = K.KernelConfig()
    assert (c.unroll, c.prefetch_near, c.prefetch_far, c.vector_complexes) == (16, 16, 32, 4)
    e = K.KernelConfig.from_env({"PREFETCH_AHEAD": "64", "UNROLL": "8"})
    assert (e.prefetch_far, e.prefetch_near, e.unroll) == (64, 32, 8)
    assert K.KernelConfig.from_env({}) == c


@pytest.mark.parametrize("kw", [dict(unroll=6), dict(unroll=2), dict(prefetch_near=40),
                                dict(prefetch_near=-1), dict(isa="sse9"), dict(vector_complexes=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        K.KernelConfig(**kw)


# -- gate constructors --------------------------------------------------------

@pytest.mark.parametrize("gate", [K.SingleQubitGate.hadamard(), K.SingleQubitGate.pauli_x(),
                                  K.SingleQubitGate.pauli_y(), K.SingleQubitGate.pauli_z(),
                                  K.SingleQubitGate.t(), K.SingleQubitGate.phase(1.234)])
def test_builtin_gates_unitary(gate):
    assert gate.is_unitary(1e-12)


# -- documented examples ------------------------------------------------------

@pytest.mark.parametrize("variant", VARIANTS)
def test_hadamard_on_zero(variant):
    s = create_state(1)
    K.apply_hadamard(s, 0, variant)
    np.testing.assert_allclose(s.amps, [1 / math.sqrt(2)] * 2, atol=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("config", CONFIGS, ids=str)
def test_hadamard_twice_identity(rng, variant, config):
    v = random_amps(9, rng)
    s = state_from_array(v)
    for t in range(9):
        K.apply_hadamard(s, t, variant, config)
        K.apply_hadamard(s, t, variant, config)
        assert compare_states(s, v) <= 1e-12


@pytest.mark.parametrize("variant", VARIANTS)
def test_x_and_y_on_zero(variant):
    s = create_state(1)
    K.apply_single_qubit_unitary(s, 0, K.SingleQubitGate.pauli_x(), variant)
    np.testing.assert_array_equal(s.amps, [0, 1])
    s = create_state(1)
    K.apply_single_qubit_unitary(s, 0, K.SingleQubitGate.pauli_y(), variant)
    np.testing.assert_array_equal(s.amps, [0, 1j])
    s = create_state(1)
    K.apply_pauli_y(s, 0, variant)
    np.testing.assert_array_equal(s.amps, [0, 1j])


@pytest.mark.parametrize("variant", VARIANTS)
def test_x_flips_basis_bit(variant):
    n = 6
    for k in (0, 5, 37, 63):
        for t in range(n):
            a = np.zeros(1 << n, complex)
            a[k] = 1
            s = state_from_array(a)
            K.apply_pauli_x(s, t, variant)
            assert s.amps[k ^ (1 << t)] == 1 and np.count_nonzero(s.amps) == 1


@pytest.mark.parametrize("variant", VARIANTS)
def test_y_squared_identity(rng, variant):
    v = random_amps(7, rng)
    s = state_from_array(v)
    for t in range(7):
        K.apply_pauli_y(s, t, variant)
        K.apply_pauli_y(s, t, variant)
    assert compare_states(s, v) <= 1e-12


@pytest.mark.parametrize("variant", VARIANTS)
def test_y_matches_generic_unitary(rng, variant):
    v = random_amps(6, rng)
    for t in range(6):
        a, b = state_from_array(v), state_from_array(v)
        K.apply_pauli_y(a, t, variant)
        K.apply_single_qubit_unitary(b, t, K.SingleQubitGate.pauli_y(), variant)
        assert compare_states(a, b.to_numpy()) <= 1e-13


@pytest.mark.parametrize("variant", VARIANTS)
def test_cnot_truth_table(variant):
    s = state_from_array([0, 0, 1, 0])  # |10>
    K.apply_controlled_not(s, 1, 0, variant)
    np.testing.assert_array_equal(s.amps, [0, 0, 0, 1])
    s = state_from_array([0, 1, 0, 0])  # |01>
    K.apply_controlled_not(s, 1, 0, variant)
    np.testing.assert_array_equal(s.amps, [0, 1, 0, 0])


@pytest.mark.parametrize("variant", VARIANTS)
def test_cphase_examples(variant):
    s = state_from_array(np.full(4, 0.5))
    K.apply_controlled_phase(s, 0, 1, 0.0, variant)
    np.testing.assert_array_equal(s.amps, np.full(4, 0.5))
    K.apply_controlled_phase(s, 0, 1, math.pi, variant)
    np.testing.assert_allclose(s.amps, [0.5, 0.5, 0.5, -0.5], atol=1e-16)


@pytest.mark.parametrize("variant", VARIANTS)
def test_cphase_symmetric(rng, variant):
    v = random_amps(6, rng)
    a, b = state_from_array(v), state_from_array(v)
    K.apply_controlled_phase(a, 1, 4, 0.9, variant)
    K.apply_controlled_phase(b, 4, 1, 0.9, variant)
    assert compare_states(a, b.to_numpy()) <= 1e-15


@pytest.mark.parametrize("variant", VARIANTS)
def test_swap_examples(rng, variant):
    s = state_from_array([0, 1, 0, 0])  # |01>
    K.apply_swap(s, 0, 1, variant)
    np.testing.assert_array_equal(s.amps, [0, 0, 1, 0])
    v = random_amps(6, rng)
    s = state_from_array(v)
    K.apply_swap(s, 2, 5, variant)
    K.apply_swap(s, 5, 2, variant)
    np.testing.assert_array_equal(s.amps, v)


# -- oracle comparisons -------------------------------------------------------

def _gate_cases(n, rng):
    u = random_unitary(rng)
    for t in range(n):
        yield Gate("H", t)
        yield Gate("X", t)
        yield Gate("Y", t)
        yield Gate("T", t)
        yield Gate("PHASE", t, angle=0.3)
        yield Gate.unitary(t, u)
        for c in range(n):
            if c != t:
                yield Gate("CNOT", t, c)
                yield Gate("CPHASE", t, c, math.pi / 8)
                yield Gate("SWAP", t, c)


def _apply(state, gate, variant, config=None):
    from numasv.circuits import apply_gate
    apply_gate(state, gate, variant, config)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("config", CONFIGS, ids=str)
def test_all_gates_match_oracle(rng, variant, config):
    n = 6
    v = random_amps(n, rng)
    for gate in _gate_cases(n, rng):
        s = state_from_array(v)
        _apply(s, gate, variant, config)
        tol = 1e-13 if gate.kind in ("SWAP", "X", "CNOT") else 1e-12
        assert compare_states(s, oracle_apply(v, gate)) <= tol, gate


@pytest.mark.parametrize("variant", VARIANTS)
def test_unitary_rejects_non_unitary(variant):
    s = create_state(2)
    bad = K.SingleQubitGate(1, 1, 0, 1)
    with pytest.raises(K.GateError):
        K.apply_single_qubit_unitary(s, 0, bad, variant)
    K.apply_single_qubit_unitary(s, 0, bad, variant, allow_non_unitary=True)
    s.load([1, 0, 0, 0])
    K.apply_single_qubit_unitary(s, 0, K.SingleQubitGate(2, 0, 0, 3), variant,
                                 allow_non_unitary=True)
    np.testing.assert_array_equal(s.amps, [2, 0, 0, 0])


@pytest.mark.parametrize("call", [
    lambda s: K.apply_hadamard(s, 4),
    lambda s: K.apply_hadamard(s, -1),
    lambda s: K.apply_pauli_x(s, 9),
    lambda s: K.apply_controlled_not(s, 1, 1),
    lambda s: K.apply_controlled_phase(s, 2, 2, 0.1),
    lambda s: K.apply_swap(s, 0, 0),
    lambda s: K.apply_swap(s, 0, 4),
])
def test_range_errors(call):
    with pytest.raises(K.GateError):
        call(create_state(4))


# -- variant / config / skipped-amplitude properties ---------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
def test_variants_agree_every_target(rng, n):
    v = random_amps(n, rng)
    u = K.SingleQubitGate.from_matrix(random_unitary(rng))
    for t in range(n):
        for op in (lambda s, var: K.apply_hadamard(s, t, var),
                   lambda s, var: K.apply_pauli_y(s, t, var),
                   lambda s, var: K.apply_single_qubit_unitary(s, t, u, var),
                   lambda s, var: K.apply_phase_shift(s, t, 0.7, var)):
            a, b = state_from_array(v), state_from_array(v)
            op(a, K.KernelVariant.SCALAR_BASELINE)
            op(b, K.KernelVariant.OPTIMIZED)
            assert compare_states(a, b.to_numpy()) <= 1e-12


def test_optimized_bit_identical_across_configs(rng):
    n = 10
    v = random_amps(n, rng)
    u = K.SingleQubitGate.from_matrix(random_unitary(rng))
    outs = []
    for cfg in CONFIGS:
        s = state_from_array(v)
        for t in range(n):
            K.apply_hadamard(s, t, config=cfg)
            K.apply_single_qubit_unitary(s, t, u, config=cfg)
            K.apply_controlled_phase(s, t, (t + 2) % n, 0.4, config=cfg)
            K.apply_swap(s, t, (t + 5) % n, config=cfg)
        outs.append(s.to_numpy())
    for o in outs[1:]:
        np.testing.assert_array_equal(o, outs[0])


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("control,target", [(0, 5), (5, 0), (2, 3), (6, 1), (1, 6)])
def test_controlled_gates_leave_skipped_amplitudes_alone(variant, control, target):
    n = 8
    idx = np.arange(1 << n)
    v = np.arange(1 << n) * (1 + 0.5j)
    skipped = ((idx >> control) & 1) == 0
    v[skipped] = np.nan  # any arithmetic on these would be visible
    for op in (lambda s: K.apply_controlled_not(s, control, target, variant),
               lambda s: K.apply_controlled_phase(s, control, target, 0.5, variant)):
        s = state_from_array(v)
        op(s)
        assert np.isnan(s.amps[skipped]).all()
        assert not np.isnan(s.amps[~skipped]).any()


@pytest.mark.parametrize("variant", VARIANTS)
def test_norm_after_many_gates(rng, variant):
    n = 9
    s = state_from_array(random_amps(n, rng))
    for k in range(100):
        t = int(rng.integers(n))
        c = int((t + 1 + rng.integers(n - 1)) % n)
        [lambda: K.apply_hadamard(s, t, variant),
         lambda: K.apply_pauli_y(s, t, variant),
         lambda: K.apply_controlled_not(s, c, t, variant),
         lambda: K.apply_controlled_phase(s, c, t, 0.1 * k, variant)][k % 4]()
        if k == 0:
            assert total_probability(s) == pytest.approx(1, abs=1e-12)
    assert total_probability(s) == pytest.approx(1, abs=1e-9)


def test_variant_parse():
    assert K.KernelVariant.parse("scalar") is K.KernelVariant.SCALAR_BASELINE
    assert K.KernelVariant.parse("opt") is K.KernelVariant.OPTIMIZED
    with pytest.raises(ValueError):
        K.KernelVariant.parse("fast")
