"""
态矢量模拟器与噪声模型的测试。
"""
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from circuits import random_input_circuit
from qsim import (CP, CX, H, NOISELESS, P, SWAP, X, Circuit, Gate, NoiseModel, action_gates,
                  apply_gate, basis_state, marginal, measure_dist, run_circuit, run_noisy, sample,
                  unitary_of, zero_state)

SQRT2_INV = 1 / math.sqrt(2)


# =============================================================================
# 已知电路
# =============================================================================

def test_plus_state():
    state = apply_gate(zero_state(1), H(0))
    assert np.allclose(state, [SQRT2_INV, SQRT2_INV])


def test_bell_state():
    state = run_circuit(Circuit(2, [H(0), CX(0, 1)]), zero_state(2))
    assert np.allclose(state, [SQRT2_INV, 0, 0, SQRT2_INV])


def test_qubit_zero_is_least_significant():
    assert np.allclose(apply_gate(zero_state(3), X(0)), basis_state(3, 1))
    assert np.allclose(apply_gate(zero_state(3), X(2)), basis_state(3, 4))


def test_cnot_control_is_first_qubit():
    # |q1=1, q0=0⟩ = 索引 2；控制位 q1 翻转 q0 → 索引 3
    assert np.allclose(apply_gate(basis_state(2, 2), CX(1, 0)), basis_state(2, 3))
    assert np.allclose(apply_gate(basis_state(2, 2), CX(0, 1)), basis_state(2, 2))


def test_swap_exchanges_qubits():
    assert np.allclose(apply_gate(basis_state(3, 1), SWAP(0, 2)), basis_state(3, 4))


def test_phase_gates():
    state = apply_gate(basis_state(1, 1), P(0, math.pi / 2))
    assert np.allclose(state, [0, 1j])
    state = apply_gate(basis_state(2, 3), CP(0, 1, math.pi))
    assert np.allclose(state, -basis_state(2, 3))
    state = apply_gate(basis_state(2, 1), CP(0, 1, math.pi))
    assert np.allclose(state, basis_state(2, 1))


# =============================================================================
# 门与电路校验
# =============================================================================

def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("cnot", (0, 0))
    with pytest.raises(ValueError):
        Gate("phase", (0,))
    with pytest.raises(ValueError):
        Gate("hadamard", (0,), 0.5)
    with pytest.raises(ValueError):
        Circuit(2, [H(2)])
    with pytest.raises(ValueError):
        Circuit(0)


def test_action_gates_order():
    gates = action_gates(2)
    assert len(gates) == 2 * 2 + 4 * 2 + 2 * 1
    assert gates[0] == H(0)
    assert gates[1] == X(0)
    assert gates[6] == H(1)
    assert gates[-2:] == [CX(0, 1), CX(1, 0)]


def test_embed_circuit():
    embedded = Circuit(2, [CX(0, 1)]).on(5, offset=3)
    assert embedded.n == 5
    assert embedded.gates[0].qubits == (3, 4)


# =============================================================================
# 酉性与组合
# =============================================================================

@pytest.mark.parametrize("seed", range(5))
def test_norm_preserved(seed):
    circuit = random_input_circuit(3, 20, seed)
    state = run_circuit(circuit, zero_state(3))
    assert abs(np.linalg.norm(state) - 1) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_unitary_is_unitary(n):
    u = unitary_of(random_input_circuit(n, 5 * n, seed=n))
    assert np.allclose(u.conj().T @ u, np.eye(2 ** n), atol=1e-9)


def test_composition():
    a = random_input_circuit(3, 10, seed=1)
    b = random_input_circuit(3, 10, seed=2)
    assert np.allclose(unitary_of(a + b), unitary_of(b) @ unitary_of(a), atol=1e-9)


def test_batched_columns_match_single_runs():
    circuit = random_input_circuit(3, 12, seed=7)
    states = np.stack([basis_state(3, k) for k in range(3)], axis=1)
    batched = run_circuit(circuit, states)
    for k in range(3):
        assert np.allclose(batched[:, k], run_circuit(circuit, basis_state(3, k)))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        run_circuit(Circuit(2, [H(0)]), zero_state(3))


# =============================================================================
# 分布、边缘分布与抽样
# =============================================================================

def test_measure_dist_sums_to_one():
    dist = measure_dist(run_circuit(random_input_circuit(4, 16, seed=3), zero_state(4)))
    assert abs(dist.sum() - 1) < 1e-9
    assert np.all(dist >= 0)


def test_marginal_order():
    dist = measure_dist(basis_state(3, 2))  # q1 = 1
    assert np.allclose(marginal(dist, [1]), [0, 1])
    assert np.allclose(marginal(dist, [1, 2]), [0, 1, 0, 0])
    assert np.allclose(marginal(dist, [2, 1]), [0, 0, 1, 0])
    assert np.allclose(marginal(dist, [0, 1, 2]), dist)


def test_marginal_of_bell_state():
    dist = measure_dist(run_circuit(Circuit(2, [H(0), CX(0, 1)]), zero_state(2)))
    assert np.allclose(marginal(dist, [0]), [0.5, 0.5])


def test_sampling_determinism():
    dist = np.array([0.1, 0.2, 0.3, 0.4])
    a = sample(dist, 1000, seed=5)
    b = sample(dist, 1000, seed=5)
    assert np.array_equal(a, b)
    assert abs(a.sum() - 1) < 1e-12
    with pytest.raises(ValueError):
        sample(dist, 0, seed=5)


# =============================================================================
# 噪声模型
# =============================================================================

def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(p1=1.5)
    assert NOISELESS.is_ideal
    assert not NoiseModel().is_ideal


def test_noiseless_sampling_matches_exact_distribution():
    circuit = Circuit(3, [H(0), CX(0, 1), H(2)])
    exact = measure_dist(run_circuit(circuit, zero_state(3)))
    shots = 20000
    freqs = run_noisy(circuit, zero_state(3), NOISELESS, shots, seed=1)
    support = exact > 0
    assert np.all(freqs[~support] == 0)
    counts = np.rint(freqs[support] * shots)
    _, p_value = chisquare(counts, exact[support] * shots)
    assert p_value > 1e-3


def test_noisy_run_is_deterministic():
    circuit = random_input_circuit(3, 12, seed=4)
    a = run_noisy(circuit, zero_state(3), NoiseModel(), 500, seed=9)
    b = run_noisy(circuit, zero_state(3), NoiseModel(), 500, seed=9)
    assert np.array_equal(a, b)


def test_readout_half_gives_uniform():
    freqs = run_noisy(Circuit(2), zero_state(2), NoiseModel(0, 0, 0.5), 20000, seed=3)
    assert np.allclose(freqs, 0.25, atol=0.02)


def test_readout_one_flips_every_bit():
    freqs = run_noisy(Circuit(3), zero_state(3), NoiseModel(0, 0, 1.0), 100, seed=0)
    assert freqs[7] == 1.0


def test_certain_gate_error_leaves_support():
    # p1 = 1：每个单比特门后必有 Pauli；X 或 Y 翻转比特，Z 不翻转
    freqs = run_noisy(Circuit(1, [X(0)]), zero_state(1), NoiseModel(1.0, 0, 0), 30000, seed=2)
    assert abs(freqs[0] - 2 / 3) < 0.02
