"""
Bhattacharyya 系数、门保真度与 B_ave 评估的测试。
"""
import logging

import numpy as np
import pytest
from scipy.stats import unitary_group

from circuits import conventional_iqft, generalized_iqft
from metrics import EvalReport, b_ave, bhattacharyya, bootstrap_se, gate_fidelity, input_states
from qsim import X, Circuit, NoiseModel, unitary_of

logger = logging.getLogger(__name__)


# =============================================================================
# Bhattacharyya 系数
# =============================================================================

def test_bhattacharyya_properties():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        b = bhattacharyya(p, q)
        assert 0.0 <= b <= 1.0
        assert abs(b - bhattacharyya(q, p)) < 1e-12
        assert abs(bhattacharyya(p, p) - 1) < 1e-12


def test_bhattacharyya_disjoint_support():
    assert bhattacharyya([1, 0], [0, 1]) == 0.0
    with pytest.raises(ValueError):
        bhattacharyya([1, 0], [0.5, 0.25, 0.25])


# =============================================================================
# 门保真度
# =============================================================================

def test_fidelity_ignores_global_phase():
    u = unitary_group.rvs(8, random_state=1)
    assert abs(gate_fidelity(u, np.exp(0.7j) * u) - 1) < 1e-9


def test_fidelity_of_orthogonal_operators():
    flip = unitary_of(Circuit(2, [X(1)]))
    assert gate_fidelity(np.eye(4), flip) < 1e-12


def test_fidelity_two_qubit_generalized():
    f = gate_fidelity(unitary_of(generalized_iqft(2)), unitary_of(conventional_iqft(2)))
    assert abs(f - 0.625) < 1e-9


def test_fidelity_shape_check():
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(2), np.eye(4))


# =============================================================================
# B_ave
# =============================================================================

def test_input_states_are_seeded():
    seeds, states = input_states(3, 4, seed=10)
    assert seeds == [10, 11, 12, 13]
    assert states.shape == (8, 4)
    _, again = input_states(3, 4, seed=10)
    assert np.array_equal(states, again)


def test_b_ave_of_identical_circuits():
    report = b_ave(conventional_iqft(3), conventional_iqft(3), num_inputs=20, seed=0)
    assert abs(report.b_ave - 1) < 1e-9
    assert report.mode == "exact"


@pytest.mark.parametrize("n", range(2, 7))
def test_generalized_b_ave_exceeds_fidelity(n):
    gen, conv = generalized_iqft(n), conventional_iqft(n)
    report = b_ave(gen, conv, num_inputs=20, seed=0)
    assert report.b_ave > gate_fidelity(unitary_of(gen), unitary_of(conv))


def test_b_ave_dimension_mismatch():
    with pytest.raises(ValueError):
        b_ave(conventional_iqft(2), conventional_iqft(3))


def test_empty_report():
    report = b_ave(conventional_iqft(2), conventional_iqft(2), num_inputs=0)
    with pytest.raises(ValueError):
        report.b_ave


def test_report_frame():
    report = EvalReport(values=[0.9, 1.0], seeds=[0, 1], fidelity=0.5)
    frame = report.to_frame()
    assert list(frame["seed"]) == ["0", "1", "B_ave", "F"]
    assert abs(frame["B"].iloc[2] - 0.95) < 1e-12
    assert set(frame["shots"]) == {"exact"}


def test_noiseless_shots_close_to_exact():
    gen, conv = generalized_iqft(3), conventional_iqft(3)
    exact = b_ave(gen, conv, num_inputs=5, seed=0)
    sampled = b_ave(gen, conv, num_inputs=5, noise=NoiseModel(0, 0, 0), shots=8192, seed=0)
    assert abs(sampled.b_ave - exact.b_ave) < 0.02
    assert sampled.mode == "8192"


# =============================================================================
# 自助法标准误
# =============================================================================

def test_bootstrap_se():
    assert bootstrap_se([0.5] * 10) == 0.0
    values = np.random.default_rng(0).random(50)
    assert bootstrap_se(values, seed=3) == bootstrap_se(values, seed=3)
    assert 0 < bootstrap_se(values) < 0.1
    with pytest.raises(ValueError):
        bootstrap_se([])


@pytest.mark.slow
def test_noise_lowers_performance():
    conv = conventional_iqft(4)
    ideal = b_ave(conv, conv, num_inputs=10, seed=0)
    noisy = b_ave(conv, conv, num_inputs=10, noise=NoiseModel(), shots=4096, seed=0)
    assert noisy.b_ave < ideal.b_ave


@pytest.mark.slow
def test_noisy_generalized_versus_conventional():
    """n=4 时广义电路的精确 B_ave 上限低于常规电路在噪声下的 B_ave，噪声下两者的次序不会反转"""
    gen, conv = generalized_iqft(4), conventional_iqft(4)
    noise = NoiseModel(0.001, 0.01, 0.03)
    b_gen = b_ave(gen, conv, num_inputs=20, noise=noise, shots=8192, seed=0)
    b_conv = b_ave(conv, conv, num_inputs=20, noise=noise, shots=8192, seed=0)
    exact_gen = b_ave(gen, conv, num_inputs=20, seed=0)
    diff = np.subtract(b_gen.values, b_conv.values)
    se = bootstrap_se(diff)
    logger.info("n=4: B_gen=%.4f B_conv=%.4f 差值=%.4f 标准误=%.4f 广义精确=%.4f",
                b_gen.b_ave, b_conv.b_ave, float(diff.mean()), se, exact_gen.b_ave)
    assert 0 < se < 0.05
    assert exact_gen.b_ave < b_conv.b_ave
    assert b_gen.b_ave < b_conv.b_ave
