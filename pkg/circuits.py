"""
IQFT 的两种构造、QPE、57 的 Shor 分解演示、随机输入态制备。
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from config_management import TOLERANCES
from qsim import CP, CX, H, P, SWAP, X, Circuit, GateKind, action_gates

MAX_IQFT_QUBITS = 10

# Shor 演示参数：57 = 3 × 19，底数 37 的阶为 2
SHOR_MODULUS = 57
SHOR_BASE = 37
SHOR_COUNT_QUBITS = 4
SHOR_WORK_QUBITS = 6


def _check_size(n):
    if not 1 <= n <= MAX_IQFT_QUBITS:
        raise ValueError(f"比特数必须在 1..{MAX_IQFT_QUBITS} 内: {n}")


def conventional_iqft(n: int) -> Circuit:
    """教科书 IQFT：n 个 H、n(n-1)/2 个受控相位、⌊n/2⌋ 个 SWAP"""
    _check_size(n)
    gates = []
    for target in range(n - 1, -1, -1):
        for control in range(n - 1, target, -1):
            gates.append(CP(control, target, -2 * math.pi / 2 ** (control - target + 1)))
        gates.append(H(target))
    for i in range(n // 2):
        gates.append(SWAP(i, n - 1 - i))
    return Circuit(n, gates)


def generalized_iqft(n: int) -> Circuit:
    """广义 n 比特电路：H 层 → SWAP 反转 → CNOT 梯子，门数 2n-1+⌊n/2⌋"""
    _check_size(n)
    gates = [H(q) for q in range(n)]
    gates += [SWAP(i, n - 1 - i) for i in range(n // 2)]
    gates += [CX(i, i + 1) for i in range(n - 1)]
    return Circuit(n, gates)


def qpe_circuit(n: int, theta: float, iqft: Circuit) -> Circuit:
    """相位估计：H 层 + 相位反冲（本征态寄存器省略）+ 给定的 IQFT"""
    if iqft.n != n:
        raise ValueError(f"维度不一致: IQFT 为 {iqft.n} 比特，计数寄存器为 {n} 比特")
    gates = [H(q) for q in range(n)]
    gates += [P(q, 2 * math.pi * theta * 2 ** q) for q in range(n)]
    return Circuit(n, gates) + iqft


def qpe_generalized_oracle(n: int, theta: float) -> np.ndarray:
    """解析结果：振幅为 E_n^{0⊕j1} E_{n-1}^{j1⊕j2} ··· E_1^{j_{n-1}⊕j_n} 的概率分布"""
    if not 1 <= n <= TOLERANCES.oracle_max_qubits:
        raise ValueError(f"比特数必须在 1..{TOLERANCES.oracle_max_qubits} 内: {n}")
    index = np.arange(2 ** n)
    bits = (index[:, None] >> np.arange(n)) & 1  # bits[:, i] = j_{i+1}

    def factor(k, exponent):
        phase = np.exp(1j * math.pi * 2 ** k * theta)
        return np.where(exponent == 0, (1 + phase) / 2, (1 - phase) / 2)

    amps = factor(n, bits[:, 0])
    for i in range(1, n):
        amps = amps * factor(n - i, bits[:, i - 1] ^ bits[:, i])
    return np.abs(amps) ** 2


def shor57_circuit(iqft: Circuit) -> Circuit:
    """37 mod 57 的求阶电路：4 比特计数寄存器（qubit 0-3）+ 6 比特工作寄存器（qubit 4-9）"""
    if iqft.n != SHOR_COUNT_QUBITS:
        raise ValueError(f"维度不一致: IQFT 必须为 {SHOR_COUNT_QUBITS} 比特，得到 {iqft.n}")
    n = SHOR_COUNT_QUBITS + SHOR_WORK_QUBITS
    work = SHOR_COUNT_QUBITS
    gates = [H(q) for q in range(SHOR_COUNT_QUBITS)]
    # 工作寄存器置为 1
    gates.append(X(work))
    # 37^x mod 57 只取决于 x 的最低位：1 ↔ 37 相差第 2、5 位
    diff = 1 ^ SHOR_BASE
    gates += [CX(0, work + bit) for bit in range(SHOR_WORK_QUBITS) if diff >> bit & 1]
    return Circuit(n, gates) + iqft.on(n)


def shor_postprocess(outcome: int, count_qubits: int = SHOR_COUNT_QUBITS,
                     base: int = SHOR_BASE, modulus: int = SHOR_MODULUS):
    """由测量结果求阶并给出因子；结果为 0 或求阶失败时返回 None"""
    if outcome == 0:
        return None
    phase = Fraction(outcome, 2 ** count_qubits).limit_denominator(modulus)
    order = phase.denominator
    if pow(base, order, modulus) != 1 or order % 2:
        return None
    half = pow(base, order // 2, modulus)
    if half == modulus - 1:
        return None
    factors = sorted({math.gcd(half - 1, modulus), math.gcd(half + 1, modulus)} - {1, modulus})
    return {"outcome": outcome, "phase": phase, "order": order, "factors": factors} if factors else None


def random_input_circuit(n: int, m: int, seed) -> Circuit:
    """从动作空间均匀抽取 m 个门作为输入态制备电路"""
    if m < 0:
        raise ValueError(f"m 不能为负: {m}")
    menu = action_gates(n)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(menu), size=m)
    return Circuit(n, [menu[i] for i in picks])


def gate_count(circuit: Circuit, convention: str = "abstract") -> int:
    """abstract 按存储计数；decomposed 把受控相位展开为 5 个门、SWAP 展开为 3 个 CNOT"""
    if convention == "abstract":
        return len(circuit)
    if convention != "decomposed":
        raise ValueError(f"未知计数约定: {convention}")
    weights = {GateKind.CPHASE: 5, GateKind.SWAP: 3}
    return sum(weights.get(g.kind, 1) for g in circuit)


def build_target(name: str) -> Circuit:
    """解析目标名称：iqft-N、generalized-N、identity-N、hadamard-1"""
    family, _, size = name.partition("-")
    try:
        n = int(size)
    except ValueError:
        raise ValueError(f"无法解析目标: {name}") from None
    if family == "iqft":
        return conventional_iqft(n)
    if family == "generalized":
        return generalized_iqft(n)
    if family == "identity":
        _check_size(n)
        return Circuit(n)
    if family == "hadamard":
        _check_size(n)
        return Circuit(n, [H(q) for q in range(n)])
    raise ValueError(f"未知目标类型: {name}")
