"""
精确态矢量模拟器，以及用于模拟含噪处理器的随机噪声模型。

比特序约定：qubit 0 是测量比特串的最低位。所有构造函数与解析结果共用此约定。
噪声采用轨迹采样（每次门操作后按概率插入随机 Pauli，测量时按概率翻转读出），
不使用密度矩阵。
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from config_management import TOLERANCES

# 蒸馏器可用的相位角
DISTILLER_ANGLES = tuple(-2 * math.pi / 2 ** k for k in range(1, 5))


class GateKind(str, enum.Enum):
    HADAMARD = "hadamard"
    NOT = "not"
    PHASE = "phase"
    CNOT = "cnot"
    SWAP = "swap"
    CPHASE = "cphase"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.SWAP, GateKind.CPHASE) else 1

    @property
    def takes_angle(self) -> bool:
        return self in (GateKind.PHASE, GateKind.CPHASE)


@dataclass(frozen=True)
class Gate:
    """量子门；两比特门的第一个比特为控制位"""
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != self.kind.arity:
            raise ValueError(f"{self.kind.value} 需要 {self.kind.arity} 个比特，得到 {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"比特索引重复: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"比特索引不能为负: {self.qubits}")
        if self.kind.takes_angle:
            if self.angle is None:
                raise ValueError(f"{self.kind.value} 需要角度")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{self.kind.value} 不接受角度")

    def check(self, n: int):
        if max(self.qubits) >= n:
            raise ValueError(f"比特索引超出范围: {self.qubits} (n={n})")

    def __str__(self):
        args = ",".join(str(q) for q in self.qubits)
        if self.angle is None:
            return f"{self.kind.value}({args})"
        return f"{self.kind.value}({args}; {self.angle:.6g})"


def H(q):
    return Gate(GateKind.HADAMARD, (q,))


def X(q):
    return Gate(GateKind.NOT, (q,))


def P(q, angle):
    return Gate(GateKind.PHASE, (q,), angle)


def CX(control, target):
    return Gate(GateKind.CNOT, (control, target))


def SWAP(a, b):
    return Gate(GateKind.SWAP, (a, b))


def CP(control, target, angle):
    return Gate(GateKind.CPHASE, (control, target), angle)


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"比特数必须 ≥ 1: {self.n}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            gate.check(self.n)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError(f"电路维度不一致: {self.n} != {other.n}")
        return Circuit(self.n, self.gates + other.gates)

    def append(self, gate: Gate) -> "Circuit":
        return Circuit(self.n, self.gates + (gate,))

    def on(self, n: int, offset: int = 0) -> "Circuit":
        """把电路嵌入到更大的 n 比特寄存器中（比特索引整体平移 offset）"""
        shifted = tuple(
            Gate(g.kind, tuple(q + offset for q in g.qubits), g.angle) for g in self.gates
        )
        return Circuit(n, shifted)


@dataclass(frozen=True)
class NoiseModel:
    """每门去极化概率 p1/p2 与每比特读出翻转概率 r"""
    p1: float = 0.001
    p2: float = 0.01
    r: float = 0.03

    def __post_init__(self):
        for name in ("p1", "p2", "r"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"噪声概率 {name} 必须在 [0, 1] 内: {value}")

    @property
    def is_ideal(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.r == 0


NOISELESS = NoiseModel(0.0, 0.0, 0.0)


# --- 门矩阵 ---
_SQRT2_INV = 1 / math.sqrt(2)
_MATRIX_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
_MATRIX_X = np.array([[0, 1], [1, 0]], dtype=complex)
_MATRIX_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_MATRIX_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
PAULIS = (
    _MATRIX_X,
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind is GateKind.HADAMARD:
        return _MATRIX_H
    if gate.kind is GateKind.NOT:
        return _MATRIX_X
    if gate.kind is GateKind.PHASE:
        return np.diag([1.0, np.exp(1j * gate.angle)])
    if gate.kind is GateKind.CNOT:
        return _MATRIX_CX
    if gate.kind is GateKind.SWAP:
        return _MATRIX_SWAP
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * gate.angle)])


def action_gates(n: int) -> list[Gate]:
    """蒸馏器的门菜单，顺序固定：逐比特 H、NOT、四个相位，然后所有有序 CNOT 对"""
    if n < 1:
        raise ValueError(f"比特数必须 ≥ 1: {n}")
    gates = []
    for q in range(n):
        gates.append(H(q))
        gates.append(X(q))
        gates.extend(P(q, angle) for angle in DISTILLER_ANGLES)
    for control in range(n):
        for target in range(n):
            if control != target:
                gates.append(CX(control, target))
    return gates


# --- 态矢量 ---
def num_qubits(amps: np.ndarray) -> int:
    dim = amps.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"维度不是 2 的幂: {dim}")
    return n


def zero_state(n: int) -> np.ndarray:
    return basis_state(n, 0)


def basis_state(n: int, index: int) -> np.ndarray:
    if not 0 <= index < 2 ** n:
        raise ValueError(f"基矢索引超出范围: {index} (n={n})")
    amps = np.zeros(2 ** n, dtype=complex)
    amps[index] = 1.0
    return amps


def _apply_matrix(amps: np.ndarray, matrix: np.ndarray, qubits, n: int) -> np.ndarray:
    # 末尾可以带批量维度（列为不同态）
    batch = amps.shape[1:]
    k = len(qubits)
    psi = amps.reshape([2] * n + list(batch))
    axes = [n - 1 - q for q in qubits]
    op = matrix.reshape([2] * (2 * k))
    psi = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), axes))
    psi = np.moveaxis(psi, list(range(k)), axes)
    return psi.reshape(amps.shape)


def apply_gate(state: np.ndarray, gate: Gate) -> np.ndarray:
    """对态矢量（或以列存放的一批态矢量）作用一个门"""
    n = num_qubits(state)
    gate.check(n)
    return _apply_matrix(np.asarray(state, dtype=complex), gate_matrix(gate), gate.qubits, n)


def run_circuit(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    if num_qubits(state) != circuit.n:
        raise ValueError(f"维度不一致: 电路 {circuit.n} 比特，输入态 {num_qubits(state)} 比特")
    for gate in circuit:
        state = apply_gate(state, gate)
    return state


def unitary_of(circuit: Circuit) -> np.ndarray:
    """第 j 列等于电路作用在 |j⟩ 上的结果"""
    if circuit.n > TOLERANCES.unitary_max_qubits:
        raise ValueError(f"比特数过大，无法构造酉矩阵: {circuit.n} > {TOLERANCES.unitary_max_qubits}")
    return run_circuit(circuit, np.eye(2 ** circuit.n, dtype=complex))


def measure_dist(state: np.ndarray) -> np.ndarray:
    probs = np.abs(state) ** 2
    return probs / probs.sum(axis=0)


def marginal(dist: np.ndarray, qubits) -> np.ndarray:
    """对给定比特子集求边缘分布，结果中 qubits[0] 为最低位"""
    n = num_qubits(dist)
    qubits = list(qubits)
    if any(not 0 <= q < n for q in qubits):
        raise ValueError(f"比特索引超出范围: {qubits} (n={n})")
    tensor = dist.reshape([2] * n)
    drop = tuple(n - 1 - q for q in range(n) if q not in qubits)
    kept = np.sum(tensor, axis=drop) if drop else tensor
    # 剩余轴按比特号从高到低排列，换成 qubits 的逆序
    remaining = sorted(qubits, reverse=True)
    order = [remaining.index(q) for q in reversed(qubits)]
    return np.transpose(kept, order).reshape(-1)


def sample(dist: np.ndarray, shots: int, seed) -> np.ndarray:
    """按给定种子抽样 shots 次，返回经验频率"""
    if shots < 1:
        raise ValueError(f"shots 必须 ≥ 1: {shots}")
    rng = np.random.default_rng(seed)
    probs = np.clip(np.asarray(dist, dtype=float), 0.0, None)
    counts = rng.multinomial(shots, probs / probs.sum())
    return counts / shots


def _error_slots(circuit: Circuit, noise: NoiseModel):
    slots, probs = [], []
    for index, gate in enumerate(circuit):
        p = noise.p1 if gate.kind.arity == 1 else noise.p2
        for q in gate.qubits:
            slots.append((index, q))
            probs.append(p)
    return slots, np.array(probs, dtype=float)


def _trajectory(circuit: Circuit, state: np.ndarray, events: dict) -> np.ndarray:
    n = circuit.n
    for index, gate in enumerate(circuit):
        state = apply_gate(state, gate)
        for q, pauli in events.get(index, ()):
            state = _apply_matrix(state, PAULIS[pauli], (q,), n)
    return measure_dist(state)


def run_noisy(circuit: Circuit, state: np.ndarray, noise: NoiseModel, shots: int, seed) -> np.ndarray:
    """Monte-Carlo 轨迹模拟，返回 shots 次测量的经验分布"""
    if num_qubits(state) != circuit.n:
        raise ValueError(f"维度不一致: 电路 {circuit.n} 比特，输入态 {num_qubits(state)} 比特")
    if shots < 1:
        raise ValueError(f"shots 必须 ≥ 1: {shots}")
    n = circuit.n
    rng = np.random.default_rng(seed)
    slots, slot_probs = _error_slots(circuit, noise)

    hits = rng.random((shots, len(slots))) < slot_probs
    paulis = rng.integers(0, 3, size=(shots, len(slots)))

    # 相同错误模式的轨迹只模拟一次
    groups: dict[tuple, list[int]] = {}
    for shot in range(shots):
        cols = np.flatnonzero(hits[shot])
        key = tuple((int(c), int(paulis[shot, c])) for c in cols)
        groups.setdefault(key, []).append(shot)

    outcomes = np.empty(shots, dtype=np.int64)
    for key, members in groups.items():
        events: dict[int, list] = {}
        for col, pauli in key:
            index, q = slots[col]
            events.setdefault(index, []).append((q, pauli))
        probs = _trajectory(circuit, state, events)
        outcomes[members] = rng.choice(2 ** n, size=len(members), p=probs)

    if noise.r > 0:
        flips = rng.random((shots, n)) < noise.r
        masks = flips.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
        outcomes ^= masks

    return np.bincount(outcomes, minlength=2 ** n) / shots
