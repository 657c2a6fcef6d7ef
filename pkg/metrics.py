"""
分布层面与酉矩阵层面的相似度，以及随机输入下的平均性能 B_ave。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from circuits import random_input_circuit
from qsim import NoiseModel, Circuit, measure_dist, run_circuit, run_noisy, zero_state

logger = logging.getLogger(__name__)

DEFAULT_INPUTS = 20
DEFAULT_SHOTS = 8192


def bhattacharyya(p, q) -> float:
    """B(p, q) = Σ √(p_i q_i)"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"分布维度不一致: {p.shape} != {q.shape}")
    return float(np.clip(np.sum(np.sqrt(p * q)), 0.0, 1.0))


def gate_fidelity(u, v) -> float:
    """归一化 Hilbert-Schmidt 重叠 |Tr(U†V)|² / d²，与全局相位无关"""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"矩阵维度不一致: {u.shape} vs {v.shape}")
    d = u.shape[0]
    return float(np.clip(abs(np.vdot(u, v)) ** 2 / d ** 2, 0.0, 1.0))


@dataclass
class EvalReport:
    values: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    shots: int | None = None  # None 表示精确模式
    fidelity: float | None = None

    @property
    def b_ave(self) -> float:
        if not self.values:
            raise ValueError("没有输入态，B_ave 无定义")
        return float(np.mean(self.values))

    @property
    def mode(self) -> str:
        return "exact" if self.shots is None else str(self.shots)

    def to_frame(self) -> pd.DataFrame:
        """每个输入一行 (seed, B)，最后一行为汇总"""
        rows = [{"seed": str(s), "B": b} for s, b in zip(self.seeds, self.values)]
        rows.append({"seed": "B_ave", "B": self.b_ave})
        if self.fidelity is not None:
            rows.append({"seed": "F", "B": self.fidelity})
        frame = pd.DataFrame(rows, columns=["seed", "B"])
        frame["shots"] = self.mode
        return frame


def input_states(n: int, num_inputs: int, seed: int) -> tuple[list[int], np.ndarray]:
    """随机输入态（每个 m=4n 个门），以列存放"""
    seeds = [seed + i for i in range(num_inputs)]
    columns = [run_circuit(random_input_circuit(n, 4 * n, s), zero_state(n)) for s in seeds]
    if not columns:
        return seeds, np.zeros((2 ** n, 0), dtype=complex)
    return seeds, np.stack(columns, axis=1)


def b_ave(candidate: Circuit, reference: Circuit, num_inputs: int = DEFAULT_INPUTS,
          noise: NoiseModel | None = None, shots: int = DEFAULT_SHOTS, seed: int = 0) -> EvalReport:
    """noise 为 None 时精确比较；否则候选电路按噪声轨迹抽样 shots 次"""
    if candidate.n != reference.n:
        raise ValueError(f"维度不一致: 候选 {candidate.n} 比特，参考 {reference.n} 比特")
    seeds, states = input_states(candidate.n, num_inputs, seed)
    report = EvalReport(seeds=seeds, shots=None if noise is None else shots)
    if not seeds:
        return report

    answers = measure_dist(run_circuit(reference, states))
    outputs = _candidate_dists(candidate, states, seeds, noise, shots)
    report.values = [bhattacharyya(p, answers[:, i]) for i, p in enumerate(outputs)]
    logger.debug("B_ave=%.6f (%d 个输入, 模式 %s)", report.b_ave, len(seeds), report.mode)
    return report


def _candidate_dists(candidate, states, seeds, noise, shots) -> list[np.ndarray]:
    if noise is None:
        outputs = measure_dist(run_circuit(candidate, states))
        return [outputs[:, i] for i in range(len(seeds))]
    return [run_noisy(candidate, states[:, i], noise, shots, s) for i, s in enumerate(seeds)]


def output_distributions(candidate: Circuit, reference: Circuit, num_inputs: int = DEFAULT_INPUTS,
                         noise: NoiseModel | None = None, shots: int = DEFAULT_SHOTS,
                         seed: int = 0) -> pd.DataFrame:
    """逐输入的测量分布：probability 为候选电路（与 b_ave 同一组抽样），ideal 为参考变换"""
    if candidate.n != reference.n:
        raise ValueError(f"维度不一致: 候选 {candidate.n} 比特，参考 {reference.n} 比特")
    n = candidate.n
    seeds, states = input_states(n, num_inputs, seed)
    answers = measure_dist(run_circuit(reference, states))
    frames = []
    for i, p in enumerate(_candidate_dists(candidate, states, seeds, noise, shots)):
        frames.append(pd.DataFrame({
            "seed": seeds[i],
            "outcome": np.arange(2 ** n),
            "bitstring": [format(k, f"0{n}b") for k in range(2 ** n)],
            "probability": p,
            "ideal": answers[:, i],
        }))
    if not frames:
        return pd.DataFrame(columns=["seed", "outcome", "bitstring", "probability", "ideal"])
    return pd.concat(frames, ignore_index=True)


def bootstrap_se(values, resamples: int = 2000, seed: int = 0) -> float:
    """均值的自助法标准误"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("空样本无法估计标准误")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, values.size, size=(resamples, values.size))
    return float(np.std(values[picks].mean(axis=1), ddof=1))
