"""
变长量子电路搜索：动作空间、奖励、网络引导的 MCTS、自博弈与训练数据生成。

状态是动作索引的元组（空元组为空电路），每一步在电路末尾追加一个门。
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch

from config_management import TOLERANCES, MctsConfig, TrainConfig
from metrics import DEFAULT_INPUTS, EvalReport, b_ave, bhattacharyya, input_states
from neuralnet import (PACK_MAGIC, DualNet, build_net, encode_state, make_optimizer, predict,
                       read_pack, split_blob, train_step, write_pack)
from qsim import Circuit, Gate, action_gates, apply_gate, measure_dist, run_circuit, sample

logger = logging.getLogger(__name__)

# 评估函数：状态 → (G 维 log 策略, 价值)
Evaluator = Callable[[tuple], tuple[np.ndarray, float]]


class NoCircuitFound(RuntimeError):
    """在给定的回合预算内没有找到满足阈值的电路；携带进度以便继续"""

    def __init__(self, message, progress=None, net=None):
        super().__init__(message)
        self.progress = progress
        self.net = net


@dataclass(frozen=True)
class ActionSpace:
    n: int
    gates: tuple[Gate, ...]

    @property
    def size(self) -> int:
        return len(self.gates)

    def circuit(self, actions) -> Circuit:
        return Circuit(self.n, [self.gates[a] for a in actions])

    def actions_of(self, circuit: Circuit) -> tuple[int, ...]:
        index = {gate: i for i, gate in enumerate(self.gates)}
        try:
            return tuple(index[g] for g in circuit)
        except KeyError as e:
            raise ValueError(f"门不在动作空间内: {e.args[0]}") from None


def action_space(n: int) -> ActionSpace:
    """G = 2n + 4n + n(n-1)"""
    return ActionSpace(n, tuple(action_gates(n)))


@dataclass
class TrainingExample:
    state: np.ndarray
    pi: np.ndarray
    z: float


def _classify(values, b_th: float, at_max_len: bool) -> int:
    if all(b > b_th for b in values):
        return 1
    return -1 if at_max_len else 0


def reward(candidate: Circuit, target: Circuit, test_states, b_th: float, at_max_len: bool) -> int:
    """所有测试态的 B 都超过阈值返回 1；到达最大长度仍未成功返回 -1；否则 0"""
    states = np.asarray(test_states)
    if states.ndim == 1:
        states = states[:, None]
    if states.shape[1] == 0:
        raise ValueError("测试态为空")
    if candidate.n != target.n:
        raise ValueError(f"维度不一致: 候选 {candidate.n} 比特，目标 {target.n} 比特")
    outputs = measure_dist(run_circuit(candidate, states))
    answers = measure_dist(run_circuit(target, states))
    values = [bhattacharyya(outputs[:, i], answers[:, i]) for i in range(states.shape[1])]
    return _classify(values, b_th, at_max_len)


class DistillTask:
    """固定测试态面板下的蒸馏目标，奖励是电路的确定函数"""

    def __init__(self, target: Circuit, config: MctsConfig):
        self.target = target
        self.space = action_space(target.n)
        self.max_len = config.resolved_max_len(target.n)
        self.b_th = config.b_th
        self.reward_shots = config.reward_shots
        self.seed = config.seed
        self.seeds, self.states = input_states(target.n, config.test_inputs, config.seed)
        self.answers = measure_dist(run_circuit(target, self.states))
        self._outputs = {(): self.states}
        self._rewards = {}

    def outputs(self, actions: tuple) -> np.ndarray:
        if actions not in self._outputs:
            parent = self.outputs(actions[:-1])
            self._outputs[actions] = apply_gate(parent, self.space.gates[actions[-1]])
        return self._outputs[actions]

    def cached_states(self) -> int:
        return len(self._outputs)

    def clear_cache(self):
        """缓存只在一个回合（一棵搜索树）内有效"""
        self._outputs = {(): self.states}
        self._rewards = {}

    def b_values(self, actions: tuple) -> list[float]:
        dists = measure_dist(self.outputs(actions))
        values = []
        for i in range(dists.shape[1]):
            p = dists[:, i]
            if self.reward_shots is not None:
                p = sample(p, self.reward_shots, [self.seed, i, len(actions), *actions])
            values.append(bhattacharyya(p, self.answers[:, i]))
        return values

    def reward(self, actions: tuple) -> int:
        if actions not in self._rewards:
            at_max_len = len(actions) >= self.max_len
            self._rewards[actions] = _classify(self.b_values(actions), self.b_th, at_max_len)
        return self._rewards[actions]


class SearchTree:
    """每个已展开状态保存其出边的 N、Q、P"""

    def __init__(self):
        self.N: dict[tuple, np.ndarray] = {}
        self.Q: dict[tuple, np.ndarray] = {}
        self.P: dict[tuple, np.ndarray] = {}

    def expanded(self, state) -> bool:
        return state in self.P

    def expand(self, state, evaluator: Evaluator) -> float:
        log_policy, value = evaluator(state)
        prior = np.exp(np.asarray(log_policy, dtype=float))
        self.P[state] = prior / prior.sum()
        self.N[state] = np.zeros(prior.size)
        self.Q[state] = np.zeros(prior.size)
        return float(value)

    def select(self, state, c_puct: float) -> int:
        n, q, p = self.N[state], self.Q[state], self.P[state]
        ucb = q + c_puct * p * np.sqrt(n.sum()) / (1 + n)
        # 并列时 argmax 取最小索引
        return int(np.argmax(ucb))

    def backup(self, path, value: float):
        for state, action in path:
            n, q = self.N[state], self.Q[state]
            q[action] = (n[action] * q[action] + value) / (n[action] + 1)
            n[action] += 1


def mcts_policy(root: tuple, evaluator: Evaluator, task: DistillTask, config: MctsConfig,
                tree: SearchTree | None = None) -> np.ndarray:
    """运行 sims_per_move 次模拟，返回 π(a) = N(root, a) / Σ_b N(root, b)"""
    root = tuple(root)
    if len(root) >= task.max_len:
        raise ValueError(f"根状态长度 {len(root)} 已达到最大长度 {task.max_len}")
    tree = tree if tree is not None else SearchTree()
    if not tree.expanded(root):
        tree.expand(root, evaluator)

    for _ in range(config.sims_per_move):
        state, path = root, []
        while True:
            action = tree.select(state, config.c_puct)
            path.append((state, action))
            state = state + (action,)
            outcome = task.reward(state)
            if outcome != 0:
                value = float(outcome)
                break
            if not tree.expanded(state):
                value = tree.expand(state, evaluator)
                break
        tree.backup(path, value)

    visits = tree.N[root]
    return visits / visits.sum()


def net_evaluator(net: DualNet, max_len: int) -> Evaluator:
    """网络快照的推理函数（带缓存，仅在权重不变期间使用）"""
    cache = {}

    def evaluate(state):
        if state not in cache:
            cache[state] = predict(net, encode_state(state, max_len))
        return cache[state]

    return evaluate


def uniform_evaluator(num_actions: int, value: float = 0.0) -> Evaluator:
    log_uniform = np.full(num_actions, -np.log(num_actions))
    return lambda state: (log_uniform, value)


def self_play_episode(task: DistillTask, evaluator: Evaluator, config: MctsConfig,
                      rng: np.random.Generator, greedy: bool = False):
    """从空电路开始交替进行 MCTS 与动作选择，返回 (训练样本, 成功的动作序列或 None, z)"""
    task.clear_cache()
    tree = SearchTree()
    state, visited = (), []
    while True:
        pi = mcts_policy(state, evaluator, task, config, tree)
        visited.append((encode_state(state, task.max_len), pi))
        if greedy or not config.sample_actions:
            action = int(np.argmax(pi))
        else:
            action = int(rng.choice(pi.size, p=pi))
        state = state + (action,)
        z = task.reward(state)
        if z != 0:
            break
    examples = [TrainingExample(s, pi, float(z)) for s, pi in visited]
    return examples, (state if z == 1 else None), z


class ReplayBuffer:
    """有界 FIFO 训练样本池"""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def extend(self, examples):
        self.items.extend(examples)

    def sample(self, size: int, rng: np.random.Generator) -> list:
        picks = rng.choice(len(self.items), size=min(size, len(self.items)), replace=False)
        return [self.items[i] for i in picks]

    def save(self, path, num_actions: int, max_len: int):
        header = {"count": len(self.items), "capacity": self.capacity,
                  "num_actions": num_actions, "max_len": max_len}
        states = np.array([ex.state for ex in self.items], dtype=np.float32).reshape(-1, max_len)
        pis = np.array([ex.pi for ex in self.items], dtype=np.float32).reshape(-1, num_actions)
        zs = np.array([ex.z for ex in self.items], dtype=np.float32)
        return write_pack(path, PACK_MAGIC, header, [states, pis, zs])

    @classmethod
    def load(cls, path) -> "ReplayBuffer":
        header, blob = read_pack(path, PACK_MAGIC)
        count, g, n_len = header["count"], header["num_actions"], header["max_len"]
        states, pis, zs = split_blob(blob, [(count, n_len), (count, g), (count,)], path)
        buffer = cls(header["capacity"])
        buffer.extend(TrainingExample(s.astype(np.int64), p.astype(np.float64), float(z))
                      for s, p, z in zip(states, pis, zs))
        return buffer


@dataclass
class DistillProgress:
    """可恢复的蒸馏进度"""
    next_episode: int = 0
    best: tuple | None = None
    success_episode: int | None = None
    losses: list = field(default_factory=list)
    buffer: ReplayBuffer | None = None


@dataclass
class DistillResult:
    circuit: Circuit
    report: EvalReport
    progress: DistillProgress
    net: DualNet | None = None


def _train_round(net, optimizer, buffer: ReplayBuffer, training: TrainConfig, rng) -> list[float]:
    if len(buffer) < 2:
        return []
    return [train_step(net, optimizer, buffer.sample(training.batch_size, rng))
            for _ in range(training.train_steps)]


def _stop(progress: DistillProgress, episode: int, config: MctsConfig) -> bool:
    if progress.best is None:
        return False
    return len(progress.best) == 1 or episode - progress.success_episode >= config.episodes_after_success


def distill(target: Circuit, config: MctsConfig, training: TrainConfig,
            evaluator: Evaluator | None = None, net: DualNet | None = None,
            progress: DistillProgress | None = None) -> DistillResult:
    """交替进行自博弈与网络训练，记录达到奖励 1 的最短电路"""
    task = DistillTask(target, config)
    space = task.space
    progress = progress or DistillProgress()
    if progress.buffer is None:
        progress.buffer = ReplayBuffer(config.replay_size)

    optimizer = None
    if evaluator is None:
        net = net or build_net(space.size, task.max_len, training, seed=config.seed)
        if training.enabled:
            optimizer = make_optimizer(net, training)

    def current_evaluator():
        return evaluator if evaluator is not None else net_evaluator(net, task.max_len)

    episode = progress.next_episode
    while episode < config.episodes and not _stop(progress, episode - 1, config):
        rng = np.random.default_rng([config.seed, episode])
        examples, actions, z = self_play_episode(task, current_evaluator(), config, rng)
        progress.buffer.extend(examples)
        logger.info("回合 %d: 长度 %d, z=%d", episode, len(examples), z)
        if z == 1 and (progress.best is None or len(actions) < len(progress.best)):
            progress.best, progress.success_episode = actions, episode
            logger.info("找到新的最短电路 (长度 %d): %s", len(actions),
                        " ".join(str(g) for g in space.circuit(actions)))
        if optimizer is not None and (episode + 1) % config.train_every == 0:
            torch.manual_seed(config.seed * 1_000_003 + episode)
            round_losses = _train_round(net, optimizer, progress.buffer, training, rng)
            if round_losses:
                progress.losses.extend(round_losses)
                logger.info("训练: 平均损失 %.4f", float(np.mean(round_losses)))
        episode += 1
    progress.next_episode = episode

    # 训练后以 argmax 提取一次
    if net is not None and episode > 0:
        rng = np.random.default_rng([config.seed, episode, 1])
        _, actions, z = self_play_episode(task, current_evaluator(), config, rng, greedy=True)
        if z == 1 and (progress.best is None or len(actions) < len(progress.best)):
            progress.best, progress.success_episode = actions, episode

    if progress.best is None:
        raise NoCircuitFound(f"{episode} 个回合内没有找到 B > {config.b_th} 的电路", progress, net)
    circuit = space.circuit(progress.best)
    report = b_ave(circuit, target, DEFAULT_INPUTS, seed=config.seed)
    return DistillResult(circuit=circuit, report=report, progress=progress, net=net)


def policy_is_valid(pi: np.ndarray) -> bool:
    return bool(np.all(pi >= 0) and abs(pi.sum() - 1.0) <= TOLERANCES.policy)
