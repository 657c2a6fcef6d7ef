# config_management.py
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

CONFIG_DIR = "run_configs"


class ConfigError(ValueError):
    """配置文件错误（包含文件路径与出错的键）"""


# --- 全局容差 ---
@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-9
    probability: float = 1e-9
    policy: float = 1e-6
    unitary_max_qubits: int = 10
    oracle_max_qubits: int = 20


TOLERANCES = Tolerances()


@dataclass
class MctsConfig:
    """树搜索与自博弈参数"""
    c_puct: float = 1.5
    sims_per_move: int = 200
    b_th: float = 0.9
    max_len: int | None = None  # None 表示 4n
    test_inputs: int = 5
    seed: int = 0
    episodes: int = 2000
    episodes_after_success: int = 20
    train_every: int = 10
    replay_size: int = 10_000
    reward_shots: int | None = None  # None 表示精确模拟
    sample_actions: bool = True

    def __post_init__(self):
        if not 0.0 < self.b_th < 1.0:
            raise ValueError(f"b_th 必须在 (0, 1) 内: {self.b_th}")
        if self.max_len is not None and self.max_len < 1:
            raise ValueError(f"max_len 必须 ≥ 1: {self.max_len}")
        if self.sims_per_move < 1:
            raise ValueError(f"sims_per_move 必须 ≥ 1: {self.sims_per_move}")
        if self.test_inputs < 1:
            raise ValueError(f"test_inputs 必须 ≥ 1: {self.test_inputs}")

    def resolved_max_len(self, n: int) -> int:
        return self.max_len if self.max_len is not None else 4 * n


@dataclass
class TrainConfig:
    """对偶网络的结构与优化参数"""
    learning_rate: float = 0.001
    betas: tuple[float, float] = (0.9, 0.999)
    batch_size: int = 64
    dropout: float = 0.3
    leaky_slope: float = 0.01
    channels: int = 256
    conv_layers: int = 5
    train_steps: int = 20
    enabled: bool = True

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate 不能为负: {self.learning_rate}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size 至少为 2（批归一化需要）: {self.batch_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout 必须在 [0, 1) 内: {self.dropout}")


@dataclass
class DistillSettings:
    """一次蒸馏运行的完整配置"""
    target: str = "iqft-1"
    seed: int = 0
    mcts: MctsConfig = field(default_factory=MctsConfig)
    training: TrainConfig = field(default_factory=TrainConfig)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_MCTS_KEYS = {f.name for f in dataclasses.fields(MctsConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


def settings_from_mapping(raw: dict, source: str = "<dict>") -> DistillSettings:
    """把扁平键值映射转换为 DistillSettings，未知键报错"""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: 配置必须是 JSON 对象")

    mcts_kwargs, train_kwargs = {}, {}
    target = raw.get("target", "iqft-1")
    seed = raw.get("seed", 0)
    for key, value in raw.items():
        if key in ("target", "seed"):
            continue
        if key in _MCTS_KEYS:
            mcts_kwargs[key] = value
        elif key in _TRAIN_KEYS:
            train_kwargs[key] = value
        else:
            raise ConfigError(f"{source}: 未知配置键 '{key}'")

    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"{source}: 键 'seed' 必须是整数")
    # 运行种子同时驱动搜索
    mcts_kwargs.setdefault("seed", seed)
    try:
        mcts = MctsConfig(**mcts_kwargs)
        training = TrainConfig(**train_kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: {str(e)}") from e
    return DistillSettings(target=str(target), seed=seed, mcts=mcts, training=training)


def load_distill_config(filepath):
    """加载蒸馏配置文件，返回 (配置, 错误信息)"""
    if not os.path.exists(filepath):
        return None, f"配置文件不存在: {filepath}"
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        return None, f"{filepath}: 第 {e.lineno} 行 JSON 解析失败: {e.msg}"

    try:
        return settings_from_mapping(raw, source=filepath), None
    except ConfigError as e:
        return None, str(e)


def save_distill_config(settings: DistillSettings, filepath):
    """保存为扁平 JSON 配置"""
    flat = {"target": settings.target, "seed": settings.seed}
    flat.update(dataclasses.asdict(settings.mcts))
    flat.update(dataclasses.asdict(settings.training))
    flat["betas"] = list(flat["betas"])
    os.makedirs(os.path.dirname(filepath) or ".", exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(flat, f, indent=2, ensure_ascii=False)
    return filepath


def config_hash(mapping: dict) -> str:
    """计算配置哈希值（规范化 JSON 的 md5）"""
    normalized = json.dumps(mapping, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.md5(normalized.encode("utf-8")).hexdigest()
