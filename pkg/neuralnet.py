"""
对偶策略/价值网络：5 个卷积层 + 2 个全连接层的共享主干，策略头输出 log-softmax，价值头输出 tanh。

电路编码（长度 N 的整数向量，0 为空位）先补零到序列长度 L = max(N, G)，
再按 G+1 个符号做 one-hot 作为卷积输入通道。N != G 时检查点头部记录偏差。
"""
from __future__ import annotations

import json
import struct

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from config_management import TrainConfig

CHECKPOINT_MAGIC = b"QCDNET01"
PACK_MAGIC = b"QCDPACK1"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """检查点版本或形状不匹配"""


class DualNet(nn.Module):
    def __init__(self, num_actions: int, max_len: int, channels: int = 256, conv_layers: int = 5,
                 dropout: float = 0.3, leaky_slope: float = 0.01):
        super().__init__()
        self.num_actions = num_actions
        self.max_len = max_len
        self.seq_len = max(max_len, num_actions)
        self.channels = channels
        self.conv_layers = conv_layers
        self.dropout = dropout
        self.leaky_slope = leaky_slope

        layers = []
        in_channels = num_actions + 1
        for _ in range(conv_layers):
            layers += [
                nn.Conv1d(in_channels, channels, kernel_size=3, stride=1, padding=1),
                nn.BatchNorm1d(channels, eps=1e-5, momentum=0.1),
                nn.LeakyReLU(leaky_slope),
            ]
            in_channels = channels
        self.conv = nn.Sequential(*layers)
        self.trunk = nn.Sequential(
            nn.Linear(channels * self.seq_len, 4 * num_actions),
            nn.BatchNorm1d(4 * num_actions, eps=1e-5, momentum=0.1),
            nn.LeakyReLU(leaky_slope),
            nn.Dropout(dropout),
            nn.Linear(4 * num_actions, 2 * num_actions),
            nn.BatchNorm1d(2 * num_actions, eps=1e-5, momentum=0.1),
            nn.LeakyReLU(leaky_slope),
            nn.Dropout(dropout),
        )
        self.policy_head = nn.Linear(2 * num_actions, num_actions)
        self.value_head = nn.Linear(2 * num_actions, 1)

    def forward(self, states: torch.Tensor):
        """states: (batch, N) 整数编码；返回 (log 策略 (batch, G), 价值 (batch,))"""
        if states.dim() != 2 or states.shape[1] != self.max_len:
            raise ValueError(f"输入形状错误: {tuple(states.shape)}，期望 (batch, {self.max_len})")
        states = F.pad(states.long(), (0, self.seq_len - self.max_len))
        x = F.one_hot(states, self.num_actions + 1).to(self.policy_head.weight.dtype)
        x = self.conv(x.transpose(1, 2))
        x = self.trunk(x.flatten(1))
        log_policy = F.log_softmax(self.policy_head(x), dim=-1)
        value = torch.tanh(self.value_head(x)).squeeze(-1)
        return log_policy, value

    def header(self) -> dict:
        return {
            "num_actions": self.num_actions,
            "max_len": self.max_len,
            "seq_len": self.seq_len,
            "channels": self.channels,
            "conv_layers": self.conv_layers,
            "dropout": self.dropout,
            "leaky_slope": self.leaky_slope,
            "deviation": None if self.max_len == self.num_actions
            else f"序列长度由 N={self.max_len} 补齐到 L={self.seq_len}",
        }


def build_net(num_actions: int, max_len: int, cfg: TrainConfig, seed: int = 0) -> DualNet:
    """按种子初始化（PyTorch 默认的 fan-in 均匀初始化）"""
    torch.manual_seed(seed)
    return DualNet(num_actions, max_len, channels=cfg.channels, conv_layers=cfg.conv_layers,
                   dropout=cfg.dropout, leaky_slope=cfg.leaky_slope)


def encode_state(actions, max_len: int) -> np.ndarray:
    """第 i 位为第 i 个门的动作索引 + 1，空位补 0"""
    actions = list(actions)
    if len(actions) > max_len:
        raise ValueError(f"电路过长: {len(actions)} > {max_len}")
    encoded = np.zeros(max_len, dtype=np.int64)
    encoded[:len(actions)] = np.asarray(actions, dtype=np.int64) + 1
    return encoded


def predict(net: DualNet, state) -> tuple[np.ndarray, float]:
    """推理模式（关闭 dropout，批归一化使用滑动统计量）"""
    net.eval()
    with torch.no_grad():
        batch = torch.as_tensor(np.asarray(state, dtype=np.int64)).unsqueeze(0)
        log_policy, value = net(batch)
    return log_policy[0].double().numpy(), float(value[0])


def loss(log_policy: torch.Tensor, value: torch.Tensor, pi: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """L = (z - v)² - π·log q，按批平均"""
    value_loss = (z - value) ** 2
    policy_loss = -(pi * log_policy).sum(dim=-1)
    return (value_loss + policy_loss).mean()


def make_optimizer(net: DualNet, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(net.parameters(), lr=cfg.learning_rate, betas=cfg.betas)


def train_step(net: DualNet, optimizer: torch.optim.Optimizer, batch) -> float:
    """一次 Adam 更新；batch 为 TrainingExample 列表

    单样本批无法估计批统计量，此时批归一化层使用（并保持）滑动统计量，训练与推理的前向一致。
    """
    if not batch:
        raise ValueError("训练批为空")
    net.train()
    if len(batch) == 1:
        for module in net.modules():
            if isinstance(module, nn.BatchNorm1d):
                module.eval()
    states = torch.as_tensor(np.stack([ex.state for ex in batch]), dtype=torch.long)
    dtype = net.policy_head.weight.dtype
    pis = torch.as_tensor(np.stack([ex.pi for ex in batch]), dtype=dtype)
    zs = torch.as_tensor([float(ex.z) for ex in batch], dtype=dtype)

    optimizer.zero_grad()
    log_policy, value = net(states)
    batch_loss = loss(log_policy, value, pis, zs)
    batch_loss.backward()
    optimizer.step()
    return float(batch_loss.detach())


# --- 二进制格式：魔数 + 头部长度 + JSON 头部 + 小端 float32 数据块 ---
def write_pack(path, magic: bytes, header: dict, arrays: list[np.ndarray]):
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for array in arrays:
            f.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return path


def read_pack(path, magic: bytes) -> tuple[dict, bytes]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:len(magic)] != magic:
        raise CheckpointError(f"{path}: 文件格式不符（魔数错误）")
    offset = len(magic)
    (size,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset:offset + size].decode("utf-8"))
    return header, data[offset + size:]


def split_blob(blob: bytes, shapes, path) -> list[np.ndarray]:
    expected = sum(int(np.prod(shape)) for shape in shapes) * 4
    if len(blob) != expected:
        raise CheckpointError(f"{path}: 数据块长度 {len(blob)} 与头部声明的 {expected} 不符")
    flat = np.frombuffer(blob, dtype="<f4")
    arrays, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[offset:offset + size].reshape(shape))
        offset += size
    return arrays


def checkpoint_save(net: DualNet, path):
    state = net.state_dict()
    header = dict(net.header())
    header["version"] = CHECKPOINT_VERSION
    header["tensors"] = [{"name": name, "shape": list(t.shape)} for name, t in state.items()]
    arrays = [t.detach().cpu().float().numpy() for t in state.values()]
    return write_pack(path, CHECKPOINT_MAGIC, header, arrays)


def checkpoint_load(path, num_actions: int | None = None, max_len: int | None = None) -> DualNet:
    """读取检查点；给定 num_actions / max_len 时先校验，出错时不做部分加载"""
    header, blob = read_pack(path, CHECKPOINT_MAGIC)
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: 不支持的检查点版本 {header.get('version')}")
    if num_actions is not None and header["num_actions"] != num_actions:
        raise CheckpointError(f"{path}: 动作数不匹配 G={header['num_actions']}，期望 {num_actions}")
    if max_len is not None and header["max_len"] != max_len:
        raise CheckpointError(f"{path}: 最大长度不匹配 N={header['max_len']}，期望 {max_len}")

    net = DualNet(header["num_actions"], header["max_len"], channels=header["channels"],
                  conv_layers=header["conv_layers"], dropout=header["dropout"],
                  leaky_slope=header["leaky_slope"])
    reference = net.state_dict()
    names = [t["name"] for t in header["tensors"]]
    shapes = [tuple(t["shape"]) for t in header["tensors"]]
    if names != list(reference):
        raise CheckpointError(f"{path}: 张量列表与网络结构不符")
    for name, shape in zip(names, shapes):
        if tuple(reference[name].shape) != shape:
            raise CheckpointError(f"{path}: 张量 {name} 形状 {shape} 与网络 {tuple(reference[name].shape)} 不符")

    arrays = split_blob(blob, shapes, path)
    state = {name: torch.from_numpy(array.astype(np.float32)).to(reference[name].dtype)
             for name, array in zip(names, arrays)}
    net.load_state_dict(state)
    return net
