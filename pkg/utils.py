# utils.py
import json
import os

import pandas as pd

from qsim import Circuit, Gate

# --- 全局配置 ---
RESULTS_DIR = "results"


def ensure_dir(path):
    os.makedirs(path or ".", exist_ok=True)
    return path


def circuit_to_dict(circuit):
    gates = []
    for gate in circuit:
        entry = {"kind": gate.kind.value, "qubits": list(gate.qubits)}
        if gate.angle is not None:
            entry["angle"] = gate.angle
        gates.append(entry)
    return {"n": circuit.n, "gates": gates}


def circuit_from_dict(data):
    """解析电路 JSON 对象 {n, gates: [{kind, qubits, angle?}]}"""
    try:
        gates = [Gate(g["kind"], tuple(g["qubits"]), g.get("angle")) for g in data["gates"]]
        return Circuit(int(data["n"]), gates)
    except (KeyError, TypeError) as e:
        raise ValueError(f"电路格式错误: 缺少字段 {str(e)}") from None


def save_circuit(circuit, filepath):
    ensure_dir(os.path.dirname(filepath))
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(circuit_to_dict(circuit), f, indent=2, ensure_ascii=False)
        f.write("\n")
    return filepath


def load_circuit(filepath):
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"{filepath}: 电路文件解析失败: {e.msg}") from None
    try:
        return circuit_from_dict(data)
    except ValueError as e:
        raise ValueError(f"{filepath}: {str(e)}") from None


def write_csv(frame, filepath, digest):
    """写入 CSV：首行为 '# config_hash: ...'，其后是列名行"""
    ensure_dir(os.path.dirname(filepath))
    with open(filepath, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash: {digest}\n")
        frame.to_csv(f, index=False, float_format="%.12g", lineterminator="\n")
    return filepath


def read_csv(filepath):
    """bitstring 列保留前导零"""
    return pd.read_csv(filepath, comment="#", dtype={"bitstring": str})


def read_config_hash(filepath):
    with open(filepath, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    prefix = "# config_hash:"
    return first[len(prefix):].strip() if first.startswith(prefix) else None


def save_json(data, filepath):
    ensure_dir(os.path.dirname(filepath))
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write("\n")
    return filepath


def list_results(results_dir=RESULTS_DIR, suffix=".csv"):
    """按名称列出结果目录中的文件"""
    if not os.path.isdir(results_dir):
        return []
    return sorted(f for f in os.listdir(results_dir) if f.endswith(suffix))
