"""
命令行入口：蒸馏、评估、IQFT 电路生成、QPE、Shor-57 演示与规模扫描。

退出码：0 成功，1 用法/配置错误，2 运行失败。所有结果以 CSV/JSON 写入磁盘，不含时间戳。
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction

import numpy as np
import pandas as pd

from circuits import (SHOR_COUNT_QUBITS, build_target, conventional_iqft, gate_count, generalized_iqft,
                      qpe_circuit, qpe_generalized_oracle, shor57_circuit, shor_postprocess)
from config_management import ConfigError, config_hash, load_distill_config
from distiller import DistillProgress, NoCircuitFound, ReplayBuffer, action_space, distill
from metrics import (DEFAULT_INPUTS, DEFAULT_SHOTS, b_ave, bhattacharyya, bootstrap_se, gate_fidelity,
                     output_distributions)
from neuralnet import CheckpointError, checkpoint_load, checkpoint_save
from qsim import NoiseModel, marginal, measure_dist, run_circuit, run_noisy, unitary_of, zero_state
from utils import RESULTS_DIR, ensure_dir, load_circuit, save_circuit, save_json, write_csv

logger = logging.getLogger("qdistill")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: 参数错误: {message}\n")


def _fraction(text):
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"无法解析数值: {text}") from None


def _noise_from(args):
    if args.p1 is None and args.p2 is None and args.r is None:
        return None
    defaults = NoiseModel()
    try:
        return NoiseModel(
            defaults.p1 if args.p1 is None else args.p1,
            defaults.p2 if args.p2 is None else args.p2,
            defaults.r if args.r is None else args.r,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _digest(args) -> str:
    skip = {"func", "verbose", "out", "distributions"}
    return config_hash({k: v for k, v in sorted(vars(args).items()) if k not in skip})


def _distribution_frame(n, probs, **columns) -> pd.DataFrame:
    frame = pd.DataFrame({
        "outcome": np.arange(2 ** n),
        "bitstring": [format(k, f"0{n}b") for k in range(2 ** n)],
        "probability": probs,
    })
    for name, values in columns.items():
        frame[name] = values
    return frame


# --- 蒸馏 ---
def _load_progress(out_dir, num_actions, max_len):
    state_file = os.path.join(out_dir, "progress.json")
    if not os.path.exists(state_file):
        return None, None
    with open(state_file, "r", encoding="utf-8") as f:
        state = json.load(f)
    net = checkpoint_load(os.path.join(out_dir, "net.ckpt"), num_actions, max_len)
    progress = DistillProgress(
        next_episode=state["next_episode"],
        best=tuple(state["best"]) if state["best"] is not None else None,
        success_episode=state["success_episode"],
        losses=list(state["losses"]),
        buffer=ReplayBuffer.load(os.path.join(out_dir, "replay.pack")),
    )
    return net, progress


def _save_progress(out_dir, net, progress: DistillProgress, num_actions, max_len):
    if net is not None:
        checkpoint_save(net, os.path.join(out_dir, "net.ckpt"))
    progress.buffer.save(os.path.join(out_dir, "replay.pack"), num_actions, max_len)
    save_json({
        "next_episode": progress.next_episode,
        "best": list(progress.best) if progress.best is not None else None,
        "success_episode": progress.success_episode,
        "losses": progress.losses,
    }, os.path.join(out_dir, "progress.json"))


def cmd_distill(args):
    settings, error = load_distill_config(args.config)
    if error:
        raise UsageError(error)
    if args.seed is not None:
        settings.seed = settings.mcts.seed = args.seed
    try:
        target = build_target(settings.target)
    except ValueError as e:
        raise UsageError(f"{args.config}: 键 'target': {str(e)}") from None

    out_dir = ensure_dir(args.out or os.path.join(RESULTS_DIR, f"distill-{settings.target}"))
    digest = config_hash(settings.as_dict())
    num_actions = action_space(target.n).size
    max_len = settings.mcts.resolved_max_len(target.n)

    net, progress = (None, None)
    if args.resume:
        net, progress = _load_progress(out_dir, num_actions, max_len)
        if progress is not None:
            logger.info("从回合 %d 继续", progress.next_episode)

    try:
        result = distill(target, settings.mcts, settings.training, net=net, progress=progress)
    except NoCircuitFound as e:
        _save_progress(out_dir, e.net, e.progress, num_actions, max_len)
        raise

    _save_progress(out_dir, result.net, result.progress, num_actions, max_len)
    save_circuit(result.circuit, os.path.join(out_dir, "circuit.json"))
    write_csv(result.report.to_frame(), os.path.join(out_dir, "eval.csv"), digest)
    losses = pd.DataFrame({"step": np.arange(len(result.progress.losses)), "loss": result.progress.losses})
    write_csv(losses, os.path.join(out_dir, "loss.csv"), digest)
    print(f"蒸馏完成: {len(result.circuit)} 个门, B_ave={result.report.b_ave:.4f} -> {out_dir}")
    return EXIT_OK


# --- 评估 ---
def cmd_eval(args):
    try:
        candidate = load_circuit(args.circuit)
    except FileNotFoundError:
        raise UsageError(f"电路文件不存在: {args.circuit}") from None
    try:
        reference = build_target(args.reference)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if candidate.n != reference.n:
        raise UsageError(f"维度不一致: 电路 {candidate.n} 比特，参考 {args.reference}")

    noise = None
    if args.mode == "shots":
        noise = _noise_from(args) or NoiseModel()
    report = b_ave(candidate, reference, args.inputs, noise=noise, shots=args.shots, seed=args.seed)
    if noise is None and candidate.n <= 10:
        report.fidelity = gate_fidelity(unitary_of(candidate), unitary_of(reference))

    out = args.out or os.path.join(RESULTS_DIR, "eval.csv")
    write_csv(report.to_frame(), out, _digest(args))
    if args.distributions:
        frame = output_distributions(candidate, reference, args.inputs, noise=noise, shots=args.shots,
                                     seed=args.seed)
        write_csv(frame, args.distributions, _digest(args))
    line = f"B_ave={report.b_ave:.6f}"
    if report.fidelity is not None:
        line += f" F={report.fidelity:.6f}"
    print(line)
    return EXIT_OK


# --- IQFT 生成 ---
def _iqft(variant, n):
    try:
        return conventional_iqft(n) if variant == "conventional" else generalized_iqft(n)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_gen_iqft(args):
    circuit = _iqft(args.variant, args.n)
    out = args.out or os.path.join(RESULTS_DIR, f"iqft-{args.variant}-{args.n}.json")
    save_circuit(circuit, out)
    print(f"abstract={gate_count(circuit, 'abstract')} decomposed={gate_count(circuit, 'decomposed')}")
    return EXIT_OK


# --- QPE ---
def cmd_qpe(args):
    if not 0.0 <= args.theta < 1.0:
        raise UsageError(f"θ 必须在 [0, 1) 内: {args.theta}")
    iqft = _iqft(args.variant, args.n)
    probs = measure_dist(run_circuit(qpe_circuit(args.n, args.theta, iqft), zero_state(args.n)))
    columns = {}
    if args.variant == "generalized":
        oracle = qpe_generalized_oracle(args.n, args.theta)
        columns = {"oracle": oracle, "abs_diff": np.abs(probs - oracle)}
        print(f"与解析结果的最大偏差: {float(np.max(columns['abs_diff'])):.3e}")
    out = args.out or os.path.join(RESULTS_DIR, f"qpe-{args.variant}-{args.n}.csv")
    write_csv(_distribution_frame(args.n, probs, **columns), out, _digest(args))
    peak = np.flatnonzero(np.isclose(probs, probs.max()))
    print("最大概率结果: " + ", ".join(format(k, f"0{args.n}b") for k in peak))
    return EXIT_OK


# --- Shor ---
def cmd_shor(args):
    if args.variant == "file":
        if not args.circuit:
            raise UsageError("variant=file 需要 --circuit")
        iqft = load_circuit(args.circuit)
    else:
        iqft = _iqft(args.variant, SHOR_COUNT_QUBITS)
    try:
        circuit = shor57_circuit(iqft)
    except ValueError as e:
        raise UsageError(str(e)) from None

    counting = list(range(SHOR_COUNT_QUBITS))
    start = zero_state(circuit.n)
    ideal = marginal(measure_dist(run_circuit(shor57_circuit(conventional_iqft(SHOR_COUNT_QUBITS)), start)),
                     counting)
    noise = _noise_from(args)
    if noise is None:
        probs = marginal(measure_dist(run_circuit(circuit, start)), counting)
    else:
        probs = marginal(run_noisy(circuit, start, noise, args.shots, args.seed), counting)

    b = bhattacharyya(probs, ideal)
    out = args.out or os.path.join(RESULTS_DIR, f"shor57-{args.variant}.csv")
    write_csv(_distribution_frame(SHOR_COUNT_QUBITS, probs, ideal=ideal), out, _digest(args))
    print(f"B(与理想分布)={b:.6f}")

    for outcome in np.argsort(-probs, kind="stable"):
        if probs[outcome] <= 0:
            break
        found = shor_postprocess(int(outcome))
        if found:
            factors = " × ".join(str(f) for f in found["factors"])
            print(f"结果 {format(int(outcome), '04b')} → 相位 {found['phase']} → 阶 r={found['order']} → 57 = {factors}")
            break
    else:
        print("未观测到可用的非零结果，需要重试")
    return EXIT_OK


# --- 规模扫描 ---
def cmd_scaling(args):
    noise = _noise_from(args)
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        conv, gen = _iqft("conventional", n), _iqft("generalized", n)
        row = {
            "n": n,
            "conv_abstract": gate_count(conv, "abstract"),
            "conv_decomposed": gate_count(conv, "decomposed"),
            "gen_abstract": gate_count(gen, "abstract"),
            "gen_decomposed": gate_count(gen, "decomposed"),
        }
        if not args.counts_only:
            report = b_ave(gen, conv, args.inputs, seed=args.seed)
            row["B_ave_gen"] = report.b_ave
            row["F_gen"] = gate_fidelity(unitary_of(gen), unitary_of(conv))
            logger.info("n=%d: B_ave=%.4f F=%.4f 差值=%.4f", n, row["B_ave_gen"], row["F_gen"],
                        row["B_ave_gen"] - row["F_gen"])
            if noise is not None:
                b_gen = b_ave(gen, conv, args.inputs, noise=noise, shots=args.shots, seed=args.seed)
                b_conv = b_ave(conv, conv, args.inputs, noise=noise, shots=args.shots, seed=args.seed)
                diff = np.subtract(b_gen.values, b_conv.values)
                row["B_gen"], row["B_conv"] = b_gen.b_ave, b_conv.b_ave
                row["ratio"] = b_gen.b_ave / b_conv.b_ave
                row["diff_se"] = bootstrap_se(diff, seed=args.seed)
                logger.info("n=%d: B_gen=%.4f B_conv=%.4f 差值=%.4f (标准误 %.4f)", n, row["B_gen"], row["B_conv"],
                            row["B_gen"] - row["B_conv"], row["diff_se"])
        rows.append(row)
    out = args.out or os.path.join(RESULTS_DIR, "scaling.csv")
    write_csv(pd.DataFrame(rows), out, _digest(args))
    print(f"已写入 {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="全局随机种子")
    common.add_argument("--out", default=None, help="输出路径")
    common.add_argument("--verbose", action="store_true")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--p1", type=float, default=None, help="单比特门去极化概率")
    noise.add_argument("--p2", type=float, default=None, help="两比特门去极化概率")
    noise.add_argument("--r", type=float, default=None, help="读出翻转概率")
    noise.add_argument("--shots", type=int, default=DEFAULT_SHOTS)

    parser = _Parser(prog="qdistill", description="量子电路蒸馏工具")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("distill", parents=[common], help="运行电路蒸馏")
    p.add_argument("config", help="JSON 配置文件")
    p.add_argument("--resume", action="store_true", help="从输出目录中的检查点继续")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("eval", parents=[common, noise], help="随机输入下评估电路")
    p.add_argument("circuit", help="电路 JSON 文件")
    p.add_argument("--reference", required=True, help="参考变换，例如 iqft-4")
    p.add_argument("--mode", choices=["exact", "shots"], default="exact")
    p.add_argument("--inputs", type=int, default=DEFAULT_INPUTS)
    p.add_argument("--distributions", default=None, help="逐输入测量分布 CSV 的输出路径")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-iqft", parents=[common], help="生成 IQFT 电路")
    p.add_argument("n", type=int)
    p.add_argument("--variant", choices=["conventional", "generalized"], default="conventional")
    p.set_defaults(func=cmd_gen_iqft)

    p = sub.add_parser("qpe", parents=[common], help="QPE 的精确输出分布")
    p.add_argument("n", type=int)
    p.add_argument("theta", type=_fraction, help="相位，可写作 5/16")
    p.add_argument("--variant", choices=["conventional", "generalized"], default="conventional")
    p.set_defaults(func=cmd_qpe)

    p = sub.add_parser("shor", parents=[common, noise], help="57 的 Shor 分解演示")
    p.add_argument("--variant", choices=["conventional", "generalized", "file"], default="conventional")
    p.add_argument("--circuit", default=None, help="variant=file 时使用的 4 比特电路")
    p.set_defaults(func=cmd_shor)

    p = sub.add_parser("scaling", parents=[common, noise], help="门数、B_ave 与 F 随 n 的变化")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=9)
    p.add_argument("--inputs", type=int, default=DEFAULT_INPUTS)
    p.add_argument("--counts-only", action="store_true")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "distill" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (NoCircuitFound, CheckpointError, ValueError, OSError) as e:
        logger.error(f"运行失败: {str(e)}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
