# main.py
import os

import streamlit as st

from figures import distribution_chart, gate_count_chart, loss_chart, report_chart, scaling_chart
from utils import RESULTS_DIR, list_results, read_config_hash, read_csv


def _pick(label, suffix=".csv", results_dir=RESULTS_DIR, keyword=None):
    files = [f for f in list_results(results_dir, suffix) if keyword is None or keyword in f]
    if not files:
        st.warning(f"{results_dir} 中没有找到结果文件")
        return None
    selected = st.selectbox(label, files)
    return os.path.join(results_dir, selected)


def show_distribution():
    st.header("📊 测量分布")
    path = _pick("选择分布文件")
    if path is None:
        return
    frame = read_csv(path)
    if "probability" not in frame.columns:
        st.warning("该文件不是分布结果")
        return
    st.caption(f"config_hash: {read_config_hash(path)}")
    if "seed" in frame.columns:
        seed = st.selectbox("选择输入种子", sorted(frame["seed"].unique()))
        frame = frame[frame["seed"] == seed]
    st.altair_chart(distribution_chart(frame), use_container_width=True)
    if "abs_diff" in frame.columns:
        st.metric("与解析结果的最大偏差", f"{frame['abs_diff'].max():.2e}")
    st.dataframe(frame)


def show_distill_run():
    st.header("🔍 蒸馏结果")
    runs = sorted(d for d in os.listdir(RESULTS_DIR) if d.startswith("distill-")) \
        if os.path.isdir(RESULTS_DIR) else []
    if not runs:
        st.warning("没有找到蒸馏结果")
        return
    run_dir = os.path.join(RESULTS_DIR, st.selectbox("选择运行", runs))
    eval_file = os.path.join(run_dir, "eval.csv")
    if os.path.exists(eval_file):
        report = read_csv(eval_file)
        col1, col2 = st.columns(2)
        with col1:
            b_ave = report.loc[report["seed"].astype(str) == "B_ave", "B"]
            st.metric("B_ave", f"{float(b_ave.iloc[0]):.4f}" if len(b_ave) else "-")
        with col2:
            st.metric("输入数", str(len(report) - 1))
        st.altair_chart(report_chart(report, b_th=0.9), use_container_width=True)
    loss_file = os.path.join(run_dir, "loss.csv")
    if os.path.exists(loss_file):
        losses = read_csv(loss_file)
        if len(losses):
            st.subheader("训练损失")
            st.altair_chart(loss_chart(losses), use_container_width=True)
    circuit_file = os.path.join(run_dir, "circuit.json")
    if os.path.exists(circuit_file):
        with open(circuit_file, "r", encoding="utf-8") as f:
            st.code(f.read(), language="json")


def show_scaling():
    st.header("📈 规模扫描")
    path = _pick("选择扫描文件", keyword="scaling")
    if path is None:
        return
    frame = read_csv(path)
    st.altair_chart(gate_count_chart(frame), use_container_width=True)
    if "B_ave_gen" in frame.columns:
        st.altair_chart(scaling_chart(frame), use_container_width=True)
    st.dataframe(frame)


if __name__ == "__main__":
    st.sidebar.title("导航")
    app_mode = st.sidebar.selectbox("选择页面", ["测量分布", "蒸馏结果", "规模扫描"])
    st.sidebar.markdown("---")
    st.sidebar.caption(f"结果目录: {RESULTS_DIR}")

    if app_mode == "测量分布":
        show_distribution()
    elif app_mode == "蒸馏结果":
        show_distill_run()
    elif app_mode == "规模扫描":
        show_scaling()
