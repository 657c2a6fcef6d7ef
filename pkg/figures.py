# figures.py
import altair as alt
import pandas as pd


def distribution_chart(frame: pd.DataFrame, threshold=None) -> alt.LayerChart:
    """测量结果分布柱状图；含 ideal/oracle 列时叠加参考点"""
    bars = alt.Chart(frame).mark_bar().encode(
        x=alt.X('bitstring:N', sort=None, title='测量结果', axis=alt.Axis(labelAngle=45)),
        y=alt.Y('probability:Q', title='概率', scale=alt.Scale(domain=[0, 1])),
        color=alt.value('skyblue'),
        tooltip=['bitstring', alt.Tooltip('probability:Q', format='.4f')],
    )
    layers = [bars]
    for column, color in (("ideal", "red"), ("oracle", "green")):
        if column in frame.columns:
            layers.append(alt.Chart(frame).mark_point(color=color, filled=True).encode(
                x=alt.X('bitstring:N', sort=None), y=f'{column}:Q'))
    if threshold is not None:
        layers.append(alt.Chart(pd.DataFrame({'y': [threshold]}))
                      .mark_rule(color='gray', strokeDash=[5, 5]).encode(y='y'))
    return alt.layer(*layers)


def report_chart(frame: pd.DataFrame, b_th=None) -> alt.LayerChart:
    """每个输入态的 B 值，虚线为 B_ave"""
    per_input = frame[~frame['seed'].astype(str).isin(['B_ave', 'F'])]
    summary = frame.loc[frame['seed'].astype(str) == 'B_ave', 'B']
    bars = alt.Chart(per_input).mark_bar().encode(
        x=alt.X('seed:N', sort=None, title='输入种子'),
        y=alt.Y('B:Q', title='B', scale=alt.Scale(domain=[0, 1])),
        color=alt.Color('B:Q', scale=alt.Scale(domain=[0, 0.9, 1], range=['red', 'orange', 'green'])),
    )
    layers = [bars]
    if len(summary):
        layers.append(alt.Chart(pd.DataFrame({'y': [float(summary.iloc[0])]}))
                      .mark_rule(color='blue', strokeDash=[5, 5]).encode(y='y'))
    if b_th is not None:
        layers.append(alt.Chart(pd.DataFrame({'y': [b_th]}))
                      .mark_rule(color='gray', strokeDash=[2, 2]).encode(y='y'))
    return alt.layer(*layers)


def scaling_chart(frame: pd.DataFrame) -> alt.Chart:
    """B_ave、F（以及有噪声时的比值）随比特数的变化"""
    columns = [c for c in ('B_ave_gen', 'F_gen', 'B_gen', 'B_conv', 'ratio') if c in frame.columns]
    long = frame.melt(id_vars=['n'], value_vars=columns, var_name='指标', value_name='值')
    return alt.Chart(long).mark_line(point=True).encode(
        x=alt.X('n:O', title='比特数 n'),
        y=alt.Y('值:Q'),
        color='指标:N',
        tooltip=['n', '指标', alt.Tooltip('值:Q', format='.4f')],
    )


def gate_count_chart(frame: pd.DataFrame) -> alt.Chart:
    columns = [c for c in ('conv_abstract', 'conv_decomposed', 'gen_abstract', 'gen_decomposed')
               if c in frame.columns]
    long = frame.melt(id_vars=['n'], value_vars=columns, var_name='电路', value_name='门数')
    return alt.Chart(long).mark_line(point=True).encode(
        x=alt.X('n:O', title='比特数 n'),
        y=alt.Y('门数:Q'),
        color='电路:N',
    )


def loss_chart(frame: pd.DataFrame) -> alt.Chart:
    return alt.Chart(frame).mark_line().encode(
        x=alt.X('step:Q', title='训练步'),
        y=alt.Y('loss:Q', title='损失'),
    )
