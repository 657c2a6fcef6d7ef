"""
动作空间、奖励、MCTS、自博弈、经验池与蒸馏主循环的测试。
"""
import copy

import numpy as np
import pytest
import torch

from circuits import build_target
from config_management import MctsConfig, TrainConfig
from distiller import (DistillTask, NoCircuitFound, ReplayBuffer, SearchTree, TrainingExample, action_space,
                       distill, mcts_policy, policy_is_valid, reward, self_play_episode, uniform_evaluator)
from neuralnet import build_net, encode_state
from qsim import H, Circuit, basis_state

TINY_NET = TrainConfig(channels=16, conv_layers=2, dropout=0.0, batch_size=4, train_steps=2)


def _peaked_evaluator(num_actions, action, value=0.0):
    log_policy = np.full(num_actions, -50.0)
    log_policy[action] = 0.0
    log_policy -= np.log(np.exp(log_policy).sum())
    return lambda state: (log_policy, value)


# =============================================================================
# 动作空间与奖励
# =============================================================================

@pytest.mark.parametrize("n,size", [(1, 6), (2, 14), (3, 24)])
def test_action_space_size(n, size):
    space = action_space(n)
    assert space.size == size
    assert space.actions_of(space.circuit((0, size - 1))) == (0, size - 1)


def test_reward_outcomes():
    target = Circuit(1, [H(0)])
    states = basis_state(1, 0)
    assert reward(Circuit(1, [H(0)]), target, states, 0.9, at_max_len=False) == 1
    assert reward(Circuit(1), target, states, 0.9, at_max_len=False) == 0
    assert reward(Circuit(1), target, states, 0.9, at_max_len=True) == -1
    with pytest.raises(ValueError):
        reward(Circuit(2), target, basis_state(2, 0), 0.9, at_max_len=False)


def test_task_reward_is_cached_and_deterministic():
    task = DistillTask(build_target("hadamard-1"), MctsConfig(seed=3))
    assert task.reward((0,)) == 1
    assert task.reward((0,)) == DistillTask(build_target("hadamard-1"), MctsConfig(seed=3)).reward((0,))
    assert task.max_len == 4


# =============================================================================
# MCTS
# =============================================================================

def test_uniform_prior_visits_every_action_once():
    config = MctsConfig(sims_per_move=6)
    task = DistillTask(build_target("iqft-1"), config)
    task.reward = lambda actions: 0
    pi = mcts_policy((), uniform_evaluator(6), task, config)
    assert np.allclose(pi, 1 / 6)


def test_visit_count_conservation():
    config = MctsConfig(sims_per_move=40)
    task = DistillTask(build_target("iqft-2"), config)
    tree = SearchTree()
    pi = mcts_policy((), uniform_evaluator(14), task, config, tree)
    assert tree.N[()].sum() == 40
    assert policy_is_valid(pi)
    # 复用同一棵树时根节点访问数累加
    mcts_policy((), uniform_evaluator(14), task, config, tree)
    assert tree.N[()].sum() == 80


def test_prior_guides_search():
    config = MctsConfig(sims_per_move=30, c_puct=5.0)
    task = DistillTask(build_target("iqft-2"), config)
    task.reward = lambda actions: 0
    pi = mcts_policy((), _peaked_evaluator(14, 9), task, config)
    assert int(np.argmax(pi)) == 9


def test_root_at_max_len_is_rejected():
    config = MctsConfig(max_len=1)
    task = DistillTask(build_target("hadamard-1"), config)
    with pytest.raises(ValueError):
        mcts_policy((0,), uniform_evaluator(6), task, config)


def test_zero_exploration_is_greedy_in_q():
    config = MctsConfig(sims_per_move=20, c_puct=0.0)
    task = DistillTask(build_target("iqft-1"), config)
    task.reward = lambda actions: 1 if actions == (3,) else 0
    pi = mcts_policy((), uniform_evaluator(6, value=-0.5), task, config)
    # 未访问的边 Q=0，依次尝试 0..3 后只选 Q=1 的边
    assert int(np.argmax(pi)) == 3
    assert pi[4] == 0 and pi[5] == 0
    assert abs(pi[3] - 17 / 20) < 1e-12


def test_terminal_success_gets_most_visits():
    config = MctsConfig(sims_per_move=50)
    task = DistillTask(build_target("iqft-1"), config)
    task.reward = lambda actions: 1 if actions == (3,) else 0
    pi = mcts_policy((), uniform_evaluator(6), task, config)
    assert int(np.argmax(pi)) == 3
    assert pi[3] > 0.5


# =============================================================================
# 自博弈
# =============================================================================

def test_oracle_prior_finds_hadamard():
    config = MctsConfig(sims_per_move=10, episodes=5)
    task = DistillTask(build_target("hadamard-1"), config)
    examples, actions, z = self_play_episode(task, _peaked_evaluator(6, 0), config,
                                             np.random.default_rng(0))
    assert z == 1
    assert actions == (0,)
    assert len(examples) == 1
    assert examples[0].z == 1.0


def test_unreachable_target_gives_negative_outcome():
    config = MctsConfig(sims_per_move=30, max_len=1)
    task = DistillTask(build_target("iqft-3"), config)
    examples, actions, z = self_play_episode(task, uniform_evaluator(24), config, np.random.default_rng(0))
    assert z == -1
    assert actions is None
    assert all(ex.z == -1.0 for ex in examples)


def test_identity_target_is_reached():
    config = MctsConfig(sims_per_move=50, sample_actions=False)
    task = DistillTask(build_target("identity-1"), config)
    _, actions, z = self_play_episode(task, uniform_evaluator(6), config, np.random.default_rng(0))
    assert z == 1
    assert actions is not None


def test_prefix_cache_is_scoped_to_one_episode():
    config = MctsConfig(sims_per_move=10, max_len=4)
    task = DistillTask(build_target("iqft-2"), config)
    bound = 1 + config.sims_per_move * task.max_len
    for episode in range(4):
        self_play_episode(task, uniform_evaluator(14), config, np.random.default_rng(episode))
        assert task.cached_states() <= bound
        assert len(task._rewards) < task.cached_states()
    task.clear_cache()
    assert task.cached_states() == 1
    assert task.reward((0,)) == DistillTask(build_target("iqft-2"), config).reward((0,))


def test_policy_targets_are_distributions():
    config = MctsConfig(sims_per_move=20)
    task = DistillTask(build_target("iqft-2"), config)
    examples, _, _ = self_play_episode(task, uniform_evaluator(14), config, np.random.default_rng(1))
    assert all(policy_is_valid(ex.pi) for ex in examples)


# =============================================================================
# 经验池
# =============================================================================

def test_replay_buffer_is_bounded():
    buffer = ReplayBuffer(3)
    buffer.extend(TrainingExample(encode_state([i], 4), np.full(6, 1 / 6), 0.0) for i in range(5))
    assert len(buffer) == 3
    assert buffer.items[0].state[0] == 3


def test_replay_buffer_save_load(tmp_path):
    buffer = ReplayBuffer(10)
    pi = np.array([0.5, 0.25, 0.25, 0, 0, 0])
    buffer.extend([TrainingExample(encode_state([1, 2], 4), pi, -1.0),
                   TrainingExample(encode_state([], 4), np.full(6, 1 / 6), 1.0)])
    path = tmp_path / "replay.pack"
    buffer.save(path, 6, 4)
    loaded = ReplayBuffer.load(path)
    assert loaded.capacity == 10
    assert len(loaded) == 2
    assert np.array_equal(loaded.items[0].state, encode_state([1, 2], 4))
    assert np.allclose(loaded.items[0].pi, pi)
    assert [ex.z for ex in loaded.items] == [-1.0, 1.0]


# =============================================================================
# 蒸馏主循环
# =============================================================================

def test_distill_with_oracle_prior():
    config = MctsConfig(sims_per_move=10, episodes=5)
    result = distill(build_target("hadamard-1"), config, TINY_NET, evaluator=_peaked_evaluator(6, 0))
    assert result.circuit == Circuit(1, [H(0)])
    assert result.progress.next_episode == 1
    assert abs(result.report.b_ave - 1) < 1e-9


def test_zero_budget_raises():
    with pytest.raises(NoCircuitFound) as info:
        distill(build_target("iqft-2"), MctsConfig(episodes=0), TINY_NET, evaluator=uniform_evaluator(14))
    assert info.value.progress is not None
    assert info.value.progress.next_episode == 0


@pytest.mark.slow
def test_distill_single_qubit_with_network():
    config = MctsConfig(sims_per_move=30, episodes=6, train_every=2, episodes_after_success=2)
    result = distill(build_target("hadamard-1"), config, TINY_NET)
    assert len(result.circuit) <= 4
    assert result.report.b_ave > 0.8
    assert result.net is not None


@pytest.mark.slow
def test_distill_is_deterministic():
    config = MctsConfig(sims_per_move=20, episodes=4, train_every=2, episodes_after_success=1)
    a = distill(build_target("hadamard-1"), config, TINY_NET)
    b = distill(build_target("hadamard-1"), config, TINY_NET)
    assert a.circuit == b.circuit
    assert a.progress.losses == b.progress.losses


def _losses(net, seed):
    config = MctsConfig(sims_per_move=8, episodes=2, train_every=1, max_len=4)
    training = TrainConfig(channels=8, conv_layers=2, dropout=0.3, batch_size=4, train_steps=3)
    torch.manual_seed(seed)
    try:
        return distill(build_target("iqft-2"), config, training, net=net).progress.losses
    except NoCircuitFound as e:
        return e.progress.losses


def test_training_ignores_global_torch_state():
    training = TrainConfig(channels=8, conv_layers=2, dropout=0.3, batch_size=4, train_steps=3)
    net = build_net(14, 4, training, seed=0)
    a = _losses(copy.deepcopy(net), seed=1)
    b = _losses(copy.deepcopy(net), seed=2)
    assert len(a) > 0
    assert a == b


@pytest.mark.slow
def test_distill_two_qubit_iqft():
    config = MctsConfig()
    result = distill(build_target("iqft-2"), config, TrainConfig())
    task = DistillTask(build_target("iqft-2"), config)
    assert len(result.progress.best) <= config.resolved_max_len(2)
    assert all(b > config.b_th for b in task.b_values(result.progress.best))
