"""Smoke tests for the python bindings."""

import cedqn
import pytest


def test_constants():
    assert cedqn.OBS_DIM == 9
    assert cedqn.MSG_DIM == 6
    assert cedqn.AUG_DIM == 15
    assert cedqn.NUM_ACTIONS == 6


def test_mlp_forward_and_determinism():
    a = cedqn.mlp_init([4, 8, 5], cedqn.OutputActivation.IDENTITY, seed=99)
    b = cedqn.mlp_init([4, 8, 5], cedqn.OutputActivation.IDENTITY, seed=99)
    x = [0.1, -0.2, 0.3, 0.4]
    assert a.forward(x) == b.forward(x)
    assert len(a.forward(x)) == 5
    with pytest.raises(ValueError):
        cedqn.mlp_init([3], cedqn.OutputActivation.IDENTITY, seed=1)


def test_sigmoid():
    assert cedqn.sigmoid(0.0) == 0.5
    assert abs(cedqn.sigmoid(1.0) - 0.7310585786) < 1e-9


def test_checkpoint_roundtrip(tmp_path):
    net = cedqn.mlp_init([6, 16, 3], cedqn.OutputActivation.SIGMOID, seed=5)
    path = str(tmp_path / "net.ckpt")
    cedqn.save_mlp(net, path)
    loaded = cedqn.load_mlp(path)
    x = [0.5, -0.5, 0.25, 0.0, 1.0, -1.0]
    assert net.forward(x) == loaded.forward(x)


def test_gridworld_reset_and_step():
    cfg = cedqn.EnvConfig()
    cfg.num_robots = 2
    cfg.capacities = [3.0, 3.0]
    cfg.task_size = 2
    cfg.seed = 11
    world, obs = cedqn.reset(cfg)
    assert len(obs) == 2
    assert len(obs[0]) == cedqn.OBS_DIM
    outcome = world.step([int(cedqn.Action.STAY)] * 2)
    assert outcome.rewards == [cfg.step_penalty] * 2
    world2, obs2 = cedqn.reset(cfg)
    assert obs2 == obs


def test_oracle_bounds():
    cfg = cedqn.EnvConfig()
    cfg.grid_width = 4
    cfg.grid_height = 4
    cfg.num_robots = 1
    cfg.capacities = [3.0]
    cfg.task_size = 1
    cfg.max_active_boxes = 1
    cfg.box_weight_min = 2.0
    cfg.box_weight_max = 3.0
    cfg.seed = 21
    steps = cedqn.optimal_steps_oracle(cfg)
    assert 1 <= steps <= 7  # manhattan diameter 6 plus the lift
    assert steps == cedqn.optimal_steps_oracle(cfg)


def test_message_bus():
    bus = cedqn.MessageBus()
    bus.broadcast(cedqn.Message(0, [1, 0, 0, 0, 0, 0]))
    bus.broadcast(cedqn.Message(1, [0, 1, 0, 0, 0, 0]))
    agg = bus.collect(2)
    assert agg.senders_count == 2
    assert agg.values[0] == 0.5
    assert bus.collect(0).senders_count == 1
    bus.flush()
    assert bus.collect(2).senders_count == 0


def _tiny_config(algo, seed):
    cfg = cedqn.RunConfig()
    cfg.algo = algo
    cfg.team = cedqn.team_from_id(2)
    cfg.episodes = 3
    cfg.seed = seed
    cfg.env.grid_width = 6
    cfg.env.grid_height = 6
    cfg.env.task_size = 2
    cfg.env.max_active_boxes = 2
    cfg.env.max_steps_per_episode = 20
    cfg.hyper.batch_size = 8
    cfg.hyper.buffer_capacity = 200
    cfg.resolve()
    return cfg


def test_train_run_is_deterministic():
    log1 = cedqn.train_run(_tiny_config(cedqn.AlgoKind.CEDQN, 7))
    log2 = cedqn.train_run(_tiny_config(cedqn.AlgoKind.CEDQN, 7))
    assert cedqn.metrics_csv(log1) == cedqn.metrics_csv(log2)
    assert len(log1.episodes) == 3
    assert log1.episodes[0].steps <= 20


def test_baseline_has_no_comm_traffic():
    log = cedqn.train_run(_tiny_config(cedqn.AlgoKind.DQN, 9))
    for ep in log.episodes:
        assert ep.messages_sent == 0
        assert ep.gate_decisions == 0
        assert ep.mean_comm_loss == 0.0


def test_train_and_evaluate():
    result = cedqn.train_run_with_agents(_tiny_config(cedqn.AlgoKind.CEDQN, 5))
    cfg = _tiny_config(cedqn.AlgoKind.CEDQN, 5)
    completion = result.evaluate(cfg.env, trials=3, seed=42, eval_epsilon=0.0,
                                 hyper=cfg.hyper)
    assert len(completion.per_trial_steps) == 3
    assert 0.0 <= completion.timeout_fraction <= 1.0


def test_discounted_return_and_epsilon():
    assert cedqn.discounted_return([0, 0, 1], 0.9) == pytest.approx(0.81)
    sched = cedqn.EpsilonSchedule()
    assert cedqn.epsilon_at(sched, 0) == 1.0
    assert cedqn.epsilon_at(sched, 10**6) == 0.05
