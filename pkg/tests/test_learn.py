from __future__ import annotations

import copy
import math

import numpy as np
import pytest
from helpers import central_diff, qmix_min_partial, rel_err, train_chain

from coordprior import env
from coordprior.env import make_spec
from coordprior.errors import ConfigError
from coordprior.learn import (
    Episode,
    Learner,
    LearnerSpec,
    PriorSource,
    ReplayBuffer,
    TrainConfig,
    flatten,
    load_checkpoint,
    run_training,
    save_checkpoint,
)
from coordprior.learn.learner import (
    init_params,
    masked_argmax,
    q_tot,
    select_actions,
    td_loss,
)
from coordprior.learn.networks import qmix_forward, vdn_forward


def chi2_sf_even(x: float, df: int) -> float:
    """Chi-square survival function, closed form for even degrees of freedom."""
    k = df // 2
    return math.exp(-x / 2) * sum((x / 2) ** i / math.factorial(i) for i in range(k))


def _random_episode(rng, ls: LearnerSpec, T=4, adjacency=True, eid=0):
    n = ls.n_agents
    acts = np.stack([rng.integers(0, k, T) for k in ls.n_actions], axis=1)
    return Episode(rng.normal(size=(T + 1, n, ls.obs_dim)), acts, rng.normal(size=T),
                   np.zeros(T, dtype=bool), rng.normal(size=(T + 1, ls.state_dim)),
                   rng.uniform(0, 1, (n, n)) + np.eye(n) if adjacency else None, eid)


# -- action selection -----------------------------------------------------------------


def test_epsilon_one_is_uniform():
    ls = LearnerSpec("iql", 2, (4, 4), (5, 5), 3)
    rng = np.random.default_rng(0)
    params = init_params(ls, rng)
    obs = rng.normal(size=(2, 4))
    counts = np.zeros(5)
    for _ in range(10_000):
        counts[select_actions(obs, None, params, ls, 1.0, rng)[0]] += 1
    stat = float(np.sum((counts - 2000.0) ** 2 / 2000.0))
    assert chi2_sf_even(stat, 4) > 0.01


def test_greedy_picks_dominant_action():
    ls = LearnerSpec("iql", 2, (4, 4), (5, 5), 3)
    rng = np.random.default_rng(1)
    params = init_params(ls, rng)
    params["agent.b2"] = params["agent.b2"].copy()
    params["agent.b2"][3] = 100.0
    assert select_actions(rng.normal(size=(2, 4)), None, params, ls, 0.0, rng)[0] == 3


def test_shared_network_same_obs_same_action():
    ls = LearnerSpec("iql", 2, (4, 4), (5, 5), 3)
    rng = np.random.default_rng(2)
    params = init_params(ls, rng)
    params["agent.w1"] = params["agent.w1"].copy()
    params["agent.w1"][:, 4:] = 0.0   # blank the agent-id columns
    obs = np.repeat(rng.normal(size=(1, 4)), 2, axis=0)
    a = select_actions(obs, None, params, ls, 0.0, rng)
    assert a[0] == a[1]


def test_argmax_invariant_to_shift():
    rng = np.random.default_rng(3)
    mask = np.ones((3, 5), dtype=bool)
    mask[0, 3:] = False
    for _ in range(100):
        q = rng.normal(size=(3, 5))
        q2 = q.copy()
        q2[1] += rng.normal() * 10
        np.testing.assert_array_equal(masked_argmax(q, mask), masked_argmax(q2, mask))
        assert masked_argmax(q, mask)[0] < 3


def test_invalid_actions_never_chosen():
    spec = make_spec("speaker_listener")
    ls = LearnerSpec.for_scenario(spec, "qmix")
    rng = np.random.default_rng(4)
    params = init_params(ls, rng)
    _, obs = env.reset(spec, 0)
    from coordprior.learn import pad_observations
    o = pad_observations(obs, ls.obs_dim)
    for eps in (0.0, 1.0):
        for _ in range(200):
            assert select_actions(o, None, params, ls, eps, rng)[0] < spec.n_landmarks


# -- mixers ------------------------------------------------------------------------------


def test_vdn_sum():
    q, _ = vdn_forward(np.array([[1.5, -0.5]]))
    assert q[0] == 1.0
    rng = np.random.default_rng(0)
    qs = rng.normal(size=(10, 4))
    np.testing.assert_array_equal(vdn_forward(qs)[0], qs.sum(axis=1))


def test_hand_wired_qmix_is_sum():
    ls = LearnerSpec("qmix", 3, (2, 2, 2), (2, 2, 2), 4, mix_hidden=1)
    p = {k: np.zeros_like(v) for k, v in init_params(ls, np.random.default_rng(0)).items()}
    p["mixer.cw1"] = np.ones_like(p["mixer.cw1"])
    p["mixer.cw2"] = np.ones_like(p["mixer.cw2"])
    rng = np.random.default_rng(1)
    qs = rng.uniform(0.1, 2.0, (8, 3))
    out, _ = qmix_forward(qs, rng.normal(size=(8, 4)), p)
    np.testing.assert_allclose(out, qs.sum(axis=1), atol=1e-14)
    # below zero the ELU shows through: expm1(sum)
    neg = -qs
    np.testing.assert_allclose(qmix_forward(neg, np.zeros((8, 4)), p)[0], np.expm1(neg.sum(axis=1)))


def test_qmix_monotonic():
    assert min(qmix_min_partial(s) for s in range(100)) >= -1e-8


def test_q_tot_undefined_for_iql():
    ls = LearnerSpec("iql", 2, (2, 2), (2, 2), 1)
    with pytest.raises(ValueError):
        q_tot(np.zeros((1, 2)), np.zeros((1, 1)), {}, ls)


# -- TD loss --------------------------------------------------------------------------------


def test_gamma_zero_target_is_reward():
    ls = LearnerSpec("vdn", 2, (3, 3), (2, 2), 2)
    zero = {k: np.zeros_like(v) for k, v in init_params(ls, np.random.default_rng(0)).items()}
    rng = np.random.default_rng(1)
    ep = _random_episode(rng, ls, T=3, adjacency=False)
    ep.reward = np.ones(3)
    loss, _ = td_loss(zero, zero, flatten([ep]), ls, gamma=0.0)
    assert loss == 1.0   # Q_tot = 0, target = 1 exactly


@pytest.mark.parametrize("method", ["iql", "vdn", "qmix", "ours"])
def test_zero_init_zero_reward_is_noop(method):
    ls = LearnerSpec(method, 2, (3, 3), (2, 2), 2, hidden=4, gnn_hidden=4, mix_hidden=3)
    learner = Learner(ls, np.random.default_rng(0))
    learner.params = {k: np.zeros_like(v) for k, v in learner.params.items()}
    learner.sync_target()
    before = copy.deepcopy(learner.params)
    rng = np.random.default_rng(1)
    eps = [_random_episode(rng, ls, adjacency=(method == "ours")) for _ in range(3)]
    for e in eps:
        e.reward = np.zeros_like(e.reward)
    assert learner.td_update(eps) == 0.0
    for k in before:
        np.testing.assert_array_equal(learner.params[k], before[k])


def test_tabular_chain_converges():
    err, _ = train_chain()
    assert err < 1e-3


def end_to_end_gradcheck(seed: int, method: str = "ours") -> float:
    ls = LearnerSpec(method, 2, (8, 8), (3, 3), 5, hidden=6, gnn_hidden=8, gnn_layers=2, mix_hidden=4)
    rng = np.random.default_rng(seed)
    params = init_params(ls, rng)
    target = init_params(ls, rng)
    batch = flatten([_random_episode(rng, ls, T=3, adjacency=ls.uses_graph) for _ in range(2)])
    _, grads = td_loss(params, target, batch, ls, 0.9)
    worst = 0.0
    for k, v in params.items():
        fd = central_diff(lambda: td_loss(params, target, batch, ls, 0.9)[0], v)
        worst = max(worst, rel_err(grads[k], fd))
    assert set(grads) == set(params)
    return worst


@pytest.mark.parametrize("method", ["iql", "vdn", "qmix", "ours"])
def test_end_to_end_gradient(method):
    assert end_to_end_gradcheck(0, method) < 1e-3


# -- learner, buffer, training ------------------------------------------------------------------


def test_target_frozen_between_syncs():
    ls = LearnerSpec("qmix", 2, (3, 3), (2, 2), 2, hidden=4, mix_hidden=3)
    learner = Learner(ls, np.random.default_rng(0), lr=1e-2)
    frozen = copy.deepcopy(learner.target)
    rng = np.random.default_rng(1)
    for _ in range(5):
        learner.td_update([_random_episode(rng, ls, adjacency=False)])
        for k in frozen:
            np.testing.assert_array_equal(learner.target[k], frozen[k])
    assert any(not np.array_equal(learner.params[k], frozen[k]) for k in frozen)
    learner.sync_target()
    for k in frozen:
        np.testing.assert_array_equal(learner.target[k], learner.params[k])


def test_replay_round_trip_and_ring():
    ls = LearnerSpec("ours", 2, (3, 3), (2, 2), 2)
    rng = np.random.default_rng(0)
    buf = ReplayBuffer(4)
    eps = [_random_episode(rng, ls, eid=i) for i in range(6)]
    originals = copy.deepcopy(eps)
    for e in eps:
        buf.add(e)
    assert len(buf) == 4
    assert sorted(e.episode_id for e in buf) == [2, 3, 4, 5]
    for e in buf.sample(4, rng):
        o = originals[e.episode_id]
        for f in ("obs", "actions", "reward", "terminated", "state", "adjacency"):
            np.testing.assert_array_equal(getattr(e, f), getattr(o, f))
    with pytest.raises(ValueError):
        buf.sample(5, rng)


def test_flatten_aligns_next_step():
    ls = LearnerSpec("qmix", 2, (3, 3), (2, 2), 2)
    rng = np.random.default_rng(0)
    eps = [_random_episode(rng, ls, T=3) for _ in range(2)]
    b = flatten(eps)
    assert len(b) == 6
    np.testing.assert_array_equal(b.next_obs[2], eps[0].obs[3])
    np.testing.assert_array_equal(b.obs[3], eps[1].obs[0])
    np.testing.assert_array_equal(b.next_state[5], eps[1].state[3])


def _tiny_cfg(**kw):
    base = dict(total_steps=300, eval_interval=150, eval_episodes=2, batch_size=4,
                hidden=8, gnn_hidden=8, mix_hidden=4)
    base.update(kw)
    return TrainConfig(**base)


def test_training_deterministic():
    spec = make_spec("speaker_listener")
    cfg = _tiny_cfg(method="ours", prior_mode="mock_heuristic")
    a, b = run_training(spec, cfg, seed=3), run_training(spec, cfg, seed=3)
    assert a.to_csv() == b.to_csv()
    assert len(a.rows) >= 2
    c = run_training(spec, cfg, seed=4)
    assert c.to_csv() != a.to_csv()


class CountingProvider:
    def __init__(self):
        self.calls = 0

    def complete(self, bundle):
        self.calls += 1
        return "[[0, 1], [1, 0]]"


def test_baseline_makes_no_provider_calls():
    spec = make_spec("speaker_listener")
    for method in ("iql", "vdn", "qmix"):
        prov = CountingProvider()
        log = run_training(spec, _tiny_cfg(method=method), provider=prov, seed=0)
        assert prov.calls == 0 and log.provider_calls == 0


def test_llm_mode_queries_once_per_episode():
    spec = make_spec("speaker_listener")
    prov = CountingProvider()
    from coordprior.prior import ProviderConfig
    log = run_training(spec, _tiny_cfg(method="ours", prior_mode="llm"),
                       ProviderConfig(kind="http_chat", base_url="http://unused"), seed=0, provider=prov)
    episodes = log.rows[-1]["episode"]
    evals = sum(1 for _ in log.rows) * 2
    assert prov.calls == episodes + evals == log.provider_calls


def test_uniform_prior_is_constant():
    spec = make_spec("cooperative_push")
    src = PriorSource(spec, "uniform")
    _, obs = env.reset(spec, 0)
    np.testing.assert_allclose(src(obs).matrix, np.full((3, 3), 0.5) + 0.5 * np.eye(3))
    assert src.calls == 0


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(method="ours")
    with pytest.raises(ConfigError):
        TrainConfig(method="qmix", prior_mode="uniform")
    with pytest.raises(ConfigError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigError):
        TrainConfig(seeds=(1, 1))
    cfg = TrainConfig()
    assert cfg.epsilon(0) == 1.0 and cfg.epsilon(10**9) == 0.05
    assert cfg.epsilon(25_000) == pytest.approx(0.525)


def test_checkpoint_round_trip(tmp_path):
    spec = make_spec("reference")
    cfg = _tiny_cfg(method="ours", prior_mode="uniform")
    log = run_training(spec, cfg, seed=0, checkpoint=tmp_path / "ck.npz")
    learner, spec2, cfg2 = load_checkpoint(tmp_path / "ck.npz")
    assert spec2 == spec and cfg2 == cfg
    for k, v in log.learner.params.items():
        np.testing.assert_array_equal(learner.params[k], v)
    save_checkpoint(tmp_path / "again.npz", learner, spec2, cfg2)
    assert load_checkpoint(tmp_path / "again.npz")[1] == spec
