"""Episode rollouts, the training loop, greedy evaluation and checkpoints."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import env
from ..env import ScenarioSpec
from ..errors import ConfigError
from ..prior import ProviderConfig, make_provider, postprocess, prior_for_episode, uniform_adjacency
from .buffer import Episode, ReplayBuffer
from .learner import METHODS, Learner, LearnerSpec, pad_observations

PRIOR_MODES = ("none", "uniform", "mock_heuristic", "llm")
LOG_COLUMNS = ("step", "episode", "mean_eval_return", "loss", "epsilon", "fallback_rate")


@dataclass
class TrainConfig:
    total_steps: int = 2_000_000
    buffer_capacity: int = 10_000
    batch_size: int = 32
    lr: float = 5e-4
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_anneal_steps: int = 50_000
    target_update_interval: int = 200
    eval_interval: int = 10_000
    eval_episodes: int = 10
    grad_clip: float = 10.0
    hidden: int = 64
    gnn_hidden: int = 64
    gnn_layers: int = 2
    mix_hidden: int = 32
    method: str = "qmix"
    prior_mode: str = "none"
    seeds: tuple = (0, 1, 2, 3, 4)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        for name in ("total_steps", "buffer_capacity", "batch_size", "eps_anneal_steps",
                     "target_update_interval", "eval_interval", "eval_episodes", "hidden",
                     "gnn_hidden", "gnn_layers", "mix_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.prior_mode not in PRIOR_MODES:
            raise ConfigError(f"unknown prior mode {self.prior_mode!r}; expected one of {PRIOR_MODES}")
        if self.method == "ours" and self.prior_mode == "none":
            raise ConfigError("method 'ours' needs a prior mode (uniform, mock_heuristic or llm)")
        if self.method != "ours" and self.prior_mode != "none":
            raise ConfigError(f"baseline {self.method!r} does not use a graph prior; set prior_mode = none")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")

    def epsilon(self, step: int) -> float:
        if step >= self.eps_anneal_steps:
            return self.eps_end
        frac = step / self.eps_anneal_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    final_eval_returns: list = field(default_factory=list)
    provider_calls: int = 0
    learner: Learner | None = field(default=None, repr=False, compare=False)

    @property
    def final_return(self) -> float:
        return float(np.mean(self.final_eval_returns)) if self.final_eval_returns else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in LOG_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_csv())


class PriorSource:
    """Hands out the per-episode adjacency for a prior mode and counts provider use."""

    def __init__(self, spec: ScenarioSpec, mode: str, provider_cfg: ProviderConfig | None = None,
                 provider=None):
        self.spec, self.mode = spec, mode
        self.provider = None
        self.constant = None
        if mode == "uniform":
            self.constant = postprocess(uniform_adjacency(spec.n_agents))
            self.constant.provider = "mock_uniform"
        elif mode == "mock_heuristic":
            self.cfg = ProviderConfig(kind="mock_heuristic")
            self.provider = provider or make_provider(self.cfg)
        elif mode == "llm":
            if provider_cfg is None:
                raise ConfigError("prior mode 'llm' needs a provider configuration")
            self.cfg = provider_cfg
            self.provider = provider or make_provider(provider_cfg)

    @property
    def calls(self) -> int:
        return getattr(self.provider, "calls", 0)

    def __call__(self, observations):
        if self.mode == "none":
            return None
        if self.constant is not None:
            return self.constant
        return prior_for_episode(observations, self.spec, self.cfg, self.provider)


def rollout(spec: ScenarioSpec, learner: Learner, prior_source: PriorSource, seed,
            epsilon: float, rng: np.random.Generator, episode_id: int = 0):
    """Play one episode; returns ``(Episode, undiscounted return)``."""
    ls = learner.spec
    state, obs = env.reset(spec, seed)
    prior = prior_source(obs)
    adjacency = None if prior is None else prior.matrix
    obs_hist = [pad_observations(obs, ls.obs_dim)]
    states = [env.global_state(spec, state)]
    actions, rewards, terms = [], [], []
    done = False
    while not done:
        a = learner.act(obs, adjacency, epsilon, rng)
        res = env.step(spec, state, a)
        state, obs, done = res.state, res.observations, res.done
        actions.append(a)
        rewards.append(res.reward)
        terms.append(res.terminated)
        obs_hist.append(pad_observations(obs, ls.obs_dim))
        states.append(env.global_state(spec, state))
    ep = Episode(np.array(obs_hist), np.array(actions, dtype=np.int64), np.array(rewards),
                 np.array(terms, dtype=bool), np.array(states),
                 None if adjacency is None else adjacency.copy(), episode_id,
                 bool(prior is not None and prior.fallback))
    return ep, float(np.sum(rewards))


def evaluate(spec: ScenarioSpec, learner: Learner, prior_source: PriorSource, seeds) -> list[float]:
    """Greedy (epsilon = 0) returns, one episode per reset seed."""
    rng = np.random.default_rng(0)  # unused at epsilon 0, kept for the act() signature
    return [rollout(spec, learner, prior_source, int(s), 0.0, rng)[1] for s in seeds]


def random_policy_returns(spec: ScenarioSpec, seeds, rng: np.random.Generator) -> list[float]:
    sizes = env.n_actions(spec)
    out = []
    for s in seeds:
        state, _ = env.reset(spec, int(s))
        total, done = 0.0, False
        while not done:
            res = env.step(spec, state, [int(rng.integers(k)) for k in sizes])
            state, done = res.state, res.done
            total += res.reward
        out.append(total)
    return out


def td_update(learner: Learner, buffer: ReplayBuffer, batch_size: int, rng) -> float | None:
    """One TD step on a sampled batch; None (no-op) while the buffer is short."""
    if len(buffer) < batch_size:
        return None
    return learner.td_update(buffer.sample(batch_size, rng))


def run_training(spec: ScenarioSpec, cfg: TrainConfig, provider_cfg: ProviderConfig | None = None,
                 seed: int = 0, provider=None, checkpoint: str | Path | None = None) -> TrainingLog:
    """Train one (scenario, method, seed) run and log periodic greedy evaluations."""
    ss = np.random.SeedSequence(seed)
    init_ss, env_ss, act_ss, buf_ss, eval_ss = ss.spawn(5)
    env_rng = np.random.default_rng(env_ss)
    act_rng = np.random.default_rng(act_ss)
    buf_rng = np.random.default_rng(buf_ss)
    eval_rng = np.random.default_rng(eval_ss)

    ls = LearnerSpec.for_scenario(spec, cfg.method, hidden=cfg.hidden, gnn_hidden=cfg.gnn_hidden,
                                  gnn_layers=cfg.gnn_layers, mix_hidden=cfg.mix_hidden)
    learner = Learner(ls, np.random.default_rng(init_ss), cfg.lr, cfg.gamma, cfg.grad_clip)
    priors = PriorSource(spec, cfg.prior_mode, provider_cfg, provider)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    log = TrainingLog(learner=learner)

    steps = episodes = 0
    next_eval = cfg.eval_interval
    losses, fallbacks = [], []
    eval_returns: list[float] = []

    def do_eval():
        nonlocal eval_returns
        seeds = eval_rng.integers(0, 2**31 - 1, size=cfg.eval_episodes)
        eval_returns = evaluate(spec, learner, priors, seeds)
        log.rows.append({
            "step": steps, "episode": episodes,
            "mean_eval_return": float(np.mean(eval_returns)),
            "loss": float(np.mean(losses)) if losses else math.nan,
            "epsilon": cfg.epsilon(steps),
            "fallback_rate": float(np.mean(fallbacks)) if fallbacks else 0.0,
        })
        losses.clear()
        fallbacks.clear()

    while steps < cfg.total_steps:
        ep_seed = int(env_rng.integers(0, 2**31 - 1))
        ep, _ = rollout(spec, learner, priors, ep_seed, cfg.epsilon(steps), act_rng, episodes)
        buffer.add(ep)
        steps += ep.length
        episodes += 1
        fallbacks.append(ep.fallback)
        loss = td_update(learner, buffer, cfg.batch_size, buf_rng)
        if loss is not None:
            losses.append(loss)
            if learner.updates % cfg.target_update_interval == 0:
                learner.sync_target()
        if steps >= next_eval:
            do_eval()
            while next_eval <= steps:
                next_eval += cfg.eval_interval
    if not log.rows or log.rows[-1]["step"] != steps:
        do_eval()
    log.final_eval_returns = list(eval_returns)
    log.provider_calls = priors.calls
    if checkpoint is not None:
        save_checkpoint(checkpoint, learner, spec, cfg)
    return log


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, learner: Learner, spec: ScenarioSpec, cfg: TrainConfig) -> None:
    meta = {"scenario": spec.to_text(), "train": dataclasses.asdict(cfg),
            "learner": dataclasses.asdict(learner.spec)}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **learner.params)


def load_checkpoint(path):
    """Returns ``(learner, scenario_spec, train_config)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        params = {k: data[k].copy() for k in data.files if k != "__meta__"}
    spec = ScenarioSpec.from_text(meta["scenario"])
    lmeta = meta["learner"]
    lmeta["obs_dims"] = tuple(lmeta["obs_dims"])
    lmeta["n_actions"] = tuple(lmeta["n_actions"])
    ls = LearnerSpec(**lmeta)
    cfg = TrainConfig(**meta["train"])
    learner = Learner(ls, np.random.default_rng(0), cfg.lr, cfg.gamma, cfg.grad_clip, params=params)
    return learner, spec, cfg


__all__ = ["PRIOR_MODES", "LOG_COLUMNS", "TrainConfig", "TrainingLog", "PriorSource", "rollout",
           "evaluate", "random_policy_returns", "td_update", "run_training", "save_checkpoint",
           "load_checkpoint"]
