"""Value-decomposition learners: IQL, VDN, QMIX, and QMIX over GNN embeddings.

Every agent shares one Q-network; its input is the agent's (zero-padded)
observation, or its GNN embedding for ``ours``, with the agent-index one-hot
appended. Invalid actions (the speaker has fewer) are masked at argmax time.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from ..gnn import GnnParams, gnn_backward, gnn_forward
from ..numeric import Adam
from .buffer import Batch, Episode, flatten
from .networks import (
    init_mixer,
    init_qnet,
    qmix_backward,
    qmix_forward,
    qnet_backward,
    qnet_forward,
    vdn_backward,
    vdn_forward,
)

METHODS = ("iql", "vdn", "qmix", "ours")


@dataclass(frozen=True)
class LearnerSpec:
    method: str
    n_agents: int
    obs_dims: tuple
    n_actions: tuple
    state_dim: int
    hidden: int = 64
    gnn_hidden: int = 64
    gnn_layers: int = 2
    mix_hidden: int = 32

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if len(self.obs_dims) != self.n_agents or len(self.n_actions) != self.n_agents:
            raise ValueError("obs_dims and n_actions need one entry per agent")

    @classmethod
    def for_scenario(cls, spec, method: str, **kw) -> "LearnerSpec":
        from ..env import n_actions, obs_dims, state_dim

        return cls(method, spec.n_agents, tuple(obs_dims(spec)), tuple(n_actions(spec)),
                   state_dim(spec), **kw)

    @property
    def obs_dim(self) -> int:
        return max(self.obs_dims)

    @property
    def act_dim(self) -> int:
        return max(self.n_actions)

    @property
    def uses_graph(self) -> bool:
        return self.method == "ours"

    @property
    def mixer(self) -> str:
        return {"iql": "none", "vdn": "vdn"}.get(self.method, "qmix")

    @property
    def action_mask(self) -> np.ndarray:
        mask = np.zeros((self.n_agents, self.act_dim), dtype=bool)
        for i, k in enumerate(self.n_actions):
            mask[i, :k] = True
        return mask


def init_params(ls: LearnerSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    if ls.uses_graph:
        params.update(GnnParams.init(rng, ls.obs_dim, ls.gnn_hidden, ls.gnn_layers).to_dict())
        q_in = ls.gnn_hidden + ls.n_agents
    else:
        q_in = ls.obs_dim + ls.n_agents
    params.update(init_qnet(rng, q_in, ls.hidden, ls.act_dim))
    if ls.mixer == "qmix":
        params.update(init_mixer(rng, ls.n_agents, ls.state_dim, ls.mix_hidden))
    return params


def pad_observations(observations, obs_dim: int) -> np.ndarray:
    """Stack per-agent vectors (or AgentObservation objects) zero-padded to ``obs_dim``."""
    out = np.zeros((len(observations), obs_dim))
    for i, o in enumerate(observations):
        v = getattr(o, "vector", o)
        out[i, :len(v)] = v
    return out


def agent_qs(params, ls: LearnerSpec, obs, adjacency=None):
    """Q-values ``(..., n, act_dim)`` for stacked observations ``(..., n, obs_dim)``."""
    if ls.uses_graph:
        if adjacency is None:
            raise ValueError("the graph learner needs an adjacency prior")
        h, trace = gnn_forward(obs, adjacency, GnnParams.from_dict(params))
    else:
        h, trace = np.asarray(obs, dtype=np.float64), None
    n = ls.n_agents
    onehot = np.broadcast_to(np.eye(n), h.shape[:-1] + (n,))
    q, qcache = qnet_forward(np.concatenate([h, onehot], axis=-1), params)
    return q, (trace, qcache, h.shape[-1])


def agent_qs_backward(params, ls: LearnerSpec, cache, dq) -> dict[str, np.ndarray]:
    trace, qcache, hdim = cache
    grads, dx = qnet_backward(qcache, dq, params)
    if trace is not None:
        g, _ = gnn_backward(trace, dx[..., :hdim], GnnParams.from_dict(params))
        grads.update(g.to_dict())
    return grads


def masked_argmax(q, mask) -> np.ndarray:
    # first maximum wins, so ties go to the lowest action index
    return np.where(mask, q, -np.inf).argmax(axis=-1)


def select_actions(obs, adjacency, params, ls: LearnerSpec, epsilon: float,
                   rng: np.random.Generator) -> list[int]:
    """Epsilon-greedy joint action from local observations only."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    q, _ = agent_qs(params, ls, obs, adjacency)
    greedy = masked_argmax(q, ls.action_mask)
    actions = []
    for i in range(ls.n_agents):
        if rng.random() < epsilon:
            actions.append(int(rng.integers(ls.n_actions[i])))
        else:
            actions.append(int(greedy[i]))
    return actions


def mix_forward(qs, state, params, ls: LearnerSpec):
    if ls.mixer == "qmix":
        return qmix_forward(qs, state, params)
    return vdn_forward(qs)


def mix_backward(cache, dq_tot, params, ls: LearnerSpec):
    if ls.mixer == "qmix":
        return qmix_backward(cache, dq_tot, params)
    return vdn_backward(cache, dq_tot)


def q_tot(qs, state, params, ls: LearnerSpec) -> np.ndarray:
    """Joint value for chosen-action utilities ``qs`` (N, n). Undefined for IQL."""
    if ls.mixer == "none":
        raise ValueError("IQL has no joint value function")
    qs = np.atleast_2d(np.asarray(qs, dtype=np.float64))
    state = np.atleast_2d(np.asarray(state, dtype=np.float64))
    return mix_forward(qs, state, params, ls)[0]


def td_loss(params, target_params, batch: Batch, ls: LearnerSpec, gamma: float):
    """Mean squared TD error and its gradient for every online parameter.

    Double-Q targets: next actions are the online argmax, valued by the
    target networks. The adjacency is a constant input to both passes.
    """
    q, cache = agent_qs(params, ls, batch.obs, batch.adjacency)
    q_next_online, _ = agent_qs(params, ls, batch.next_obs, batch.adjacency)
    q_next_target, _ = agent_qs(target_params, ls, batch.next_obs, batch.adjacency)
    a_star = masked_argmax(q_next_online, ls.action_mask)
    q_next = np.take_along_axis(q_next_target, a_star[..., None], axis=-1)[..., 0]
    actions = batch.actions.astype(np.intp)
    chosen = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
    cont = gamma * (1.0 - batch.terminated.astype(np.float64))

    if ls.mixer == "none":
        y = batch.reward[:, None] + cont[:, None] * q_next
        err = chosen - y
        loss = float(np.mean(err * err))
        dchosen = 2.0 * err / err.size
        grads = {}
    else:
        qt, mcache = mix_forward(chosen, batch.state, params, ls)
        qt_next, _ = mix_forward(q_next, batch.next_state, target_params, ls)
        y = batch.reward + cont * qt_next
        err = qt - y
        loss = float(np.mean(err * err))
        grads, dchosen = mix_backward(mcache, 2.0 * err / err.size, params, ls)

    dq = np.zeros_like(q)
    np.put_along_axis(dq, actions[..., None], dchosen[..., None], axis=-1)
    grads.update(agent_qs_backward(params, ls, cache, dq))
    return loss, grads


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


class Learner:
    """Online/target parameters plus optimizer state for one training run."""

    def __init__(self, ls: LearnerSpec, rng: np.random.Generator, lr: float = 5e-4,
                 gamma: float = 0.99, grad_clip: float = 10.0, params=None):
        self.spec = ls
        self.gamma = gamma
        self.grad_clip = grad_clip
        self.params = params if params is not None else init_params(ls, rng)
        self.target = copy.deepcopy(self.params)
        self.optimizer = Adam(lr=lr)
        self.updates = 0

    def act(self, observations, adjacency, epsilon: float, rng) -> list[int]:
        obs = pad_observations(observations, self.spec.obs_dim)
        return select_actions(obs, adjacency, self.params, self.spec, epsilon, rng)

    def td_update(self, episodes: list[Episode]) -> float:
        loss, grads = td_loss(self.params, self.target, flatten(episodes), self.spec, self.gamma)
        clip_grad_norm(grads, self.grad_clip)
        self.params = self.optimizer.step(self.params, grads)
        self.updates += 1
        return loss

    def sync_target(self) -> None:
        self.target = {k: v.copy() for k, v in self.params.items()}
