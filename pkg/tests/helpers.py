"""Oracles and scenario fixtures shared by the unit and acceptance tests."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from coordprior import env
from coordprior.env import make_spec
from coordprior.learn import Episode


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


# -- post-processing oracle: three explicit loops over python floats ----------


def postprocess_oracle(a):
    n = len(a)
    sym = [[0.5 * (a[i][j] + a[j][i]) for j in range(n)] for i in range(n)]
    norm, degenerate = [], []
    for i in range(n):
        # exact rational sum, rounded once
        s = Fraction(0)
        for j in range(n):
            s += Fraction(sym[i][j])
        s = float(s)
        if s < 1e-9:
            norm.append([1.0 / n] * n)
            degenerate.append(i)
        else:
            norm.append([sym[i][j] / s for j in range(n)])
    out = [[norm[i][j] + (1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    return sym, norm, out, degenerate


# -- cooperative push ------------------------------------------------------------


def push_displacement(n_pushers: int, steps: int = 25) -> float:
    """Object displacement when ``n_pushers`` agents touching its -x side all push +x."""
    spec = make_spec("cooperative_push")
    lay = env.layout(spec)
    state, _ = env.reset(spec, 0)
    pos = np.zeros_like(state.pos)
    pos[lay.extra] = (0.0, 0.0)
    pos[lay.landmark0] = (1.0, 0.0)
    touch = spec.object_radius + spec.agent_radius
    angles = {1: [np.pi], 2: [np.pi - np.pi / 12, np.pi + np.pi / 12]}[n_pushers]
    idle = [(-0.9, 0.9), (-0.9, -0.9), (0.9, 0.9)]
    for i in range(spec.n_agents):
        if i < n_pushers:
            pos[i] = touch * np.cos(angles[i]), touch * np.sin(angles[i])
        else:
            pos[i] = idle[i]
    state.pos[:] = pos
    state.vel[:] = 0.0
    start = state.pos[lay.extra].copy()
    for _ in range(steps):
        acts = [1 if i < n_pushers else 0 for i in range(spec.n_agents)]
        state = env.step(spec, state, acts).state
    return float(np.hypot(*(state.pos[lay.extra] - start)))


# -- adversary pursuit -------------------------------------------------------------


def pursuit_distances(steps: int = 100) -> np.ndarray:
    """Adversary-to-agent-0 distance per step while every agent stays put."""
    spec = make_spec("adversary", max_steps=steps)
    lay = env.layout(spec)
    state, _ = env.reset(spec, 0)
    state.pos[:spec.n_agents] = [(1.0, 0.0), (-1.4, 1.4), (-1.4, -1.4)]
    state.pos[lay.extra] = (0.0, 0.3)
    state.vel[:] = 0.0
    out = []
    for _ in range(steps):
        state = env.step(spec, state, [0] * spec.n_agents).state
        out.append(float(np.hypot(*(state.pos[lay.extra] - state.pos[0]))))
    return np.array(out)


# -- tabular two-step chain --------------------------------------------------------

# per-step, per-agent reward for action 0/1; the team reward is their sum
CHAIN_REWARD = [np.array([[0.0, 1.0], [0.5, 0.0]]), np.array([[2.0, 0.0], [0.0, 1.0]])]
CHAIN_GAMMA = 0.9
CHAIN_OBS = np.array([[[1, 0], [1, 0]], [[0, 1], [0, 1]], [[0, 0], [0, 0]]], dtype=float)


def chain_episodes() -> list[Episode]:
    """All 16 joint-action histories of the deterministic two-step chain."""
    eps = []
    for a0 in itertools.product(range(2), repeat=2):
        for a1 in itertools.product(range(2), repeat=2):
            acts = np.array([a0, a1])
            rew = np.array([sum(CHAIN_REWARD[t][i][acts[t][i]] for i in range(2)) for t in range(2)])
            eps.append(Episode(CHAIN_OBS, acts, rew, np.array([False, True]), np.zeros((3, 1))))
    return eps


def chain_oracle() -> list[np.ndarray]:
    """Value iteration: joint Q at each step, indexed [a_agent0, a_agent1]."""
    q1 = np.zeros((2, 2))
    for a, b in itertools.product(range(2), repeat=2):
        q1[a, b] = CHAIN_REWARD[1][0][a] + CHAIN_REWARD[1][1][b]
    v1 = q1.max()
    q0 = np.zeros((2, 2))
    for a, b in itertools.product(range(2), repeat=2):
        q0[a, b] = CHAIN_REWARD[0][0][a] + CHAIN_REWARD[0][1][b] + CHAIN_GAMMA * v1
    return [q0, q1]


def train_chain(max_updates: int = 5000, tol: float = 1e-3) -> tuple[float, int]:
    """Fit VDN to the chain; returns (worst error against the oracle, updates used)."""
    from coordprior.learn import Learner, LearnerSpec
    from coordprior.learn.learner import agent_qs

    ls = LearnerSpec("vdn", 2, (2, 2), (2, 2), 1, hidden=16)
    learner = Learner(ls, np.random.default_rng(0), lr=1e-3, gamma=CHAIN_GAMMA)
    episodes, oracle = chain_episodes(), chain_oracle()
    err, u = float("inf"), 0
    for u in range(1, max_updates + 1):
        learner.td_update(episodes)
        if u % 20 == 0:
            learner.sync_target()
        q, _ = agent_qs(learner.params, ls, CHAIN_OBS[:2])
        err = max(np.abs(np.add.outer(q[t, 0], q[t, 1]) - oracle[t]).max() for t in range(2))
        if err < tol:
            break
    return float(err), u


# -- gradient and structure probes ----------------------------------------------------


def gnn_instance(seed, n=3, obs_dim=5, hidden=8, layers=2):
    from coordprior.gnn import GnnParams

    rng = np.random.default_rng(seed)
    p = GnnParams.init(rng, obs_dim, hidden, layers)
    return p, rng.normal(size=(n, obs_dim)), rng.uniform(0, 1, (n, n)), rng


def gnn_gradcheck(seed: int) -> float:
    """Worst relative error over every parameter for one n=3, d=8, L=2 instance."""
    from coordprior.gnn import gnn_backward, gnn_forward

    p, obs, a, rng = gnn_instance(seed, n=3, obs_dim=5, hidden=8, layers=2)
    u = rng.normal(size=(3, 8))
    _, trace = gnn_forward(obs, a, p)
    g, d_obs = gnn_backward(trace, u, p)
    f = lambda: float(np.sum(gnn_forward(obs, a, p)[0] * u))  # noqa: E731
    pairs = [(p.enc_w1, g.enc_w1), (p.enc_b1, g.enc_b1), (p.enc_w2, g.enc_w2),
             (p.enc_b2, g.enc_b2)] + list(zip(p.conv, g.conv))
    worst = max(rel_err(grad, central_diff(f, param)) for param, grad in pairs)
    return max(worst, rel_err(d_obs, central_diff(f, obs)))


def gnn_equivariance_error(seed: int) -> float:
    from coordprior.gnn import gnn_forward

    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    p, obs, a, _ = gnn_instance(seed, n=n)
    perm = rng.permutation(n)
    h, _ = gnn_forward(obs, a, p)
    hp, _ = gnn_forward(obs[perm], a[np.ix_(perm, perm)], p)
    return float(np.max(np.abs(hp - h[perm])))


def qmix_min_partial(seed: int, h=1e-5) -> float:
    """Smallest central-difference dQ_tot/dQ_i for one random mixer and state."""
    from coordprior.learn import LearnerSpec
    from coordprior.learn.learner import init_params, q_tot

    rng = np.random.default_rng(seed)
    n, S = int(rng.integers(2, 6)), int(rng.integers(2, 8))
    ls = LearnerSpec("qmix", n, (2,) * n, (2,) * n, S, mix_hidden=int(rng.integers(2, 16)))
    p = init_params(ls, rng)
    for k in p:
        if k.startswith("mixer."):
            p[k] = p[k] * rng.uniform(0.5, 5.0)
    qs, state = rng.normal(0, 3, (1, n)), rng.normal(0, 2, (1, S))
    worst = float("inf")
    for i in range(n):
        up, dn = qs.copy(), qs.copy()
        up[0, i] += h
        dn[0, i] -= h
        worst = min(worst, float((q_tot(up, state, p, ls) - q_tot(dn, state, p, ls))[0] / (2 * h)))
    return worst
