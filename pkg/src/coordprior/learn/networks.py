"""Per-agent Q-network and mixing networks, forward and backward.

Parameters live in flat ``name -> ndarray`` dicts so the optimizer, target
copies and checkpoints can treat every network the same way.
"""
from __future__ import annotations

import numpy as np

from ..numeric import (
    abs_backward,
    elu,
    elu_backward,
    init_uniform,
    linear,
    linear_backward,
    relu,
    relu_backward,
)

# -- shared agent Q-network ---------------------------------------------------


def init_qnet(rng, in_dim: int, hidden: int, n_out: int) -> dict[str, np.ndarray]:
    return {
        "agent.w1": init_uniform(rng, (hidden, in_dim), in_dim),
        "agent.b1": init_uniform(rng, (hidden,), in_dim),
        "agent.w2": init_uniform(rng, (n_out, hidden), hidden),
        "agent.b2": init_uniform(rng, (n_out,), hidden),
    }


def qnet_forward(x, p):
    z = linear(x, p["agent.w1"], p["agent.b1"])
    a = relu(z)
    return linear(a, p["agent.w2"], p["agent.b2"]), (x, z, a)


def qnet_backward(cache, dq, p):
    x, z, a = cache
    da, dw2, db2 = linear_backward(a, p["agent.w2"], dq)
    dz = relu_backward(z, da)
    dx, dw1, db1 = linear_backward(x, p["agent.w1"], dz)
    return {"agent.w1": dw1, "agent.b1": db1, "agent.w2": dw2, "agent.b2": db2}, dx


# -- QMIX mixer ----------------------------------------------------------------


def init_mixer(rng, n_agents: int, state_dim: int, hidden: int) -> dict[str, np.ndarray]:
    S, h = state_dim, hidden
    return {
        "mixer.hw1": init_uniform(rng, (n_agents * h, S), S),
        "mixer.cw1": init_uniform(rng, (n_agents * h,), S),
        "mixer.hb1": init_uniform(rng, (h, S), S),
        "mixer.cb1": init_uniform(rng, (h,), S),
        "mixer.hw2": init_uniform(rng, (h, S), S),
        "mixer.cw2": init_uniform(rng, (h,), S),
        "mixer.hv1": init_uniform(rng, (h, S), S),
        "mixer.cv1": init_uniform(rng, (h,), S),
        "mixer.hv2": init_uniform(rng, (1, h), h),
        "mixer.cv2": init_uniform(rng, (1,), h),
    }


def qmix_forward(qs, state, p):
    """Monotonic mixing of per-agent values ``qs`` (N, n) conditioned on ``state`` (N, S).

    Hypernetwork outputs pass through ``abs`` before being used as mixing
    weights, so dQ_tot/dQ_i >= 0 everywhere.
    """
    N, n = qs.shape
    w1_raw = linear(state, p["mixer.hw1"], p["mixer.cw1"])
    w1 = np.abs(w1_raw).reshape(N, n, -1)
    b1 = linear(state, p["mixer.hb1"], p["mixer.cb1"])
    pre = np.einsum("bn,bnh->bh", qs, w1) + b1
    hid = elu(pre)
    w2_raw = linear(state, p["mixer.hw2"], p["mixer.cw2"])
    w2 = np.abs(w2_raw)
    v_pre = linear(state, p["mixer.hv1"], p["mixer.cv1"])
    v_hid = relu(v_pre)
    b2 = linear(v_hid, p["mixer.hv2"], p["mixer.cv2"])[:, 0]
    q_tot = np.sum(hid * w2, axis=-1) + b2
    return q_tot, (qs, state, w1_raw, w1, pre, hid, w2_raw, w2, v_pre, v_hid)


def qmix_backward(cache, dq_tot, p):
    qs, state, w1_raw, w1, pre, hid, w2_raw, w2, v_pre, v_hid = cache
    N, n = qs.shape
    g = dq_tot[:, None]
    dhid = g * w2
    dw2_raw = abs_backward(w2_raw, g * hid)
    db2 = g
    dv_hid, dhv2, dcv2 = linear_backward(v_hid, p["mixer.hv2"], db2)
    dv_pre = relu_backward(v_pre, dv_hid)
    _, dhv1, dcv1 = linear_backward(state, p["mixer.hv1"], dv_pre)
    _, dhw2, dcw2 = linear_backward(state, p["mixer.hw2"], dw2_raw)
    dpre = elu_backward(pre, dhid)
    _, dhb1, dcb1 = linear_backward(state, p["mixer.hb1"], dpre)
    dqs = np.einsum("bnh,bh->bn", w1, dpre)
    dw1 = (qs[:, :, None] * dpre[:, None, :]).reshape(N, -1)
    dw1_raw = abs_backward(w1_raw, dw1)
    _, dhw1, dcw1 = linear_backward(state, p["mixer.hw1"], dw1_raw)
    grads = {"mixer.hw1": dhw1, "mixer.cw1": dcw1, "mixer.hb1": dhb1, "mixer.cb1": dcb1,
             "mixer.hw2": dhw2, "mixer.cw2": dcw2, "mixer.hv1": dhv1, "mixer.cv1": dcv1,
             "mixer.hv2": dhv2, "mixer.cv2": dcv2}
    return grads, dqs


def vdn_forward(qs, state=None, p=None):
    return qs.sum(axis=-1), qs.shape[-1]


def vdn_backward(n_agents, dq_tot, p=None):
    return {}, np.repeat(dq_tot[:, None], n_agents, axis=1)
