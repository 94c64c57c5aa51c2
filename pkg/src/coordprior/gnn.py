"""Shared observation encoder plus graph convolution over the agent graph.

Per agent: ``h0 = relu(W2 relu(W1 o + b1) + b2)``; per layer
``h_i = relu(W sum_j A_ij h_j)``, i.e. ``H' = relu((A @ H) @ W.T)``. The
adjacency is an input, never a parameter, so no gradient is produced for it.

All functions accept leading batch axes: observations ``(..., n, obs_dim)``
and adjacency ``(..., n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numeric import DimensionError, init_uniform, linear, linear_backward, relu, relu_backward


@dataclass
class GnnParams:
    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    conv: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.conv) < 1:
            raise ValueError("a GNN needs at least one graph-convolution layer")
        d = self.enc_w1.shape[0]
        if self.enc_b1.shape != (d,) or self.enc_w2.shape != (d, d) or self.enc_b2.shape != (d,):
            raise DimensionError("encoder shapes are inconsistent")
        if any(w.shape != (d, d) for w in self.conv):
            raise DimensionError(f"graph-conv weights must be {d}x{d}")

    @property
    def n_layers(self) -> int:
        return len(self.conv)

    @property
    def hidden(self) -> int:
        return self.enc_w1.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.enc_w1.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, obs_dim: int, hidden: int = 64, layers: int = 2):
        if layers < 1:
            raise ValueError("a GNN needs at least one graph-convolution layer")
        return cls(
            init_uniform(rng, (hidden, obs_dim), obs_dim),
            init_uniform(rng, (hidden,), obs_dim),
            init_uniform(rng, (hidden, hidden), hidden),
            init_uniform(rng, (hidden,), hidden),
            [init_uniform(rng, (hidden, hidden), hidden) for _ in range(layers)],
        )

    def to_dict(self, prefix: str = "gnn.") -> dict[str, np.ndarray]:
        out = {f"{prefix}enc_w1": self.enc_w1, f"{prefix}enc_b1": self.enc_b1,
               f"{prefix}enc_w2": self.enc_w2, f"{prefix}enc_b2": self.enc_b2}
        out.update({f"{prefix}conv{k}": w for k, w in enumerate(self.conv)})
        return out

    @classmethod
    def from_dict(cls, d: dict[str, np.ndarray], prefix: str = "gnn.") -> "GnnParams":
        layers = sorted(int(k[len(prefix) + 4:]) for k in d if k.startswith(prefix + "conv"))
        return cls(d[f"{prefix}enc_w1"], d[f"{prefix}enc_b1"], d[f"{prefix}enc_w2"],
                   d[f"{prefix}enc_b2"], [d[f"{prefix}conv{k}"] for k in layers])


@dataclass
class GnnForwardTrace:
    obs: np.ndarray
    adjacency: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    inputs: list   # H^(l-1) per layer
    mixed: list    # A @ H^(l-1) per layer
    pre: list      # (A @ H^(l-1)) @ W.T per layer


def encode(obs, params: GnnParams) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != params.obs_dim:
        raise DimensionError(f"observation length {obs.shape[-1]} != encoder input {params.obs_dim}")
    return relu(linear(relu(linear(obs, params.enc_w1, params.enc_b1)),
                       params.enc_w2, params.enc_b2))


def propagate(h, adjacency, w) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    a = np.asarray(adjacency, dtype=np.float64)
    if a.shape[-1] != h.shape[-2] or a.shape[-2] != a.shape[-1] or w.shape[1] != h.shape[-1]:
        raise DimensionError(f"cannot propagate H {h.shape} over A {a.shape} with W {w.shape}")
    return relu(linear(a @ h, w))


def gnn_forward(obs, adjacency, params: GnnParams):
    obs = np.asarray(obs, dtype=np.float64)
    a = np.asarray(adjacency, dtype=np.float64)
    if obs.shape[-1] != params.obs_dim:
        raise DimensionError(f"observation length {obs.shape[-1]} != encoder input {params.obs_dim}")
    n = obs.shape[-2]
    if a.shape[-2:] != (n, n):
        raise DimensionError(f"adjacency {a.shape} does not match {n} agents")
    z1 = linear(obs, params.enc_w1, params.enc_b1)
    a1 = relu(z1)
    z2 = linear(a1, params.enc_w2, params.enc_b2)
    h = relu(z2)
    inputs, mixed, pre = [], [], []
    for w in params.conv:
        m = a @ h
        z = linear(m, w)
        inputs.append(h)
        mixed.append(m)
        pre.append(z)
        h = relu(z)
    return h, GnnForwardTrace(obs, a, z1, a1, z2, inputs, mixed, pre)


def gnn_backward(trace: GnnForwardTrace, upstream, params: GnnParams):
    """Reverse pass. Returns ``(grads, d_obs)`` with ``grads`` shaped like ``params``."""
    g = np.asarray(upstream, dtype=np.float64)
    if len(trace.pre) != params.n_layers or g.shape != trace.pre[-1].shape:
        raise DimensionError("trace does not match these parameters or this upstream gradient")
    a_t = np.swapaxes(trace.adjacency, -1, -2)
    conv_grads = [None] * params.n_layers
    for layer in reversed(range(params.n_layers)):
        dz = relu_backward(trace.pre[layer], g)
        dm, dw, _ = linear_backward(trace.mixed[layer], params.conv[layer], dz, bias=False)
        conv_grads[layer] = dw
        g = a_t @ dm
    dz2 = relu_backward(trace.z2, g)
    da1, dw2, db2 = linear_backward(trace.a1, params.enc_w2, dz2)
    dz1 = relu_backward(trace.z1, da1)
    d_obs, dw1, db1 = linear_backward(trace.obs, params.enc_w1, dz1)
    return GnnParams(dw1, db1, dw2, db2, conv_grads), d_obs
