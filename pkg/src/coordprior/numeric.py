"""Dense float64 primitives with explicit forward/backward passes and Adam.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64.
Every layer in the package is assembled from the functions here, so each
one comes with a hand-written backward that the tests check against
central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def as_vector(x) -> np.ndarray:
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with a shape check that names both operands."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


# -- activations ------------------------------------------------------------


def relu(x) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    return np.maximum(x, 0.0)


def relu_backward(x, upstream) -> np.ndarray:
    # subgradient at exactly 0 is 0
    x = np.asarray(x, dtype=DTYPE)
    return np.where(x > 0.0, upstream, 0.0)


def elu(x, alpha: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    return np.where(x > 0.0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_backward(x, upstream, alpha: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    return upstream * np.where(x > 0.0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))


def abs_backward(x, upstream) -> np.ndarray:
    return upstream * np.sign(x)


# -- affine layer -------------------------------------------------------------


def linear(x, w, b=None) -> np.ndarray:
    """``x @ w.T + b`` for row-stacked inputs ``x`` of shape (..., in)."""
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"cannot apply weight {w.shape} to input {x.shape}")
    # a single 2-D GEMM is faster than numpy's broadcast matmul over leading axes
    y = (x.reshape(-1, x.shape[-1]) @ w.T).reshape(x.shape[:-1] + (w.shape[0],))
    if b is not None:
        y = y + b
    return y


def linear_backward(x, w, upstream, bias: bool = True):
    """Gradients of :func:`linear`.

    Returns ``(dx, dw, db)``; leading batch axes of ``x`` and ``upstream``
    are summed out of ``dw`` and ``db``. ``db`` is None when ``bias`` is False.
    """
    x2 = x.reshape(-1, x.shape[-1])
    u2 = upstream.reshape(-1, upstream.shape[-1])
    dx = (u2 @ w).reshape(upstream.shape[:-1] + (w.shape[1],))
    dw = u2.T @ x2
    db = u2.sum(axis=0) if bias else None
    return dx, dw, db


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


# -- Adam -----------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param: np.ndarray, **hyper) -> "AdamState":
        return cls(np.zeros_like(param, dtype=DTYPE), np.zeros_like(param, dtype=DTYPE), **hyper)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState):
    """One bias-corrected Adam update.

    Returns ``(new_param, new_state)``; the inputs are left untouched.
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise DimensionError(
            f"adam shapes differ: param {param.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_param = param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_param, new_state


@dataclass
class Adam:
    """Adam over a name -> array parameter dict, one :class:`AdamState` per entry."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict[str, AdamState] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        out = dict(params)
        for name, g in grads.items():
            st = self.states.get(name)
            if st is None:
                st = AdamState.zeros_like(
                    params[name], lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
                )
            out[name], self.states[name] = adam_step(params[name], g, st)
        return out


def max_rel_error(a, b, floor: float = 1e-8) -> float:
    """max |a-b| / max(|a|, |b|, floor), elementwise."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
