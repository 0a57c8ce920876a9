"""
Classical critic: dense -> ReLU -> dense -> ReLU -> dense over the feature vector,
with a linear head (Wasserstein mode) or a sigmoid head (BCE mode).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from errors import ArgumentError, ShapeError

LINEAR = "linear"
SIGMOID = "sigmoid"
HIDDEN = (64, 16)
SIGMOID_EPS = 1e-7


@dataclasses.dataclass
class CriticParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    head: str = LINEAR

    NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")

    def __post_init__(self):
        if self.head not in (LINEAR, SIGMOID):
            raise ArgumentError(f"unknown critic head {self.head!r}")
        for name in self.NAMES:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        n_in, h1 = self.w1.shape
        h2 = self.w2.shape[1]
        expected = {
            "w1": (n_in, h1), "b1": (h1,),
            "w2": (h1, h2), "b2": (h2,),
            "w3": (h2, 1), "b3": (1,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"critic {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_inputs(self):
        return self.w1.shape[0]

    def tensors(self):
        """Parameters in the fixed order w1, b1, w2, b2, w3, b3."""
        return [getattr(self, name) for name in self.NAMES]

    def with_tensors(self, tensors):
        return CriticParams(*tensors, head=self.head)


def init_critic(n_features, rng, head=LINEAR, scale=0.1, hidden=HIDDEN):
    """Every weight and bias drawn uniformly from [-scale, scale]."""
    sizes = (n_features,) + tuple(hidden) + (1,)
    tensors = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        tensors.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        tensors.append(rng.uniform(-scale, scale, size=(fan_out,)))
    return CriticParams(*tensors, head=head)


def critic_param_count(params):
    return int(sum(t.size for t in params.tensors()))


def _sigmoid(z):
    # split by sign so large |z| never overflows exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # BCE takes log(p) and log(1 - p)
    return np.clip(out, SIGMOID_EPS, 1.0 - SIGMOID_EPS)


def _check_input(params, features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.n_inputs:
        raise ShapeError(f"critic expects (batch, {params.n_inputs}) input, got {features.shape}")
    return features


def _forward_cache(params, features):
    z1 = features @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2 + params.b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ params.w3 + params.b3
    out = _sigmoid(z3) if params.head == SIGMOID else z3
    return out, (z1, a1, z2, a2)


def critic_forward(params, features):
    """(batch, F) features -> (batch, 1) scores."""
    features = _check_input(params, features)
    out, _ = _forward_cache(params, features)
    return out


def critic_backward(params, features, upstream):
    """
    Reverse-mode gradients of a loss whose derivative w.r.t. the scores is `upstream`.

    Returns:
        (grads, d_features): grads in tensors() order, and the (batch, F)
        gradient of the loss w.r.t. the critic input.
    """
    features = _check_input(params, features)
    out, (z1, a1, z2, a2) = _forward_cache(params, features)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(out.shape)

    d3 = upstream * out * (1.0 - out) if params.head == SIGMOID else upstream
    gw3 = a2.T @ d3
    gb3 = d3.sum(axis=0)
    d2 = (d3 @ params.w3.T) * (z2 > 0)
    gw2 = a1.T @ d2
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ params.w2.T) * (z1 > 0)
    gw1 = features.T @ d1
    gb1 = d1.sum(axis=0)
    d_features = d1 @ params.w1.T
    return [gw1, gb1, gw2, gb2, gw3, gb3], d_features


def clip_weights(params, c):
    """Clamps every weight and bias to [-c, c]."""
    if not c > 0:
        raise ArgumentError(f"clip bound must be positive, got {c}")
    return params.with_tensors([np.clip(t, -c, c) for t in params.tensors()])
