"""Dense network on a flat parameter vector, with hand-written gradients.

Keeping every weight in one float64 vector makes checkpointing, Adam, and
finite-difference gradient checks trivial: a model is (spec, params) and
nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError


def silu(x):
    return x * expit(x)


def silu_prime(x):
    s = expit(x)
    return s * (1.0 + x * (1.0 - s))


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (d_in, hidden..., d_out) of a SiLU MLP."""

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ConfigError("MlpSpec: need at least input and output sizes")
        if any(s < 1 for s in sizes):
            raise ConfigError("MlpSpec: layer sizes must be positive")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum((fi + 1) * fo for fi, fo in zip(self.sizes[:-1], self.sizes[1:]))

    def layer_views(self, params: np.ndarray):
        """Yield (W, b) views into the flat vector, one pair per layer."""
        out = []
        pos = 0
        for fi, fo in zip(self.sizes[:-1], self.sizes[1:]):
            w = params[pos:pos + fi * fo].reshape(fi, fo)
            pos += fi * fo
            b = params[pos:pos + fo]
            pos += fo
            out.append((w, b))
        return out

    def init_params(self, seed: int) -> np.ndarray:
        """Fan-in-scaled Gaussian weights, zero biases, zero final layer.

        The zero final layer makes an untrained network output exactly 0.
        """
        rng = np.random.default_rng(seed)
        params = np.zeros(self.n_params)
        for i, (w, _) in enumerate(self.layer_views(params)):
            if i < self.n_layers - 1:
                w[...] = rng.standard_normal(w.shape) / np.sqrt(w.shape[0])
        return params


def mlp_forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batched forward pass; x has shape (B, d_in)."""
    h = x
    layers = spec.layer_views(params)
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = silu(h)
    return h


def mlp_forward_cached(spec: MlpSpec, params: np.ndarray, x: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backward."""
    inputs = []
    preacts = []
    h = x
    layers = spec.layer_views(params)
    for i, (w, b) in enumerate(layers):
        inputs.append(h)
        a = h @ w + b
        if i < len(layers) - 1:
            preacts.append(a)
            h = silu(a)
        else:
            h = a
    return h, (inputs, preacts)


def mlp_backward(spec: MlpSpec, params: np.ndarray, cache, grad_out: np.ndarray) -> np.ndarray:
    """Reverse-mode parameter gradient for a batch; grad_out is dL/d(output)."""
    inputs, preacts = cache
    layers = spec.layer_views(params)
    grad = np.zeros_like(params)
    gviews = spec.layer_views(grad)
    d = grad_out
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw, gb = gviews[i]
        gw[...] = inputs[i].T @ d
        gb[...] = d.sum(axis=0)
        if i > 0:
            d = (d @ w.T) * silu_prime(preacts[i - 1])
    return grad


@dataclass
class Adam:
    """Adam optimizer state over a flat parameter vector."""

    n_params: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    step_count: int = field(init=False, default=0)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("Adam: betas must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("Adam: learning_rate must be positive")
        self.m = np.zeros(self.n_params)
        self.v = np.zeros(self.n_params)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.step_count)
        vhat = self.v / (1.0 - self.beta2 ** self.step_count)
        return params - self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)
