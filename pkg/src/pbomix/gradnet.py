"""A small fully-connected network with hand-written reverse-mode gradients.

Only what the policy heads need: dense layers, tanh on hidden layers, identity
output, one sample at a time, and an Adam update with global-norm clipping.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericalFault, UsageError


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def global_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(g * g) for g in self.arrays())))

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([w * factor for w in self.weights], [b * factor for b in self.biases])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])


class Network:
    """Dense network ``layer_sizes[0] -> ... -> layer_sizes[-1]``.

    Weights are stored as ``(out, in)`` matrices.  ``forward`` caches the
    activations of the last call so ``backward`` can be run once afterwards.
    """

    def __init__(self, layer_sizes, seed=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ConfigurationError(f"need >= 2 positive layer sizes, got {layer_sizes!r}")
        self.layer_sizes = sizes
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(1.0 / n_in)
            self.weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
            self.biases.append(np.zeros(n_out))
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise DimensionError(f"expected {self.n_params} parameters, got {flat.size}")
        k = 0
        for p in self.params():
            p[...] = flat[k:k + p.size].reshape(p.shape)
            k += p.size
        self._cache = None

    def copy(self) -> "Network":
        other = Network.__new__(Network)
        other.layer_sizes = list(self.layer_sizes)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._cache = None
        return other

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.layer_sizes[0]:
            raise DimensionError(f"input length {x.size} != {self.layer_sizes[0]}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ h + b
            h = z if i == last else np.tanh(z)
            acts.append(h)
        self._cache = acts
        return h.copy()

    __call__ = forward

    def backward(self, output_gradient) -> Gradients:
        if self._cache is None:
            raise UsageError("backward() called without a cached forward pass")
        g = np.asarray(output_gradient, dtype=float).reshape(-1)
        if g.size != self.layer_sizes[-1]:
            raise DimensionError(f"output gradient length {g.size} != {self.layer_sizes[-1]}")
        acts = self._cache
        n = len(self.weights)
        gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
        gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
        for i in range(n - 1, -1, -1):
            if i != n - 1:
                # acts[i + 1] = tanh(z_i)
                g = g * (1.0 - acts[i + 1] ** 2)
            gw[i] = np.outer(g, acts[i])
            gb[i] = g.copy()
            g = self.weights[i].T @ g
        return Gradients(gw, gb)


@dataclass
class Adam:
    """Adam state for one network; ``clip_norm=None`` disables clipping."""

    learning_rate: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 1.0
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure_state(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def apply(self, net: Network, grads: Gradients) -> None:
        """Update ``net`` in place from ``grads``."""
        params = net.params()
        garr = grads.arrays()
        if len(garr) != len(params) or any(g.shape != p.shape for g, p in zip(garr, params)):
            raise DimensionError("gradient shapes do not match network parameters")
        if not all(np.all(np.isfinite(g)) for g in garr):
            raise NumericalFault("non-finite gradient; update rejected")
        self._ensure_state(params)
        if self.clip_norm is not None:
            norm = grads.global_norm()
            if norm > self.clip_norm:
                garr = [g * (self.clip_norm / norm) for g in garr]
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, garr, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if not np.all(np.isfinite(p)):
                raise NumericalFault("parameter became non-finite")
        net._cache = None


def network_init(layer_sizes, seed=None) -> Network:
    return Network(layer_sizes, seed)


def apply_update(net: Network, grads: Gradients, state: Adam) -> tuple[Network, Adam]:
    state.apply(net, grads)
    return net, state
