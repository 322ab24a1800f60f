"""Joint mixed-variable search policy.

The continuous block is a multivariate normal ``N(m, L L^T)`` in normalized
coordinates ``[-1, 1]``; the discrete block is a set of independent
categoricals.  Both distribution parameters (except the mean, which is set by
elite recombination) come out of small state-free networks fed with the
constant input ``1.0``.

Covariance factor: ``L = diag(sigma) @ U_hat`` where ``U`` is unit lower
triangular with ``tanh`` outputs below the diagonal and ``U_hat`` is ``U``
with rows rescaled to unit norm, so ``diag(L L^T) = sigma**2`` and the
matrix is positive definite by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigurationError, DimensionError, UsageError
from .gradnet import Network

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class MixedSearchSpace:
    continuous_bounds: tuple = ()
    categories: tuple = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.continuous_bounds)
        cats = tuple(int(d) for d in self.categories)
        for k, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise ConfigurationError(f"continuous variable {k}: low {lo} >= high {hi}")
        for k, d in enumerate(cats):
            if d < 2:
                raise ConfigurationError(f"discrete variable {k}: needs >= 2 categories, got {d}")
        object.__setattr__(self, "continuous_bounds", bounds)
        object.__setattr__(self, "categories", cats)

    @property
    def n_c(self) -> int:
        return len(self.continuous_bounds)

    @property
    def n_d(self) -> int:
        return len(self.categories)

    @property
    def n_logits(self) -> int:
        return sum(self.categories)

    @property
    def low(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.continuous_bounds], dtype=float)

    @property
    def high(self) -> np.ndarray:
        return np.array([hi for _, hi in self.continuous_bounds], dtype=float)


@dataclass
class MixedAction:
    a_c: np.ndarray
    a_d: np.ndarray


def map_to_physical(a_c, space: MixedSearchSpace) -> np.ndarray:
    """Clamp normalized coordinates to ``[-1, 1]`` and map onto the bounds.

    Works on a single vector or on a ``(batch, n_c)`` array.
    """
    a = np.clip(np.asarray(a_c, dtype=float), -1.0, 1.0)
    lo, hi = space.low, space.high
    return lo + 0.5 * (a + 1.0) * (hi - lo)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class GaussianPolicy:
    """Normal distribution over the continuous block."""

    def __init__(self, n_c, hidden=(32,), sigma_min=0.02, sigma_max=1.0, diagonal=None,
                 seed=None):
        if not 0 < sigma_min < sigma_max:
            raise ConfigurationError("need 0 < sigma_min < sigma_max")
        self.n_c = int(n_c)
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.diagonal = self.n_c >= 20 if diagonal is None else bool(diagonal)
        self.n_corr = 0 if self.diagonal else self.n_c * (self.n_c - 1) // 2
        self.mean = np.zeros(self.n_c)
        self.net = Network([1, *hidden, self.n_c + self.n_corr], seed) if self.n_c else None
        self._tril = np.tril_indices(self.n_c, -1)

    def outputs(self) -> np.ndarray:
        return self.net.forward(np.ones(1))

    def factor_from_outputs(self, out: np.ndarray):
        """``(sigma, L, U, norms)`` for raw network outputs ``out``."""
        n = self.n_c
        sig = _sigmoid(out[:n])
        sigma = self.sigma_min + (self.sigma_max - self.sigma_min) * sig
        u = np.eye(n)
        if self.n_corr:
            u[self._tril] = np.tanh(out[n:])
        norms = np.sqrt(np.sum(u * u, axis=1))
        L = sigma[:, None] * (u / norms[:, None])
        return sigma, L, u, norms

    def sigma(self) -> np.ndarray:
        return self.factor_from_outputs(self.outputs())[0]

    def cholesky(self) -> np.ndarray:
        return self.factor_from_outputs(self.outputs())[1]

    def covariance(self) -> np.ndarray:
        L = self.cholesky()
        return L @ L.T

    def log_prob(self, a_c, mean=None, out=None) -> np.ndarray:
        """Log-density of one action or a ``(batch, n_c)`` array of actions."""
        a = np.asarray(a_c, dtype=float)
        single = a.ndim == 1
        a = np.atleast_2d(a)
        if a.shape[1] != self.n_c:
            raise DimensionError(f"expected {self.n_c} continuous values, got {a.shape[1]}")
        if self.n_c == 0:
            return 0.0 if single else np.zeros(a.shape[0])
        m = self.mean if mean is None else np.asarray(mean, dtype=float)
        _, L, _, _ = self.factor_from_outputs(self.outputs() if out is None else out)
        z = solve_triangular(L, (a - m).T, lower=True)
        lp = -0.5 * np.sum(z * z, axis=0) - np.sum(np.log(np.diag(L))) - 0.5 * self.n_c * LOG_2PI
        return float(lp[0]) if single else lp

    def log_prob_grad(self, a_c, weights, mean=None):
        """Gradient of ``sum_b weights[b] * log_prob(a_c[b])`` w.r.t. the network outputs."""
        out = self.outputs()
        n = self.n_c
        m = self.mean if mean is None else np.asarray(mean, dtype=float)
        w = np.asarray(weights, dtype=float)
        sigma, L, u, norms = self.factor_from_outputs(out)
        y = (np.atleast_2d(a_c) - m).T
        z = solve_triangular(L, y, lower=True)
        s = (z * w) @ z.T
        g_l = np.tril(solve_triangular(L, s, lower=True, trans="T"))
        g_l[np.diag_indices(n)] -= w.sum() / np.diag(L)
        u_hat = u / norms[:, None]
        g_sigma = np.sum(g_l * u_hat, axis=1)
        g_out = np.empty_like(out)
        sig = (sigma - self.sigma_min) / (self.sigma_max - self.sigma_min)
        g_out[:n] = g_sigma * (self.sigma_max - self.sigma_min) * sig * (1.0 - sig)
        if self.n_corr:
            g_uhat = g_l * sigma[:, None]
            proj = np.sum(g_uhat * u_hat, axis=1)
            g_u = (g_uhat - u_hat * proj[:, None]) / norms[:, None]
            g_out[n:] = g_u[self._tril] * (1.0 - u[self._tril] ** 2)
        return g_out

    def copy(self) -> "GaussianPolicy":
        other = GaussianPolicy.__new__(GaussianPolicy)
        other.__dict__.update(self.__dict__)
        other.mean = self.mean.copy()
        other.net = self.net.copy() if self.net is not None else None
        return other


class CategoricalPolicy:
    """Independent categoricals whose logits come from one network head."""

    def __init__(self, categories: Sequence[int], hidden=(32,), seed=None):
        self.categories = [int(d) for d in categories]
        self.offsets = np.concatenate([[0], np.cumsum(self.categories)]).astype(int)
        self.net = Network([1, *hidden, sum(self.categories)], seed) if self.categories else None

    @property
    def n_d(self) -> int:
        return len(self.categories)

    def logits(self) -> np.ndarray:
        return self.net.forward(np.ones(1))

    def split(self, flat) -> list[np.ndarray]:
        return [flat[self.offsets[k]:self.offsets[k + 1]] for k in range(self.n_d)]

    def flat_log_probs(self, logits=None) -> np.ndarray:
        """Per-variable log-softmax, concatenated like the logits."""
        z = self.logits() if logits is None else np.asarray(logits, dtype=float)
        starts = self.offsets[:-1]
        sizes = self.categories
        z = z - np.repeat(np.maximum.reduceat(z, starts), sizes)
        lse = np.log(np.add.reduceat(np.exp(z), starts))
        return z - np.repeat(lse, sizes)

    def log_probs(self, logits=None) -> list[np.ndarray]:
        return self.split(self.flat_log_probs(logits))

    def probabilities(self) -> list[np.ndarray]:
        return [np.exp(lp) for lp in self.log_probs()]

    def _check(self, a):
        if a.shape[1] != self.n_d:
            raise DimensionError(f"expected {self.n_d} discrete values, got {a.shape[1]}")
        if np.any(a < 0) or np.any(a >= np.array(self.categories, dtype=int)):
            raise DimensionError("category index out of range")

    def log_prob(self, a_d, logits=None):
        a = np.asarray(a_d, dtype=int)
        single = a.ndim == 1
        a = np.atleast_2d(a)
        self._check(a)
        if self.n_d == 0:
            return 0.0 if single else np.zeros(a.shape[0])
        flat = self.flat_log_probs(logits)
        total = flat[a + self.offsets[:-1]].sum(axis=1)
        return float(total[0]) if single else total

    def log_prob_grad(self, a_d, weights) -> np.ndarray:
        """Gradient of ``sum_b weights[b] * log_prob(a_d[b])`` w.r.t. the logits."""
        a = np.atleast_2d(np.asarray(a_d, dtype=int))
        w = np.asarray(weights, dtype=float)
        idx = (a + self.offsets[:-1]).ravel()
        counts = np.bincount(idx, weights=np.repeat(w, self.n_d), minlength=self.offsets[-1])
        return counts - w.sum() * np.exp(self.flat_log_probs())

    def copy(self) -> "CategoricalPolicy":
        other = CategoricalPolicy.__new__(CategoricalPolicy)
        other.categories = list(self.categories)
        other.offsets = self.offsets.copy()
        other.net = self.net.copy() if self.net is not None else None
        return other


class PolicyPair:
    """Continuous and discrete policies for one :class:`MixedSearchSpace`."""

    def __init__(self, space: MixedSearchSpace, hidden=(32,), sigma_min=0.02, sigma_max=1.0,
                 diagonal=None, seed=None):
        self.space = space
        ss = np.random.SeedSequence(seed)
        s_c, s_d = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        self.continuous = GaussianPolicy(space.n_c, hidden, sigma_min, sigma_max, diagonal, s_c)
        self.discrete = CategoricalPolicy(space.categories, hidden, s_d)

    def copy(self) -> "PolicyPair":
        other = PolicyPair.__new__(PolicyPair)
        other.space = self.space
        other.continuous = self.continuous.copy()
        other.discrete = self.discrete.copy()
        return other

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw actions.

        The rng is consumed as: all standard normals for the continuous block
        (sample-major), then one uniform per discrete variable (sample-major).
        Returns one :class:`MixedAction` when ``size`` is None, else arrays
        ``(a_c, a_d)`` of shapes ``(size, n_c)`` and ``(size, n_d)``.
        """
        n = 1 if size is None else int(size)
        space = self.space
        a_c = np.zeros((n, space.n_c))
        if space.n_c:
            L = self.continuous.cholesky()
            z = rng.standard_normal((n, space.n_c))
            a_c = self.continuous.mean + z @ L.T
        a_d = np.zeros((n, space.n_d), dtype=int)
        if space.n_d:
            u = rng.random((n, space.n_d))
            for k, p in enumerate(self.discrete.probabilities()):
                cdf = np.cumsum(p)
                a_d[:, k] = np.minimum(np.searchsorted(cdf, u[:, k] * cdf[-1], side="right"),
                                       len(p) - 1)
        if size is None:
            return MixedAction(a_c[0], a_d[0])
        return a_c, a_d

    def log_prob_continuous(self, a_c, mean=None):
        return self.continuous.log_prob(a_c, mean)

    def log_prob_discrete(self, a_d):
        return self.discrete.log_prob(a_d)

    def log_prob(self, a_c, a_d, mean=None):
        """Joint log-probability: continuous plus discrete."""
        return self.log_prob_continuous(a_c, mean) + self.log_prob_discrete(a_d)


def log_prob_joint(pair: PolicyPair, action: MixedAction, mean=None) -> float:
    return pair.log_prob(action.a_c, action.a_d, mean)


@dataclass
class Buffer:
    """Training samples; ``mean`` is the Gaussian mean the actions were drawn with."""

    a_c: np.ndarray
    a_d: np.ndarray
    old_log_prob: np.ndarray
    advantage: np.ndarray
    mean: np.ndarray | None = None

    def __len__(self):
        return len(self.advantage)


def surrogate_loss(pair: PolicyPair, buffer: Buffer, clip: float = 0.2):
    """Clipped surrogate loss and its gradients.

    Returns ``(loss, grads_continuous, grads_discrete)``; a gradient entry is
    None when the corresponding block is empty.
    """
    if len(buffer) == 0:
        raise UsageError("surrogate loss needs a non-empty buffer")
    adv = np.asarray(buffer.advantage, dtype=float)
    if not np.all(np.isfinite(adv)):
        raise UsageError("advantages must be finite")
    new_lp = pair.log_prob(buffer.a_c, buffer.a_d, buffer.mean)
    ratio = np.exp(new_lp - buffer.old_log_prob)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    loss = -float(np.mean(np.minimum(unclipped, clipped)))
    # the unclipped branch carries the gradient wherever it is the minimum
    active = unclipped <= clipped
    weights = np.where(active, -ratio * adv, 0.0) / len(adv)

    g_c = g_d = None
    if pair.space.n_c:
        g_out = pair.continuous.log_prob_grad(buffer.a_c, weights, buffer.mean)
        g_c = pair.continuous.net.backward(g_out)
    if pair.space.n_d:
        pair.discrete.logits()
        g_d = pair.discrete.net.backward(pair.discrete.log_prob_grad(buffer.a_d, weights))
    return loss, g_c, g_d
