"""Policy-based optimization loop for mixed continuous/categorical problems.

Each generation samples a population from the current policy, evaluates it,
whitens the rewards (``reward = -cost``), keeps the best half as elites,
moves the Gaussian mean to a weighted recombination of the elites, and
trains the covariance and logits networks on the elites with a clipped
surrogate loss.
"""
from __future__ import annotations

import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .errors import ConfigurationError, NumericalFault, UsageError
from .gradnet import Adam
from .policy import Buffer, MixedAction, MixedSearchSpace, PolicyPair, map_to_physical

log = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12
WEIGHT_SHIFT = 1e-8


@dataclass
class PboConfig:
    population: int = 32
    elites: int | None = None
    budget: int = 9984
    clip: float = 0.2
    epochs: int = 32
    learning_rate: float = 5e-3
    hidden: tuple = (32,)
    sigma_min: float = 0.02
    sigma_max: float = 1.0
    diagonal: bool | None = None
    clip_norm: float | None = 1.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.elites is None:
            self.elites = self.population // 2
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.population < 2:
            raise ConfigurationError("population must be at least 2")
        if not 0 < self.elites <= self.population:
            raise ConfigurationError("elites must be in (0, population]")
        if self.budget < self.population:
            raise ConfigurationError("budget must be at least one population")
        if self.budget % self.population:
            raise ConfigurationError(
                f"budget {self.budget} is not a multiple of population {self.population}")
        if not self.clip > 0:
            raise ConfigurationError("clip must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be non-negative")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    @property
    def generations(self) -> int:
        return self.budget // self.population


@dataclass
class GenerationRecord:
    a_c: np.ndarray
    a_d: np.ndarray
    physical: np.ndarray
    rewards: np.ndarray
    whitened: np.ndarray
    elites: np.ndarray
    old_log_prob: np.ndarray
    mean: np.ndarray
    degenerate: bool = False

    @property
    def costs(self) -> np.ndarray:
        return -self.rewards


@dataclass
class OptimizationResult:
    best_action: MixedAction
    best_physical: np.ndarray
    best_cost: float
    best_so_far: np.ndarray          # one entry per evaluation
    generation_evaluations: np.ndarray
    generation_mean_cost: np.ndarray
    generation_best_cost: np.ndarray  # best so far at the end of each generation
    policy: PolicyPair
    seed: int
    n_evaluations: int = 0
    faults: list = field(default_factory=list)


def whiten(rewards) -> tuple[np.ndarray, bool]:
    """Standardize with the population (divide-by-N) standard deviation.

    Returns ``(whitened, degenerate)``; a zero-variance input gives zeros and
    ``degenerate=True``.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise UsageError("whitening needs at least 2 rewards")
    std = r.std()
    if std < DEGENERATE_STD:
        return np.zeros_like(r), True
    return (r - r.mean()) / std, False


def select_elites(rewards, count: int) -> np.ndarray:
    """Indices of the ``count`` highest rewards, ties to the lower index, sorted."""
    r = np.asarray(rewards, dtype=float)
    if not 0 < count <= r.size:
        raise UsageError(f"elite count {count} out of range for {r.size} samples")
    order = np.lexsort((np.arange(r.size), -r))
    return np.sort(order[:count])


def recombination_weights(elite_whitened) -> np.ndarray:
    """Non-negative weights summing to one from elite whitened rewards."""
    w = np.asarray(elite_whitened, dtype=float)
    w = w - w.min() + WEIGHT_SHIFT
    return w / w.sum()


def recombine(points, weights) -> np.ndarray:
    """``sum_i w_i x_i`` with the weights normalized to sum to one."""
    w = np.asarray(weights, dtype=float)
    return (w / w.sum()) @ np.atleast_2d(np.asarray(points, dtype=float))


def update_mean(elite_a_c, elite_whitened, current_mean=None) -> np.ndarray:
    """Weighted recombination of elite points, clamped to ``[-1, 1]``.

    If every whitened reward is zero the generation carries no ranking
    information and ``current_mean`` is returned unchanged.
    """
    x = np.atleast_2d(np.asarray(elite_a_c, dtype=float))
    if x.shape[0] == 0:
        raise UsageError("need at least one elite")
    rhat = np.asarray(elite_whitened, dtype=float)
    if current_mean is not None and not np.any(rhat):
        return np.asarray(current_mean, dtype=float).copy()
    m = recombine(x, recombination_weights(rhat))
    return np.clip(m, -1.0, 1.0)


def _as_objective(problem):
    """Return ``f(thicknesses_batch, discrete_batch) -> costs``."""
    if hasattr(problem, "batch_cost"):
        return problem.batch_cost

    def batched(xs, ds):
        return np.array([float(problem(x, d)) for x, d in zip(xs, ds)])
    return batched


def _evaluate(objective, xs, ds, threads, pool):
    if threads == 1 or pool is None:
        return np.asarray(objective(xs, ds), dtype=float)
    chunks = np.array_split(np.arange(len(xs)), threads)
    parts = pool.map(lambda idx: np.asarray(objective(xs[idx], ds[idx]), dtype=float),
                     [c for c in chunks if len(c)])
    return np.concatenate(list(parts))


class PBO:
    """Stateful optimizer; :func:`run` is the one-call interface."""

    def __init__(self, space: MixedSearchSpace, config: PboConfig | None = None):
        self.space = space
        self.config = config or PboConfig()
        cfg = self.config
        ss = np.random.SeedSequence(cfg.seed)
        policy_seed, sample_seed = ss.spawn(2)
        self.policy = PolicyPair(space, cfg.hidden, cfg.sigma_min, cfg.sigma_max, cfg.diagonal,
                                 seed=int(policy_seed.generate_state(1)[0]))
        self.rng = np.random.default_rng(sample_seed)
        self.adam_c = Adam(cfg.learning_rate, clip_norm=cfg.clip_norm)
        self.adam_d = Adam(cfg.learning_rate, clip_norm=cfg.clip_norm)

    def ask(self):
        a_c, a_d = self.policy.sample(self.rng, self.config.population)
        return a_c, a_d

    def tell(self, a_c, a_d, costs) -> GenerationRecord:
        cfg = self.config
        costs = np.asarray(costs, dtype=float)
        mean = self.policy.continuous.mean.copy()
        old_lp = self.policy.log_prob(a_c, a_d, mean)
        rewards = -costs
        rhat, degenerate = whiten(rewards)
        elites = select_elites(rewards, cfg.elites)
        record = GenerationRecord(a_c, a_d, map_to_physical(a_c, self.space), rewards, rhat,
                                  elites, old_lp, mean, degenerate)
        if degenerate:
            return record
        e_rhat = rhat[elites]
        if self.space.n_c:
            self.policy.continuous.mean = update_mean(a_c[elites], e_rhat, mean)
        advantage = e_rhat - e_rhat.mean()
        if np.any(advantage):
            buf = Buffer(a_c[elites], a_d[elites], old_lp[elites], advantage, mean)
            self.train(buf)
        return record

    def train(self, buf: Buffer) -> None:
        from .policy import surrogate_loss

        cfg = self.config
        for _ in range(cfg.epochs):
            _, g_c, g_d = surrogate_loss(self.policy, buf, cfg.clip)
            if g_c is not None:
                self.adam_c.apply(self.policy.continuous.net, g_c)
            if g_d is not None:
                self.adam_d.apply(self.policy.discrete.net, g_d)


def run(problem: Callable | object, space: MixedSearchSpace, config: PboConfig | None = None,
        progress: TextIO | None = None) -> OptimizationResult:
    """Minimize ``problem`` over ``space``.

    ``problem`` is either a callable ``f(x_physical, a_d) -> cost`` or an
    object with ``batch_cost(X_physical, A_d) -> costs``.  Per-generation
    progress lines (tab separated: generation, evaluations, mean cost, best
    cost) go to ``progress`` when given.
    """
    cfg = config or PboConfig()
    opt = PBO(space, cfg)
    objective = _as_objective(problem)
    n_gen = cfg.generations
    best_so_far = np.empty(cfg.budget)
    gen_evals = np.empty(n_gen, dtype=int)
    gen_mean = np.empty(n_gen)
    gen_best = np.empty(n_gen)
    best_cost = np.inf
    best = None
    faults = []
    evals = 0
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for g in range(n_gen):
            a_c, a_d = opt.ask()
            phys = map_to_physical(a_c, space)
            costs = _evaluate(objective, phys, a_d, cfg.threads, pool)
            bad = ~np.isfinite(costs)
            if bad.any():
                if bad.all():
                    raise NumericalFault(f"generation {g}: objective returned no finite cost")
                worst = costs[~bad].max()
                for i in np.flatnonzero(bad):
                    log.warning("generation %d sample %d: non-finite cost replaced by %g",
                                g, i, worst)
                    faults.append((g, int(i)))
                costs = np.where(bad, worst, costs)
            for i, c in enumerate(costs):
                if c < best_cost:
                    best_cost = float(c)
                    best = (a_c[i].copy(), a_d[i].copy(), phys[i].copy())
                best_so_far[evals] = best_cost
                evals += 1
            opt.tell(a_c, a_d, costs)
            gen_evals[g] = evals
            gen_mean[g] = costs.mean()
            gen_best[g] = best_cost
            if g and gen_best[g] > gen_best[g - 1]:
                raise AssertionError("best-so-far history increased")
            if progress is not None:
                print(f"{g}\t{evals}\t{float(gen_mean[g])!r}\t{best_cost!r}", file=progress, flush=True)
    finally:
        if pool is not None:
            pool.shutdown()
    return OptimizationResult(
        best_action=MixedAction(best[0], best[1]),
        best_physical=best[2],
        best_cost=best_cost,
        best_so_far=best_so_far,
        generation_evaluations=gen_evals,
        generation_mean_cost=gen_mean,
        generation_best_cost=gen_best,
        policy=opt.policy.copy(),
        seed=cfg.seed,
        n_evaluations=evals,
        faults=faults,
    )


def progress_to_stderr() -> TextIO:
    return sys.stderr
