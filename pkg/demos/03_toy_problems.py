"""
Two small problems
==================

A 1-D quadratic and a pure categorical matching task: quick checks that the
optimizer contracts its Gaussian and sharpens its categoricals.
"""
import numpy as np

from pbomix.pbo import PboConfig, run
from pbomix.policy import MixedSearchSpace

# (x - 0.3)^2 on [-1, 1]
result = run(lambda x, d: (x[0] - 0.3) ** 2, MixedSearchSpace([(-1.0, 1.0)], []),
             PboConfig(budget=3200, seed=0))
print(f"quadratic: best x = {result.best_physical[0]:.5f}, cost = {result.best_cost:.2e}, "
      f"final sigma = {result.policy.continuous.sigma()[0]:.3f}")

# number of mismatches against a hidden assignment of three 4-way variables
target = np.array([3, 0, 2])
result = run(lambda x, d: float(np.sum(d != target)), MixedSearchSpace([], [4, 4, 4]),
             PboConfig(budget=2016, seed=1))
first_hit = int(np.argmax(result.best_so_far == 0))
print(f"matching: best {result.best_action.a_d} after {first_hit + 1} evaluations")
for k, p in enumerate(result.policy.discrete.probabilities()):
    print(f"  variable {k}: P = {np.round(p, 3)}")

# mixing both kinds of variables
space = MixedSearchSpace([(-5.0, 5.0)] * 3, [3, 3])


def mixed(x, d):
    shift = np.array([-2.0, 0.0, 2.0])[d[0]]
    return float(np.sum((x - shift) ** 2) + (d[1] != 1))


result = run(mixed, space, PboConfig(budget=3200, seed=2))
print(f"mixed: best cost {result.best_cost:.2e}, x = {np.round(result.best_physical, 3)}, "
      f"d = {result.best_action.a_d}")
