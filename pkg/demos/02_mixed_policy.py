"""
Sampling from a joint continuous/categorical policy
===================================================

The policy pairs a Gaussian over the continuous variables with one
categorical per discrete variable.  Log-probabilities of a mixed action are
the sum of both parts.
"""
import numpy as np

from pbomix.policy import MixedSearchSpace, PolicyPair, map_to_physical

space = MixedSearchSpace(continuous_bounds=[(50, 150), (0, 1)], categories=[2, 3, 4])
pair = PolicyPair(space, diagonal=False, seed=0)
rng = np.random.default_rng(0)

a_c, a_d = pair.sample(rng, 5)
print("normalized continuous block:\n", np.round(a_c, 3))
print("physical values (clamped to bounds):\n", np.round(map_to_physical(a_c, space), 2))
print("categories:\n", a_d)

# at initialization the networks output almost-flat logits and mid-range sigmas
print("sigma:", np.round(pair.continuous.sigma(), 3))
print("category probabilities:", [np.round(p, 3) for p in pair.discrete.probabilities()])

joint = pair.log_prob(a_c, a_d)
print("log pi(a)      :", np.round(joint, 4))
print("log pi_c + pi_d:", np.round(pair.log_prob_continuous(a_c)
                                     + pair.log_prob_discrete(a_d), 4))
