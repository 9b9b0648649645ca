"""A two-state light seen through a noisy sensor.

With no agents the estimator is an ordinary hidden Markov model.  This walks
through the smallest case by hand and checks the library against it.
"""
import numpy as np

from aase import AgentAwareModel, GlobalChain, ObservationTrace, StateSpace, hmm_smooth, sum_product_smooth

chain = GlobalChain(
    StateSpace(("A", "B")),
    prior=np.array([0.5, 0.5]),
    transition=np.array([[0.9, 0.1], [0.1, 0.9]]),
    obs_space=StateSpace(("a", "b")),
    obs=np.array([[0.8, 0.2], [0.2, 0.8]]),
)
model = AgentAwareModel(chain)

# one reading of "a": Bayes' rule gives 0.8 * 0.5 / (0.8 * 0.5 + 0.2 * 0.5)
post = sum_product_smooth(model, ObservationTrace([0]))
print("P(A | a) =", post.marginals[0, 0])

# two readings: predict 0.74 for A, then weigh by the sensor
by_hand = 0.74 * 0.8 / (0.74 * 0.8 + 0.26 * 0.2)
filt = sum_product_smooth(model, ObservationTrace([0, 0]), mode="filter")
print(f"filtered P(A at step 2) = {filt.marginals[1, 0]:.4f}   by hand {by_hand:.4f}")

# the general estimator and the plain HMM agree to the last bit
obs = [0, 1, -1, -1, 1, 0]
a = sum_product_smooth(model, ObservationTrace(obs)).marginals
b = hmm_smooth(chain, obs).marginals
print("largest difference to the HMM:", np.abs(a - b).max())
