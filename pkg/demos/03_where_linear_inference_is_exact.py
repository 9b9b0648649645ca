"""When one message per edge is enough, and when it is not.

Each agent's state depends on the previous light, and the light's next value
depends on the previous light too.  From three steps on, these two paths form
cycles in the unrolled network.  On the cycle-free graphs the linear-time
sum-product pass reproduces full enumeration.  On the others it is an
approximation, and the joint-slice smoother is the exact (exponential)
alternative.
"""
import numpy as np

from aase.inference import brute_force_posterior, exact_smooth, sum_product_smooth, unroll_dbn
from aase.testing import random_model, random_trace

rng = np.random.default_rng(3)
print("agents steps  cycles  sum-product err  joint-slice err")
for n, t in [(0, 6), (1, 2), (2, 2), (1, 3), (2, 3)]:
    worst_sp = worst_ex = 0.0
    for _ in range(20):
        model = random_model(rng, n_agents=n, max_k=3)
        trace = random_trace(rng, model, t)
        bf = brute_force_posterior(model, trace).marginals
        worst_sp = max(worst_sp, np.abs(sum_product_smooth(model, trace).marginals - bf).max())
        worst_ex = max(worst_ex, np.abs(exact_smooth(model, trace).marginals - bf).max())
    cycles = unroll_dbn(model, t).cycle_rank()
    print(f"{n:6d} {t:5d}  {cycles:6d}  {worst_sp:15.1e}  {worst_ex:15.1e}")
