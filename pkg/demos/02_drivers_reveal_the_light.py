"""Reading a hidden traffic light off the cars around it.

The observer's camera sees only the light for its own direction.  Over ten
runs we hide a growing share of camera frames and compare the light-only
model with the agent-aware one.
"""
import numpy as np

from aase import OcclusionPattern, TrafficConfig, accuracy, apply_occlusion, build_traffic_model, simulate
from aase.inference import hmm_smooth, map_sequence, sum_product_smooth

model = build_traffic_model(TrafficConfig(n_parallel=3, n_perpendicular=3))
runs = [simulate(model, horizon=300, seed=seed) for seed in range(10)]

for fraction in (0.0, 0.5, 1.0):
    aware = blind = 0.0
    for truth, trace in runs:
        labels = truth.global_labels(model)
        seen = apply_occlusion(trace, OcclusionPattern("ContStart", fraction))
        aware += accuracy(map_sequence(sum_product_smooth(model, seen)), labels) / len(runs)
        blind += accuracy(map_sequence(hmm_smooth(model.global_chain, seen.global_obs)), labels) / len(runs)
    print(f"first {fraction:4.0%} of frames hidden: agent-aware {aware:.2f}   light only {blind:.2f}   (10 runs)")

# With no frames at all, both lights are still tracked through the cars that
# obey them.  A car says nothing once it has left the stop line, so the
# estimate is sharpest early in the run and fades later.
truth, trace = simulate(model, horizon=300, seed=11)
labels = truth.global_labels(model)
seen = apply_occlusion(trace, OcclusionPattern("ContStart", 1.0))
post = sum_product_smooth(model, seen)
print("\nstep  truth          estimate       P(estimate)")
for tau in range(0, 60, 6):
    j = int(np.argmax(post.marginals[tau]))
    print(f"{tau + 1:4d}  {labels[tau]:13s}  {model.global_chain.space.labels[j]:13s}  {post.marginals[tau, j]:.2f}")
