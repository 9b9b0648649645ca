"""Inference time against the number of observed cars.

Each car adds a fixed amount of work per step, so wall time should rise in a
straight line with the car count.
"""
from aase.harness import BenchConfig, run_bench

report = run_bench(BenchConfig(n_list=[0, 4, 8, 16, 32], horizon=300))
for n, ms in zip(report.n_list, report.median_ms):
    print(f"{n:3d} cars  {ms:7.1f} ms  " + "#" * int(ms / 10))
print(f"\nfit: {report.slope:.1f} ms per car + {report.intercept:.1f} ms   (R^2 = {report.r_squared:.4f})")
print(f"32 cars / 16 cars = {report.ratio(32, 16):.2f}")
