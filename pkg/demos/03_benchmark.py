"""Run the bundled nine-scenario benchmark in both modes.

Each scenario is surveyed once, mapped with and without semantics, and every
trial plans to a random safe goal; a trial fails if the planner finds no path
or if the returned path crosses a ground-truth hazard when replayed.

Run: python demos/03_benchmark.py   (a few minutes on one core)
"""

import time

from ttmap.simulator import benchmark, default_suite

t0 = time.perf_counter()
result = benchmark(default_suite(), trials=10, seed=0,
                   progress=lambda o: print(f"  {o.scenario} #{o.trial} {o.mode}: {o.result.value}"))
print()
print(result.format_table())
print(f"\n{time.perf_counter() - t0:.0f} s")
