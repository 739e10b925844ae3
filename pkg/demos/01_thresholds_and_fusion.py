"""Where the safety thresholds come from and how one cell's score is fused.

Run: python demos/01_thresholds_and_fusion.py
"""

from ttmap.fusion import fuse
from ttmap.geometry import MachineSpec, derive_thresholds, geometric_traversability
from ttmap.semantics import SemanticClass

machine = MachineSpec()  # 35 deg max climb, 10 deg comfortable, 2.75 m track separation
th = derive_thresholds(machine, d_res=0.2)
print(f"critical slope {th.s_cri:.0f} deg, safe slope {th.s_safe:.0f} deg")
print(f"critical step {th.h_cri:.4f} m, safe step {th.h_safe:.4f} m")

# A gentle 12 deg slope with a 0.2 m step is neither safe nor critical.
t = geometric_traversability(12.0, 0.2, th)
print(f"\ngeometry alone scores the cell {t:.3f}")

# Semantic labels override geometry for hazards and for clearly flat ground.
for c in (SemanticClass.WATER, SemanticClass.FLAT, SemanticClass.BUMPY, None):
    name = c.name.lower() if c is not None else "no label"
    s = fuse(c, t)
    print(f"  label {name:<9} -> {s.value:.3f} ({s.source.value})")

# Water looks perfectly flat to a LiDAR, which is the case fusion exists for.
print(f"\nflat water: geometry {geometric_traversability(0.0, 0.0, th):.1f}, "
      f"fused {fuse(SemanticClass.WATER, 1.0).value:.1f}")
