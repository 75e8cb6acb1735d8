"""
Encircling a square-root branch point
=====================================

For h = [[0, 1], [alpha + i beta, 0]] the eigenvalues are +-sqrt(alpha + i beta).
One turn around the origin swaps them, and the resulting two-state cycle
carries phase pi. Two turns return each state to itself with phase pi, and
four turns make both phases trivial.
"""
from epclass.berry import cycle_phases
from epclass.classes import classify
from epclass.flow import LoopPath, extract_permutation, track_loop
from epclass.model import load_model

toy = load_model("sqrt-ep")

for turns in (1, 2, 3, 4):
    loop = LoopPath.circle((0.0, 0.0), 1.0, n=128).repeated(turns)
    flow = track_loop(toy, loop)
    perm = extract_permutation(flow)
    phases = cycle_phases(flow, perm)
    print(f"{turns} turn(s): permutation {perm.images}, class {classify(perm, phases)}, "
          f"phases {[round(p.gamma.real, 6) for p in phases]}")

# A circle that misses the branch point does nothing.
flow = track_loop(toy, LoopPath.circle((2.0, 0.0), 1.0, n=128))
perm = extract_permutation(flow)
print("off-centre circle:", perm.images, classify(perm, cycle_phases(flow, perm)))
