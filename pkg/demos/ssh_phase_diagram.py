"""
Phases of the non-reciprocal two-band chain
===========================================

Classify the Brillouin-zone loop of the two-band chain on a (t, theta)
grid, then compare the boundaries with the exceptional points found by the
discriminant search. Writes ``ssh_phase_diagram.svg`` next to this file.
"""
import math
import pathlib

from epclass.classes import classify_loop
from epclass.eps import locate_eps
from epclass.flow import LoopPath
from epclass.model import load_model
from epclass.phase_diagram import Axis, scan

here = pathlib.Path(__file__).parent
ssh = load_model("ssh")

# One point in each region first. The loop is k from 0 to 2pi.
for t in (0.5, 1.0, 2.0):
    res = classify_loop(ssh, LoopPath.bz(512, fixed={"t": t, "theta": 0.4}))
    phases = ", ".join(f"{p.gamma.real:.4f}" for p in res.phases)
    print(f"t={t}: {res.signature:6s} permutation {res.permutation.images} phases [{phases}]")

# The eigenvalues only merge at two points of the (t, k) plane.
for ep in locate_eps(ssh, {"t": (0, 3), "k": (0, 2 * math.pi)}, fixed={"theta": 0.4}):
    print(f"{ep.kind} at t={ep.x:.6f}, k={ep.y:.6f} (rigidity {ep.coalescence:.1e})")
print(f"exp(-0.4) = {math.exp(-0.4):.6f}, exp(0.4) = {math.exp(0.4):.6f}")

# A coarse diagram is enough to see the three regions.
diagram = scan(ssh, (Axis("t", 0.0, 3.0, 90), Axis("theta", -1.0, 1.0, 30)), samples=128)
for lab in diagram.distinct_labels:
    print(f"{lab:8s} {sum(row.count(lab) for row in diagram.labels)} cells")
(here / "ssh_phase_diagram.svg").write_text(diagram.to_svg(cell=5))
