"""
Class sequence of the three-band chain
======================================

Walk along t at fixed theta and print each run of equal labels, with the
exceptional points that separate them. At theta = 0.4 a window appears in
which all three bands are cyclically exchanged around the zone.
"""
import itertools
import math
import warnings

from epclass.eps import locate_eps
from epclass.model import load_model
from epclass.phase_diagram import Axis, scan

three = load_model("three-band")
ax = Axis("t", 0.0, 2.0, 201)

for theta in (0.0, 0.1, 0.4):
    row = scan(three, (ax, Axis("theta", theta, theta, 1))).labels[0]
    print(f"theta = {theta}")
    for lab, run in itertools.groupby(zip(ax.values, row), key=lambda item: item[1]):
        run = list(run)
        print(f"  t in [{run[0][0]:.2f}, {run[-1][0]:.2f}]  {lab}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eps = locate_eps(three, {"t": (0, 2), "k": (0, 2 * math.pi)}, fixed={"theta": theta})
    print("  degeneracies: " + ", ".join(f"{e.kind} t={e.x:.4f} k={e.y:.4f}" for e in eps))
