"""Phase diagrams: classify the Brillouin-zone loop on a 2-D parameter grid.

Rows of the grid (fixed second coordinate) are the unit of parallel work;
each row is tracked as one batch and written back by row index, so the label
grid does not depend on the number of workers or their scheduling.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .berry import QUANTIZE_TOL, cycle_phases
from .classes import classify, parse_signature
from .emit import color_for, csv_text, run_metadata, svg_document, svg_text
from .errors import EpClassError, LoopTouchesEP
from .flow import LoopPath, extract_permutation, track_loops
from .model import model_from_dict

CRITICAL = "Critical"
FAILED = "Failed"
MARKERS = (CRITICAL, FAILED)
DEFAULT_CELL_SAMPLES = 256


@dataclass(frozen=True)
class Axis:
    param: str
    start: float
    stop: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("axis needs at least one point")

    @property
    def values(self):
        return np.linspace(self.start, self.stop, self.n)

    @property
    def step(self):
        return (self.stop - self.start) / (self.n - 1) if self.n > 1 else 0.0

    @classmethod
    def parse(cls, text):
        """``name=from:to:n``"""
        try:
            name, rng = text.split("=", 1)
            a, b, n = rng.split(":")
            return cls(name.strip(), float(a), float(b), int(n))
        except ValueError:
            raise ValueError(f"bad axis {text!r}; expected name=from:to:n") from None

    def to_dict(self):
        return {"param": self.param, "from": self.start, "to": self.stop, "n": self.n}


@dataclass(frozen=True)
class Boundary:
    """Midpoint of a grid edge whose two cells carry different labels."""
    x: float
    y: float
    labels: tuple
    cells: tuple


@dataclass
class PhaseDiagram:
    """``labels[j][i]`` belongs to ``axes[0].values[i]``, ``axes[1].values[j]``."""
    axes: tuple
    labels: list
    meta: dict = field(default_factory=dict)
    boundaries: list = field(default_factory=list)

    def __post_init__(self):
        ax, ay = self.axes
        if len(self.labels) != ay.n or any(len(row) != ax.n for row in self.labels):
            raise ValueError("label grid does not match the axes")

    @property
    def distinct_labels(self):
        return sorted({lab for row in self.labels for lab in row})

    def to_csv(self):
        ax, ay = self.axes
        xs, ys = ax.values, ay.values
        rows = [(xs[i], ys[j], self.labels[j][i]) for j in range(ay.n) for i in range(ax.n)]
        return csv_text([ax.param, ay.param, "signature"], rows)

    def to_dict(self):
        return {
            "meta": self.meta,
            "axes": [a.to_dict() for a in self.axes],
            "labels": self.labels,
            "boundaries": [{"x": b.x, "y": b.y, "labels": list(b.labels)} for b in self.boundaries],
        }

    def to_svg(self, cell=3):
        return diagram_svg(self, cell)


def classify_flow(flow):
    """Signature of a tracked flow, or a marker when classification is refused."""
    if isinstance(flow, LoopTouchesEP):
        return CRITICAL
    try:
        perm = extract_permutation(flow)
        return str(classify(perm, cycle_phases(flow, perm, QUANTIZE_TOL)))
    except EpClassError:
        # unquantized phases, parity violations, open strands, lost overlap
        return FAILED


def scan_row(spec, ax, y_name, y, fixed, samples=DEFAULT_CELL_SAMPLES, tol=1e-8):
    """Labels for one grid row (``y_name = y`` fixed, ``ax`` swept)."""
    base = dict(fixed)
    base[y_name] = float(y)
    loops = []
    for x in ax.values:
        pt = dict(base)
        pt[ax.param] = float(x)
        loops.append(LoopPath.bz(samples, fixed=pt))
    return [classify_flow(f) for f in track_loops(spec, loops, tol=tol)]


def _row_task(args):
    spec_dict, ax, y_name, y, fixed, samples, tol = args
    return scan_row(model_from_dict(spec_dict), ax, y_name, y, fixed, samples, tol)


def scan(spec, axes, fixed=None, samples=DEFAULT_CELL_SAMPLES, tol=1e-8, workers=1):
    """Classify the BZ loop at every point of the ``axes[0] x axes[1]`` grid.

    ``fixed`` overrides the remaining model parameters. Cells whose loop
    touches a degeneracy are labeled ``Critical``; cells whose phases are not
    quantized (or fail otherwise) are labeled ``Failed``.
    """
    ax, ay = axes
    fixed = dict(fixed or {})
    spec.resolve({**fixed, ax.param: 0.0, ay.param: 0.0})
    tasks = [(spec.to_dict(), ax, ay.param, y, fixed, samples, tol) for y in ay.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(_row_task, tasks, chunksize=1))
    else:
        labels = [_row_task(t) for t in tasks]
    meta = run_metadata(spec, grid=[a.to_dict() for a in axes], fixed=dict(sorted(fixed.items())),
                        samples=samples, tol=tol, loop="bz k:0..2pi")
    diagram = PhaseDiagram(tuple(axes), labels, meta)
    diagram.boundaries = detect_boundaries(diagram)
    return diagram


def detect_boundaries(diagram):
    """Every 4-neighbor label change, reported at the shared edge midpoint.

    Marker cells take part like any other label, so a row of ``Critical``
    cells produces boundary points on both of its sides.
    """
    ax, ay = diagram.axes
    xs, ys = ax.values, ay.values
    lab = diagram.labels
    out = []
    for j in range(ay.n):
        for i in range(ax.n):
            if i + 1 < ax.n and lab[j][i] != lab[j][i + 1]:
                out.append(Boundary(0.5 * (xs[i] + xs[i + 1]), float(ys[j]),
                                    (lab[j][i], lab[j][i + 1]), ((j, i), (j, i + 1))))
            if j + 1 < ay.n and lab[j][i] != lab[j + 1][i]:
                out.append(Boundary(float(xs[i]), 0.5 * (ys[j] + ys[j + 1]),
                                    (lab[j][i], lab[j + 1][i]), ((j, i), (j + 1, i))))
    return out


def check_labels(diagram):
    """Parse every non-marker label; raises on an invalid signature."""
    for row in diagram.labels:
        for lab in row:
            if lab not in MARKERS:
                parse_signature(lab)


def diagram_svg(diagram, cell=3):
    ax, ay = diagram.axes
    labels = diagram.distinct_labels
    pad_l, pad_t, pad_b = 50, 20, 40
    legend_w = 140
    w = pad_l + ax.n * cell + 20 + legend_w
    h = pad_t + ay.n * cell + pad_b
    h = max(h, pad_t + 20 * len(labels) + pad_b)
    body = []
    # rows drawn top = largest y
    for j in range(ay.n):
        yy = pad_t + (ay.n - 1 - j) * cell
        row = diagram.labels[j]
        i = 0
        while i < ax.n:
            k = i
            while k + 1 < ax.n and row[k + 1] == row[i]:
                k += 1
            body.append(f'<rect x="{pad_l + i * cell}" y="{yy}" width="{(k - i + 1) * cell}" '
                        f'height="{cell}" fill="{color_for(row[i], labels)}"/>\n')
            i = k + 1
    for b in diagram.boundaries:
        (j0, i0), (j1, i1) = b.cells
        cx = pad_l + (0.5 * (i0 + i1) + 0.5) * cell
        cy = pad_t + (ay.n - 1 - 0.5 * (j0 + j1) + 0.5) * cell
        body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{cell * 0.35:.2f}" fill="#000000"/>\n')
    gx = pad_l + ax.n * cell + 20
    for n, lab in enumerate(labels):
        body.append(f'<rect x="{gx}" y="{pad_t + 20 * n}" width="14" height="14" '
                    f'fill="{color_for(lab, labels)}" stroke="#000000"/>\n')
        body.append(svg_text(gx + 20, pad_t + 20 * n + 12, lab))
    bottom = pad_t + ay.n * cell
    body.append(svg_text(pad_l, bottom + 16, f"{ax.start:g}"))
    body.append(svg_text(pad_l + ax.n * cell, bottom + 16, f"{ax.stop:g}", anchor="end"))
    body.append(svg_text(pad_l + ax.n * cell / 2, bottom + 32, ax.param, anchor="middle"))
    body.append(svg_text(pad_l - 4, bottom, f"{ay.start:g}", anchor="end"))
    body.append(svg_text(pad_l - 4, pad_t + 10, f"{ay.stop:g}", anchor="end"))
    body.append(svg_text(14, pad_t + ay.n * cell / 2, ay.param, anchor="middle"))
    return svg_document(w, h, body)
