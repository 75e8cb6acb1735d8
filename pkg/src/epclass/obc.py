"""Open-chain diagnostics: spectrum, phase rigidities, bulk gap and in-gap states.

States are indexed by increasing real part of the energy (0-based). The bulk
gap is the spacing between the two continua that meet around the middle of
that list; states strictly between them are the in-gap (mid-gap) states.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .emit import csv_text, scatter_svg
from .linalg import eig_full, rigidities
from .model import model_from_dict, obc_hamiltonian

KAPPA = 5.0


@dataclass(frozen=True)
class ObcReport:
    energies: np.ndarray      # complex, sorted by real part
    rigidities: np.ndarray
    midgap: tuple             # 0-based indices into ``energies``
    gap: float
    edge_weight: np.ndarray
    n_cells: int
    orbitals: int
    lower: int = -1           # last index of the lower continuum
    upper: int = -1           # first index of the upper continuum

    @property
    def bulk_mask(self):
        mask = np.ones(len(self.energies), dtype=bool)
        mask[list(self.midgap)] = False
        return mask

    @property
    def bulk_median_rigidity(self):
        return float(np.median(self.rigidities[self.bulk_mask]))

    def to_csv(self):
        mid = set(self.midgap)
        rows = [(i, e.real, e.imag, r, w, int(i in mid))
                for i, (e, r, w) in enumerate(zip(self.energies, self.rigidities, self.edge_weight))]
        return csv_text(["index", "re_E", "im_E", "rigidity", "edge_weight", "midgap"], rows)

    def to_dict(self):
        return {
            "n_cells": self.n_cells, "orbitals": self.orbitals,
            "ordering": "real part ascending, 0-based",
            "gap": self.gap, "midgap": list(self.midgap),
            "max_abs_im": float(np.max(np.abs(self.energies.imag))),
            "bulk_median_rigidity": self.bulk_median_rigidity,
            "energies": [[e.real, e.imag] for e in self.energies],
            "rigidities": self.rigidities.tolist(),
            "edge_weight": self.edge_weight.tolist(),
        }

    def to_svg(self):
        idx = np.arange(len(self.energies))
        bulk = self.bulk_mask
        spec_plot = scatter_svg(
            [(idx[bulk], self.energies.real[bulk], "#4477aa", 2.5),
             (idx[~bulk], self.energies.real[~bulk], "#ee6677", 3.5)],
            "state index", "Re E", title="open-chain spectrum")
        rig_plot = scatter_svg(
            [(idx[bulk], self.rigidities[bulk], "#4477aa", 2.5),
             (idx[~bulk], self.rigidities[~bulk], "#ee6677", 3.5)],
            "state index", "|r|", title="phase rigidity")
        return spec_plot, rig_plot


def _clusters(x, kappa):
    """Split sorted values wherever the spacing exceeds kappa x typical spacing."""
    if len(x) < 2:
        return [(0, len(x) - 1)]
    dx = np.diff(x)
    typical = max(float(np.median(dx)), 1e-3 * float(np.mean(dx)), np.finfo(float).tiny)
    cuts = np.nonzero(dx > kappa * typical)[0]
    starts = np.concatenate([[0], cuts + 1])
    ends = np.concatenate([cuts, [len(x) - 1]])
    return list(zip(starts.tolist(), ends.tolist()))


def find_gap(x, kappa=KAPPA):
    """Locate the bulk gap in sorted real energies ``x``.

    Returns ``(lower_end, upper_start, gap)``: the last index of the lower
    continuum, the first index of the upper continuum and their distance.
    When the continua are not separated the gap is 0 and both indices are -1.
    """
    n = len(x)
    min_bulk = max(3, n // 10)
    bulk = [c for c in _clusters(x, kappa) if c[1] - c[0] + 1 >= min_bulk]
    below = [c for c in bulk if c[1] < n / 2]
    above = [c for c in bulk if c[0] >= n / 2]
    if not below or not above:
        return -1, -1, 0.0
    lo = below[-1][1]
    hi = above[0][0]
    return lo, hi, float(x[hi] - x[lo])


def obc_report(spec, n_cells, p=None, kappa=KAPPA):
    """Diagonalize the open chain and collect per-state diagnostics."""
    if n_cells < 4:
        raise ValueError("n_cells must be at least 4")
    h = obc_hamiltonian(spec, n_cells, p)
    sys = eig_full(h, balance=True)
    order = np.argsort(sys.values.real, kind="stable")
    energies = sys.values[order]
    right = sys.right[:, order]
    left = sys.left[:, order]
    rig = np.minimum(rigidities(left, right), 1.0)
    b = spec.orbitals
    prob = np.abs(right) ** 2
    prob /= prob.sum(axis=0)
    edge = prob[:b].sum(axis=0) + prob[-b:].sum(axis=0)
    lo, hi, gap = find_gap(energies.real, kappa)
    midgap = tuple(range(lo + 1, hi)) if gap > 0 else ()
    return ObcReport(energies, rig, midgap, gap, edge, n_cells, b, lo, hi)


def _sorted_real_spectrum(args):
    spec_dict, n_cells, point, kappa = args
    rep = obc_report(model_from_dict(spec_dict), n_cells, point, kappa)
    return np.sort(rep.energies.real), len(rep.midgap)


def gap_vs_parameter(spec, n_cells, axis, fixed=None, kappa=KAPPA, workers=1):
    """Bulk gap along a parameter sweep with the in-gap states taken out.

    The same number of in-gap states, the largest count met anywhere on the
    sweep, is removed around the middle of every spectrum, so the gap stays
    comparable from one side of a transition to the other.

    Returns ``(values, gaps, argmin_value)``.
    """
    fixed = dict(fixed or {})
    values = axis.values
    tasks = [(spec.to_dict(), n_cells, {**fixed, axis.param: float(v)}, kappa) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sorted_real_spectrum, tasks))
    else:
        results = [_sorted_real_spectrum(t) for t in tasks]
    m = max(count for _, count in results)
    k = (m + 1) // 2
    gaps = []
    for x, _ in results:
        half = len(x) // 2
        gaps.append(float(x[half + k] - x[half - 1 - k]) if half - 1 - k >= 0 else 0.0)
    gaps = np.array(gaps)
    return values, gaps, float(values[int(np.argmin(gaps))])


def gap_csv(param, values, gaps):
    return csv_text([param, "gap"], zip(values, gaps))
