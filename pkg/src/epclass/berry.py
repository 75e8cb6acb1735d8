"""Biorthogonal Berry phases of eigenstate cycles from a discrete Wilson loop.

For a cycle ``(i1, ..., ic)`` of the exchange permutation the strands are
chained end to start, so the product runs over ``c`` traversals of the loop.
Each step contributes ``F / <phi_s|psi_s>`` with the forward overlap
``F = <phi_s|psi_{s+1}>``, divided by the square root of the two-way
fidelity ``Q = F B / (<phi_s|psi_s> <phi_{s+1}|psi_{s+1}>)`` where
``B = <phi_{s+1}|psi_s>``. In a biorthonormal gauge that is ``sqrt(F / B)``,
which is odd under reversing the step, so the sum converges quadratically in
the step size. The closure link joins the last sample of one strand to the
first sample of the next. Nothing depends on how the individual
eigenvectors are normalized or phased, so the result is gauge invariant.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchAmbiguity, InvalidCycle
from .flow import MIN_FIDELITY, closure_images

QUANTIZE_TOL = 1e-2


class Quantized(str, enum.Enum):
    ZERO = "0"
    PI = "pi"
    UNQUANTIZED = "unquantized"


def wrap_phase(x):
    """Map an angle onto [0, 2pi)."""
    x = math.fmod(float(x), 2 * math.pi)
    if x < 0:
        x += 2 * math.pi
    return 0.0 if x >= 2 * math.pi else x + 0.0


def phase_deviation(gamma):
    """Distance on the circle from Re(gamma) to the nearest of 0 and pi."""
    x = wrap_phase(np.real(gamma))
    return min(x, abs(x - math.pi), 2 * math.pi - x)


def quantize_phase(gamma, tol=QUANTIZE_TOL):
    """Snap Re(gamma) to 0 or pi (mod 2pi) when within ``tol`` radians."""
    x = wrap_phase(np.real(gamma))
    d0 = min(x, 2 * math.pi - x)
    dpi = abs(x - math.pi)
    if min(d0, dpi) > tol:
        return Quantized.UNQUANTIZED
    return Quantized.ZERO if d0 <= dpi else Quantized.PI


@dataclass(frozen=True)
class CyclePhase:
    cycle: tuple
    gamma: complex
    quantized: Quantized
    deviation: float

    @property
    def barred(self):
        return self.quantized is Quantized.PI

    def to_dict(self):
        return {"cycle": list(self.cycle), "re": self.gamma.real, "im": self.gamma.imag,
                "quantized": self.quantized.value, "deviation": self.deviation}


def _bra_ket(left, right):
    # <left|right> along the state axis; arrays (..., B)
    return np.sum(np.conj(left) * right, axis=-1)


def strand_links(flow):
    """Log step factors along every strand and the fidelity of each step.

    Returns ``(logs, fid)`` with shapes (M-1, N); ``fid`` is the real part of
    the two-way normalized overlap of consecutive vectors.
    """
    r = np.moveaxis(flow.right, -1, -2)  # (M, N, B)
    l = np.moveaxis(flow.left, -1, -2)
    diag = _bra_ket(l, r)                  # <phi_s|psi_s>
    fwd = _bra_ket(l[:-1], r[1:])          # <phi_s|psi_s+1>
    bwd = _bra_ket(l[1:], r[:-1])          # <phi_s+1|psi_s>
    step = fwd / diag[:-1]
    q = step * bwd / diag[1:]
    return np.log(step) - 0.5 * np.log(q), np.real(q)


def _closure_link(flow, i, j):
    psi_end = flow.right[-1, :, i]
    phi_end = flow.left[-1, :, i]
    psi_start = flow.right[0, :, j]
    phi_start = flow.left[0, :, j]
    t = np.vdot(phi_end, psi_start) / np.vdot(phi_end, psi_end)
    q = t * np.vdot(phi_start, psi_end) / np.vdot(phi_start, psi_start)
    return np.log(t) - 0.5 * np.log(q), np.real(q)


def cycle_phase(flow, cycle, tol=QUANTIZE_TOL, closure_tol=1e-8):
    """Complex Berry phase accumulated by one permutation cycle.

    ``gamma = i * sum(log step factors)``; its real part is the geometric
    phase (reported in [0, 2pi)) and its imaginary part the amplification
    exponent.

    Raises
    ------
    InvalidCycle
        ``cycle`` is not a cycle of the flow's permutation.
    BranchAmbiguity
        Some step along the cycle loses eigenvector overlap, so the branch of
        its logarithm is not determined by the sampling.
    """
    cycle = tuple(int(i) for i in cycle)
    images, _ = closure_images(flow.values, closure_tol)
    n = flow.n_states
    if not cycle or len(set(cycle)) != len(cycle) or any(not 0 <= i < n for i in cycle):
        raise InvalidCycle(f"{cycle} is not a set of distinct strand indices")
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        if images[a] != b:
            raise InvalidCycle(f"{cycle} is not a cycle of the exchange permutation")
    logs, fid = strand_links(flow)
    total = 0j
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        worst = float(np.min(fid[:, a])) if len(fid) else 1.0
        link, lfid = _closure_link(flow, a, b)
        if min(worst, lfid) <= MIN_FIDELITY:
            raise BranchAmbiguity(f"strand {a} loses overlap between samples "
                                  f"(fidelity {min(worst, lfid):.3g})")
        total += logs[:, a].sum() + link
    gamma = complex(wrap_phase(-total.imag), total.real)
    return CyclePhase(cycle, gamma, quantize_phase(gamma, tol), phase_deviation(gamma))


def cycle_phases(flow, perm, tol=QUANTIZE_TOL):
    return [cycle_phase(flow, c, tol) for c in perm.cycles()]
