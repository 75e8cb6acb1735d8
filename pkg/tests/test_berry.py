import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _models import random_generic, random_loop, random_three_band
from epclass.berry import (Quantized, cycle_phase, cycle_phases, phase_deviation, quantize_phase,
                           wrap_phase)
from epclass.errors import BranchAmbiguity, InvalidCycle, LoopTouchesEP
from epclass.flow import LoopPath, extract_permutation, track_loop


def _circle_distance(a, b):
    d = abs(wrap_phase(a) - wrap_phase(b))
    return min(d, 2 * math.pi - d)


def _phases_by_cycle(flow):
    perm = extract_permutation(flow)
    return {frozenset(p.cycle): p for p in cycle_phases(flow, perm)}


@pytest.mark.parametrize("gamma, expected", [
    (3.14159 + 0.0001j, Quantized.PI),
    (6.2832, Quantized.ZERO),
    (1.5708, Quantized.UNQUANTIZED),
    (-0.004, Quantized.ZERO),
    (-math.pi, Quantized.PI),
])
def test_quantize_examples(gamma, expected):
    assert quantize_phase(gamma) is expected


def test_wrap_phase_range():
    for x in [-7.0, -0.0, 0.0, 2 * math.pi, 13.0, -1e-300]:
        y = wrap_phase(x)
        assert 0 <= y < 2 * math.pi
        assert math.copysign(1, y) == 1
    assert phase_deviation(math.pi + 0.02) == pytest.approx(0.02)


@pytest.mark.parametrize("t, bars", [(0.5, [False, False]), (1.0, [True]), (2.0, [True, True])])
def test_ssh_phases(ssh, t, bars):
    flow = track_loop(ssh, LoopPath.bz(512, fixed={"t": t, "theta": 0.4}))
    phases = cycle_phases(flow, extract_permutation(flow))
    assert [p.barred for p in phases] == bars
    assert all(p.deviation < 1e-3 for p in phases)


def test_sqrt_ep_double_loop(sqrt_ep):
    flow = track_loop(sqrt_ep, LoopPath.circle((0, 0), 1, n=128).repeated(2))
    perm = extract_permutation(flow)
    assert perm.images == (0, 1)
    for p in cycle_phases(flow, perm):
        assert abs(p.gamma.real - math.pi) < 1e-3


def test_invalid_cycle(ssh):
    flow = track_loop(ssh, LoopPath.bz(256, fixed={"t": 2.0, "theta": 0.4}))
    with pytest.raises(InvalidCycle):
        cycle_phase(flow, (0, 1))
    with pytest.raises(InvalidCycle):
        cycle_phase(flow, (5,))
    with pytest.raises(InvalidCycle):
        cycle_phase(flow, ())


def test_branch_ambiguity_on_undersampled_flow(sqrt_ep):
    flow = track_loop(sqrt_ep, LoopPath.circle((0, 0), 1, n=128))
    # keep every 64th sample: neighbouring vectors no longer overlap
    keep = np.r_[0:len(flow.lams):64]
    flow.values, flow.right, flow.left = flow.values[keep], flow.right[keep], flow.left[keep]
    with pytest.raises(BranchAmbiguity):
        cycle_phase(flow, (0, 1))


def _rescaled(flow, rng):
    m, b, n = flow.right.shape
    for arr in ("right", "left"):
        scale = rng.uniform(0.1, 10, size=(m, 1, n)) * np.exp(2j * np.pi * rng.random((m, 1, n)))
        setattr(flow, arr, getattr(flow, arr) * scale)
    return flow


def test_gauge_invariance(rng, three_band):
    for t in [0.3, 0.85, 1.1, 1.7]:
        flow = track_loop(three_band, LoopPath.bz(256, fixed={"t": t, "theta": 0.4}))
        before = _phases_by_cycle(flow)
        after = _phases_by_cycle(_rescaled(flow, rng))
        for key, p in before.items():
            assert _circle_distance(p.gamma.real, after[key].gamma.real) < 1e-10


def test_gauge_invariance_generic(rng):
    spec = random_generic(rng)
    flow = track_loop(spec, LoopPath.bz(256))
    before = _phases_by_cycle(flow)
    after = _phases_by_cycle(_rescaled(flow, rng))
    for key, p in before.items():
        assert _circle_distance(p.gamma.real, after[key].gamma.real) < 1e-10


def _convergence_gap(spec, loop):
    try:
        coarse = track_loop(spec, loop)
    except LoopTouchesEP:
        return None
    if coarse.min_gap <= 1e-2:
        return None
    fine = track_loop(spec, loop.with_samples(2 * loop.n))
    a, b = _phases_by_cycle(coarse), _phases_by_cycle(fine)
    assert a.keys() == b.keys()
    return max(_circle_distance(a[k].gamma.real, b[k].gamma.real) for k in a)


def test_resolution_convergence_generic(rng):
    # no symmetry: phases are arbitrary numbers, which makes convergence visible
    checked = 0
    for _ in range(10):
        spec = random_generic(rng)
        d = _convergence_gap(spec, LoopPath.bz(256))
        if d is not None:
            assert d < 1e-4
            checked += 1
    assert checked >= 5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_resolution_convergence_three_band(seed):
    rng = np.random.default_rng(seed)
    d = _convergence_gap(random_three_band(rng), random_loop(rng))
    if d is not None:
        assert d < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reversal_negates(seed):
    rng = np.random.default_rng(seed)
    if rng.random() < 0.5:
        spec, loop = random_generic(rng), LoopPath.bz(256, fixed={"s": rng.uniform(0, 2)})
    else:
        spec, loop = random_three_band(rng), random_loop(rng)
    try:
        fwd = track_loop(spec, loop)
        back = track_loop(spec, loop.reversed())
    except LoopTouchesEP:
        return
    if fwd.min_gap <= 1e-2:
        return
    a, b = _phases_by_cycle(fwd), _phases_by_cycle(back)
    for key, p in a.items():
        assert _circle_distance(p.gamma.real, -b[key].gamma.real) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parity_rule_on_symmetric_models(seed):
    rng = np.random.default_rng(seed)
    spec = random_three_band(rng)
    try:
        flow = track_loop(spec, random_loop(rng))
    except LoopTouchesEP:
        return
    perm = extract_permutation(flow)
    phases = cycle_phases(flow, perm)
    if any(p.quantized is Quantized.UNQUANTIZED for p in phases):
        return
    assert sum(p.barred for p in phases) % 2 == perm.parity
