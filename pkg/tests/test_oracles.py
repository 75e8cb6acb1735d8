"""Independent reference computations checked against the package."""
import itertools
import json
import math
import pathlib

import mpmath
import numpy as np
import pytest
import sympy as sp

from epclass.eps import discriminant, locate_eps
from epclass.flow import pair_step
from epclass.linalg import cubic_roots, eig_batch
from epclass.model import ParamPoint
from epclass.obc import obc_report

GOLDEN = pathlib.Path(__file__).parent / "golden"


def _match_sorted(a, b):
    a = sorted(a, key=lambda z: (round(z.real, 6), round(z.imag, 6)))
    b = sorted(b, key=lambda z: (round(z.real, 6), round(z.imag, 6)))
    return max(abs(x - y) for x, y in zip(a, b))


def test_cubic_roots_match_high_precision(rng):
    mpmath.mp.dps = 50
    for _ in range(200):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        ours = cubic_roots(*c)
        ref = [complex(r) for r in mpmath.polyroots([1, *[mpmath.mpc(z.real, z.imag) for z in c]],
                                                     maxsteps=200, extraprec=100)]
        assert _match_sorted(list(ours), ref) < 1e-10


def test_eigenvalues_3x3_match_high_precision(rng):
    mpmath.mp.dps = 40
    for _ in range(50):
        h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        w, _, _ = eig_batch(h)
        ref = mpmath.eig(mpmath.matrix(h.tolist()), left=False, right=False)
        assert _match_sorted(list(w), [complex(z) for z in ref]) < 1e-11


def _brute_force(prev, nxt):
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(len(prev))):
        cost = sum(abs(prev[i] - nxt[perm[i]]) for i in range(len(prev)))
        if cost < best_cost:
            best, best_cost = perm, cost
    return best, best_cost


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_pair_step_equals_exhaustive_search(rng, n):
    for _ in range(100 if n < 7 else 10):
        prev = rng.normal(size=n) + 1j * rng.normal(size=n)
        nxt = rng.normal(size=n) + 1j * rng.normal(size=n)
        perm, cost = _brute_force(prev, nxt)
        got = pair_step(prev, nxt)
        assert got.images == perm
        assert got.cost == pytest.approx(cost, rel=1e-12)


def test_ssh_discriminant_symbolic(ssh):
    d, t, th, k = sp.symbols("d t theta k", real=True)
    off_01 = d + t * sp.exp(th) * sp.exp(sp.I * k)
    off_10 = d + t * sp.exp(-th) * sp.exp(-sp.I * k)
    h = sp.Matrix([[0, off_01], [off_10, 0]])
    disc = sp.expand(h.trace() ** 2 - 4 * h.det())
    assert sp.simplify(disc - 4 * off_01 * off_10) == 0
    f = sp.lambdify((d, t, th, k), disc, "numpy")
    rng = np.random.default_rng(5)
    for _ in range(20):
        vals = {"d": rng.uniform(0.2, 2), "t": rng.uniform(0, 3), "theta": rng.uniform(-1, 1)}
        kk = rng.uniform(0, 2 * np.pi)
        ours = discriminant(ssh, ParamPoint(vals, kk))
        ref = complex(f(vals["d"], vals["t"], vals["theta"], kk))
        assert abs(ours - ref) < 1e-12 * max(1.0, abs(ref))
    # zero at the EP
    assert abs(discriminant(ssh, ParamPoint({"t": math.exp(-0.4), "theta": 0.4}, math.pi))) < 1e-14


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@pytest.mark.parametrize("theta", ["0.1", "0.4"])
def test_three_band_eps_match_frozen_oracle(three_band, theta):
    golden = json.loads((GOLDEN / "three_band_eps.json").read_text())["eps"][theta]
    found = locate_eps(three_band, {"t": (0.0, 2.0), "k": (0.0, 2 * math.pi)},
                       fixed={"theta": float(theta)})
    assert len(found) == 4
    assert all(e.kind == "EP" for e in found)
    got = sorted((e.x, e.y) for e in found)
    for (t, k), (t_ref, k_ref) in zip(got, sorted(map(tuple, golden))):
        assert abs(t - t_ref) < 1e-6
        assert abs(k - k_ref) < 1e-6


def test_obc_rigidities_match_similarity_oracle(ssh):
    golden = json.loads((GOLDEN / "obc_rigidity.json").read_text())
    n = golden["n_cells"]
    for t, ref in golden["points"].items():
        rep = obc_report(ssh, n, {"t": float(t), "theta": golden["theta"]})
        mid = [n - 1, n]
        assert np.allclose(rep.energies.real[mid], ref["energies_mid"], atol=1e-9)
        assert np.allclose(rep.rigidities[mid], ref["rigidity_mid"], rtol=1e-6)
