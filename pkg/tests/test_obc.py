import json
import pathlib

import numpy as np
import pytest

from epclass.model import load_model, obc_hamiltonian
from epclass.obc import find_gap, gap_csv, gap_vs_parameter, obc_report
from epclass.phase_diagram import Axis

GOLDEN = json.loads((pathlib.Path(__file__).parent / "golden" / "obc_rigidity.json").read_text())


def _hermitian_chain(n_cells, t):
    # SSH chain with symmetric hopping: the similarity image of the non-reciprocal one
    n = 2 * n_cells
    h = np.zeros((n, n))
    for c in range(n_cells):
        h[2 * c, 2 * c + 1] = h[2 * c + 1, 2 * c] = 1.0
        if c + 1 < n_cells:
            h[2 * c + 1, 2 * c + 2] = h[2 * c + 2, 2 * c + 1] = t
    return h


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
def test_hermitian_chain_rigidities_are_one(ssh, t):
    rep = obc_report(ssh, 20, {"t": t, "theta": 0.0})
    assert np.allclose(rep.rigidities, 1.0, atol=1e-10)
    h = obc_hamiltonian(ssh, 20, {"t": t, "theta": 0.0})
    assert np.array_equal(h, h.conj().T)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.0])
@pytest.mark.parametrize("t", [0.5, 1.6, 3.0])
def test_spectrum_real_and_similar_to_hermitian_chain(ssh, t, theta):
    rep = obc_report(ssh, 40, {"t": t, "theta": theta})
    assert len(rep.energies) == 80
    assert np.max(np.abs(rep.energies.imag)) <= 1e-8
    ref = np.linalg.eigvalsh(_hermitian_chain(40, t))
    assert np.allclose(np.sort(rep.energies.real), ref, atol=1e-8)
    assert np.all(rep.rigidities >= 0) and np.all(rep.rigidities <= 1 + 1e-9)


def test_non_hermitian_rigidities_below_one(ssh):
    rep = obc_report(ssh, 40, {"t": 1.6, "theta": 0.4})
    assert np.all(rep.rigidities < 1 - 1e-6)


def test_decoupled_dimers_gap(ssh):
    rep = obc_report(ssh, 20, {"t": 0.0, "theta": 0.4})
    assert rep.gap == pytest.approx(2.0, abs=1e-12)
    assert rep.midgap == ()
    _, gaps, _ = gap_vs_parameter(ssh, 20, Axis("t", 0.0, 0.0, 1), fixed={"theta": 0.4})
    assert gaps[0] == pytest.approx(2.0, abs=1e-12)


def test_gap_does_not_depend_on_theta(ssh):
    axis = Axis("t", 0.5, 1.5, 21)
    _, g0, _ = gap_vs_parameter(ssh, 40, axis, fixed={"theta": 0.0})
    _, g4, _ = gap_vs_parameter(ssh, 40, axis, fixed={"theta": 0.4})
    assert np.max(np.abs(g0 - g4)) <= 1e-8


def test_trivial_and_topological_chains(ssh):
    n = 40
    triv = obc_report(ssh, n, {"t": 0.8, "theta": 0.4})
    assert triv.midgap == () and triv.gap > 0
    assert (triv.lower, triv.upper) == (n - 1, n)
    topo = obc_report(ssh, n, {"t": 1.6, "theta": 0.4})
    assert topo.midgap == (n - 1, n)
    edge_r = topo.rigidities[list(topo.midgap)]
    assert np.all(edge_r < GOLDEN["edge_rigidity_max"])
    assert np.all(edge_r < GOLDEN["edge_to_bulk_ratio_max"] * topo.bulk_median_rigidity)
    assert np.all(topo.edge_weight[list(topo.midgap)] > 0.5)


def test_edge_weight_of_hermitian_edge_modes(ssh):
    rep = obc_report(ssh, 40, {"t": 1.6, "theta": 0.0})
    assert np.all(rep.edge_weight[list(rep.midgap)] > 0.5)


@pytest.mark.slow
@pytest.mark.parametrize("t, count", [(0.5, 0), (0.8, 0), (0.94, 0), (1.06, 2), (1.2, 2), (2.0, 2)])
def test_midgap_count_changes_at_unit_hopping(t, count):
    rep = obc_report(load_model("ssh"), 400, {"t": t, "theta": 0.4})
    assert len(rep.midgap) == count


def test_find_gap_simple():
    x = np.r_[np.linspace(-2, -1, 20), [0.0], np.linspace(1, 2, 20)]
    lo, hi, gap = find_gap(x)
    assert (lo, hi) == (19, 21)
    assert gap == pytest.approx(2.0)
    assert find_gap(np.linspace(-1, 1, 40))[2] == 0.0


def test_small_chain_rejected(ssh):
    with pytest.raises(ValueError):
        obc_report(ssh, 3, {"t": 1.0})


def test_outputs(ssh):
    rep = obc_report(ssh, 10, {"t": 1.6, "theta": 0.4})
    lines = rep.to_csv().splitlines()
    assert lines[0] == "index,re_E,im_E,rigidity,edge_weight,midgap"
    assert len(lines) == 21
    d = rep.to_dict()
    assert d["ordering"].startswith("real part")
    spec_svg, rig_svg = rep.to_svg()
    assert "<svg" in spec_svg and "<svg" in rig_svg
    assert gap_csv("t", [0.5], [1.0]).splitlines() == ["t,gap", "0.5,1"]
