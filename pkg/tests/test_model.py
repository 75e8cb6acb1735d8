import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epclass.errors import ModelSemanticError, ModelSyntaxError
from epclass.model import (BUILTIN_MODELS, ParamPoint, bloch, builtin_text, load_model,
                           model_from_dict, obc_hamiltonian, parse_model_spec, serialize)


def test_ssh_bloch_matches_closed_form(ssh):
    for t, theta, k in [(1.0, 0.4, math.pi), (0.5, -0.3, 1.1), (2.0, 0.0, 0.0)]:
        h = bloch(ssh, ParamPoint({"t": t, "theta": theta}, k))
        assert h[0, 0] == 0 and h[1, 1] == 0
        assert h[0, 1] == pytest.approx(1 + t * math.exp(theta) * np.exp(1j * k))
        assert h[1, 0] == pytest.approx(1 + t * math.exp(-theta) * np.exp(-1j * k))


def test_three_band_bloch_matches_closed_form(three_band):
    t, theta, k = 0.7, 0.1, 0.9
    h = bloch(three_band, ParamPoint({"t": t, "theta": theta}, k))
    ref = np.array([
        [0, 1, 0.2 + t * math.exp(theta) * np.exp(-1j * k)],
        [1, 0, 1],
        [0.2 + t * math.exp(-theta) * np.exp(1j * k), 1, 0],
    ])
    assert np.allclose(h, ref)


def test_obc_two_cells(ssh):
    t, theta = 0.8, 0.4
    h = obc_hamiltonian(ssh, 2, {"t": t, "theta": theta})
    ref = np.array([
        [0, 1, 0, 0],
        [1, 0, t * math.exp(-theta), 0],
        [0, t * math.exp(theta), 0, 1],
        [0, 0, 1, 0],
    ])
    assert np.allclose(h, ref)


def test_lattice_model_needs_k(ssh):
    with pytest.raises(ModelSemanticError):
        bloch(ssh, ParamPoint({"t": 1.0}))


def test_sqrt_ep_broadcasts(sqrt_ep):
    a = np.linspace(-1, 1, 7)
    h = sqrt_ep.hamiltonians({"alpha": a, "beta": 0.5})
    assert h.shape == (7, 2, 2)
    assert np.allclose(h[:, 1, 0], a + 0.5j)


@pytest.mark.parametrize("name", BUILTIN_MODELS)
def test_round_trip(name):
    spec = load_model(name)
    again = parse_model_spec(serialize(spec))
    assert again == spec
    assert again.digest() == spec.digest()
    assert parse_model_spec(builtin_text(name)) == spec


@pytest.mark.parametrize("text, line", [
    ('{"name": "x", "orbitals": 2,\n "hoppings": [}', 2),
    ("not json", 1),
])
def test_syntax_errors_carry_location(text, line):
    with pytest.raises(ModelSyntaxError) as info:
        parse_model_spec(text)
    assert info.value.line == line


@pytest.mark.parametrize("data", [
    {"name": "x", "orbitals": 2, "hoppings": [{"from": 0, "to": 2, "amplitude": "1"}]},
    {"name": "x", "orbitals": 2, "hoppings": [{"from": 0, "to": 1, "amplitude": "q"}]},
    {"name": "x", "orbitals": 0},
    {"name": "x", "orbitals": 2, "parameters": {"k": 1.0}},
    {"orbitals": 2},
])
def test_semantic_errors(data):
    with pytest.raises(ModelSemanticError):
        model_from_dict(data)


@pytest.mark.parametrize("amp", ["__import__('os')", "a.b", "[1]", "lambda: 1", "exp(1, 2)"])
def test_expressions_are_restricted(amp):
    with pytest.raises(ModelSyntaxError):
        model_from_dict({"name": "x", "orbitals": 1, "parameters": {"a": 1.0},
                         "hoppings": [{"from": 0, "to": 0, "amplitude": amp}]})


def test_unknown_override(ssh):
    with pytest.raises(ModelSemanticError):
        ssh.resolve({"nope": 1.0})


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3),
                                             st.integers(-2, 2), st.floats(-3, 3)),
                                   min_size=1, max_size=8))
def test_random_models_round_trip_and_hermitian_limit(b, hops):
    data = {"name": "r", "orbitals": b, "parameters": {"g": 1.0},
            "hoppings": [{"from": f % b, "to": t % b, "offset": o, "amplitude": f"g*{a!r}"}
                         for f, t, o, a in hops]}
    spec = model_from_dict(data)
    assert parse_model_spec(serialize(spec)) == spec
    # symmetrized hoppings give Hermitian Bloch matrices
    sym = dict(data)
    sym["hoppings"] = data["hoppings"] + [
        {"from": h["to"], "to": h["from"], "offset": -h["offset"], "amplitude": h["amplitude"]}
        for h in data["hoppings"]]
    herm = model_from_dict(sym)
    h = herm.hamiltonians({}, k=np.linspace(0, 2 * np.pi, 9)) if herm.is_lattice \
        else herm.hamiltonians({})
    assert np.allclose(h, np.conj(np.swapaxes(h, -1, -2)))


@pytest.mark.parametrize("name", ["ssh", "three-band"])
def test_bloch_is_periodic(name):
    spec = load_model(name)
    k = np.linspace(-7, 7, 31)
    a = spec.hamiltonians({"t": 1.3, "theta": 0.4}, k=k)
    b = spec.hamiltonians({"t": 1.3, "theta": 0.4}, k=k + 2 * np.pi)
    assert np.max(np.abs(a - b)) <= 1e-14


@pytest.mark.parametrize("name", ["ssh", "three-band"])
def test_reciprocal_chain_is_hermitian(name):
    h = obc_hamiltonian(load_model(name), 12, {"t": 0.9, "theta": 0.0})
    assert np.array_equal(h, h.conj().T)
