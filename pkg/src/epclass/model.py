"""Tight-binding models: JSON ingestion, Bloch and open-chain matrices.

A model is a unit cell of ``orbitals`` sites plus a list of hoppings. Each
hopping moves a particle from orbital ``from`` in cell ``i`` to orbital
``to`` in cell ``i + offset`` with an amplitude given as an expression in
the model's named real parameters. Hoppings need not be reciprocal.

Bloch convention: ``h(k)[to, from] += amplitude * exp(+1j * k * offset)``.
"""
import ast
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import EvalError, ModelSemanticError, ModelSyntaxError

_FUNCTIONS = {
    "exp": np.exp, "sqrt": np.sqrt, "cos": np.cos, "sin": np.sin,
    "cosh": np.cosh, "sinh": np.sinh,
}
_CONSTANTS = {"pi": math.pi}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}

BUILTIN_MODELS = ("ssh", "three-band", "sqrt-ep")


class Expression:
    """Arithmetic amplitude expression compiled once and evaluated on arrays."""

    def __init__(self, text):
        self.text = text
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ModelSyntaxError(f"bad amplitude expression {text!r}: {exc.msg}",
                                   line=exc.lineno, col=exc.offset) from None
        self._tree = tree.body
        self.names = set()
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise self._reject(node, "operator")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                raise self._reject(node, "unary operator")
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                raise self._reject(node, "literal")
        elif isinstance(node, ast.Name):
            if node.id not in _CONSTANTS:
                self.names.add(node.id)
        elif isinstance(node, ast.Call):
            if (not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS
                    or len(node.args) != 1 or node.keywords):
                raise self._reject(node, "function call")
            self._check(node.args[0])
        else:
            raise self._reject(node, "construct")

    def _reject(self, node, what):
        return ModelSyntaxError(f"unsupported {what} in amplitude {self.text!r}",
                                line=1, col=getattr(node, "col_offset", 0) + 1)

    def __call__(self, env):
        with np.errstate(all="ignore"):
            return self._eval(self._tree, env)

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in _CONSTANTS:
                return _CONSTANTS[node.id]
            return env[node.id]
        return _FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __eq__(self, other):
        return isinstance(other, Expression) and other.text == self.text

    def __hash__(self):
        return hash(self.text)

    def __repr__(self):
        return f"Expression({self.text!r})"


@dataclass(frozen=True)
class Hopping:
    frm: int
    to: int
    offset: int
    amplitude: Expression

    def as_dict(self):
        return {"from": self.frm, "to": self.to, "offset": self.offset,
                "amplitude": self.amplitude.text}


@dataclass(frozen=True)
class ParamPoint:
    """Parameter values plus an optional crystal momentum ``k`` (radians)."""
    values: dict = field(default_factory=dict)
    k: float = None

    def get(self, name):
        if name == "k":
            return self.k
        return self.values[name]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    orbitals: int
    parameters: dict
    hoppings: tuple

    def __post_init__(self):
        if not isinstance(self.orbitals, int) or self.orbitals < 1:
            raise ModelSemanticError("orbitals must be a positive integer")
        for i, hop in enumerate(self.hoppings):
            for which in ("frm", "to"):
                idx = getattr(hop, which)
                if not 0 <= idx < self.orbitals:
                    label = "from" if which == "frm" else "to"
                    raise ModelSemanticError(
                        f"hoppings[{i}].{label} = {idx} outside [0, {self.orbitals})")
            unknown = hop.amplitude.names - set(self.parameters)
            if unknown:
                raise ModelSemanticError(
                    f"hoppings[{i}] uses unknown parameter(s) {sorted(unknown)}")
        for name in self.parameters:
            if name == "k" or name in _CONSTANTS or name in _FUNCTIONS:
                raise ModelSemanticError(f"reserved parameter name {name!r}")
        amps = self.amplitudes(self.parameters)
        if not all(np.all(np.isfinite(a)) for a in amps):
            raise ModelSemanticError("amplitudes are not finite at the default parameters")

    @property
    def is_lattice(self):
        """True when some hopping crosses cells, so h depends on k."""
        return any(h.offset != 0 for h in self.hoppings)

    def resolve(self, overrides=None):
        """Default parameter values updated by ``overrides``."""
        values = dict(self.parameters)
        for name, val in (overrides or {}).items():
            if name not in values:
                raise ModelSemanticError(f"unknown parameter {name!r} for model {self.name!r}")
            values[name] = val
        return values

    def amplitudes(self, values):
        env = self.resolve(values)
        out = []
        for hop in self.hoppings:
            a = hop.amplitude(env)
            if not np.all(np.isfinite(a)):
                raise EvalError(f"amplitude {hop.amplitude.text!r} is not finite")
            out.append(a)
        return out

    def hamiltonians(self, values=None, k=None):
        """Bloch matrices broadcast over array-valued parameters and ``k``.

        Returns an array of shape ``broadcast_shape + (B, B)``.
        """
        values = dict(values or {})
        if self.is_lattice and k is None:
            raise ModelSemanticError(f"model {self.name!r} is a lattice model; k is required")
        amps = self.amplitudes(values)
        arrays = [np.asarray(a) for a in amps]
        if k is not None:
            arrays.append(np.asarray(k, dtype=float))
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        b = self.orbitals
        h = np.zeros(shape + (b, b), dtype=complex)
        for hop, amp in zip(self.hoppings, amps):
            term = np.asarray(amp, dtype=complex)
            if hop.offset != 0:
                term = term * np.exp(1j * hop.offset * np.asarray(k, dtype=float))
            h[..., hop.to, hop.frm] += term
        return h

    def to_dict(self):
        return {
            "name": self.name,
            "orbitals": self.orbitals,
            "parameters": {k: v for k, v in self.parameters.items()},
            "hoppings": [h.as_dict() for h in self.hoppings],
        }

    def digest(self):
        """Short content hash of the canonical serialization."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _require(obj, key, kind, where):
    if key not in obj:
        raise ModelSemanticError(f"{where}: missing key {key!r}")
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ModelSemanticError(f"{where}.{key} must be an integer")
    if kind is str and not isinstance(val, str):
        raise ModelSemanticError(f"{where}.{key} must be a string")
    return val


def model_from_dict(data):
    if not isinstance(data, dict):
        raise ModelSemanticError("model must be a JSON object")
    name = _require(data, "name", str, "model")
    orbitals = _require(data, "orbitals", int, "model")
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise ModelSemanticError("model.parameters must be an object")
    parameters = {}
    for pname, pval in params.items():
        if isinstance(pval, bool) or not isinstance(pval, (int, float)):
            raise ModelSemanticError(f"parameter {pname!r} must have a real default")
        parameters[pname] = float(pval)
    hops = data.get("hoppings", [])
    if not isinstance(hops, list):
        raise ModelSemanticError("model.hoppings must be an array")
    hoppings = []
    for i, hop in enumerate(hops):
        where = f"hoppings[{i}]"
        if not isinstance(hop, dict):
            raise ModelSemanticError(f"{where} must be an object")
        amp = hop.get("amplitude")
        if isinstance(amp, (int, float)) and not isinstance(amp, bool):
            amp = repr(amp)
        if not isinstance(amp, str):
            raise ModelSemanticError(f"{where}.amplitude must be a string")
        hoppings.append(Hopping(
            frm=_require(hop, "from", int, where),
            to=_require(hop, "to", int, where),
            offset=int(hop.get("offset", 0)),
            amplitude=Expression(amp),
        ))
    return ModelSpec(name=name, orbitals=orbitals, parameters=parameters,
                     hoppings=tuple(hoppings))


def parse_model_spec(text):
    """Parse model JSON text into a :class:`ModelSpec`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, line=exc.lineno, col=exc.colno) from None
    return model_from_dict(data)


def serialize(spec):
    return json.dumps(spec.to_dict(), indent=2) + "\n"


def builtin_text(name):
    if name not in BUILTIN_MODELS:
        raise KeyError(f"no built-in model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
    return resources.files("epclass").joinpath("models").joinpath(f"{name}.json").read_text()


def load_model(name_or_path):
    """Load a built-in model by name or a model file by path."""
    if name_or_path in BUILTIN_MODELS:
        return parse_model_spec(builtin_text(name_or_path))
    with open(name_or_path) as fh:
        return parse_model_spec(fh.read())


def bloch(spec, p):
    """Bloch matrix h(k) at one parameter point."""
    if spec.is_lattice and p.k is None:
        raise ModelSemanticError("bloch() needs a momentum k")
    return spec.hamiltonians(p.values, p.k)


def obc_hamiltonian(spec, n_cells, p=None):
    """Open-boundary chain of ``n_cells`` unit cells; no wrap-around bonds."""
    if n_cells < 2:
        raise ValueError("n_cells must be at least 2")
    values = p.values if isinstance(p, ParamPoint) else (p or {})
    amps = spec.amplitudes(values)
    b = spec.orbitals
    h = np.zeros((b * n_cells, b * n_cells), dtype=complex)
    for hop, amp in zip(spec.hoppings, amps):
        amp = complex(amp)
        for cell in range(n_cells):
            dest = cell + hop.offset
            if 0 <= dest < n_cells:
                h[dest * b + hop.to, cell * b + hop.frm] += amp
    return h
