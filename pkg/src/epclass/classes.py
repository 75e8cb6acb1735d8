"""Exceptional classes: permutation cycle types decorated with Z2 Berry phases.

A class is written as space-separated tokens ``(b?)(length)^(count)``, for
instance ``1^1 b1^2`` (one plain 1-cycle, two 1-cycles carrying a pi phase)
or ``b2^1``. A class is admissible when its number of barred cycles has the
same parity as the permutation.
"""
import itertools
import re
from dataclasses import dataclass

from .berry import Quantized, cycle_phases
from .errors import ParityViolation, SignatureParseError, UnquantizedPhase
from .flow import extract_permutation, track_loop

_TOKEN = re.compile(r"^(b?)([1-9][0-9]*)\^([1-9][0-9]*)$")


@dataclass(frozen=True)
class PermutationClass:
    """Cycle type: ``cycle_counts`` maps cycle length to multiplicity."""
    cycle_counts: tuple  # sorted ((length, count), ...)

    def __post_init__(self):
        counts = dict(self.cycle_counts)
        if any(q < 1 or c < 1 for q, c in counts.items()):
            raise ValueError("cycle lengths and counts must be positive")
        object.__setattr__(self, "cycle_counts", tuple(sorted(counts.items())))

    @classmethod
    def of(cls, perm):
        return cls(tuple(perm.cycle_type().items()))

    @property
    def n(self):
        return sum(q * c for q, c in self.cycle_counts)

    @property
    def parity(self):
        return sum((q - 1) * c for q, c in self.cycle_counts) % 2

    def __str__(self):
        return " ".join(f"{q}^{c}" for q, c in self.cycle_counts)


@dataclass(frozen=True)
class ExceptionalClass:
    """Multiset of ``(length, barred)`` cycles, stored in canonical order."""
    cycles: tuple

    def __post_init__(self):
        cyc = tuple(sorted((int(q), bool(b)) for q, b in self.cycles))
        if not cyc or any(q < 1 for q, _ in cyc):
            raise ValueError("an exceptional class needs positive cycle lengths")
        object.__setattr__(self, "cycles", cyc)
        if self.n_barred % 2 != self.parity:
            raise ParityViolation(
                f"{signature(self)}: {self.n_barred} barred cycle(s) on a permutation "
                f"of parity {self.parity}")

    @property
    def n(self):
        return sum(q for q, _ in self.cycles)

    @property
    def parity(self):
        return sum(q - 1 for q, _ in self.cycles) % 2

    @property
    def n_barred(self):
        return sum(1 for _, b in self.cycles if b)

    @property
    def permutation_class(self):
        counts = {}
        for q, _ in self.cycles:
            counts[q] = counts.get(q, 0) + 1
        return PermutationClass(tuple(counts.items()))

    def __str__(self):
        return signature(self)


def signature(cls):
    """Canonical text label, tokens ordered by length then plain before barred."""
    groups = itertools.groupby(cls.cycles)
    return " ".join(f"{'b' if b else ''}{q}^{len(list(g))}" for (q, b), g in groups)


def parse_signature(text):
    """Inverse of :func:`signature`; tokens may come in any order.

    Raises ``SignatureParseError`` on bad grammar and ``ParityViolation`` on
    a well-formed but inadmissible label.
    """
    tokens = text.split()
    if not tokens:
        raise SignatureParseError("empty signature")
    cycles = []
    for tok in tokens:
        m = _TOKEN.match(tok)
        if not m:
            raise SignatureParseError(f"bad signature token {tok!r}")
        cycles.extend([(int(m.group(2)), m.group(1) == "b")] * int(m.group(3)))
    return ExceptionalClass(tuple(cycles))


def _partitions(n, largest=None):
    # partitions of n as non-increasing tuples, lexicographically ascending
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(1, min(n, largest) + 1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def class_sort_key(cls):
    """Total order used for enumeration: cycle type first, then bar pattern."""
    desc = sorted(cls.cycles, key=lambda c: (-c[0], c[1]))
    return (tuple(q for q, _ in desc), tuple(b for _, b in desc))


def enumerate_classes(n, rule="ParityOnly"):
    """All admissible exceptional classes on ``n`` states.

    Only the parity rule is applied; for ``n >= 4`` this is an upper bound on
    the number of physically distinct classes.
    """
    if rule != "ParityOnly":
        raise ValueError(f"unknown enumeration rule {rule!r}")
    if not 1 <= n <= 8:
        raise ValueError("n must lie in [1, 8]")
    seen = set()
    out = []
    for part in _partitions(n):
        parity = sum(q - 1 for q in part) % 2
        for bars in itertools.product((False, True), repeat=len(part)):
            if sum(bars) % 2 != parity:
                continue
            cls = ExceptionalClass(tuple(zip(part, bars)))
            if cls.cycles not in seen:
                seen.add(cls.cycles)
                out.append(cls)
    return sorted(out, key=class_sort_key)


def classify(perm, phases):
    """Exceptional class from a permutation and one phase per cycle.

    Raises
    ------
    UnquantizedPhase
        Some cycle phase is not within tolerance of 0 or pi.
    ParityViolation
        The bar count disagrees with the permutation parity.
    """
    cycles = {tuple(c) for c in perm.cycles()}
    given = [tuple(p.cycle) for p in phases]
    if len(given) != len(cycles) or {_rotate_min(c) for c in given} != cycles:
        raise ValueError("phases must cover every cycle of the permutation exactly once")
    bad = [p for p in phases if p.quantized is Quantized.UNQUANTIZED]
    if bad:
        raise UnquantizedPhase(
            "unquantized cycle phase(s): " + ", ".join(f"{p.gamma.real:.6g}" for p in bad),
            phases=[p.gamma for p in phases])
    return ExceptionalClass(tuple((len(p.cycle), p.quantized is Quantized.PI) for p in phases))


def _rotate_min(c):
    i = c.index(min(c))
    return c[i:] + c[:i]


@dataclass(frozen=True)
class LoopClassification:
    """Everything computed along the way from a loop to its class."""
    cls: ExceptionalClass
    permutation: object
    phases: tuple
    min_gap: float
    samples: int

    @property
    def signature(self):
        return signature(self.cls)

    def to_dict(self):
        return {"signature": self.signature,
                "permutation": list(self.permutation.images),
                "cycles": [p.to_dict() for p in self.phases],
                "min_gap": self.min_gap, "samples": self.samples}


def classify_loop(spec, loop, tol=1e-8, quant_tol=1e-2):
    """Track ``loop``, extract its permutation and phases, and classify."""
    flow = track_loop(spec, loop, tol=tol)
    perm = extract_permutation(flow)
    phases = tuple(cycle_phases(flow, perm, quant_tol))
    return LoopClassification(classify(perm, phases), perm, phases, flow.min_gap, len(flow.lams))
