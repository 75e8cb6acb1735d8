"""Exception hierarchy shared by all epclass modules."""


class EpClassError(Exception):
    """Base class for every error raised by epclass."""


# linear algebra

class NonConvergence(EpClassError):
    """The dense eigensolver hit its iteration cap."""


class NearDefective(EpClassError):
    """Two eigenvalues are closer than the requested tolerance."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ZeroVector(EpClassError):
    pass


# model ingestion

class ModelSyntaxError(EpClassError):
    """Malformed model text. Carries 1-based line and column when known."""

    def __init__(self, message, line=None, col=None):
        loc = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.col = col


class ModelSemanticError(EpClassError):
    """Well-formed model text describing an invalid model."""


class EvalError(EpClassError):
    """An amplitude expression evaluated to a non-finite value."""


# continuation and phases

class LoopTouchesEP(EpClassError):
    """The loop passes through (or too close to) an eigenvalue degeneracy."""

    def __init__(self, message, lam=None, gap=None):
        super().__init__(message)
        self.lam = lam
        self.gap = gap


class EndpointMismatch(EpClassError):
    pass


class InvalidCycle(EpClassError):
    pass


class BranchAmbiguity(EpClassError):
    pass


# classification

class UnquantizedPhase(EpClassError):
    def __init__(self, message, phases=()):
        super().__init__(message)
        self.phases = tuple(phases)


class ParityViolation(EpClassError):
    """Barred-cycle count disagrees with the permutation parity."""


class SignatureParseError(EpClassError):
    pass
