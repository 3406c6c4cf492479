"""Exception hierarchy shared across the package."""


class DiscoKernelError(Exception):
    """Base class for all package errors."""


# grammar
class UnknownWord(DiscoKernelError, KeyError):
    def __init__(self, token):
        self.token = token
        super().__init__(f"unknown word: {token!r}")

    def __str__(self):
        return self.args[0]


class NoReduction(DiscoKernelError):
    pass


class LexiconError(DiscoKernelError, ValueError):
    pass


# circuits
class UnsupportedAnsatz(DiscoKernelError, ValueError):
    pass


class DiagramNotSentence(DiscoKernelError, ValueError):
    pass


class MissingSymbol(DiscoKernelError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"no value bound for symbol {name!r}")

    def __str__(self):
        return self.args[0]


class PostSelectConflict(DiscoKernelError, ValueError):
    pass


class WireMapNotInjective(DiscoKernelError, ValueError):
    pass


class InvalidCircuit(DiscoKernelError, ValueError):
    pass


# simulation
class UnboundCircuit(DiscoKernelError, ValueError):
    pass


class PostSelectImpossible(DiscoKernelError):
    def __init__(self, success_prob):
        self.success_prob = success_prob
        super().__init__(f"post-selection success probability {success_prob:.3e} is below 1e-12")


class TooManyQubits(DiscoKernelError, MemoryError):
    pass


# models
class PredictionFailed(DiscoKernelError):
    pass


class EmptyDataset(DiscoKernelError, ValueError):
    pass


class KernelEvalFailed(DiscoKernelError):
    def __init__(self, i, j, cause=None):
        self.i, self.j, self.cause = i, j, cause
        super().__init__(f"kernel evaluation failed for pair ({i}, {j}): {cause}")


# svm
class NotSquare(DiscoKernelError, ValueError):
    pass


class DegenerateLabels(DiscoKernelError, ValueError):
    pass


class LengthMismatch(DiscoKernelError, ValueError):
    pass


class TooLarge(DiscoKernelError, ValueError):
    pass


# data
class InsufficientCombinations(DiscoKernelError, ValueError):
    def __init__(self, n, available):
        self.n, self.available = n, available
        super().__init__(f"requested {n} distinct sentences but only {available} are available")


class TooSmall(DiscoKernelError, ValueError):
    pass


class DatasetFormatError(DiscoKernelError, ValueError):
    pass


class GramFailed(DiscoKernelError):
    """One or more Gram entries could not be evaluated; no partial matrix is returned."""

    def __init__(self, failures):
        self.failures = list(failures)
        pairs = ", ".join(f"({f.i}, {f.j})" for f in self.failures[:5])
        more = "" if len(self.failures) <= 5 else f" and {len(self.failures) - 5} more"
        super().__init__(f"{len(self.failures)} kernel entries failed: {pairs}{more}")
