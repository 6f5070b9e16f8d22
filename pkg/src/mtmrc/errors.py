"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: DimensionMismatchError and file/parse
problems exit 2, NotInvertibleError 3, KernelValidationError 4,
NumericalError 5.
"""


class MtmrcError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(MtmrcError, ValueError):
    """Operands have incompatible grids, state counts, or array shapes."""


class ArgumentError(MtmrcError, ValueError):
    """An argument is outside its documented domain."""


class NotInvertibleError(MtmrcError):
    """The sequence has no convolutional inverse (singular origin matrix)."""


class KernelValidationError(MtmrcError):
    """A semi-Markov kernel condition is violated.

    Attributes
    ----------
    condition : str
        Which kernel condition failed: "i" (nonnegativity), "ii" (row
        mass), or "iii" (mass at the origin).
    state : int
        Row (current state, 0-based) where the violation was found.
    """

    def __init__(self, message: str, condition: str, state: int):
        super().__init__(message)
        self.condition = condition
        self.state = state


class NumericalError(MtmrcError):
    """A numerical sanity check failed (e.g. large imaginary residue)."""


class IrreducibilityError(MtmrcError):
    """The embedded chain is reducible; ergodic quantities are undefined."""
