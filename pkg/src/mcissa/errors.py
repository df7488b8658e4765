"""Exception hierarchy shared by the library and the command line front end."""


class MCissaError(Exception):
    """Base class for all errors raised by mcissa."""


class ParameterError(MCissaError, ValueError):
    """An argument is outside its admissible range (window length, indices...)."""


class PanelFormatError(MCissaError, ValueError):
    """A panel file or array violates the panel contract."""


class GroupingError(ParameterError):
    """A grouping specification is malformed or its groups overlap."""


class RecipeError(MCissaError, ValueError):
    """A synthetic signal recipe violates its schema."""


class NumericalError(MCissaError, ArithmeticError):
    """A numerical consistency check failed (indefinite spectrum, non-orthonormal basis)."""
