"""Exception hierarchy shared by every qsheaf module."""


class QSheafError(Exception):
    """Base class for all library errors."""


class InvalidInput(QSheafError, ValueError):
    """Malformed operator, state, parameter or representation."""


class NotCommutative(QSheafError):
    """An algebra expected to be commutative is not."""


class NonCommutingSet(QSheafError):
    """Generators of a context (or an observable subset) fail to commute."""


class ClosureViolation(QSheafError):
    """The context poset is not closed, or the flat map breaks its axioms.

    This signals a bug in poset construction rather than bad user input.
    """


class SizeLimit(QSheafError):
    """An enumeration would exceed its configured guard."""


class NotDense(QSheafError):
    """Subobject used as a dense inclusion is not dense."""


class NotSheaf(QSheafError):
    """Presheaf used as a sheaf fails the sheaf condition."""


class NotFilter(QSheafError):
    """A truth-object stage is not a filter."""
