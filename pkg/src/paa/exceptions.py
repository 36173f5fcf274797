"""Exception hierarchy shared by the solver modules."""

import numpy as np


class PAAError(Exception):
    """Base class for every error raised by :mod:`paa`."""


class SingularMatrix(PAAError, np.linalg.LinAlgError):
    """A pivot fell below the relative singularity threshold."""


class DimensionMismatch(PAAError, ValueError):
    """Operand shapes are incompatible."""


class NonFiniteEvaluation(PAAError, FloatingPointError):
    """A residual evaluation produced inf or nan."""


class RankDeficient(PAAError, np.linalg.LinAlgError):
    """A difference matrix has no usable full-rank column set."""


class SingularPreconditioner(PAAError):
    """The preconditioner matrix could not be factored."""


class MissingLinearPart(PAAError, ValueError):
    """A linear-part preconditioner was requested for a problem without one."""


class InvalidSpec(PAAError, ValueError):
    """An experiment specification or CLI argument is malformed."""
