"""Preconditioned Anderson acceleration for nonlinear systems ``f(x) = 0``."""

from .exceptions import (
    DimensionMismatch,
    InvalidSpec,
    MissingLinearPart,
    NonFiniteEvaluation,
    PAAError,
    RankDeficient,
    SingularMatrix,
    SingularPreconditioner,
)
from .linalg import constrained_ls_alpha, fd_jacobian, lu_factor, lu_solve
from .preconditioner import (
    BlockDiagJacobian,
    ConstantScalar,
    DiagJacobian,
    FactoredPreconditioner,
    FullJacobian,
    LinearPartDiag,
    LinearPartFull,
    apply,
    build,
    due_for_update,
    parse_kind,
)
from .problems import (
    InitialGuessBox,
    NonlinearProblem,
    make_bratu,
    make_convdiff,
    make_kelley,
    make_problem,
    make_trig,
    random_guess,
)
from .solver import (
    AAHistory,
    SolveReport,
    SolverConfig,
    SolveStatus,
    TheoremProbe,
    anderson_update,
    ck_step_oracle,
    paa_solve,
    probe_theorem,
)

__version__ = "0.1.0"
