"""Preconditioners ``M_k`` and their action ``F = -M^{-1} f``.

Kinds
-----
``ConstantScalar(alpha)``   ``M = alpha I``
``DiagJacobian()``          ``M = diag(J(x))``
``BlockDiagJacobian(b)``    contiguous ``b x b`` diagonal blocks of ``J(x)``
``FullJacobian()``          ``M = J(x)``
``LinearPartFull()``        ``M = A``, the problem's linear operator
``LinearPartDiag()``        ``M = diag(A)``

The Jacobian kinds are rebuilt on the delayed-update schedule; the others
are constant and built once per solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import linalg
from .exceptions import (
    DimensionMismatch,
    InvalidSpec,
    MissingLinearPart,
    SingularMatrix,
    SingularPreconditioner,
)
from .problems import NonlinearProblem

DIAG_FLOOR = 1e-12


@dataclass(frozen=True)
class ConstantScalar:
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha == 0 or not np.isfinite(self.alpha):
            raise InvalidSpec(f"constant preconditioner needs finite alpha != 0, got {self.alpha}")

    def __str__(self):
        return f"const:{self.alpha:g}"


@dataclass(frozen=True)
class DiagJacobian:
    def __str__(self):
        return "diag"


@dataclass(frozen=True)
class BlockDiagJacobian:
    block: int

    def __post_init__(self):
        if self.block < 1:
            raise InvalidSpec(f"block size must be >= 1, got {self.block}")

    def __str__(self):
        return f"block:{self.block}"


@dataclass(frozen=True)
class FullJacobian:
    def __str__(self):
        return "full"


@dataclass(frozen=True)
class LinearPartFull:
    def __str__(self):
        return "linfull"


@dataclass(frozen=True)
class LinearPartDiag:
    def __str__(self):
        return "lindiag"


PreconditionerKind = Union[
    ConstantScalar, DiagJacobian, BlockDiagJacobian, FullJacobian, LinearPartFull, LinearPartDiag
]

JACOBIAN_KINDS = (DiagJacobian, BlockDiagJacobian, FullJacobian)


def uses_jacobian(kind: PreconditionerKind) -> bool:
    return isinstance(kind, JACOBIAN_KINDS)


def parse_kind(text: str) -> PreconditionerKind:
    """Parse ``const:A``, ``none``, ``diag``, ``block:B``, ``full``, ``linfull``, ``lindiag``."""
    name, _, arg = text.strip().lower().partition(":")
    try:
        if name == "none" and not arg:
            return ConstantScalar(1.0)
        if name == "const":
            return ConstantScalar(float(arg) if arg else 1.0)
        if name == "block":
            return BlockDiagJacobian(int(arg))
        simple = {
            "diag": DiagJacobian,
            "full": FullJacobian,
            "linfull": LinearPartFull,
            "lindiag": LinearPartDiag,
        }
        if name in simple and not arg:
            return simple[name]()
    except ValueError:
        pass
    raise InvalidSpec(f"unrecognized preconditioner {text!r}")


@dataclass(frozen=True)
class FactoredPreconditioner:
    """An immutable, factored ``M``.

    Exactly one of ``scalar``, ``diag``, ``blocks`` or ``lu`` is set.
    """

    kind: PreconditionerKind
    n: int
    build_iteration: int = 0
    scalar: float | None = None
    diag: np.ndarray | None = None
    blocks: tuple[tuple[int, linalg.LUFactors], ...] | None = None
    lu: linalg.LUFactors | None = None
    source: np.ndarray | None = None

    def solve(self, b) -> np.ndarray:
        """Return ``M^{-1} b``; ``b`` may carry several right-hand-side columns."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"vector of length {b.shape[0]} for a {self.n}x{self.n} preconditioner")
        if self.scalar is not None:
            return b / self.scalar
        if self.diag is not None:
            return b / (self.diag if b.ndim == 1 else self.diag[:, None])
        if self.lu is not None:
            return linalg.lu_solve(self.lu, b)
        out = np.empty_like(b)
        for start, factors in self.blocks:
            stop = start + factors.n
            out[start:stop] = linalg.lu_solve(factors, b[start:stop])
        return out

    def dense(self) -> np.ndarray:
        """Reassemble ``M`` as a dense matrix (for checks, not for solving)."""
        if self.scalar is not None:
            return self.scalar * np.eye(self.n)
        if self.diag is not None:
            return np.diag(self.diag)
        return self.source.copy()


def apply(P: FactoredPreconditioner, f) -> np.ndarray:
    """Preconditioned residual: the solution ``F`` of ``M F = -f``."""
    return -P.solve(f)


def due_for_update(k: int, n_update: int) -> bool:
    """True when iteration ``k`` rebuilds the preconditioner (``k % n_update == 0``)."""
    if k < 0 or n_update < 1:
        raise ValueError(f"need k >= 0 and n_update >= 1, got k={k}, n_update={n_update}")
    return k % n_update == 0


def _jacobian(problem: NonlinearProblem, x: np.ndarray) -> np.ndarray:
    if problem.jacobian is not None:
        return np.asarray(problem.jacobian(x), dtype=float)
    return linalg.fd_jacobian(problem.residual, x)


def _checked_diag(d: np.ndarray, diag_floor: bool) -> np.ndarray:
    d = np.asarray(d, dtype=float).copy()
    if not np.all(np.isfinite(d)):
        raise SingularPreconditioner("diagonal has non-finite entries")
    if diag_floor:
        small = np.abs(d) < DIAG_FLOOR
        d[small] = np.where(d[small] < 0, -DIAG_FLOOR, DIAG_FLOOR)
    elif np.any(d == 0.0):
        raise SingularPreconditioner(f"zero diagonal entry at index {int(np.flatnonzero(d == 0.0)[0])}")
    return d


def _factor(M: np.ndarray, what: str) -> linalg.LUFactors:
    try:
        return linalg.lu_factor(M)
    except SingularMatrix as exc:
        raise SingularPreconditioner(f"{what}: {exc}") from exc


def build(
    kind: PreconditionerKind,
    problem: NonlinearProblem,
    x,
    *,
    k: int = 0,
    diag_floor: bool = False,
) -> FactoredPreconditioner:
    """Assemble and factor ``M`` for ``problem`` at ``x``.

    Raises
    ------
    SingularPreconditioner
        Zero diagonal entry or singular (block) factorization.
    MissingLinearPart
        A linear-part kind was requested but ``problem.linear_part`` is None.
    """
    x = np.asarray(x, dtype=float)
    n = problem.dimension
    if isinstance(kind, ConstantScalar):
        return FactoredPreconditioner(kind, n, k, scalar=float(kind.alpha))

    if isinstance(kind, (LinearPartFull, LinearPartDiag)):
        A = problem.linear_part
        if A is None:
            raise MissingLinearPart(f"problem {problem.name!r} has no linear part")
        if isinstance(kind, LinearPartDiag):
            return FactoredPreconditioner(kind, n, k, diag=_checked_diag(np.diag(A), diag_floor))
        return FactoredPreconditioner(kind, n, k, lu=_factor(A, "linear part"), source=A)

    if isinstance(kind, DiagJacobian):
        if problem.jacobian_diag is not None:
            d = problem.jacobian_diag(x)
        else:
            d = np.diag(_jacobian(problem, x))
        return FactoredPreconditioner(kind, n, k, diag=_checked_diag(d, diag_floor))

    J = _jacobian(problem, x)
    if not np.all(np.isfinite(J)):
        raise SingularPreconditioner("Jacobian has non-finite entries")
    if isinstance(kind, FullJacobian):
        return FactoredPreconditioner(kind, n, k, lu=_factor(J, "Jacobian"), source=J)

    if isinstance(kind, BlockDiagJacobian):
        if kind.block > n:
            raise InvalidSpec(f"block size {kind.block} exceeds dimension {n}")
        if kind.block == 1:
            return FactoredPreconditioner(kind, n, k, diag=_checked_diag(np.diag(J), diag_floor))
        blocks = []
        source = np.zeros_like(J)
        for start in range(0, n, kind.block):
            stop = min(start + kind.block, n)
            B = J[start:stop, start:stop]
            source[start:stop, start:stop] = B
            blocks.append((start, _factor(B, f"block at {start}")))
        return FactoredPreconditioner(kind, n, k, blocks=tuple(blocks), source=source)

    raise InvalidSpec(f"unsupported preconditioner kind {kind!r}")
