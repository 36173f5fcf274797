"""Dense linear-algebra kernels used by the PAA iteration.

Matrices are plain 2-D ``numpy.ndarray`` objects in NumPy's default
row-major (C) order. Nothing here keeps state between calls.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .exceptions import DimensionMismatch, NonFiniteEvaluation, SingularMatrix

PIVOT_RTOL = 1e-14
DROP_RTOL = 1e-10

ResidualMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LUFactors:
    """Partial-pivoting LU factors in LAPACK ``getrf`` layout."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {M.shape}")
    return M


def lu_factor(M) -> LUFactors:
    """Factor a square matrix, rejecting numerically singular ones.

    Raises
    ------
    SingularMatrix
        If some pivot satisfies ``|u_jj| < 1e-14 * max|M|``.
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"LU needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise SingularMatrix("matrix has non-finite entries")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        # exact zero pivots warn; the threshold check below is what decides
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    j = int(np.argmin(pivots))
    if pivots[j] < PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {j} has magnitude {pivots[j]:.3e} < {PIVOT_RTOL:g} * {scale:.3e}"
        )
    return LUFactors(lu, piv)


def lu_solve(F: LUFactors, b) -> np.ndarray:
    """Solve ``M x = b`` from the factors of ``M``.

    ``b`` may be a vector or a matrix of right-hand-side columns.
    """
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factors are {F.n}x{F.n}")
    return sla.lu_solve((F.lu, F.piv), b, check_finite=False)


def gamma_to_alpha(gamma) -> np.ndarray:
    """Map difference-form coefficients to affine weights.

    With columns ``F_0..F_m`` and differences ``F_{j} - F_{j-1}``,
    ``F_m - sum_j gamma_j (F_j - F_{j-1}) == sum_i alpha_i F_i`` for the
    returned ``alpha`` (which sums to one by construction).
    """
    gamma = np.asarray(gamma, dtype=float)
    m = gamma.size
    alpha = np.empty(m + 1)
    if m == 0:
        alpha[0] = 1.0
        return alpha
    alpha[0] = gamma[0]
    alpha[1:m] = gamma[1:] - gamma[:-1]
    alpha[m] = 1.0 - gamma[-1]
    return alpha


def alpha_to_gamma(alpha) -> np.ndarray:
    """Inverse of :func:`gamma_to_alpha` (ignores ``alpha[-1]``)."""
    alpha = np.asarray(alpha, dtype=float)
    return np.cumsum(alpha[:-1])


def solve_difference_ls(Fcols) -> tuple[np.ndarray, int]:
    """Minimize ``||F_last - W gamma||`` over the consecutive-difference matrix W.

    W is QR-factored; while some ``|R_jj| <= 1e-10 |R_11|`` the oldest
    remaining difference column is dropped and the problem re-solved.
    Dropped columns get ``gamma_j = 0``.

    Returns
    -------
    gamma : ndarray, shape (m,)
    dropped : int
        Number of leading (oldest) difference columns discarded.
    """
    Fcols = _as_matrix(Fcols)
    m = Fcols.shape[1] - 1
    gamma = np.zeros(m)
    if m == 0:
        return gamma, 0
    W = np.diff(Fcols, axis=1)
    rhs = Fcols[:, -1]
    n = W.shape[0]
    for dropped in range(m):
        if m - dropped > n:
            # more columns than rows is never full rank
            continue
        Q, R = np.linalg.qr(W[:, dropped:], mode="reduced")
        d = np.abs(np.diag(R))
        if d[0] > 0.0 and np.all(d > DROP_RTOL * d[0]):
            gamma[dropped:] = sla.solve_triangular(R, Q.T @ rhs, check_finite=False)
            return gamma, dropped
    return gamma, m


def constrained_ls_alpha(Fcols) -> np.ndarray:
    """Affine weights minimizing ``||sum_i alpha_i F_i||`` with ``sum(alpha) == 1``.

    Parameters
    ----------
    Fcols : array_like, shape (n, m+1)
        Preconditioned residual columns, oldest first.

    Examples
    --------
    >>> constrained_ls_alpha([[2.0, 0.0], [0.0, 1.0]])
    array([0.2, 0.8])
    """
    gamma, _ = solve_difference_ls(Fcols)
    return gamma_to_alpha(gamma)


def fd_jacobian(f: ResidualMap, x, f0: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian with steps ``sqrt(eps) * max(|x_j|, 1)``."""
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise NonFiniteEvaluation("residual is not finite at the base point")
    n = x.size
    J = np.empty((f0.size, n))
    sqrt_eps = np.sqrt(np.finfo(float).eps)
    for j in range(n):
        h = sqrt_eps * max(abs(x[j]), 1.0)
        xp = x.copy()
        xp[j] += h
        # use the representable step
        h = xp[j] - x[j]
        fj = np.asarray(f(xp), dtype=float)
        if not np.all(np.isfinite(fj)):
            raise NonFiniteEvaluation(f"residual is not finite when perturbing x[{j}]")
        J[:, j] = (fj - f0) / h
    return J
