"""Reference computations that share no code path with the solver.

These are deliberately naive: dense KKT solves, explicit Krylov bases and
full eigendecompositions. They exist to check the solver, not to be fast.
"""

from __future__ import annotations

import numpy as np


def kkt_alpha(Fcols) -> np.ndarray:
    """Minimize ``||F alpha||^2`` subject to ``sum(alpha) == 1`` via the KKT system."""
    F = np.asarray(Fcols, dtype=float)
    p = F.shape[1]
    K = np.zeros((p + 1, p + 1))
    K[:p, :p] = 2.0 * F.T @ F
    K[:p, p] = K[p, :p] = 1.0
    rhs = np.zeros(p + 1)
    rhs[p] = 1.0
    return np.linalg.solve(K, rhs)[:p]


def gmres_residuals(A, b, x0, steps: int) -> tuple[list[float], list[np.ndarray]]:
    """Residual norms and residual vectors of GMRES from ``x0``.

    Step ``k`` minimizes ``||b - A x||`` over ``x0 + K_k(A, r0)`` by a dense
    least-squares solve against an explicitly orthonormalized Krylov basis.
    """
    A = np.asarray(A, dtype=float)
    r0 = b - A @ x0
    norms, vectors = [float(np.linalg.norm(r0))], [r0.copy()]
    basis = []
    v = r0 / np.linalg.norm(r0)
    for _ in range(steps):
        basis.append(v)
        V = np.column_stack(basis)
        y, *_ = np.linalg.lstsq(A @ V, r0, rcond=None)
        r = r0 - A @ (V @ y)
        norms.append(float(np.linalg.norm(r)))
        vectors.append(r)
        w = A @ v
        for _ in range(2):  # twice is enough
            w = w - V @ (V.T @ w)
        nw = np.linalg.norm(w)
        if nw <= 1e-14 * np.linalg.norm(A @ v):
            break
        v = w / nw
    return norms, vectors


def spectral_radius(T) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(T, dtype=float)))))
