"""Preconditioned Anderson acceleration, PAA(m).

Each iteration evaluates ``f_k``, refreshes the preconditioner on the
``n_update`` schedule, forms ``F_k = -M^{-1} f_k``, picks the affine weights
``alpha`` minimizing ``||sum_i alpha_i F_i||`` over the last ``min(m, k) + 1``
entries, and steps to ``sum_i alpha_i (x_i + beta F_i)``.

With ``m = 0`` this is the quasi-Newton iteration ``x - M^{-1} f``: Picard
for ``M = I`` and Newton for ``M = J`` refreshed every step.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import (
    DimensionMismatch,
    InvalidSpec,
    NonFiniteEvaluation,
    RankDeficient,
    SingularPreconditioner,
)
from .preconditioner import (
    ConstantScalar,
    FactoredPreconditioner,
    PreconditionerKind,
    apply,
    build,
    due_for_update,
    uses_jacobian,
)
from .problems import NonlinearProblem


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one PAA(m) run.

    Attributes
    ----------
    m : window size; ``m = 0`` disables acceleration.
    beta : damping of the residual part of the update, in ``(0, 1]``.
    tol : stop once ``||f(x_k)|| < tol``.
    n_max : maximum number of updates.
    n_update : rebuild Jacobian-based preconditioners every ``n_update`` steps.
    kind : the preconditioner.
    divergence_threshold : stop as diverged once ``||f(x_k)||`` exceeds this.
    recompute_history : re-apply the current ``M`` to every stored raw
        residual after each rebuild instead of keeping the ``F_j`` computed
        with the preconditioner in force at step ``j``.
    diag_floor : clamp tiny diagonal entries to ``+-1e-12`` instead of failing.
    """

    m: int = 0
    beta: float = 1.0
    tol: float = 1e-10
    n_max: int = 100
    n_update: int = 1
    kind: PreconditionerKind = field(default_factory=ConstantScalar)
    divergence_threshold: float = 1e10
    recompute_history: bool = False
    diag_floor: bool = False

    def __post_init__(self):
        if self.m < 0:
            raise InvalidSpec(f"m must be >= 0, got {self.m}")
        if not 0 < self.beta <= 1:
            raise InvalidSpec(f"beta must lie in (0, 1], got {self.beta}")
        if not self.tol > 0:
            raise InvalidSpec(f"tol must be > 0, got {self.tol}")
        if self.n_max < 1:
            raise InvalidSpec(f"n_max must be >= 1, got {self.n_max}")
        if self.n_update < 1:
            raise InvalidSpec(f"n_update must be >= 1, got {self.n_update}")


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_ITERATIONS = "max_iterations"
    PRECONDITIONER_FAILURE = "preconditioner_failure"

    def __str__(self):
        return self.value


@dataclass
class SolveReport:
    """Outcome of :func:`paa_solve`.

    ``residual_norms[0]`` is ``||f(x_0)||`` and there is one further entry
    per accepted update, so ``len(residual_norms) == iterations + 1``.
    ``combined_norms[k]`` is ``||sum_i alpha_i F_i||`` at step ``k`` and
    ``precond_norms[k]`` is ``||F_k||``.
    """

    status: SolveStatus
    x: np.ndarray
    residual_norms: list[float]
    iterations: int
    jacobian_builds: int
    precond_builds: int
    wall_time: float
    combined_norms: list[float] = field(default_factory=list)
    precond_norms: list[float] = field(default_factory=list)
    alpha_log: list[np.ndarray] | None = None
    iterates: list[np.ndarray] | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


class AAHistory:
    """Ring buffers holding the last ``m + 1`` iterates and residuals."""

    def __init__(self, m: int):
        self.m = m
        self.x = deque(maxlen=m + 1)
        self.F = deque(maxlen=m + 1)
        self.f = deque(maxlen=m + 1)

    def __len__(self):
        return len(self.x)

    def push(self, x, F, f=None):
        self.x.append(np.array(x, dtype=float))
        self.F.append(np.array(F, dtype=float))
        self.f.append(None if f is None else np.array(f, dtype=float))

    def reapply(self, P: FactoredPreconditioner):
        """Recompute every stored ``F_j`` as ``-M^{-1} f_j`` with the given ``M``."""
        if any(f is None for f in self.f):
            raise ValueError("raw residuals were not stored")
        self.F = deque((apply(P, f) for f in self.f), maxlen=self.m + 1)

    def X_matrix(self) -> np.ndarray:
        return np.column_stack(self.x)

    def F_matrix(self) -> np.ndarray:
        return np.column_stack(self.F)


def anderson_update(history: AAHistory, alpha, beta: float = 1.0) -> np.ndarray:
    """``sum_i alpha_i x_i + beta * sum_i alpha_i F_i``."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (len(history),):
        raise DimensionMismatch(f"{alpha.size} weights for a window of {len(history)}")
    return history.X_matrix() @ alpha + beta * (history.F_matrix() @ alpha)


def ck_step_oracle(
    history: AAHistory, P: FactoredPreconditioner, f_k, beta: float = 1.0
) -> np.ndarray:
    """Closed-form step ``x_k - beta C_k M^{-1} f_k`` built from E_k and W_k.

    Here ``C_k = I - (1/beta) (E_k + beta W_k) (W_k^T W_k)^{-1} W_k^T``, with
    ``E_k`` and ``W_k`` the consecutive differences of the stored iterates
    and preconditioned residuals. Only meant as an independent check of
    :func:`anderson_update`; the history must have been built with one
    fixed ``M``.

    Raises
    ------
    RankDeficient
        If ``W_k`` does not have full column rank.
    """
    X = history.X_matrix()
    Mf = P.solve(f_k)
    n = X.shape[0]
    C = np.eye(n)
    if X.shape[1] > 1:
        E = np.diff(X, axis=1)
        W = np.diff(history.F_matrix(), axis=1)
        if np.linalg.matrix_rank(W) < W.shape[1]:
            raise RankDeficient("W_k is rank deficient")
        G = np.linalg.solve(W.T @ W, W.T)
        C -= (E + beta * W) @ G / beta
    return X[:, -1] - beta * (C @ Mf)


def paa_solve(
    problem: NonlinearProblem,
    x0,
    config: SolverConfig,
    *,
    log_alpha: bool = False,
    record_iterates: bool = False,
) -> SolveReport:
    """Run PAA(m) on ``problem`` from ``x0``.

    Failures (divergence, singular preconditioner) are reported through
    ``SolveReport.status``; only configuration errors raise.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (problem.dimension,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, problem dimension is {problem.dimension}")
    if not np.all(np.isfinite(x)):
        raise InvalidSpec("x0 has non-finite entries")

    cfg = config
    rebuilds = uses_jacobian(cfg.kind)
    history = AAHistory(cfg.m)
    P = None
    norms, combined, pnorms = [], [], []
    alphas = [] if log_alpha else None
    iterates = [x.copy()] if record_iterates else None
    jac_builds = builds = iterations = 0
    status, message = SolveStatus.MAX_ITERATIONS, ""

    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.n_max + 1):
            f = np.asarray(problem.residual(x), dtype=float)
            nrm = float(np.linalg.norm(f))
            norms.append(nrm)
            if nrm < cfg.tol:
                status = SolveStatus.CONVERGED
                break
            if not np.isfinite(nrm) or nrm > cfg.divergence_threshold:
                status = SolveStatus.DIVERGED
                break
            if k == cfg.n_max:
                break

            if P is None or (rebuilds and due_for_update(k, cfg.n_update)):
                try:
                    P = build(cfg.kind, problem, x, k=k, diag_floor=cfg.diag_floor)
                except (SingularPreconditioner, NonFiniteEvaluation) as exc:
                    status, message = SolveStatus.PRECONDITIONER_FAILURE, str(exc)
                    break
                builds += 1
                jac_builds += rebuilds
                if cfg.recompute_history and len(history):
                    history.reapply(P)

            F = apply(P, f)
            history.push(x, F, f if cfg.recompute_history else None)
            Fmat = history.F_matrix()
            alpha = linalg.constrained_ls_alpha(Fmat)
            combined.append(float(np.linalg.norm(Fmat @ alpha)))
            pnorms.append(float(np.linalg.norm(F)))
            if alphas is not None:
                alphas.append(alpha)

            x = anderson_update(history, alpha, cfg.beta)
            iterations += 1
            if iterates is not None:
                iterates.append(x.copy())

    return SolveReport(
        status=status,
        x=x,
        residual_norms=norms,
        iterations=iterations,
        jacobian_builds=jac_builds,
        precond_builds=builds,
        wall_time=time.perf_counter() - t0,
        combined_norms=combined,
        precond_norms=pnorms,
        alpha_log=alphas,
        iterates=iterates,
        message=message,
    )


# -- convergence diagnostics --------------------------------------------------


@dataclass(frozen=True)
class TheoremProbe:
    """Local contraction estimate and, if available, observed orders."""

    contraction: float
    orders: tuple[float, ...] = ()

    @property
    def final_order(self) -> float | None:
        return self.orders[-1] if self.orders else None


def spectral_norm_estimate(T: np.ndarray, steps: int = 100, rtol: float = 1e-6) -> float:
    """Largest singular value of ``T`` by power iteration on ``T^T T``."""
    v = np.random.default_rng(0).standard_normal(T.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(steps):
        w = T.T @ (T @ v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
        new = np.sqrt(lam)
        if abs(new - sigma) <= rtol * new:
            return float(new)
        sigma = new
    return float(sigma)


def observed_orders(errors, floor: float = 0.0) -> tuple[float, ...]:
    """``log e_{k+1} / log e_k`` for consecutive errors with ``floor < e < 1``.

    Errors at or below ``floor`` are rounding noise rather than
    convergence and are skipped.
    """
    e = [float(v) for v in errors]
    out = []
    for a, b in zip(e, e[1:]):
        if floor < a < 1.0 and floor < b < 1.0:
            out.append(np.log(b) / np.log(a))
    return tuple(out)


def rounding_floor(x_star) -> float:
    """Error level below which iterates are indistinguishable from ``x_star``."""
    return 64.0 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(x_star)))


def probe_theorem(
    problem: NonlinearProblem,
    x,
    P: FactoredPreconditioner,
    iterates=None,
) -> TheoremProbe:
    """Estimate ``||I - M^{-1} J(x)||_2`` and the observed convergence orders.

    ``iterates`` is an optional sequence of iterates; orders are computed
    only when the problem has a known solution.
    """
    x = np.asarray(x, dtype=float)
    if problem.jacobian is not None:
        J = np.asarray(problem.jacobian(x), dtype=float)
    else:
        J = linalg.fd_jacobian(problem.residual, x)
    T = np.eye(problem.dimension) - P.solve(J)
    orders: tuple[float, ...] = ()
    if iterates is not None and problem.known_solution is not None:
        errs = [np.linalg.norm(np.asarray(xi) - problem.known_solution) for xi in iterates]
        orders = observed_orders(errs, rounding_floor(problem.known_solution))
    return TheoremProbe(spectral_norm_estimate(T), orders)
