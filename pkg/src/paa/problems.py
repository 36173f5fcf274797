"""Benchmark nonlinear systems ``f(x) = 0``.

Four families are provided: Kelley's 2-D polynomial system, the
trigonometric system with a manufactured root at ``pi/4``, the 2-D Bratu
problem and a 2-D nonlinear convection-diffusion problem. The two PDE
problems use centered differences on the unit square with homogeneous
Dirichlet data; ``grid_n`` counts interior nodes per direction, so
``h = 1 / (grid_n + 1)`` and ``n = grid_n**2``. Unknowns are ordered
lexicographically with ``x`` running fastest, and each discrete equation
is multiplied through by ``h**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import InvalidSpec

Vector = np.ndarray


@dataclass(frozen=True)
class NonlinearProblem:
    """A square nonlinear system together with whatever structure it exposes."""

    name: str
    dimension: int
    residual: Callable[[Vector], Vector]
    jacobian: Callable[[Vector], np.ndarray] | None = None
    jacobian_diag: Callable[[Vector], Vector] | None = None
    linear_part: np.ndarray | None = None
    known_solution: Vector | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> Vector:
        return self.residual(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InitialGuessBox:
    """Axis-aligned box for uniformly sampled starting points."""

    lower: Vector
    upper: Vector
    seed: int = 0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise InvalidSpec(f"box bounds differ in shape: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise InvalidSpec("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


def random_guess(box: InitialGuessBox) -> Vector:
    """Draw one point uniformly from ``box``; the same seed gives the same point."""
    rng = np.random.default_rng(box.seed)
    return box.lower + (box.upper - box.lower) * rng.random(box.lower.shape)


# -- Kelley ---------------------------------------------------------------


def make_kelley(eps: float = 0.0) -> NonlinearProblem:
    """Kelley's 2-D polynomial system.

    Roots are ``(1, 3)`` and, for ``eps > 0``, ``(1 - eta**2, 3 + eta)`` with
    ``eta = 1 - sqrt(1 + 2 eps)``. At ``eps = 0`` the two coincide and the
    Jacobian is singular there.
    """
    eps = float(eps)

    def residual(x):
        a, b = x[0] - 1.0, x[1] - 3.0
        return np.array([a + b**2, eps * b + 1.5 * a * b + b**2 + b**3])

    def jacobian(x):
        a, b = x[0] - 1.0, x[1] - 3.0
        return np.array([[1.0, 2.0 * b], [1.5 * b, eps + 1.5 * a + 2.0 * b + 3.0 * b**2]])

    def jacobian_diag(x):
        a, b = x[0] - 1.0, x[1] - 3.0
        return np.array([1.0, eps + 1.5 * a + 2.0 * b + 3.0 * b**2])

    return NonlinearProblem(
        name="kelley",
        dimension=2,
        residual=residual,
        jacobian=jacobian,
        jacobian_diag=jacobian_diag,
        known_solution=np.array([1.0, 3.0]),
        params={"eps": eps},
    )


def kelley_second_root(eps: float) -> Vector:
    eta = 1.0 - np.sqrt(1.0 + 2.0 * eps)
    return np.array([1.0 - eta**2, 3.0 + eta])


# -- trigonometric ----------------------------------------------------------


def make_trig(n: int) -> NonlinearProblem:
    """Trigonometric system ``f_i(x) = h_i(x) - h_i(pi/4)`` with root ``pi/4 * 1``."""
    n = int(n)
    if n < 1:
        raise InvalidSpec("trig problem needs n >= 1")
    idx = np.arange(1, n + 1, dtype=float)

    def h(x):
        c = np.cos(x)
        return n - c.sum() + idx * (1.0 - c) - np.sin(x)

    star = np.full(n, np.pi / 4)
    h_star = h(star)

    def residual(x):
        return h(x) - h_star

    def jacobian_diag(x):
        return (1.0 + idx) * np.sin(x) - np.cos(x)

    def jacobian(x):
        J = np.tile(np.sin(x), (n, 1))
        J[np.diag_indices(n)] = jacobian_diag(x)
        return J

    return NonlinearProblem(
        name="trig",
        dimension=n,
        residual=residual,
        jacobian=jacobian,
        jacobian_diag=jacobian_diag,
        known_solution=star,
        params={"n": n},
    )


# -- grid problems ----------------------------------------------------------


def laplacian_5pt(grid_n: int) -> np.ndarray:
    """Dense 5-point stencil for ``-h^2 Laplace`` (4 on the diagonal, -1 per neighbour)."""
    t = 2.0 * np.eye(grid_n) - np.eye(grid_n, k=1) - np.eye(grid_n, k=-1)
    eye = np.eye(grid_n)
    return np.kron(eye, t) + np.kron(t, eye)


def centered_gradient_sum(grid_n: int) -> np.ndarray:
    """Dense ``(u_E - u_W) + (u_N - u_S)`` with zero Dirichlet neighbours."""
    s = np.eye(grid_n, k=1) - np.eye(grid_n, k=-1)
    eye = np.eye(grid_n)
    return np.kron(eye, s) + np.kron(s, eye)


def grid_coordinates(grid_n: int) -> tuple[Vector, Vector]:
    """Interior-node coordinates in the solver's lexicographic ordering."""
    h = 1.0 / (grid_n + 1)
    t = h * np.arange(1, grid_n + 1)
    X, Y = np.meshgrid(t, t)  # rows are y, columns are x
    return X.ravel(), Y.ravel()


def make_bratu(grid_n: int = 32, lam: float = 6.0) -> NonlinearProblem:
    """Bratu problem ``Laplace u + lam exp(u) = 0`` on the unit square."""
    grid_n = int(grid_n)
    if grid_n < 2:
        raise InvalidSpec("bratu needs grid_n >= 2")
    lam = float(lam)
    h = 1.0 / (grid_n + 1)
    A = laplacian_5pt(grid_n)
    c = h * h * lam

    def residual(u):
        return A @ u - c * np.exp(u)

    def jacobian(u):
        J = A.copy()
        J[np.diag_indices_from(J)] -= c * np.exp(u)
        return J

    def jacobian_diag(u):
        return 4.0 - c * np.exp(u)

    return NonlinearProblem(
        name="bratu",
        dimension=grid_n * grid_n,
        residual=residual,
        jacobian=jacobian,
        jacobian_diag=jacobian_diag,
        linear_part=A,
        params={"grid_n": grid_n, "lambda": lam},
    )


def convdiff_source(x, y):
    return 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)


def make_convdiff(grid_n: int = 32, eps: float = 0.1, k: float = 3.0) -> NonlinearProblem:
    """Convection-diffusion ``eps(-u_xx - u_yy) + u_x + u_y + k u^2 = f``."""
    grid_n = int(grid_n)
    eps, k = float(eps), float(k)
    if grid_n < 2:
        raise InvalidSpec("convdiff needs grid_n >= 2")
    if not eps > 0:
        raise InvalidSpec("convdiff needs eps > 0")
    h = 1.0 / (grid_n + 1)
    L = eps * laplacian_5pt(grid_n) + 0.5 * h * centered_gradient_sum(grid_n)
    src = h * h * convdiff_source(*grid_coordinates(grid_n))
    hk = h * h * k

    def residual(u):
        return L @ u + hk * u * u - src

    def jacobian(u):
        J = L.copy()
        J[np.diag_indices_from(J)] += 2.0 * hk * u
        return J

    def jacobian_diag(u):
        return 4.0 * eps + 2.0 * hk * u

    return NonlinearProblem(
        name="convdiff",
        dimension=grid_n * grid_n,
        residual=residual,
        jacobian=jacobian,
        jacobian_diag=jacobian_diag,
        linear_part=L,
        params={"grid_n": grid_n, "eps": eps, "k": k},
    )


def make_linear(A, b) -> NonlinearProblem:
    """Affine system ``f(x) = A x - b``; its linear part is ``A`` itself."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    d = np.diag(A).copy()
    return NonlinearProblem(
        name="linear",
        dimension=b.size,
        residual=lambda x: A @ x - b,
        jacobian=lambda x: A,
        jacobian_diag=lambda x: d,
        linear_part=A,
        known_solution=np.linalg.solve(A, b),
    )


# -- registry ----------------------------------------------------------------

PROBLEMS: dict[str, tuple[Callable[..., NonlinearProblem], dict]] = {
    "kelley": (make_kelley, {"eps": 0.0}),
    "trig": (make_trig, {"n": 5}),
    "bratu": (make_bratu, {"grid_n": 32, "lam": 6.0}),
    "convdiff": (make_convdiff, {"grid_n": 32, "eps": 0.1, "k": 3.0}),
}

_PARAM_ALIASES = {"lambda": "lam", "grid": "grid_n"}
_INT_PARAMS = {"n", "grid_n"}


def make_problem(name: str, **params) -> NonlinearProblem:
    """Build a problem by registry name; parameter values may be strings."""
    try:
        factory, defaults = PROBLEMS[name]
    except KeyError:
        raise InvalidSpec(
            f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}"
        ) from None
    kwargs = dict(defaults)
    for key, value in params.items():
        key = _PARAM_ALIASES.get(key, key)
        if key not in defaults:
            raise InvalidSpec(f"problem {name!r} has no parameter {key!r}")
        try:
            kwargs[key] = int(value) if key in _INT_PARAMS else float(value)
        except (TypeError, ValueError):
            raise InvalidSpec(f"bad value {value!r} for {name}.{key}") from None
    return factory(**kwargs)
