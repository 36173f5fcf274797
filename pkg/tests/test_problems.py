import numpy as np
import pytest

from paa import problems
from paa.exceptions import InvalidSpec
from paa.linalg import fd_jacobian
from paa.problems import InitialGuessBox, random_guess

SQ2 = np.sqrt(2.0) / 2


class TestKelley:
    @pytest.mark.parametrize("eps", [0.0, 1e-6, 0.5])
    def test_first_root(self, eps):
        p = problems.make_kelley(eps)
        np.testing.assert_array_equal(p.residual(np.array([1.0, 3.0])), [0.0, 0.0])

    def test_second_root(self):
        eps = 1e-6
        eta = 1.0 - np.sqrt(1.0 + 2.0 * eps)
        x = np.array([1.0 - eta**2, 3.0 + eta])
        np.testing.assert_array_equal(problems.kelley_second_root(eps), x)
        assert np.linalg.norm(problems.make_kelley(eps).residual(x)) <= 1e-12

    def test_singular_jacobian_at_double_root(self):
        J = problems.make_kelley(0.0).jacobian(np.array([1.0, 3.0]))
        np.testing.assert_array_equal(J, [[1.0, 0.0], [0.0, 0.0]])

    def test_hand_value(self):
        # a = 1, b = 1: f1 = 1 + 1, f2 = eps + 1.5 + 1 + 1
        f = problems.make_kelley(0.25).residual(np.array([2.0, 4.0]))
        np.testing.assert_allclose(f, [2.0, 3.75])


class TestTrig:
    def test_root_is_exact(self):
        p = problems.make_trig(7)
        np.testing.assert_array_equal(p.residual(p.known_solution), np.zeros(7))

    def test_diagonal_at_root(self):
        p = problems.make_trig(5)
        i = np.arange(1, 6)
        np.testing.assert_allclose(p.jacobian_diag(p.known_solution), i * SQ2, rtol=1e-14)
        np.testing.assert_allclose(np.diag(p.jacobian(p.known_solution)), i * SQ2, rtol=1e-14)

    def test_off_diagonal_is_sin_xj(self):
        x = np.array([0.1, 0.7, -0.4])
        J = problems.make_trig(3).jacobian(x)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert J[i, j] == np.sin(x[j])

    def test_n1_at_zero(self):
        f = problems.make_trig(1).residual(np.zeros(1))
        assert f[0] == pytest.approx(-(2 - 3 * np.sqrt(2) / 2), abs=1e-15)
        assert f[0] == pytest.approx(0.12132, abs=1e-5)

    def test_rejects_empty(self):
        with pytest.raises(InvalidSpec):
            problems.make_trig(0)


class TestGridOperators:
    def test_laplacian_small(self):
        A = problems.laplacian_5pt(2)
        expected = np.array(
            [[4, -1, -1, 0], [-1, 4, 0, -1], [-1, 0, 4, -1], [0, -1, -1, 4]], dtype=float
        )
        np.testing.assert_array_equal(A, expected)

    def test_row_sums_count_interior_neighbours(self):
        n = 32
        s = problems.laplacian_5pt(n).sum(axis=1).reshape(n, n)
        assert s[0, 0] == s[0, -1] == s[-1, 0] == s[-1, -1] == 2
        assert s[0, 5] == 1 and s[5, 0] == 1
        assert s[5, 5] == 0

    def test_ordering_is_x_fastest(self):
        x, y = problems.grid_coordinates(3)
        h = 0.25
        np.testing.assert_allclose(x[:3], [h, 2 * h, 3 * h])
        np.testing.assert_allclose(y[:3], [h, h, h])
        # u = x on the bottom row: (u_E - u_W) + (u_N - 0), boundary values are 0
        D = problems.centered_gradient_sum(3)
        east_west = [2 * h - 0, 3 * h - h, 0 - 2 * h]
        np.testing.assert_allclose((D @ x)[:3], np.add(east_west, x[:3]))


class TestBratu:
    def test_zero_input(self):
        p = problems.make_bratu(4, 6.0)
        h = 1 / 5
        np.testing.assert_allclose(p.residual(np.zeros(16)), -h * h * 6.0 * np.ones(16), rtol=1e-15)
        np.testing.assert_allclose(p.jacobian(np.zeros(16)), p.linear_part - h * h * 6.0 * np.eye(16))

    def test_linear_part_symmetric(self):
        A = problems.make_bratu(6).linear_part
        np.testing.assert_array_equal(A, A.T)

    def test_dimension(self):
        assert problems.make_bratu().dimension == 1024

    @pytest.mark.parametrize("op", ["rot90", "flipud", "fliplr", "transpose"])
    def test_dihedral_equivariance(self, op):
        n = 7
        p = problems.make_bratu(n, 3.0)
        X, Y = (c.reshape(n, n) for c in problems.grid_coordinates(n))
        u = np.sin(np.pi * X) * np.sin(np.pi * Y) * (1 + X * (1 - X) * Y * (1 - Y))
        t = {"rot90": np.rot90, "flipud": np.flipud, "fliplr": np.fliplr, "transpose": np.transpose}[op]
        # the field itself is symmetric, so the residual must be too
        np.testing.assert_allclose(t(u), u, atol=1e-15)
        F = p.residual(u.ravel()).reshape(n, n)
        np.testing.assert_allclose(t(F), F, atol=1e-14)

    def test_equivariance_of_asymmetric_field(self):
        n = 5
        p = problems.make_bratu(n, 2.0)
        u = np.random.default_rng(1).standard_normal((n, n))
        F = p.residual(u.ravel()).reshape(n, n)
        Fr = p.residual(np.rot90(u).ravel()).reshape(n, n)
        np.testing.assert_allclose(Fr, np.rot90(F), atol=1e-14)

    def test_rejects_tiny_grid(self):
        with pytest.raises(InvalidSpec):
            problems.make_bratu(1)


class TestConvDiff:
    def test_zero_input(self):
        n = 5
        p = problems.make_convdiff(n, 0.1, 3.0)
        h = 1 / (n + 1)
        x, y = problems.grid_coordinates(n)
        expected = -h * h * 2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)
        np.testing.assert_allclose(p.residual(np.zeros(n * n)), expected, rtol=1e-14)

    def test_center_source(self):
        x, y = problems.grid_coordinates(5)
        assert problems.convdiff_source(x[12], y[12]) == pytest.approx(2 * np.pi**2, rel=1e-15)

    def test_nonlinear_diagonal(self):
        n, k = 4, 3.0
        p = problems.make_convdiff(n, 0.1, k)
        h = 1 / (n + 1)
        added = np.diag(p.jacobian(np.ones(n * n)) - p.linear_part)
        np.testing.assert_allclose(added, 2 * h * h * k, rtol=1e-14)

    def test_symmetric_part_is_diffusion(self):
        n, eps = 6, 0.01
        L = problems.make_convdiff(n, eps).linear_part
        assert not np.allclose(L, L.T)
        np.testing.assert_allclose((L + L.T) / 2, eps * problems.laplacian_5pt(n), atol=1e-15)

    def test_rejects_bad_eps(self):
        with pytest.raises(InvalidSpec):
            problems.make_convdiff(4, 0.0)


ALL = [
    problems.make_kelley(0.0),
    problems.make_kelley(1e-6),
    problems.make_trig(5),
    problems.make_trig(40),
    problems.make_bratu(6, 6.0),
    problems.make_convdiff(6, 0.01, 3.0),
]


@pytest.mark.parametrize("p", ALL, ids=lambda p: f"{p.name}-{p.dimension}")
def test_jacobians_agree_with_finite_differences(p):
    rng = np.random.default_rng(2024)
    base = p.known_solution if p.known_solution is not None else np.zeros(p.dimension)
    for _ in range(10):
        x = base + rng.uniform(-1, 1, p.dimension)
        J = p.jacobian(x)
        err = np.linalg.norm(J - fd_jacobian(p.residual, x))
        assert err <= 1e-5 * (1 + np.linalg.norm(J))
        np.testing.assert_array_equal(p.jacobian_diag(x), np.diag(J))


@pytest.mark.parametrize("p", [ALL[0], ALL[1], ALL[2], ALL[3]], ids=lambda p: p.name)
def test_known_solution_residual(p):
    assert np.linalg.norm(p.residual(p.known_solution)) <= 1e-10


def test_linear_problem():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    p = problems.make_linear(A, [3.0, 4.0])
    np.testing.assert_allclose(p.known_solution, [1.0, 1.0])
    np.testing.assert_array_equal(p.jacobian_diag(None), [2.0, 3.0])


class TestRandomGuess:
    def test_deterministic(self):
        box = InitialGuessBox([-1.0, 1.0], [3.0, 5.0], seed=42)
        np.testing.assert_array_equal(random_guess(box), random_guess(box))

    def test_seeds_differ(self):
        a = random_guess(InitialGuessBox([0.0], [1.0], seed=1))
        b = random_guess(InitialGuessBox([0.0], [1.0], seed=2))
        assert a[0] != b[0]

    def test_degenerate_box(self):
        c = np.array([0.5, -2.0, 7.0])
        np.testing.assert_array_equal(random_guess(InitialGuessBox(c, c, seed=3)), c)

    def test_trig_box(self):
        n = 500
        lo, hi = np.full(n, np.pi / 4 - 0.05), np.full(n, np.pi / 4 + 0.05)
        for seed in range(5):
            x = random_guess(InitialGuessBox(lo, hi, seed=seed))
            assert np.all(x > lo) and np.all(x < hi)

    def test_bounds_validated(self):
        with pytest.raises(InvalidSpec):
            InitialGuessBox([1.0], [0.0])
        with pytest.raises(InvalidSpec):
            InitialGuessBox([0.0, 0.0], [1.0])


class TestRegistry:
    def test_string_params(self):
        p = problems.make_problem("bratu", grid="4", **{"lambda": "2.5"})
        assert p.dimension == 16
        assert p.params == {"grid_n": 4, "lambda": 2.5}

    def test_unknown_problem(self):
        with pytest.raises(InvalidSpec, match="unknown problem"):
            problems.make_problem("rosenbrock")

    def test_unknown_param(self):
        with pytest.raises(InvalidSpec, match="no parameter"):
            problems.make_problem("trig", eps=1)

    def test_bad_value(self):
        with pytest.raises(InvalidSpec, match="bad value"):
            problems.make_problem("trig", n="ten")
