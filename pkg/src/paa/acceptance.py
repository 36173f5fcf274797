"""Acceptance checks, runnable from pytest or ``paa verify``.

Each check returns a :class:`CheckResult`; a check passes only if its
numerical condition holds and it finishes inside its time budget.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import harness, linalg, oracles
from .preconditioner import (
    ConstantScalar,
    DiagJacobian,
    FullJacobian,
    LinearPartDiag,
    apply,
    build,
)
from .problems import (
    InitialGuessBox,
    make_bratu,
    make_convdiff,
    make_kelley,
    make_linear,
    make_trig,
    random_guess,
)
from .solver import (
    AAHistory,
    SolverConfig,
    SolveStatus,
    anderson_update,
    ck_step_oracle,
    observed_orders,
    paa_solve,
    probe_theorem,
    rounding_floor,
)

MASTER_SEED = 0
RUNS = 5
# Residuals are compared with GMRES only while r_k >= this * r_0. Both
# sequences carry O(100 eps ||r_0||) absolute rounding noise, so a 1e-8
# relative match is meaningless once r_k falls much below 1e-6 ||r_0||.
GMRES_HORIZON = 1e-6


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.2f} s / {self.budget:g} s)"


CHECKS: list[tuple[int, str, float, Callable[[], tuple[bool, str]]]] = []


def check(number: int, name: str, budget: float):
    def register(fn):
        CHECKS.append((number, name, budget, fn))
        return fn

    return register


def _trig_box(n: int, seed: int) -> np.ndarray:
    c = np.full(n, np.pi / 4)
    return random_guess(InitialGuessBox(c - 0.05, c + 0.05, seed=seed))


def _kelley_box(seed: int) -> np.ndarray:
    return random_guess(InitialGuessBox([-1.0, 1.0], [3.0, 5.0], seed=seed))


def _statuses(reports) -> str:
    return ",".join(f"{r.iterations}" if r.converged else str(r.status)[:4] for r in reports)


# --------------------------------------------------------------------------


@check(1, "Picard recovery", 1.0)
def picard_recovery():
    p = make_trig(5)
    x0 = _trig_box(5, MASTER_SEED)
    rep = paa_solve(p, x0, SolverConfig(m=0, kind=ConstantScalar(1.0), n_max=10, tol=1e-300),
                    record_iterates=True)
    x = x0.copy()
    loop = [x.copy()]
    for _ in range(10):
        x = x - p.residual(x)
        loop.append(x.copy())
    same = len(rep.iterates) == 11 and all(np.array_equal(a, b) for a, b in zip(rep.iterates, loop))
    return same, f"{len(rep.iterates) - 1} steps, bitwise equal={same}"


@check(2, "Newton recovery + quadratic order", 1.0)
def newton_order():
    p = make_trig(5)
    v = np.random.default_rng(MASTER_SEED).standard_normal(5)
    x0 = p.known_solution + 1e-2 * v / np.linalg.norm(v)
    rep = paa_solve(p, x0, SolverConfig(m=0, kind=FullJacobian(), n_update=1, n_max=50),
                    record_iterates=True)
    errs = [np.linalg.norm(x - p.known_solution) for x in rep.iterates]
    orders = observed_orders(errs, rounding_floor(p.known_solution))
    final = orders[-1] if orders else float("nan")
    ok = rep.converged and rep.iterations <= 6 and final >= 1.8
    return ok, (f"{rep.status} in {rep.iterations} its, errors "
                f"{' '.join(f'{e:.1e}' for e in errs)}, final order {final:.3f}")


@check(3, "Constrained-LS and C_k oracles", 5.0)
def ls_oracles():
    rng = np.random.default_rng(MASTER_SEED)
    worst_alpha = worst_step = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 11))
        p = int(rng.integers(1, 5))  # m + 1 columns, m <= 3
        F = rng.standard_normal((n, p))
        worst_alpha = max(worst_alpha, np.max(np.abs(linalg.constrained_ls_alpha(F) - oracles.kkt_alpha(F))))

        Mmat = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
        prob = make_linear(Mmat, np.zeros(n))
        P = build(FullJacobian(), prob, np.zeros(n))
        hist = AAHistory(p - 1)
        for _ in range(p):
            f = rng.standard_normal(n)
            hist.push(rng.standard_normal(n), apply(P, f), f)
        beta = float(rng.uniform(0.1, 1.0))
        alpha = linalg.constrained_ls_alpha(hist.F_matrix())
        diff = anderson_update(hist, alpha, beta) - ck_step_oracle(hist, P, hist.f[-1], beta)
        worst_step = max(worst_step, np.max(np.abs(diff)))
    ok = worst_alpha <= 1e-9 and worst_step <= 1e-9
    return ok, f"max |alpha - KKT| = {worst_alpha:.1e}, max |update - C_k step| = {worst_step:.1e}"


def _diag_dominant(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    B = rng.uniform(-1.0, 1.0, (n, n))
    B = 0.5 * (B + B.T)
    np.fill_diagonal(B, 0.0)
    d = np.abs(B).sum(axis=1) / 0.9 * rng.uniform(1.0, 1.5, n)
    return np.diag(d) + B, rng.standard_normal(n)


@check(4, "Linear Jacobi probe", 2.0)
def linear_probe():
    A, b = _diag_dominant(30, MASTER_SEED)
    p = make_linear(A, b)
    rep = paa_solve(p, np.zeros(30), SolverConfig(m=0, kind=DiagJacobian(), n_max=200, tol=1e-300))
    r = np.asarray(rep.residual_norms)
    live = np.flatnonzero(r > 1e-10 * r[0])
    ratios = r[live[1:]] / r[live[1:] - 1]
    measured = float(np.exp(np.mean(np.log(ratios[-10:]))))
    rho = oracles.spectral_radius(np.eye(30) - A / np.diag(A)[:, None])
    P = build(DiagJacobian(), p, np.zeros(30))
    norm = probe_theorem(p, np.zeros(30), P).contraction
    ok = abs(measured - rho) <= 0.1 * rho and norm >= rho
    return ok, f"ratio {measured:.5f} vs rho {rho:.5f}, norm estimate {norm:.5f}"


def _spd(n: int, seed: int):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q @ np.diag(rng.uniform(0.2, 0.8, n)) @ Q.T
    return A, rng.standard_normal(n)


@check(5, "GMRES correspondence", 2.0)
def gmres_correspondence():
    n = 20
    A, b = _spd(n, MASTER_SEED)
    x0 = np.zeros(n)
    rep = paa_solve(make_linear(A, b), x0, SolverConfig(m=n, kind=ConstantScalar(1.0), n_max=3 * n))
    ref, _ = oracles.gmres_residuals(A, b, x0, n)
    horizon = [k for k in range(min(len(ref), len(rep.combined_norms)))
               if ref[k] >= GMRES_HORIZON * ref[0]]
    rel = [abs(rep.combined_norms[k] - ref[k]) / ref[k] for k in horizon]
    ok = rep.converged and len(horizon) >= 5 and max(rel) <= 1e-8
    return ok, f"{len(horizon)} iterations compared, max rel diff {max(rel):.1e}, AA {rep.status} in {rep.iterations}"


@check(6, "Example 1 (Kelley)", 5.0)
def example_kelley():
    ok, parts = True, []
    for eps in (0.0, 1e-6):
        p = make_kelley(eps)
        runs = {}
        for label, kind in (("full", FullJacobian()), ("diag", DiagJacobian()), ("AA", ConstantScalar(1.0))):
            runs[label] = [paa_solve(p, _kelley_box(MASTER_SEED + r), SolverConfig(m=1, kind=kind, n_max=100))
                           for r in range(RUNS)]
        good = all(sum(r.converged for r in runs[lab]) >= 4 for lab in ("full", "diag"))
        bad = any(not r.converged for r in runs["AA"])
        ok &= good and bad
        parts.append(f"eps={eps:g}: " + " ".join(f"{lab}[{_statuses(rs)}]" for lab, rs in runs.items()))
    return ok, "; ".join(parts)


def _trig_example(n: int, m: int, recompute: bool = False):
    p = make_trig(n)
    out = {}
    for label, kind in (("AA", ConstantScalar(1.0)), ("diag", DiagJacobian()), ("full", FullJacobian())):
        out[label] = [paa_solve(p, _trig_box(n, MASTER_SEED + r),
                                SolverConfig(m=m, kind=kind, n_max=100, recompute_history=recompute))
                      for r in range(RUNS)]
    ok = (not any(r.converged for r in out["AA"])
          and all(r.converged and r.iterations <= 50 for lab in ("diag", "full") for r in out[lab]))
    return ok, " ".join(f"{lab}[{_statuses(rs)}]" for lab, rs in out.items())


@check(7, "Example 2 (trigonometric, n=50)", 5.0)
def example_trig50():
    return _trig_example(50, 3)


@check(7, "Example 2 (trigonometric, n=500, m=10)", 60.0)
def example_trig500():
    ok, detail = _trig_example(500, 10)
    if not ok:
        _, alt = _trig_example(500, 10, recompute=True)
        detail += f" | info, history re-preconditioned: {alt}"
    return ok, detail


@check(8, "Example 3 (Bratu 32x32)", 60.0)
def example_bratu():
    p = make_bratu(32, 6.0)
    u0 = np.ones(p.dimension)
    picard = paa_solve(p, u0, SolverConfig(m=0, kind=ConstantScalar(1.0), n_max=300))
    runs = {label: paa_solve(p, u0, SolverConfig(m=50, kind=kind, n_max=300))
            for label, kind in (("diag", DiagJacobian()), ("lindiag", LinearPartDiag()), ("full", FullJacobian()))}
    ok = (picard.status is SolveStatus.DIVERGED
          and all(runs[lab].converged and runs[lab].iterations <= 200 for lab in ("diag", "lindiag"))
          and runs["full"].converged and runs["full"].iterations < runs["diag"].iterations)
    return ok, f"picard {picard.status} at {picard.iterations}; " + " ".join(
        f"{lab} {r.status} {r.iterations}" for lab, r in runs.items())


@check(9, "Example 4 (convection-diffusion, eps=0.01)", 60.0)
def example_convdiff():
    p = make_convdiff(32, 0.01, 3.0)
    u0 = np.ones(p.dimension)
    qn = paa_solve(p, u0, SolverConfig(m=0, kind=LinearPartDiag(), n_max=300))
    lin = paa_solve(p, u0, SolverConfig(m=50, kind=LinearPartDiag(), n_max=300))
    diag = paa_solve(p, u0, SolverConfig(m=50, kind=DiagJacobian(), n_max=300))
    ok = (not qn.converged and lin.converged and diag.converged and diag.iterations < lin.iterations)
    return ok, (f"quasi-Newton {qn.status} at {qn.iterations}; PAA lindiag {lin.status} {lin.iterations}; "
                f"PAA diag {diag.status} {diag.iterations}")


@check(10, "Delayed preconditioner update", 5.0)
def delayed_update():
    p = make_trig(50)
    ok, parts = True, []
    for r in range(RUNS):
        x0 = _trig_box(50, MASTER_SEED + r)
        one = paa_solve(p, x0, SolverConfig(m=3, kind=FullJacobian(), n_update=1))
        two = paa_solve(p, x0, SolverConfig(m=3, kind=FullJacobian(), n_update=2))
        ok &= (one.converged and two.converged
               and two.jacobian_builds <= math.ceil(one.jacobian_builds / 2) + 1
               and two.iterations <= 2 * one.iterations)
        parts.append(f"{one.iterations}/{one.jacobian_builds} -> {two.iterations}/{two.jacobian_builds}")
    return ok, "iters/builds N_update=1 -> 2: " + ", ".join(parts)


@check(11, "Invariant suite", 10.0)
def invariant_suite():
    rng = np.random.default_rng(MASTER_SEED)
    failures = []

    worst_sum = 0.0
    for _ in range(200):
        F = rng.standard_normal((int(rng.integers(1, 12)), int(rng.integers(1, 6))))
        a = linalg.constrained_ls_alpha(F)
        worst_sum = max(worst_sum, abs(a.sum() - 1.0))
        if np.linalg.norm(F @ a) > np.linalg.norm(F[:, -1]) * (1 + 1e-12):
            failures.append("minimizer dominance")
    if worst_sum > 1e-12:
        failures.append(f"sum(alpha) off by {worst_sum:.1e}")

    p = make_trig(10)
    for m in (0, 2, 5):
        rep = paa_solve(p, _trig_box(10, MASTER_SEED), SolverConfig(m=m, kind=DiagJacobian()), log_alpha=True)
        if any(len(a) != min(m, k) + 1 for k, a in enumerate(rep.alpha_log)):
            failures.append(f"window law m={m}")

    for prob in (make_kelley(1e-6), make_trig(7), make_bratu(5, 6.0), make_convdiff(5, 0.05, 3.0)):
        for _ in range(10):
            x = rng.uniform(-1.0, 1.0, prob.dimension) + (prob.known_solution if prob.known_solution is not None else 0)
            Ja = prob.jacobian(x)
            Jf = linalg.fd_jacobian(prob.residual, x)
            if np.linalg.norm(Ja - Jf) > 1e-5 * (1 + np.linalg.norm(Ja)):
                failures.append(f"jacobian {prob.name}")
                break

    bratu = make_bratu(5, 6.0)
    u = rng.uniform(0.0, 1.0, bratu.dimension)
    for kind in (ConstantScalar(2.5), DiagJacobian(), FullJacobian(), LinearPartDiag(), harness.parse_kind("block:5"),
                 harness.parse_kind("linfull")):
        P = build(kind, bratu, u)
        M = P.dense()
        for _ in range(5):
            f = rng.standard_normal(bratu.dimension)
            Fv = apply(P, f)
            bound = 1e-10 * (np.linalg.norm(M, 2) * np.linalg.norm(Fv) + np.linalg.norm(f))
            if np.linalg.norm(M @ Fv + f) > bound:
                failures.append(f"apply residual {kind}")

    spec = harness.ExperimentSpec(problem="kelley", solvers=[harness.SolverSetup("AA", ConstantScalar(1.0), m=1)],
                                  runs=3, seed=MASTER_SEED)
    records = harness.run_experiment(spec)
    with tempfile.TemporaryDirectory() as tmp:
        hist, _ = harness.write_csv(records, tmp)
        back = harness.read_history(hist)
    for rec in records:
        if back[(rec.label, rec.run)] != rec.residual_norms:
            failures.append("csv round trip")

    return not failures, "all invariants hold" if not failures else "; ".join(failures)


def run_check(entry) -> CheckResult:
    """Run one registered check; a crash or a blown time budget is a failure."""
    number, name, budget, fn = entry
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    res = CheckResult(number, name, False, detail, time.perf_counter() - t0, budget)
    res.passed = bool(ok) and res.seconds < budget
    if ok and not res.passed:
        res.detail += " [over time budget]"
    return res


def run_all(verbose: bool = True) -> list[CheckResult]:
    results = []
    for entry in CHECKS:
        res = run_check(entry)
        results.append(res)
        if verbose:
            print(res.line(), flush=True)
    return results
