"""Seeded multi-start experiments, CSV output and summary tables.

Experiment files are flat ``key = value`` text, one experiment per file.
``#`` starts a comment. Recognized keys::

    problem = trig
    param.n = 50                 # any problem parameter
    runs = 5
    seed = 0                     # run r uses seed + r
    box = 0.735:0.835            # lo:hi, broadcast to every coordinate,
                                 # or one lo:hi per coordinate, comma separated
    x0 = ones | zeros | solution | 1.0,2.0,...   # fixed start (overrides box)
    tol = 1e-10
    max_iter = 100
    out = results/trig50
    solver.AA.precond = none     # one block of solver.<label>.* per configuration
    solver.AA.m = 3
    solver.Diag.precond = diag
    solver.Diag.m = 3
    solver.Diag.n_update = 1
    solver.Diag.beta = 1.0
    solver.Diag.recompute_history = false
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import InvalidSpec, PAAError
from .preconditioner import PreconditionerKind, parse_kind, uses_jacobian
from .problems import InitialGuessBox, make_problem, random_guess
from .solver import SolverConfig, SolveStatus, paa_solve

HISTORY_HEADER = ["label", "run", "iter", "residual_norm"]
SUMMARY_HEADER = ["label", "run", "status", "iterations", "jacobian_builds", "wall_time_s"]

DEFAULT_BOXES = {
    "kelley": ([-1.0, 1.0], [3.0, 5.0]),
    "trig": (np.pi / 4 - 0.05, np.pi / 4 + 0.05),
}


@dataclass(frozen=True)
class SolverSetup:
    """One labelled solver configuration inside an experiment."""

    label: str
    kind: PreconditionerKind
    m: int = 0
    beta: float = 1.0
    n_update: int = 1
    recompute_history: bool = False

    def config(self, tol: float, max_iter: int) -> SolverConfig:
        return SolverConfig(
            m=self.m,
            beta=self.beta,
            tol=tol,
            n_max=max_iter,
            n_update=self.n_update,
            kind=self.kind,
            recompute_history=self.recompute_history,
        )


@dataclass
class ExperimentSpec:
    problem: str
    params: dict = field(default_factory=dict)
    solvers: list[SolverSetup] = field(default_factory=list)
    box: tuple | None = None
    x0: str | None = None
    runs: int = 5
    seed: int = 0
    tol: float = 1e-10
    max_iter: int = 100
    out: str = "results"

    def validate(self):
        if self.runs < 1:
            raise InvalidSpec(f"runs must be >= 1, got {self.runs}")
        if not self.solvers:
            raise InvalidSpec("experiment has no solver configurations")
        labels = [s.label for s in self.solvers]
        dupes = {lab for lab in labels if labels.count(lab) > 1}
        if dupes:
            raise InvalidSpec(f"duplicate labels: {', '.join(sorted(dupes))}")


@dataclass
class RunRecord:
    label: str
    run: int
    seed: int
    status: str
    iterations: int
    jacobian_builds: int
    wall_time: float
    residual_norms: list[float]


# -- parsing -------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _as_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise InvalidSpec(f"expected a boolean, got {value!r}")


def _as_number(cast, key, value):
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise InvalidSpec(f"bad value for {key}: {value!r}") from None


def read_config(path) -> dict[str, str]:
    """Read a flat ``key = value`` file into a dict (later keys win)."""
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise InvalidSpec(f"{path}:{lineno}: expected 'key = value'")
            entries[key.strip()] = value.strip()
    return entries


def _parse_box(text: str):
    bounds = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise InvalidSpec(f"box entries must look like lo:hi, got {part!r}")
        bounds.append((_as_number(float, "box", lo), _as_number(float, "box", hi)))
    lo, hi = zip(*bounds)
    return (lo[0], hi[0]) if len(bounds) == 1 else (list(lo), list(hi))


_SOLVER_FIELDS = {
    "precond": parse_kind,
    "m": int,
    "beta": float,
    "n_update": int,
    "recompute_history": _as_bool,
}


def spec_from_entries(entries: dict[str, str]) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from flat key/value entries."""
    if "problem" not in entries:
        raise InvalidSpec("missing 'problem'")
    spec = ExperimentSpec(problem=entries["problem"])
    solvers: dict[str, dict] = {}
    for key, value in entries.items():
        if key == "problem":
            continue
        if key.startswith("param."):
            spec.params[key[6:]] = value
        elif key.startswith("solver."):
            label, _, name = key[7:].rpartition(".")
            if not label or name not in _SOLVER_FIELDS:
                raise InvalidSpec(f"bad solver key {key!r}")
            cast = _SOLVER_FIELDS[name]
            try:
                solvers.setdefault(label, {})[name] = cast(value)
            except (TypeError, ValueError):
                raise InvalidSpec(f"bad value for {key}: {value!r}") from None
        elif key in ("runs", "seed", "max_iter"):
            setattr(spec, key, _as_number(int, key, value))
        elif key == "tol":
            spec.tol = _as_number(float, key, value)
        elif key == "box":
            spec.box = _parse_box(value)
        elif key in ("x0", "out"):
            setattr(spec, key, value)
        else:
            raise InvalidSpec(f"unknown key {key!r}")
    for label, fields in solvers.items():
        if "precond" not in fields:
            raise InvalidSpec(f"solver {label!r} has no precond")
        kind = fields.pop("precond")
        spec.solvers.append(SolverSetup(label=label, kind=kind, **fields))
    return spec


def apply_overrides(spec: ExperimentSpec, **overrides) -> ExperimentSpec:
    """Apply CLI overrides (``None`` values are ignored).

    Solver-level overrides (``precond``, ``m``, ``beta``, ``n_update``) are
    applied to every configuration; with no configuration at all a single
    one labelled by the preconditioner string is created.
    """
    o = {k: v for k, v in overrides.items() if v is not None}
    if "problem" in o:
        spec.problem = o.pop("problem")
    spec.params.update(o.pop("params", {}))
    for key in ("runs", "seed", "tol", "max_iter", "out", "x0"):
        if key in o:
            setattr(spec, key, o.pop(key))
    solver_kw = {}
    if "precond" in o:
        solver_kw["kind"] = parse_kind(o.pop("precond"))
    for key in ("m", "beta", "n_update"):
        if key in o:
            solver_kw[key] = o.pop(key)
    if o:
        raise InvalidSpec(f"unknown overrides: {', '.join(o)}")
    if not spec.solvers:
        kind = solver_kw.pop("kind", parse_kind("none"))
        spec.solvers = [SolverSetup(label=str(kind), kind=kind)]
    spec.solvers = [replace(s, **solver_kw) for s in spec.solvers]
    return spec


# -- execution -------------------------------------------------------------------


def _initial_guess(spec: ExperimentSpec, problem, seed: int) -> np.ndarray:
    n = problem.dimension
    if spec.x0 is not None:
        key = spec.x0.strip().lower()
        if key == "ones":
            return np.ones(n)
        if key == "zeros":
            return np.zeros(n)
        if key == "solution":
            if problem.known_solution is None:
                raise InvalidSpec(f"problem {problem.name!r} has no known solution")
            return problem.known_solution.copy()
        values = [_as_number(float, "x0", v) for v in spec.x0.split(",")]
        x0 = np.array(values * n if len(values) == 1 else values)
        if x0.size != n:
            raise InvalidSpec(f"x0 has {x0.size} entries, problem dimension is {n}")
        return x0
    box = spec.box or DEFAULT_BOXES.get(problem.name)
    if box is None:
        return np.ones(n)
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (n,))
    return random_guess(InitialGuessBox(lo, hi, seed=seed))


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[RunRecord]:
    """Solve every (configuration, run) pair; records come back ordered by (label, run)."""
    spec.validate()
    problem = make_problem(spec.problem, **spec.params)
    starts = [(spec.seed + r, _initial_guess(spec, problem, spec.seed + r)) for r in range(spec.runs)]
    tasks = [(s, r) for s in spec.solvers for r in range(spec.runs)]
    configs = {s.label: s.config(spec.tol, spec.max_iter) for s in spec.solvers}

    def one(task) -> RunRecord:
        setup, r = task
        seed, x0 = starts[r]
        try:
            rep = paa_solve(problem, x0, configs[setup.label])
        except PAAError as exc:
            raise InvalidSpec(f"{setup.label}: {exc}") from exc
        return RunRecord(
            label=setup.label,
            run=r,
            seed=seed,
            status=str(rep.status),
            iterations=rep.iterations,
            jacobian_builds=rep.jacobian_builds,
            wall_time=rep.wall_time,
            residual_norms=list(rep.residual_norms),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, tasks))
    else:
        records = [one(t) for t in tasks]
    return sorted(records, key=lambda rec: (rec.label, rec.run))


# -- output ---------------------------------------------------------------------


def _num(v: float) -> str:
    return format(v, ".17g")


def write_csv(records: list[RunRecord], out_dir) -> tuple[Path, Path]:
    """Write ``history.csv`` and ``summary.csv`` into ``out_dir``."""
    if not records:
        raise ValueError("no records to write")
    out = Path(out_dir)
    records = sorted(records, key=lambda rec: (rec.label, rec.run))
    hist_path, summ_path = out / "history.csv", out / "summary.csv"
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(hist_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_HEADER)
            for rec in records:
                for it, r in enumerate(rec.residual_norms):
                    w.writerow([rec.label, rec.run, it, _num(r)])
        with open(summ_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for rec in records:
                w.writerow(
                    [rec.label, rec.run, rec.status, rec.iterations, rec.jacobian_builds, _num(rec.wall_time)]
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return hist_path, summ_path


def read_history(path) -> dict[tuple[str, int], list[float]]:
    """Parse a history CSV back into ``{(label, run): residual_norms}``."""
    out: dict[tuple[str, int], list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.setdefault((row["label"], int(row["run"])), []).append(float(row["residual_norm"]))
    return out


def summarize(records: list[RunRecord]) -> str:
    """Plain-text table of per-label means over converged runs.

    Wall time, iterations and Jacobian builds are averaged over converged
    runs only; non-converged runs are counted in the ``failed`` column and
    a label with no converged run shows blank means.
    """
    if not records:
        raise ValueError("no records to summarize")
    labels = sorted({rec.label for rec in records})
    rows = [["label", "runs", "converged", "failed", "mean_iters", "mean_jac_builds", "mean_time_s"]]
    for label in labels:
        recs = [r for r in records if r.label == label]
        ok = [r for r in recs if r.status == SolveStatus.CONVERGED.value]
        if ok:
            means = [
                f"{np.mean([r.iterations for r in ok]):.2f}",
                f"{np.mean([r.jacobian_builds for r in ok]):.2f}",
                f"{np.mean([r.wall_time for r in ok]):.4g}",
            ]
        else:
            means = ["", "", ""]
        rows.append([label, str(len(recs)), str(len(ok)), str(len(recs) - len(ok)), *means])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(wd) if i == 0 else cell.rjust(wd) for i, (cell, wd) in enumerate(zip(row, widths)))
             for row in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def expected_builds(iterations: int, n_update: int) -> int:
    """Jacobian builds for a Jacobian-kind run: one at every ``k % n_update == 0``."""
    return math.ceil(iterations / n_update)


def write_outputs(records: list[RunRecord], out_dir) -> list[Path]:
    hist, summ = write_csv(records, out_dir)
    txt = Path(out_dir) / "summary.txt"
    try:
        txt.write_text(summarize(records))
    except OSError as exc:
        raise OSError(f"cannot write {txt}: {exc}") from exc
    return [hist, summ, txt]


def jacobian_labels(spec: ExperimentSpec) -> dict[str, int]:
    """Labels whose preconditioner uses the Jacobian, mapped to their ``n_update``."""
    return {s.label: s.n_update for s in spec.solvers if uses_jacobian(s.kind)}

