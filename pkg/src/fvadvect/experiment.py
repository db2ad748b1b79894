"""Run configured experiments and convergence studies, writing their tables to disk."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .analysis import ConvergenceTable, EnergyAccumulator, EnergyReport, ErrorReport, error_report
from .characteristics import ExactSolution, FlowSampler
from .config import ExperimentConfig, at_level
from .mesh import validate_mesh
from .scheme import StepReport, run_to_time
from . import tables

log = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12


class InvariantViolation(RuntimeError):
    """A run finished but broke an identity the scheme satisfies exactly."""


class LevelError(RuntimeError):
    """A study level failed; ``cause`` is the original exception."""

    def __init__(self, level: int, cause: BaseException):
        super().__init__(level, cause)
        self.level = level
        self.cause = cause

    def __str__(self):
        return f"level n={self.level}: {self.cause}"


@dataclass
class RunResult:
    h: float
    dt: float
    steps: StepReport
    energy: EnergyReport
    error: ErrorReport
    row: tuple
    out_dir: Path


def run_experiment(config: ExperimentConfig, out_dir) -> RunResult:
    """One run: ``report.csv``, ``energy.csv``, ``error.csv`` and optional snapshots."""
    out_dir = Path(out_dir)
    mesh = config.mesh.build()
    validate_mesh(mesh)
    acc = EnergyAccumulator(config.scheme.xi)
    wanted = [0.0, *config.snapshots, config.horizon]
    trajectory, steps = run_to_time(mesh, config.field, config.initial, config.scheme,
                                    config.horizon, snapshot_times=wanted, observers=[acc])
    box = mesh.domain if mesh.boundary_kind == "periodic" else None
    sampler = FlowSampler(config.field, substeps_per_dt=config.substeps, periodic_box=box)
    error = error_report(trajectory, ExactSolution(config.initial, sampler), k=config.sampling_density)
    energy = acc.report()
    row = tables.energy_row(mesh.h, steps.dt, config.scheme.xi, config.mesh.kind, error.l1_at_t, energy)

    out_dir.mkdir(parents=True, exist_ok=True)
    tables.write_step_report(out_dir / "report.csv", steps)
    tables.write_energy(out_dir / "energy.csv", row)
    tables.write_error(out_dir / "error.csv", error)
    if config.snapshots:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for u in trajectory:
            u.save(snap_dir / f"u_{u.step:06d}.txt")
    log.info("n=%d h=%.4g h/t=%.4g steps=%d l1=%.6g identity=%.3g sup|V|,|grad V|<=%.4g",
             config.mesh.n, mesh.h, mesh.h / config.horizon, steps.n_steps, error.l1_at_t,
             energy.identity_residual, config.field.w1inf_bound())

    if energy.identity_residual > IDENTITY_TOL:
        raise InvariantViolation(
            f"energy identity residual {energy.identity_residual:.3g} exceeds {IDENTITY_TOL:g} "
            f"after step {steps.n_steps}")
    return RunResult(mesh.h, steps.dt, steps, energy, error, row, out_dir)


def _level_task(args):
    config, n, out_dir = args
    try:
        return run_experiment(at_level(config, n), out_dir)
    except Exception as exc:
        raise LevelError(n, exc) from exc


@dataclass
class StudyResult:
    table: ConvergenceTable
    order: float
    intercept: float
    window: tuple

    @property
    def in_window(self) -> bool:
        lo, hi = self.window
        return lo <= self.order <= hi


def converge_study(config: ExperimentConfig, out_dir, jobs: int = 1) -> StudyResult:
    """Run every level of ``config.study``, fit the order, write ``convergence.csv/.svg``."""
    if config.study is None:
        raise ValueError("configuration has no [study] table")
    out_dir = Path(out_dir)
    tasks = [(config, n, out_dir / f"level_{n:05d}") for n in config.study.levels]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_level_task, tasks))
    else:
        results = [_level_task(t) for t in tasks]

    table = ConvergenceTable()
    for r in results:
        table.rows.append(r.row)
    table.rows.sort(key=lambda row: -row[0])
    order, intercept, _ = table.fit()
    tables.write_convergence(out_dir / "convergence.csv", table)
    hs = [row[0] for row in table.rows]
    es = [row[4] for row in table.rows]
    tables.write_svg(out_dir / "convergence.svg",
                     tables.loglog_svg(hs, es, order, intercept, title=f"{config.mesh.kind} mesh"))
    return StudyResult(table, order, intercept, config.study.window)
