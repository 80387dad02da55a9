"""Scenario configuration and the single-run / sweep drivers behind the CLI."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .analysis import RunRecord, SweepSummary, summarize_run
from .dynamics import DecayRates, InitialKind, build_generator, initial_distribution
from .errors import SuperradianceError, ValidationError
from .integrator import SolverConfig, TimeSeries, integrate
from .io import atomic_write_text, checkpoint, fmt, load_schema, read_json, write_json
from .statespace import StateSpace

log = logging.getLogger(__name__)


@dataclass
class Scenario:
    gamma1: float = 1.0
    gamma2: float = 0.1
    n_values: list[int] = field(default_factory=lambda: [150])
    init: str = "v-standard"
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "runs"
    raw_eq2_intensity: bool = False
    synthesis_completion_fraction: float = 0.9

    def __post_init__(self) -> None:
        DecayRates(self.gamma1, self.gamma2)
        self.init = InitialKind.parse(self.init).value
        if self.init == InitialKind.CUSTOM.value:
            raise ValidationError("custom initial distributions are library-only")
        if not self.n_values:
            raise ValidationError("no N values given")
        for n in self.n_values:
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise ValidationError(f"N must be a positive integer, got {n!r}")
        self.n_values = sorted({int(n) for n in self.n_values})
        if not (0 < self.synthesis_completion_fraction < 1):
            raise ValidationError("synthesis_completion_fraction must lie in (0, 1)")

    @property
    def rates(self) -> DecayRates:
        return DecayRates(self.gamma1, self.gamma2)

    def describe(self, with_n: bool = False) -> dict:
        d = {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "init": self.init,
            "solver": asdict(self.solver),
            "raw_eq2_intensity": self.raw_eq2_intensity,
        }
        if with_n:
            d["n_values"] = list(self.n_values)
        return d


def expand_n_values(value) -> list[int]:
    """Accept a list of integers or a ``{min, max, step}`` range (inclusive)."""
    if isinstance(value, dict):
        lo, hi, step = value["min"], value["max"], value.get("step", 1)
        if step < 1:
            raise ValidationError("N step must be >= 1")
        if hi < lo:
            raise ValidationError("N max must be >= N min")
        return list(range(lo, hi + 1, step))
    return list(value)


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Read a JSON scenario file; ``overrides`` (from flags) win over file values."""
    data = read_json(path) if path else {}
    try:
        jsonschema.validate(data, load_schema("scenario"))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"scenario file: {exc.message}") from exc
    return scenario_from_dict(data, overrides)


def scenario_from_dict(data: dict, overrides: dict | None = None) -> Scenario:
    data = dict(data)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    solver = dict(data.pop("solver", {}))
    solver.update(overrides.pop("solver", {}) or {})
    data.update(overrides)
    if "n_values" in data:
        data["n_values"] = expand_n_values(data["n_values"])
    return Scenario(solver=SolverConfig(**solver), **data)


def simulate(scenario: Scenario, n_half: int, probe_times=None) -> TimeSeries:
    space = StateSpace(n_half)
    generator = build_generator(space, scenario.rates)
    init = initial_distribution(space, scenario.init)
    return integrate(
        generator,
        init,
        scenario.solver,
        raw_eq2_intensity=scenario.raw_eq2_intensity,
        probe_times=probe_times,
        init_kind=scenario.init,
    )


def run_name(n_half: int) -> str:
    return f"run_N{n_half:04d}"


def run_and_save(scenario: Scenario, n_half: int, out_dir) -> RunRecord:
    """Simulate one N, write its CSV, checkpoint sidecar and summary JSON."""
    out_dir = Path(out_dir)
    series = simulate(scenario, n_half)
    record = summarize_run(series)
    name = run_name(n_half)
    checkpoint(series, out_dir / f"{name}.csv")
    write_json(
        out_dir / f"{name}.json",
        {
            "scenario": scenario.describe(),
            "record": record.to_dict(),
            "t_end": series.t_end,
            "completed": series.completed,
            "n_steps": series.n_steps,
            "n_rejected": series.n_rejected,
            "csv": f"{name}.csv",
        },
        schema="run_summary",
    )
    return record


def _sweep_task(args) -> dict:
    scenario, n_half, out_dir = args
    try:
        return run_and_save(scenario, n_half, out_dir).to_dict()
    except (SuperradianceError, ArithmeticError) as exc:
        log.warning("N=%d failed: %s", n_half, exc)
        return RunRecord(
            n_half=n_half,
            gamma1=scenario.gamma1,
            gamma2=scenario.gamma2,
            init_kind=scenario.init,
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
        ).to_dict()


def run_sweep(scenario: Scenario, out_dir, threads: int = 1) -> SweepSummary:
    """Run every N of the scenario; failures are recorded, not raised.

    Results are collected by N, so the summary does not depend on scheduling.
    """
    out_dir = Path(out_dir)
    tasks = [(scenario, n, out_dir) for n in scenario.n_values]
    if threads > 1 and len(tasks) > 1:
        # largest runs first keeps the pool busy
        order = sorted(tasks, key=lambda t: -t[1])
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_task, order))
    else:
        results = [_sweep_task(t) for t in tasks]
    summary = SweepSummary([RunRecord.from_dict(r) for r in results])
    write_sweep_summary(scenario, summary, out_dir)
    return summary


SUMMARY_CSV_COLUMNS = (
    "n_half", "status", "t_peak1", "i_peak1", "t_peak2", "i_peak2", "fwhm1", "fwhm2",
    "tau1_inf", "tau2_inf", "sigma1_inf", "sigma2_inf", "t_sigma1_min", "sigma1_min",
    "t_sigma2_min", "sigma2_min", "area1_inf", "area2_inf",
)


def write_sweep_summary(scenario: Scenario, summary: SweepSummary, out_dir) -> None:
    out_dir = Path(out_dir)
    failed = [r.n_half for r in summary.records if r.status != "ok"]
    write_json(
        out_dir / "sweep_summary.json",
        {
            "scenario": scenario.describe(with_n=True),
            "records": [r.to_dict() for r in summary.records],
            "failed": failed,
        },
        schema="sweep_summary",
    )

    def cell(x):
        return "" if x is None else fmt(x)

    lines = [",".join(SUMMARY_CSV_COLUMNS)]
    for r in summary.records:
        p1 = r.peak1 or (None, None)
        p2 = r.peak2 or (None, None)
        s1 = r.sigma1_min or (None, None)
        s2 = r.sigma2_min or (None, None)
        vals = [
            str(r.n_half), r.status, *map(cell, p1), *map(cell, p2), cell(r.fwhm1), cell(r.fwhm2),
            cell(r.tau1_inf), cell(r.tau2_inf), cell(r.sigma1_inf), cell(r.sigma2_inf),
            *map(cell, s1), *map(cell, s2), cell(r.area1_inf), cell(r.area2_inf),
        ]
        lines.append(",".join(vals))
    atomic_write_text(out_dir / "sweep_summary.csv", "\n".join(lines) + "\n")


def load_sweep(out_dir) -> tuple[dict, SweepSummary]:
    data = read_json(Path(out_dir) / "sweep_summary.json", schema="sweep_summary")
    return data["scenario"], SweepSummary([RunRecord.from_dict(r) for r in data["records"]])

