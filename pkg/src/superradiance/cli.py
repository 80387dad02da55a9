"""Command-line front end: ``simulate``, ``sweep``, ``analyze``, ``synthesis``, ``verify``.

Exit codes: 0 success, 1 validation error, 2 numerical or verification
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, oracle
from .errors import CheckpointError, NumericalFailure, SuperradianceError, ValidationError
from .dynamics import initial_distribution
from .io import atomic_write_text, dumps, fmt, load_checkpoint, validate, write_json
from .observables import observable_track
from .runner import Scenario, load_scenario, load_sweep, run_and_save, run_name, run_sweep, simulate
from .statespace import StateSpace, dimension

log = logging.getLogger("superradiance")

VERIFY_GAMMAS = ((1.0, 1.0), (1.0, 0.1), (1.0, 0.0), (0.0, 0.1))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_model_flags(p: argparse.ArgumentParser, n_range: bool) -> None:
    p.add_argument("--scenario", help="JSON scenario file (flags override its values)")
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--n", type=int, help="N (the ensemble has 2N atoms)")
    if n_range:
        p.add_argument("--n-min", type=int)
        p.add_argument("--n-max", type=int)
        p.add_argument("--n-step", type=int)
    p.add_argument("--init", choices=["v-standard", "two-level-conventional", "two-level-unconventional"])
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--t-max", help="horizon, or 'auto'")
    p.add_argument("--samples", type=int, help="samples on the output grid")
    p.add_argument("--completion-epsilon", type=float)
    p.add_argument("--early-log-points", type=int)
    p.add_argument("--raw-eq2-intensity", action="store_true", default=None,
                   help="drop the decay-rate weight from the intensities")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superradiance", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate one scenario and write CSV + summary JSON")
    _add_model_flags(p, n_range=False)
    p.add_argument("--out", "--out-dir", dest="out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a range of N in parallel")
    _add_model_flags(p, n_range=True)
    p.add_argument("--out", "--out-dir", dest="out", help="output directory")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="fit a sweep against the Dicke criteria")
    p.add_argument("sweep_dir")
    p.add_argument("--out", "--out-dir", dest="out", help="report directory (default: sweep_dir)")
    p.add_argument("--alpha-offset", type=float, default=None,
                   help="add a t_display column shifted by alpha * dicke_delay(N)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesis", help="two-pulse timing vs. a cascade estimate")
    _add_model_flags(p, n_range=False)
    p.add_argument("--completion-fraction", type=float)
    p.add_argument("--formula-only", action="store_true", help="skip the simulation")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_synthesis)

    p = sub.add_parser("verify", help="compare the integrator with independent oracles")
    p.add_argument("--max-n", type=int, default=5)
    p.add_argument("--dim-cap", type=int, default=oracle.DENSE_DIM_CAP)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_verify)
    return parser


def _scenario_from_args(args, single_n: bool) -> Scenario:
    solver = {
        "rel_tol": args.rel_tol,
        "abs_tol": args.abs_tol,
        "sample_count": args.samples,
        "completion_epsilon": args.completion_epsilon,
        "early_log_points": args.early_log_points,
    }
    if args.t_max is not None:
        solver["t_max"] = "auto" if args.t_max == "auto" else _float(args.t_max, "--t-max")
    overrides = {
        "gamma1": args.gamma1,
        "gamma2": args.gamma2,
        "init": args.init,
        "raw_eq2_intensity": args.raw_eq2_intensity,
        "solver": {k: v for k, v in solver.items() if v is not None},
    }
    if getattr(args, "completion_fraction", None) is not None:
        overrides["synthesis_completion_fraction"] = args.completion_fraction
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if args.n is not None:
        overrides["n_values"] = [args.n]
    elif getattr(args, "n_min", None) is not None or getattr(args, "n_max", None) is not None:
        if args.n_min is None or args.n_max is None:
            raise ValidationError("--n-min and --n-max go together")
        overrides["n_values"] = {"min": args.n_min, "max": args.n_max, "step": args.n_step or 1}
    elif getattr(args, "n_step", None) is not None:
        raise ValidationError("--n-step needs --n-min and --n-max")
    for name in ("n_min", "n_max", "n_step"):
        if getattr(args, name, None) is not None and getattr(args, name) < 1:
            raise ValidationError(f"--{name.replace('_', '-')} must be >= 1")
    if args.n is not None and args.n < 1:
        raise ValidationError("--n must be >= 1")
    scenario = load_scenario(args.scenario, overrides)
    if single_n and len(scenario.n_values) != 1:
        raise ValidationError("this command takes exactly one N")
    return scenario


def _float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{flag} expects a number or 'auto', got {text!r}")


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args, single_n=True)
    n = scenario.n_values[0]
    rec = run_and_save(scenario, n, scenario.output_dir)
    print(
        f"N={n} t_end={rec.t_end:.6g} area1={rec.area1_inf:.10g} area2={rec.area2_inf:.10g} "
        f"-> {Path(scenario.output_dir) / run_name(n)}.{{csv,json}}"
    )
    return 0


def cmd_sweep(args) -> int:
    if args.threads < 1:
        raise ValidationError("--threads must be >= 1")
    scenario = _scenario_from_args(args, single_n=False)
    summary = run_sweep(scenario, scenario.output_dir, threads=args.threads)
    failed = [r.n_half for r in summary.records if r.status != "ok"]
    print(f"{len(summary.records)} runs in {scenario.output_dir}; failed: {failed or 'none'}")
    return 2 if failed else 0


def cmd_analyze(args) -> int:
    sweep_dir = Path(args.sweep_dir)
    out = Path(args.out) if args.out else sweep_dir
    try:
        scenario, summary = load_sweep(sweep_dir)
        runs = [load_checkpoint(sweep_dir / f"{run_name(r.n_half)}.csv") for r in summary.ok]
    except CheckpointError as exc:
        raise ValidationError(f"missing or corrupt sweep in {sweep_dir}: {exc}") from exc
    if not summary.ok:
        raise ValidationError(f"sweep in {sweep_dir} has no successful runs")

    fits = analysis.criteria_battery(summary)
    minima = []
    for series in runs:
        track = observable_track(series)
        rec = next(r for r in summary.ok if r.n_half == series.n_half)
        for k in (1, 2):
            if track.defined_from(k) is None or series.n_half < 2:
                continue
            t, v = analysis.sigma_minimum(track, k)
            minima.append({
                "n_half": series.n_half, "mode": k, "t": t, "value": v,
                "asymptotic": rec.get("sigma", k, "_inf"),
                "dicke_sigma": analysis.dicke_sigma(series.n_half),
            })
    locus = []
    width_cv = {}
    for k in (1, 2):
        if any(r.get("peak", k) for r in summary.ok):
            locus.append(analysis.peak_locus_fit(summary.ok, k).to_dict())
            scaled = [r.get("fwhm", k) * r.n_half for r in summary.ok if r.get("fwhm", k)]
            width_cv[f"mode{k}"] = analysis.coefficient_of_variation(scaled) if scaled else None
    write_json(
        out / "analysis_report.json",
        {
            "scenario": scenario,
            "fits": [f.to_dict() for f in fits],
            "sigma_minima": minima,
            "peak_locus": locus,
            "width_cv": width_cv,
        },
        schema="fit_report",
    )
    surface = analysis.normalized_surface(runs, alpha=args.alpha_offset)
    names = list(surface)
    lines = [",".join(names)]
    for row in zip(*(surface[k] for k in names)):
        lines.append(",".join([str(int(row[0]))] + [fmt(v) for v in row[1:]]))
    atomic_write_text(out / "normalized_surface.csv", "\n".join(lines) + "\n")
    lines = ["n_half,mode,t,value,asymptotic,dicke_sigma"]
    for m in minima:
        asym = "" if m["asymptotic"] is None else fmt(m["asymptotic"])
        lines.append(f"{m['n_half']},{m['mode']},{fmt(m['t'])},{fmt(m['value'])},{asym},{fmt(m['dicke_sigma'])}")
    atomic_write_text(out / "sigma_minima.csv", "\n".join(lines) + "\n")
    for f in fits:
        print(f"mode {f.mode}: {f.y_label} vs {f.x_label}: slope={f.slope:.6g} "
              f"intercept={f.intercept:.6g} R^2={f.r_squared:.6f}")
    return 0


def cmd_synthesis(args) -> int:
    scenario = _scenario_from_args(args, single_n=True)
    n = scenario.n_values[0]
    if scenario.gamma1 <= 0 or scenario.gamma2 <= 0:
        raise ValidationError("synthesis needs gamma1 > 0 and gamma2 > 0 (the rate ratio is used)")
    if scenario.init != "v-standard":
        raise ValidationError("synthesis is defined for the v-standard initial state")
    series = None if args.formula_only else simulate(scenario, n)
    report = analysis.synthesis_report(
        n, scenario.gamma1, scenario.gamma2, series, scenario.synthesis_completion_fraction
    )
    if args.out:
        write_json(args.out, report.to_dict(), schema="synthesis_report")
    else:
        validate(report.to_dict(), "synthesis_report")
        sys.stdout.write(dumps(report.to_dict()))
    return 0


def verify_battery(max_n: int, tol: float, probes: int = 20, dim_cap: int = oracle.DENSE_DIM_CAP):
    """Production integrator against the dense-exponential and closed-form oracles."""
    if max_n < 1:
        raise ValidationError("--max-n must be >= 1")
    if dimension(max_n) > dim_cap:
        raise ValidationError(f"N={max_n} has dimension {dimension(max_n)} > cap {dim_cap}")
    cases = []
    for n in range(1, max_n + 1):
        space = StateSpace(n)
        for g1, g2 in VERIFY_GAMMAS:
            inits = ["v-standard"]
            if g1 == 0:
                inits.append("two-level-unconventional")
            for init in inits:
                scen = Scenario(gamma1=g1, gamma2=g2, n_values=[n], init=init)
                t_end = simulate(scen, n).t_end
                times = np.linspace(0.0, t_end, probes)
                series = simulate(scen, n, probe_times=times)
                ref = oracle.dense_expm_solve(space, g1, g2, initial_distribution(space, init), times, dim_cap)
                dev = max(float(np.max(np.abs(a - b))) for a, b in zip(series.probe_distributions, ref.distributions))
                cases.append({"check": "dense_expm", "n_half": n, "gamma1": g1, "gamma2": g2,
                              "init": init, "max_deviation": dev, "passed": dev <= tol})
    # closed form at N = 1 against the dense exponential
    space = StateSpace(1)
    times = np.linspace(0.0, 5.0, probes)
    for g1, g2 in ((1.0, 1.0), (1.0, 0.1), (0.3, 0.7)):
        ref = oracle.dense_expm_solve(space, g1, g2, initial_distribution(space, "v-standard"), times)
        dev = max(
            float(np.max(np.abs(oracle.two_atom_distribution(space, g1, g2, t) - p)))
            for t, p in zip(times, ref.distributions)
        )
        cases.append({"check": "two_atom_closed_form", "n_half": 1, "gamma1": g1, "gamma2": g2,
                      "init": "v-standard", "max_deviation": dev, "passed": dev <= 1e-12})
    worst = max(c["max_deviation"] for c in cases)
    return {"tolerance": tol, "cases": cases, "max_deviation": worst,
            "passed": all(c["passed"] for c in cases)}


def cmd_verify(args) -> int:
    report = verify_battery(args.max_n, args.tol, args.probes, args.dim_cap)
    for c in report["cases"]:
        flag = "ok  " if c["passed"] else "FAIL"
        print(f"{flag} {c['check']:<20} N={c['n_half']} gamma=({c['gamma1']:g},{c['gamma2']:g}) "
              f"{c['init']:<24} max|dP|={c['max_deviation']:.3e}")
    print(f"max deviation {report['max_deviation']:.3e} (tolerance {args.tol:g})")
    if args.out:
        write_json(args.out, report, schema="verify_report")
    return 0 if report["passed"] else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except CheckpointError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except SuperradianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
