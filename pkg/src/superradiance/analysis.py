"""Peak and width extraction, regressions against the Dicke laws, and the
superradiant-synthesis timing report."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalFailure, ValidationError
from .integrator import EULER_GAMMA, TimeSeries
from .observables import ObservableTrack, asymptotics, observable_track

log = logging.getLogger(__name__)


def _check_n(n_half: int) -> None:
    if int(n_half) != n_half or n_half < 2:
        raise ValidationError(f"Dicke formulas need N >= 2, got {n_half!r}")


def dicke_delay(n_half: int) -> float:
    """Superradiant delay ``(E0 + ln N) / N`` (natural log, E0 = Euler's constant)."""
    _check_n(n_half)
    return (EULER_GAMMA + math.log(n_half)) / n_half


def dicke_sigma(n_half: int) -> float:
    """Relative delay fluctuation ``pi / (sqrt(6) (E0 + ln N))``."""
    _check_n(n_half)
    return math.pi / (math.sqrt(6.0) * (EULER_GAMMA + math.log(n_half)))


# -- peaks and widths ---------------------------------------------------------


def find_peak(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Maximum of a sampled pulse, refined by a parabola through the top three samples.

    A maximum on the first or last sample is returned as is.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if y.size == 0 or not np.any(y > 0):
        raise ValidationError("intensity track is identically zero")
    i = int(np.argmax(y))
    if i == 0 or i == y.size - 1:
        return float(t[i]), float(y[i])
    x = t[i - 1 : i + 2] - t[i]
    c2, c1, c0 = np.polyfit(x, y[i - 1 : i + 2], 2)
    if c2 >= 0:
        return float(t[i]), float(y[i])
    dx = -c1 / (2 * c2)
    return float(t[i] + dx), float(c0 + c1 * dx + c2 * dx * dx)


def peak_extract(series: TimeSeries, mode: int) -> tuple[float, float]:
    return find_peak(series.times, series.intensity(mode))


def _crossing(t0, y0, t1, y1, level):
    return t0 + (level - y0) * (t1 - t0) / (y1 - y0)


def full_width_half_max(times: np.ndarray, values: np.ndarray) -> float:
    """Width between the half-maximum crossings nearest the peak.

    Pulses peaked on the first sample get twice their right half-width.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    t_peak, y_peak = find_peak(t, y)
    half = 0.5 * y_peak
    i = int(np.argmax(y))

    right = None
    for j in range(i, y.size - 1):
        if y[j] >= half > y[j + 1]:
            right = _crossing(t[j], y[j], t[j + 1], y[j + 1], half)
            break
    if right is None:
        raise ValidationError("intensity never falls below half maximum after the peak")
    if i == 0:
        return 2.0 * (right - t[0])

    left = None
    for j in range(i, 0, -1):
        if y[j] >= half > y[j - 1]:
            left = _crossing(t[j - 1], y[j - 1], t[j], y[j], half)
            break
    if left is None:
        raise ValidationError("intensity never rises through half maximum before the peak")
    return right - left


def fwhm(series: TimeSeries, mode: int) -> float:
    return full_width_half_max(series.times, series.intensity(mode))


# -- regressions --------------------------------------------------------------


@dataclass
class FitReport:
    slope: float
    intercept: float
    r_squared: float
    x_label: str = "x"
    y_label: str = "y"
    n_points: int = 0
    mode: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def linear_fit(xs, ys, x_label: str = "x", y_label: str = "y") -> FitReport:
    """Ordinary least squares line with its coefficient of determination.

    A constant ``ys`` has no variance to explain; R^2 is reported as 0 then.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("xs and ys must be 1-D arrays of equal length")
    if x.size < 3:
        raise ValidationError(f"need at least 3 points for a fit, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("fit inputs must be finite")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= 1e-300 * max(1.0, float(np.abs(x).max()) ** 2):
        raise ValidationError("xs are all equal; slope undefined")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 0.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return FitReport(slope, intercept, r2, x_label, y_label, int(x.size))


# -- per-run summaries and sweeps --------------------------------------------


@dataclass
class RunRecord:
    """Scalar extracts of one run.  ``None`` marks a quantity that is undefined
    for this run (e.g. a mode with zero rate, or a width whose half level is
    never crossed)."""

    n_half: int
    gamma1: float
    gamma2: float
    init_kind: str
    status: str = "ok"
    error: str | None = None
    t_end: float | None = None
    peak1: tuple[float, float] | None = None
    peak2: tuple[float, float] | None = None
    fwhm1: float | None = None
    fwhm2: float | None = None
    tau1_inf: float | None = None
    tau2_inf: float | None = None
    sigma1_inf: float | None = None
    sigma2_inf: float | None = None
    sigma1_min: tuple[float, float] | None = None
    sigma2_min: tuple[float, float] | None = None
    area1_inf: float | None = None
    area2_inf: float | None = None
    truncation_bound: float | None = None
    max_mass_error: float | None = None

    def get(self, name: str, mode: int, suffix: str = ""):
        return getattr(self, f"{name}{mode}{suffix}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        for k in ("peak1", "peak2", "sigma1_min", "sigma2_min"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class SweepSummary:
    records: list[RunRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.records.sort(key=lambda r: r.n_half)

    @property
    def ok(self) -> list[RunRecord]:
        return [r for r in self.records if r.status == "ok"]

    def column(self, name: str, mode: int | None = None) -> list:
        key = name if mode is None else f"{name}{mode}"
        return [getattr(r, key) for r in self.ok]


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def summarize_run(series: TimeSeries, track: ObservableTrack | None = None) -> RunRecord:
    track = track or observable_track(series)
    asym = asymptotics(series)
    rec = RunRecord(
        n_half=series.n_half,
        gamma1=series.gamma1,
        gamma2=series.gamma2,
        init_kind=series.init_kind,
        t_end=series.t_end,
        truncation_bound=asym.truncation_bound,
        max_mass_error=float(np.max(np.abs(series.total_mass - 1.0))),
    )
    for k in (1, 2):
        setattr(rec, f"area{k}_inf", asym.__dict__[f"area{k}_inf"])
        setattr(rec, f"tau{k}_inf", _finite_or_none(asym.__dict__[f"tau{k}_inf"]))
        setattr(rec, f"sigma{k}_inf", _finite_or_none(asym.__dict__[f"sigma{k}_inf"]))
        intensity = series.intensity(k)
        if not np.any(intensity > 0):
            continue
        setattr(rec, f"peak{k}", peak_extract(series, k))
        try:
            setattr(rec, f"fwhm{k}", fwhm(series, k))
        except ValidationError as exc:
            log.info("N=%d mode %d: no width (%s)", series.n_half, k, exc)
        if track.defined_from(k) is not None:
            setattr(rec, f"sigma{k}_min", sigma_minimum(track, k))
    return rec


def criteria_battery(sweep: SweepSummary) -> list[FitReport]:
    """Fits of each emitting mode against the four Dicke criteria.

    Per mode: peak intensity vs N^2 (plus the log-log exponent), asymptotic
    delay vs ``dicke_delay``, asymptotic noise vs ``dicke_sigma`` and pulse
    width vs 1/N.  Runs lacking a quantity are left out of that fit.
    """
    recs = sweep.ok
    if len({r.n_half for r in recs}) < 5:
        raise ValidationError("criteria battery needs at least 5 distinct N values")
    fits = []
    for k in (1, 2):
        if all(r.get("peak", k) is None for r in recs):
            continue
        peaks = [(r.n_half, r.get("peak", k)[1]) for r in recs if r.get("peak", k)]
        n = np.array([p[0] for p in peaks], dtype=float)
        ip = np.array([p[1] for p in peaks])
        candidates = [
            (n**2, ip, "N^2", f"peak_intensity{k}"),
            (np.log(n), np.log(ip), "ln N", f"ln_peak_intensity{k}"),
        ]
        tau = [(dicke_delay(r.n_half), r.get("tau", k, "_inf")) for r in recs
               if r.get("tau", k, "_inf") is not None]
        sig = [(dicke_sigma(r.n_half), r.get("sigma", k, "_inf")) for r in recs
               if r.get("sigma", k, "_inf") is not None]
        wid = [(1.0 / r.n_half, r.get("fwhm", k)) for r in recs if r.get("fwhm", k) is not None]
        for pairs, xl, yl in (
            (tau, "dicke_delay", f"tau{k}_inf"),
            (sig, "dicke_sigma", f"sigma{k}_inf"),
            (wid, "1/N", f"fwhm{k}"),
        ):
            if pairs:
                xs, ys = zip(*pairs)
                candidates.append((np.array(xs), np.array(ys), xl, yl))
        for xs, ys, xl, yl in candidates:
            fit = linear_fit(xs, ys, xl, yl)
            fit.mode = k
            fits.append(fit)
    return fits


def sigma_minimum(track: ObservableTrack, mode: int) -> tuple[float, float]:
    """Global minimum of the noise track, skipping the first 1% of defined samples."""
    start = track.defined_from(mode)
    if start is None:
        raise ValidationError(f"noise track of mode {mode} is nowhere defined")
    sig = track.sigma(mode)
    n_def = sig.size - start
    first = start + int(0.01 * n_def)
    window = sig[first:]
    ok = np.isfinite(window)
    if not ok.any():
        raise ValidationError(f"noise track of mode {mode} is nowhere defined")
    j = first + int(np.nanargmin(window))
    return float(track.times[j]), float(sig[j])


def has_valley(values: np.ndarray, rel: float = 1e-9) -> bool:
    """True when the track dips strictly below both its first and last defined values."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 3:
        return False
    low = v[1:-1].min()
    return bool(low < v[0] * (1 - rel) and low < v[-1] * (1 - rel))


def coefficient_of_variation(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std() / v.mean())


# -- synthesis ----------------------------------------------------------------


@dataclass
class SynthesisReport:
    n_half: int
    gamma1: float
    gamma2: float
    gamma_ratio: float
    tau1D_formula: float
    tau2D_cascade_estimate: float
    cascade_sum: float
    mode1_peak_time: float | None = None
    mode2_peak_time: float | None = None
    completion_fraction: float = 0.9
    completion_time_90: float | None = None
    speedup: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def cascade_estimate(n_half: int, gamma1: float, gamma2: float) -> tuple[float, float, float]:
    """``(tau_1D, tau_2D, sum)`` for a cascade in which mode 2 waits its own delay."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise ValidationError("cascade estimate needs both decay rates positive")
    t1 = dicke_delay(n_half)
    t2 = (gamma1 / gamma2) * t1
    return t1, t2, t1 + t2


def photon_areas(series: TimeSeries) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated photon numbers per mode, whatever intensity convention the run used."""
    if series.raw_eq2_intensity:
        return series.area1 * series.gamma1, series.area2 * series.gamma2
    return series.area1, series.area2


def completion_time(series: TimeSeries, fraction: float = 0.9) -> float:
    """Earliest time at which both modes together emitted ``fraction * 2N`` photons."""
    if not (0 < fraction < 1):
        raise ValidationError("completion fraction must lie in (0, 1)")
    a1, a2 = photon_areas(series)
    total = a1 + a2
    goal = fraction * 2 * series.n_half
    hit = np.flatnonzero(total >= goal)
    if hit.size == 0:
        raise NumericalFailure(f"run never reached {fraction:.0%} of its photons")
    j = int(hit[0])
    if j == 0:
        return float(series.times[0])
    return float(_crossing(series.times[j - 1], total[j - 1], series.times[j], total[j], goal))


def synthesis_report(
    n_half: int,
    gamma1: float,
    gamma2: float,
    series: TimeSeries | None = None,
    completion_fraction: float = 0.9,
) -> SynthesisReport:
    """Compare the measured two-pulse timing of a v-standard run with a cascade.

    Without ``series`` only the formula-level quantities are filled in.
    """
    t1, t2, total = cascade_estimate(n_half, gamma1, gamma2)
    rep = SynthesisReport(
        n_half=n_half,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma_ratio=gamma1 / gamma2,
        tau1D_formula=t1,
        tau2D_cascade_estimate=t2,
        cascade_sum=total,
        completion_fraction=completion_fraction,
    )
    if series is None:
        return rep
    if (series.n_half, series.gamma1, series.gamma2) != (n_half, gamma1, gamma2):
        raise ValidationError("run parameters do not match the requested synthesis scenario")
    rep.mode1_peak_time = peak_extract(series, 1)[0]
    rep.mode2_peak_time = peak_extract(series, 2)[0]
    rep.completion_time_90 = completion_time(series, completion_fraction)
    rep.speedup = total / rep.completion_time_90
    return rep


# -- normalized surfaces ------------------------------------------------------


def normalized_surface(runs: list[TimeSeries], alpha: float | None = None) -> dict[str, np.ndarray]:
    """Long-format table of per-N peak-normalized intensities against the Dicke delay.

    With ``alpha`` an extra ``t_display`` column shifts every slice by
    ``alpha * dicke_delay(N)``.
    """
    if len(runs) < 3:
        raise ValidationError("normalized surface needs at least 3 runs")
    cols: dict[str, list[np.ndarray]] = {k: [] for k in ("n_half", "t", "tau_d", "i1_norm", "i2_norm")}
    if alpha is not None:
        cols["t_display"] = []
    for s in sorted(runs, key=lambda s: s.n_half):
        td = dicke_delay(s.n_half)
        cols["n_half"].append(np.full(s.times.size, s.n_half))
        cols["t"].append(s.times)
        cols["tau_d"].append(np.full(s.times.size, td))
        for k in (1, 2):
            i = s.intensity(k)
            peak = i.max()
            cols[f"i{k}_norm"].append(i / peak if peak > 0 else np.zeros_like(i))
        if alpha is not None:
            cols["t_display"].append(s.times + alpha * td)
    return {k: np.concatenate(v) for k, v in cols.items()}


def peak_locus_fit(records: list[RunRecord], mode: int) -> FitReport:
    """Peak time against the Dicke delay across N (the ridge of the normalized surface)."""
    pairs = [(dicke_delay(r.n_half), r.get("peak", mode)[0]) for r in records
             if r.get("peak", mode) is not None]
    if not pairs:
        raise ValidationError(f"no peaks for mode {mode}")
    xs, ys = zip(*pairs)
    fit = linear_fit(xs, ys, "dicke_delay", f"t_peak{mode}")
    fit.mode = mode
    return fit
