"""Delay times, noise fluctuations and pulse areas derived from a time series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ValidationError
from .integrator import TimeSeries

# tracks are undefined until the accumulated area reaches this fraction of the final area
AREA_THRESHOLD = 1e-12
RADICAND_ROUNDOFF = 1e-12


@dataclass
class ObservableTrack:
    """Running delay and noise tracks of both modes; NaN marks undefined samples."""

    times: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    defined_from1: int | None
    defined_from2: int | None

    def tau(self, mode: int) -> np.ndarray:
        return self.tau1 if mode == 1 else self.tau2

    def sigma(self, mode: int) -> np.ndarray:
        return self.sigma1 if mode == 1 else self.sigma2

    def defined_from(self, mode: int) -> int | None:
        return self.defined_from1 if mode == 1 else self.defined_from2


@dataclass
class AsymptoticSummary:
    tau1_inf: float
    tau2_inf: float
    sigma1_inf: float
    sigma2_inf: float
    area1_inf: float
    area2_inf: float
    truncation_bound: float


def _defined_mask(area: np.ndarray) -> np.ndarray:
    final = area[-1]
    if not final > 0:
        return np.zeros(area.shape, dtype=bool)
    return (area > 0) & (area >= AREA_THRESHOLD * final)


def defined_from(series: TimeSeries, mode: int) -> int | None:
    mask = _defined_mask(series.area(mode))
    return int(np.argmax(mask)) if mask.any() else None


def delay_track(series: TimeSeries, mode: int) -> np.ndarray:
    """Running mean emission time ``M1(t) / A(t)``."""
    area = series.area(mode)
    mask = _defined_mask(area)
    tau = np.full(area.shape, np.nan)
    tau[mask] = series.first_moment(mode)[mask] / area[mask]
    return tau


def _relative_spread(area, m1, m2, mask) -> np.ndarray:
    out = np.full(area.shape, np.nan)
    a = area[mask]
    mean = m1[mask] / a
    second = m2[mask] / a
    radicand = second - mean * mean
    floor = -RADICAND_ROUNDOFF * second
    if np.any(radicand < floor):
        worst = float(np.min(radicand / np.where(second > 0, second, 1.0)))
        raise NumericalFailure(f"negative emission-time variance (relative {worst:.3e})")
    out[mask] = np.sqrt(np.maximum(radicand, 0.0)) / mean
    return out


def sigma_track(series: TimeSeries, mode: int) -> np.ndarray:
    """Relative standard deviation of the emission time up to each sample."""
    area = series.area(mode)
    return _relative_spread(
        area, series.first_moment(mode), series.second_moment(mode), _defined_mask(area)
    )


def observable_track(series: TimeSeries) -> ObservableTrack:
    return ObservableTrack(
        times=series.times,
        tau1=delay_track(series, 1),
        tau2=delay_track(series, 2),
        sigma1=sigma_track(series, 1),
        sigma2=sigma_track(series, 2),
        defined_from1=defined_from(series, 1),
        defined_from2=defined_from(series, 2),
    )


def asymptotics(series: TimeSeries) -> AsymptoticSummary:
    """Infinite-time areas, delays and noise, evaluated at the end of a completed run.

    Raises :class:`ValidationError` if the run stopped before its mass was
    absorbed; extend ``t_max`` in that case.
    """
    if not series.completed:
        raise ValidationError(
            f"run stopped at t={series.t_end:.6g} before completion; increase t_max"
        )
    vals = {}
    for k in (1, 2):
        a = float(series.area(k)[-1])
        m1 = float(series.first_moment(k)[-1])
        m2 = float(series.second_moment(k)[-1])
        vals[f"area{k}_inf"] = a
        if a > 0:
            tau = m1 / a
            var = m2 / a - tau * tau
            if var < -RADICAND_ROUNDOFF * (m2 / a):
                raise NumericalFailure(f"negative emission-time variance in mode {k}")
            vals[f"tau{k}_inf"] = tau
            vals[f"sigma{k}_inf"] = math.sqrt(max(var, 0.0)) / tau
        else:
            vals[f"tau{k}_inf"] = math.nan
            vals[f"sigma{k}_inf"] = math.nan
    remaining = 1.0 - float(series.absorbed_mass[-1])
    return AsymptoticSummary(truncation_bound=max(remaining, 0.0) * series.t_end, **vals)
