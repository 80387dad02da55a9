"""Adaptive Dormand-Prince integration of the population dynamics.

The probability vector is integrated together with six scalar accumulators
per run: the pulse area, first and second time moment of each mode's
intensity.  They share the Runge-Kutta stages and the error control with the
populations, so the moments are as accurate as the state itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dynamics import DecayRates, Generator
from .errors import NumericalFailure, ValidationError

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329

# Dormand-Prince 5(4), FSAL
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
# fifth-order minus embedded fourth-order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

# column order of the per-step observable record
_OBS = ("I1", "I2", "A1", "A2", "M1_1", "M1_2", "M2_1", "M2_2", "ground", "absorbed", "total")


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    t_max: float | str = "auto"
    completion_epsilon: float = 1e-6
    sample_count: int = 2000
    max_steps: int = 2_000_000
    early_log_points: int = 0

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("tolerances must be positive")
        if not (0 < self.completion_epsilon < 1):
            raise ValidationError("completion_epsilon must lie in (0, 1)")
        if int(self.sample_count) != self.sample_count or self.sample_count < 2:
            raise ValidationError("sample_count must be an integer >= 2")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be positive")
        if self.early_log_points < 0:
            raise ValidationError("early_log_points must be >= 0")
        if self.t_max != "auto":
            try:
                t_max = float(self.t_max)
            except (TypeError, ValueError):
                raise ValidationError(f"t_max must be a number or 'auto', got {self.t_max!r}")
            if not (t_max > 0 and math.isfinite(t_max)):
                raise ValidationError("t_max must be positive and finite")


@dataclass
class TimeSeries:
    """Sampled trajectory of one run.

    ``m1_k`` and ``m2_k`` are the running integrals of ``t * I_k`` and
    ``t**2 * I_k``; ``area_k`` is the running integral of ``I_k``.
    """

    times: np.ndarray
    intensity1: np.ndarray
    intensity2: np.ndarray
    area1: np.ndarray
    area2: np.ndarray
    m1_1: np.ndarray
    m1_2: np.ndarray
    m2_1: np.ndarray
    m2_2: np.ndarray
    ground_mass: np.ndarray
    absorbed_mass: np.ndarray
    total_mass: np.ndarray
    final_distribution: np.ndarray
    t_end: float
    completed: bool
    n_half: int
    gamma1: float
    gamma2: float
    init_kind: str = "v-standard"
    raw_eq2_intensity: bool = False
    n_steps: int = 0
    n_rejected: int = 0
    probe_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    probe_distributions: list[np.ndarray] = field(default_factory=list)

    def intensity(self, mode: int) -> np.ndarray:
        return _pick(mode, self.intensity1, self.intensity2)

    def area(self, mode: int) -> np.ndarray:
        return _pick(mode, self.area1, self.area2)

    def first_moment(self, mode: int) -> np.ndarray:
        return _pick(mode, self.m1_1, self.m1_2)

    def second_moment(self, mode: int) -> np.ndarray:
        return _pick(mode, self.m2_1, self.m2_2)


def _pick(mode: int, a, b):
    if mode == 1:
        return a
    if mode == 2:
        return b
    raise ValidationError(f"mode must be 1 or 2, got {mode!r}")


def auto_t_max(generator: Generator, init: np.ndarray, rates: DecayRates, n_half: int) -> float:
    """Integration horizon long enough for the run to reach the absorbing state.

    The slowest late channel is a single excitation decaying at
    ``gamma_slow * 2N``; the second term covers the superradiant delay.
    """
    slow, fast = rates.slow, rates.fast
    return 20.0 / (slow * 2 * n_half) + 10.0 * (EULER_GAMMA + math.log(n_half)) / (n_half * fast)


def integrate(
    generator: Generator,
    init: np.ndarray,
    config: SolverConfig | None = None,
    *,
    raw_eq2_intensity: bool = False,
    probe_times=None,
    init_kind: str = "custom",
) -> TimeSeries:
    """Integrate ``dP/dt = G P`` from ``init`` until the ensemble has decayed.

    The run stops after the first accepted step whose mass in absorbing
    states (no outflow; only ``(0, 0)`` unless a rate is zero) reaches
    ``1 - completion_epsilon`` (and past the last probe time), at
    ``t_max``, or raises :class:`NumericalFailure` after ``max_steps``.
    Probe times are hit exactly and the full distribution is recorded there.
    """
    config = config or SolverConfig()
    P = np.array(init, dtype=float)
    if P.shape != (generator.dim,):
        raise ValidationError(f"initial distribution must have shape ({generator.dim},)")
    if P.min() < 0 or abs(P.sum() - 1) > 1e-12:
        raise ValidationError("initial distribution must be non-negative and sum to 1")

    if config.t_max == "auto":
        t_max = auto_t_max(generator, P, generator.rates, generator.space.n_half)
    else:
        t_max = float(config.t_max)
    probes = np.empty(0) if probe_times is None else np.asarray(probe_times, dtype=float)
    if probes.size and (np.any(np.diff(probes) < 0) or probes[0] < 0 or probes[-1] > t_max):
        raise ValidationError("probe times must be sorted and lie in [0, t_max]")

    G = generator.matrix
    W = np.vstack(generator.emission_weights(raw=raw_eq2_intensity))
    WG = np.asarray((G.T @ W.T).T)  # d(W P)/dt = (W G) P
    ground_idx = generator.dim - 1  # (0, 0) is the last state of the layout
    # with a zero rate, states other than (0, 0) can be absorbing too
    absorbing = np.flatnonzero(generator.diagonal == 0)
    rtol, atol = config.rel_tol, config.abs_tol
    neg_floor = -10.0 * atol

    def moment_rates(t: float, intens: np.ndarray) -> np.ndarray:
        return np.concatenate([intens, t * intens, t * t * intens])

    t = 0.0
    q = np.zeros(6)  # A1 A2 M1_1 M1_2 M2_1 M2_2
    kP = [None] * 7
    kq = [None] * 7
    kP[0] = G @ P
    intens = W @ P
    kq[0] = moment_rates(t, intens)

    rec_t = [0.0]
    rec_v = [_record(intens, q, P, ground_idx, absorbing)]
    rec_d = [_record_deriv(t, intens, WG @ P, kP[0], ground_idx, absorbing)]

    probe_out: list[np.ndarray] = []
    next_probe = 0
    while next_probe < probes.size and probes[next_probe] <= 0.0:
        probe_out.append(P.copy())
        next_probe += 1

    h = min(t_max, 0.5 / max(generator.max_rate, 1e-300))
    err_old = 1e-4
    n_steps = n_rejected = 0
    completed = P[absorbing].sum() >= 1 - config.completion_epsilon and next_probe == probes.size

    while not completed and t < t_max:
        if n_steps + n_rejected >= config.max_steps:
            raise NumericalFailure(f"max_steps={config.max_steps} exceeded at t={t:.6g}")
        target = t_max if next_probe >= probes.size else min(t_max, probes[next_probe])
        landing = t + h >= target * (1 - 1e-12)
        h_try = target - t if landing else h
        if h_try <= 1e-14 * max(1.0, abs(t)):
            raise NumericalFailure(f"step size underflow at t={t:.6g}")

        for i in range(1, 7):
            a = _A[i]
            Pi = P.copy()
            qi = q.copy()
            for j, aij in enumerate(a):
                if aij != 0.0:
                    Pi += (h_try * aij) * kP[j]
                    qi += (h_try * aij) * kq[j]
            ti = t + _C[i] * h_try
            kP[i] = G @ Pi
            kq[i] = moment_rates(ti, W @ Pi)
            if i == 6:
                P_new, q_new = Pi, qi
        errP = _E[0] * kP[0]
        errq = _E[0] * kq[0]
        for i in range(2, 7):
            errP += _E[i] * kP[i]
            errq += _E[i] * kq[i]
        errP *= h_try
        errq *= h_try
        scaleP = atol + rtol * np.maximum(np.abs(P), np.abs(P_new))
        scaleq = atol + rtol * np.maximum(np.abs(q), np.abs(q_new))
        err = max(np.max(np.abs(errP) / scaleP), np.max(np.abs(errq) / scaleq))

        if not np.isfinite(err):
            err = 1e10
        if err <= 1.0:
            t = target if landing else t + h_try
            P, q = P_new, q_new
            kP[0], kq[0] = kP[6], kq[6]
            n_steps += 1
            pmin = P.min()
            if pmin < neg_floor:
                raise NumericalFailure(f"negative probability {pmin:.3e} at t={t:.6g}")
            intens = W @ P
            rec_t.append(t)
            rec_v.append(_record(intens, q, P, ground_idx, absorbing))
            rec_d.append(_record_deriv(t, intens, WG @ P, kP[0], ground_idx, absorbing))
            if landing and next_probe < probes.size:
                while next_probe < probes.size and probes[next_probe] <= t:
                    probe_out.append(P.copy())
                    next_probe += 1
            err = max(err, 1e-10)
            fac = 0.9 * err ** -(0.2 - 0.75 * 0.04) * err_old ** 0.04
            fac = min(10.0, max(0.2, fac))
            if not landing:
                h = h_try * fac
            else:
                h = max(h, h_try * fac) if h_try < h else h_try * fac
            err_old = err
            completed = (
                P[absorbing].sum() >= 1 - config.completion_epsilon
                and next_probe >= probes.size
            )
        else:
            n_rejected += 1
            h = h_try * max(0.2, 0.9 * err ** -0.2)

    rec_t = np.array(rec_t)
    rec_v = np.array(rec_v)
    rec_d = np.array(rec_d)
    t_end = float(rec_t[-1])
    done = bool(rec_v[-1, _OBS.index("absorbed")] >= 1 - config.completion_epsilon)
    log.debug("integrated to t=%.6g in %d steps (%d rejected)", t_end, n_steps, n_rejected)

    grid = sample_grid(t_end, config.sample_count, config.early_log_points)
    if rec_t.size >= 2:
        spline = CubicHermiteSpline(rec_t, rec_v, rec_d, axis=0)
        samples = spline(grid)
        # endpoints exactly as integrated
        samples[0] = rec_v[0]
        samples[-1] = rec_v[-1]
    else:
        samples = np.repeat(rec_v[:1], grid.size, axis=0)
    col = {name: samples[:, i] for i, name in enumerate(_OBS)}
    for name in ("A1", "A2", "M1_1", "M1_2", "M2_1", "M2_2", "ground", "absorbed"):
        col[name] = np.maximum.accumulate(col[name])  # interpolation wiggle only

    return TimeSeries(
        times=grid,
        intensity1=np.maximum(col["I1"], 0.0),
        intensity2=np.maximum(col["I2"], 0.0),
        area1=col["A1"],
        area2=col["A2"],
        m1_1=col["M1_1"],
        m1_2=col["M1_2"],
        m2_1=col["M2_1"],
        m2_2=col["M2_2"],
        ground_mass=np.clip(col["ground"], 0.0, 1.0),
        absorbed_mass=np.clip(col["absorbed"], 0.0, 1.0),
        total_mass=col["total"],
        final_distribution=P,
        t_end=t_end,
        completed=done,
        n_half=generator.space.n_half,
        gamma1=generator.rates.gamma1,
        gamma2=generator.rates.gamma2,
        init_kind=str(getattr(init_kind, "value", init_kind)),
        raw_eq2_intensity=raw_eq2_intensity,
        n_steps=n_steps,
        n_rejected=n_rejected,
        probe_times=probes,
        probe_distributions=probe_out,
    )


def sample_grid(t_end: float, sample_count: int, early_log_points: int = 0) -> np.ndarray:
    """Uniform grid on ``[0, t_end]``, optionally refined with log-spaced early points."""
    grid = np.linspace(0.0, t_end, int(sample_count))
    if early_log_points and t_end > 0:
        first = grid[1]
        extra = np.geomspace(first * 1e-4, first, early_log_points + 1)[:-1]
        grid = np.concatenate([grid[:1], extra, grid[1:]])
    return grid


def _record(intens, q, P, ground_idx, absorbing) -> np.ndarray:
    return np.concatenate([intens, q, [P[ground_idx], P[absorbing].sum(), P.sum()]])


def _record_deriv(t, intens, dintens, dP, ground_idx, absorbing) -> np.ndarray:
    return np.concatenate(
        [dintens, intens, t * intens, t * t * intens, [dP[ground_idx], dP[absorbing].sum(), 0.0]]
    )
