"""Independent reference solutions used to validate the production integrator.

Nothing here reuses the production generator: the matrices are assembled
row by row from the inflow/outflow balance of each population, in their own
state ordering, and only mapped to the production layout at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gammainc

from .errors import ValidationError
from .statespace import StateSpace

DENSE_DIM_CAP = 5000


@dataclass
class OracleResult:
    probe_times: np.ndarray
    distributions: list[np.ndarray]
    max_deviation_vs_production: float = float("nan")


def _states(n_half: int) -> list[tuple[int, int]]:
    return [(n, m) for m in range(2 * n_half + 1) for n in range(m + 1)]


def _balance_matrix(n_half: int, gamma1: float, gamma2: float, sparse: bool):
    """Rate matrix in (m ascending, n ascending) order, one balance row per state."""
    states = _states(n_half)
    pos = {s: i for i, s in enumerate(states)}
    top = 2 * n_half

    def r1(n, m):
        return n * (top - m + 1)

    def r2(n, m):
        return (m - n) * (top - m + 1)

    rows, cols, vals = [], [], []
    for i, (n, m) in enumerate(states):
        rows.append(i)
        cols.append(i)
        vals.append(-(gamma1 * r1(n, m) + gamma2 * r2(n, m)))
        if m + 1 <= top:
            # gain from (n+1, m+1) on line 1 and from (n, m+1) on line 2
            if n + 1 <= m + 1:
                rows.append(i)
                cols.append(pos[(n + 1, m + 1)])
                vals.append(gamma1 * r1(n + 1, m + 1))
            rows.append(i)
            cols.append(pos[(n, m + 1)])
            vals.append(gamma2 * r2(n, m + 1))
    dim = len(states)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    if not sparse:
        mat = mat.toarray()
    weights = (
        np.array([gamma1 * r1(n, m) for n, m in states], dtype=float),
        np.array([gamma2 * r2(n, m) for n, m in states], dtype=float),
    )
    return states, mat, weights


def _permutation(space: StateSpace, states) -> np.ndarray:
    # perm[i] = production index of oracle state i
    return np.array([space.index_of(n, m) for n, m in states])


def dense_expm_solve(
    space: StateSpace,
    gamma1: float,
    gamma2: float,
    init: np.ndarray,
    probe_times,
    dim_cap: int = DENSE_DIM_CAP,
) -> OracleResult:
    """``P(t) = expm(G t) P(0)`` with a dense Pade scaling-and-squaring exponential."""
    if space.dim > dim_cap:
        raise ValidationError(f"dimension {space.dim} exceeds dense oracle cap {dim_cap}")
    times = np.asarray(probe_times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValidationError("probe times must be sorted and non-negative")
    states, G, _ = _balance_matrix(space.n_half, gamma1, gamma2, sparse=False)
    perm = _permutation(space, states)
    p0 = np.asarray(init, dtype=float)[perm]
    out = []
    for t in times:
        p = p0.copy() if t == 0 else scipy.linalg.expm(G * t) @ p0
        full = np.empty(space.dim)
        full[perm] = p
        out.append(full)
    return OracleResult(probe_times=times, distributions=out)


def resolvent_moments(
    space: StateSpace, gamma1: float, gamma2: float, init: np.ndarray
) -> dict[str, float]:
    """Exact infinite-time areas and time moments of both modes.

    Uses ``int_0^inf t^k exp(G t) dt = k! (-G)^-(k+1)`` on the transient
    states, i.e. three triangular solves per run.
    """
    states, G, (w1, w2) = _balance_matrix(space.n_half, gamma1, gamma2, sparse=True)
    perm = _permutation(space, states)
    p0 = np.asarray(init, dtype=float)[perm]
    transient = np.array([(n, m) != (0, 0) for n, m in states])
    # states with no outflow other than (0, 0) are unreachable-or-frozen; keep them out
    outflow = -G.diagonal()
    live = transient & (outflow > 0)
    if np.any(p0[transient & ~live] > 0):
        raise ValidationError("initial mass on a frozen state: moments diverge")
    idx = np.flatnonzero(live)
    A = -G[idx][:, idx].tocsr()
    x = p0[idx]
    res = {}
    vecs = []
    for _ in range(3):
        x = spla.spsolve_triangular(A, x, lower=False)
        vecs.append(x)
    for k, w in ((1, w1[idx]), (2, w2[idx])):
        res[f"area{k}"] = float(w @ vecs[0])
        res[f"m1_{k}"] = float(w @ vecs[1])
        res[f"m2_{k}"] = 2.0 * float(w @ vecs[2])
    return res


def dicke_ladder_moments(n_atoms: int, gamma: float = 1.0) -> tuple[float, float, float]:
    """Mean photon emission time, its second moment and relative spread for a
    fully excited single-mode Dicke ladder of ``n_atoms`` two-level atoms.

    The k-th photon leaves after a sum of independent exponential waits with
    rates ``gamma * j * (n_atoms - j + 1)``, j = n_atoms .. n_atoms-k+1.
    """
    j = np.arange(n_atoms, 0, -1)
    rates = gamma * j * (n_atoms - j + 1.0)
    mean_k = np.cumsum(1.0 / rates)
    var_k = np.cumsum(1.0 / rates**2)
    tau = mean_k.mean()
    tau2 = (var_k + mean_k**2).mean()
    return tau, tau2, math.sqrt(tau2 - tau * tau) / tau


def _phi(delta: float, t):
    """``(1 - exp(-delta t)) / delta``, continuous at ``delta = 0``."""
    t = np.asarray(t, dtype=float)
    if delta == 0:
        return t
    return -np.expm1(-delta * t) / delta


def two_atom_closed_form(gamma1: float, gamma2: float, t) -> dict[str, np.ndarray]:
    """Exact N = 1 solution (two atoms, one in |1>, one in |2>).

    Returns the four populations, both intensities, and, when
    ``gamma1 == gamma2``, the running area and first/second time moments.
    """
    if gamma1 < 0 or gamma2 < 0 or gamma1 + gamma2 <= 0:
        raise ValidationError("need non-negative rates with a positive sum")
    t = np.asarray(t, dtype=float)
    r = gamma1 + gamma2
    p12 = np.exp(-r * t)
    # (1,1) is fed by line 2 and drains at 2*gamma1; (0,1) is fed by line 1, drains at 2*gamma2
    p11 = gamma2 * np.exp(-r * t) * _phi(gamma1 - gamma2, t)
    p01 = gamma1 * np.exp(-r * t) * _phi(gamma2 - gamma1, t)
    p00 = 1.0 - p12 - p11 - p01
    out = {
        "P12": p12,
        "P11": p11,
        "P01": p01,
        "P00": p00,
        "I1": gamma1 * (p12 + 2.0 * p11),
        "I2": gamma2 * (p12 + 2.0 * p01),
    }
    if gamma1 == gamma2:
        g = gamma1
        x = 2.0 * g * t

        def lower(k):  # int_0^x u^(k-1) e^-u du
            return math.gamma(k) * gammainc(k, x)

        area = 0.5 * (lower(1) + lower(2))
        m1 = (lower(2) + lower(3)) / (4.0 * g)
        m2 = (lower(3) + lower(4)) / (8.0 * g * g)
        for k in (1, 2):
            out[f"A{k}"] = area
            out[f"M1_{k}"] = m1
            out[f"M2_{k}"] = m2
    return out


def two_atom_distribution(space: StateSpace, gamma1: float, gamma2: float, t: float) -> np.ndarray:
    if space.n_half != 1:
        raise ValidationError("closed form exists only for N = 1")
    cf = two_atom_closed_form(gamma1, gamma2, t)
    p = np.zeros(space.dim)
    for key, (n, m) in (("P12", (1, 2)), ("P11", (1, 1)), ("P01", (0, 1)), ("P00", (0, 0))):
        p[space.index_of(n, m)] = float(cf[key])
    return p
