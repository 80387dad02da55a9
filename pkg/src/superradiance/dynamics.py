"""Cooperative decay rates, the sparse rate-equation generator and initial states."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .statespace import StateSpace


@dataclass(frozen=True)
class DecayRates:
    """Single-atom decay rates of the |1>->|3> (mode 1) and |2>->|3> (mode 2) lines."""

    gamma1: float
    gamma2: float

    def __post_init__(self) -> None:
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")
        if self.gamma1 == 0 and self.gamma2 == 0:
            raise ValidationError("gamma1 and gamma2 cannot both be zero")

    @property
    def slow(self) -> float:
        return min(g for g in (self.gamma1, self.gamma2) if g > 0)

    @property
    def fast(self) -> float:
        return max(self.gamma1, self.gamma2)

    def scaled(self, factor: float) -> "DecayRates":
        return DecayRates(self.gamma1 * factor, self.gamma2 * factor)


def _check_state(n: int, m: int, n_half: int) -> None:
    if not (0 <= n <= m <= 2 * n_half):
        raise ValidationError(f"({n}, {m}) is not a valid state for N={n_half}")


def coop_rate_mode1(n: int, m: int, n_half: int) -> int:
    _check_state(n, m, n_half)
    return n * (2 * n_half - m + 1)


def coop_rate_mode2(n: int, m: int, n_half: int) -> int:
    _check_state(n, m, n_half)
    return (m - n) * (2 * n_half - m + 1)


def coop_rate_arrays(space: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    """Integer cooperative factors of both modes for every state, by flat index."""
    n, m = space.arrays()
    ground_plus_one = space.n_atoms - m + 1
    return n * ground_plus_one, (m - n) * ground_plus_one


@dataclass(frozen=True, eq=False)
class Generator:
    """Transition-rate matrix of the population dynamics, ``dP/dt = G @ P``.

    ``diagonal`` holds the (non-positive) negated outflow of each state;
    ``sources``/``targets``/``rates`` list the off-diagonal entries
    ``G[target, source] = rate``.
    """

    space: StateSpace
    rates: DecayRates
    diagonal: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    edge_rates: np.ndarray
    coop1: np.ndarray = field(repr=False)
    coop2: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def off_diagonal(self) -> list[tuple[int, int, float]]:
        return list(
            zip(self.sources.tolist(), self.targets.tolist(), self.edge_rates.tolist())
        )

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        rows = np.concatenate([np.arange(self.dim), self.targets])
        cols = np.concatenate([np.arange(self.dim), self.sources])
        vals = np.concatenate([self.diagonal, self.edge_rates])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))

    def emission_weights(self, raw: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Per-state weights whose dot product with ``P`` gives each mode's intensity.

        By default the weights include the single-atom rates, so intensity is the
        photon emission rate.  ``raw=True`` returns the bare cooperative factors.
        """
        w1 = self.coop1.astype(float)
        w2 = self.coop2.astype(float)
        if raw:
            return w1, w2
        return self.rates.gamma1 * w1, self.rates.gamma2 * w2

    @property
    def max_rate(self) -> float:
        return float(-self.diagonal.min())


def build_generator(space: StateSpace, rates: DecayRates) -> Generator:
    coop1, coop2 = coop_rate_arrays(space)
    out1 = rates.gamma1 * coop1
    out2 = rates.gamma2 * coop2
    n, m = space.arrays()
    idx = np.arange(space.dim)

    # target of a mode-1 jump (n-1, m-1) and mode-2 jump (n, m-1), flat indices
    top = space.n_atoms
    def flat(nn, mm):
        return (top + 1) * (top + 2) // 2 - (mm + 1) * (mm + 2) // 2 + (mm - nn)

    has1 = out1 > 0
    has2 = out2 > 0
    sources = np.concatenate([idx[has1], idx[has2]])
    targets = np.concatenate(
        [flat(n[has1] - 1, m[has1] - 1), flat(n[has2], m[has2] - 1)]
    )
    edge_rates = np.concatenate([out1[has1], out2[has2]])
    order = np.lexsort((targets, sources))
    return Generator(
        space=space,
        rates=rates,
        diagonal=-(out1 + out2),
        sources=sources[order],
        targets=targets[order],
        edge_rates=edge_rates[order],
        coop1=coop1,
        coop2=coop2,
    )


class InitialKind(str, Enum):
    V_STANDARD = "v-standard"
    TWO_LEVEL_CONVENTIONAL = "two-level-conventional"
    TWO_LEVEL_UNCONVENTIONAL = "two-level-unconventional"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value: "str | InitialKind") -> "InitialKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("_", "-"))
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown initial kind {value!r} (choose from {choices})")


def initial_distribution(
    space: StateSpace,
    kind: "InitialKind | str",
    custom: np.ndarray | None = None,
) -> np.ndarray:
    """Probability vector at ``t = 0``.

    ``v-standard`` and ``two-level-conventional`` put all weight on ``(N, 2N)``
    (N atoms in |1>, N in |2>); ``two-level-unconventional`` on ``(0, N)``
    (N atoms in |2>, N in the ground level).  ``custom`` validates and copies
    the supplied vector.
    """
    kind = InitialKind.parse(kind)
    N = space.n_half
    p = np.zeros(space.dim)
    if kind in (InitialKind.V_STANDARD, InitialKind.TWO_LEVEL_CONVENTIONAL):
        p[space.index_of(N, 2 * N)] = 1.0
    elif kind is InitialKind.TWO_LEVEL_UNCONVENTIONAL:
        p[space.index_of(0, N)] = 1.0
    else:
        if custom is None:
            raise ValidationError("custom initial kind needs a distribution")
        p = np.array(custom, dtype=float)
        if p.shape != (space.dim,):
            raise ValidationError(f"custom distribution must have shape ({space.dim},)")
        if not np.all(np.isfinite(p)) or p.min() < 0:
            raise ValidationError("custom distribution must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"custom distribution sums to {p.sum()!r}, not 1")
    return p
