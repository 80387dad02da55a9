"""Configuration lattice of the 2N-atom V-type ensemble.

A state ``(n, m)`` holds ``n`` atoms in upper level |1>, ``m - n`` atoms in
upper level |2> and ``2N - m`` atoms in the shared ground level |3>.  States
are stored layer by layer with ``m`` descending and, inside a layer, ``n``
descending.  Both radiative transitions lower ``m`` by one, so every
transition points to a strictly larger flat index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def dimension(n_half: int) -> int:
    """Number of valid ``(n, m)`` pairs for ``2 * n_half`` atoms."""
    if isinstance(n_half, bool) or int(n_half) != n_half or n_half < 1:
        raise ValidationError(f"n_half must be a positive integer, got {n_half!r}")
    top = 2 * int(n_half)
    return (top + 1) * (top + 2) // 2


@dataclass(frozen=True)
class StateSpace:
    n_half: int
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dim", dimension(self.n_half))

    @property
    def n_atoms(self) -> int:
        return 2 * self.n_half

    def _layer_offset(self, m: int) -> int:
        # layers m' = 2N .. m+1 come first, layer m' has m'+1 states
        top = self.n_atoms
        return (top + 1) * (top + 2) // 2 - (m + 1) * (m + 2) // 2

    def index_of(self, n: int, m: int) -> int:
        if not (0 <= n <= m <= self.n_atoms):
            raise ValidationError(
                f"({n}, {m}) is not a valid state for 2N={self.n_atoms} atoms"
            )
        return self._layer_offset(m) + (m - n)

    def state_of(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.dim):
            raise ValidationError(f"index {index} outside [0, {self.dim})")
        # number of states with layer <= m is (m+1)(m+2)/2; count from the bottom
        rest = self.dim - 1 - index
        m = int((np.sqrt(8 * rest + 1) - 1) // 2)
        while (m + 1) * (m + 2) // 2 <= rest:
            m += 1
        while m * (m + 1) // 2 > rest:
            m -= 1
        n = m - (index - self._layer_offset(m))
        return n, m

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(n, m)`` as integer arrays ordered by flat index."""
        ms = []
        ns = []
        for m in range(self.n_atoms, -1, -1):
            ms.append(np.full(m + 1, m, dtype=np.int64))
            ns.append(np.arange(m, -1, -1, dtype=np.int64))
        return np.concatenate(ns), np.concatenate(ms)


def index_of(n: int, m: int, space: StateSpace) -> int:
    return space.index_of(n, m)


def state_of(index: int, space: StateSpace) -> tuple[int, int]:
    return space.state_of(index)
