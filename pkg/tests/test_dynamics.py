import numpy as np
import pytest

from superradiance.dynamics import (
    DecayRates,
    InitialKind,
    build_generator,
    coop_rate_mode1,
    coop_rate_mode2,
    initial_distribution,
)
from superradiance.errors import ValidationError
from superradiance.statespace import StateSpace


def test_coop_rates():
    assert coop_rate_mode1(150, 300, 150) == 150
    assert coop_rate_mode1(0, 17, 20) == 0
    assert coop_rate_mode1(1, 1, 1) == 2
    assert coop_rate_mode2(0, 150, 150) == 22650
    assert coop_rate_mode2(4, 4, 9) == 0
    assert coop_rate_mode2(0, 1, 1) == 2
    with pytest.raises(ValidationError):
        coop_rate_mode1(3, 2, 5)
    with pytest.raises(ValidationError):
        coop_rate_mode2(0, 11, 5)


def test_decay_rates_validation():
    with pytest.raises(ValidationError):
        DecayRates(0.0, 0.0)
    with pytest.raises(ValidationError):
        DecayRates(-1.0, 1.0)
    r = DecayRates(1.0, 0.0)
    assert r.slow == 1.0 and r.fast == 1.0


def test_two_atom_generator_by_hand():
    space = StateSpace(1)
    gen = build_generator(space, DecayRates(1.0, 1.0))
    out = {space.state_of(i): -d for i, d in enumerate(gen.diagonal)}
    assert out[(1, 2)] == 2 and out[(1, 1)] == 2 and out[(0, 1)] == 2 and out[(0, 0)] == 0
    edges = {(space.state_of(s), space.state_of(t)): r for s, t, r in gen.off_diagonal}
    assert edges[((1, 2), (0, 1))] == 1
    assert edges[((1, 2), (1, 1))] == 1
    assert edges[((1, 1), (0, 0))] == 2
    assert edges[((0, 1), (0, 0))] == 2
    # (0,2) and (2,2) are unreachable but still drain: 2 atoms in |2> / |1>, one ground slot
    assert out[(0, 2)] == 2 and out[(2, 2)] == 2


@pytest.mark.parametrize("n_half", range(1, 7))
@pytest.mark.parametrize("gammas", [(1.0, 1.0), (1.0, 0.1), (0.37, 2.5), (1.0, 0.0)])
def test_columns_sum_to_zero(n_half, gammas):
    gen = build_generator(StateSpace(n_half), DecayRates(*gammas))
    col = np.asarray(gen.matrix.sum(axis=0)).ravel()
    assert np.abs(col).max() <= 1e-13
    assert (gen.edge_rates > 0).all()
    counts = np.bincount(gen.sources, minlength=gen.dim)
    assert counts.max() <= 2


def test_zero_gamma2_keeps_line():
    n_half = 6
    space = StateSpace(n_half)
    gen = build_generator(space, DecayRates(1.0, 0.0))
    for s, t, _ in gen.off_diagonal:
        (n0, m0), (n1, m1) = space.state_of(s), space.state_of(t)
        assert m0 - n0 == m1 - n1
    reach = {space.index_of(n_half, 2 * n_half)}
    frontier = list(reach)
    succ = {}
    for s, t, _ in gen.off_diagonal:
        succ.setdefault(s, []).append(t)
    while frontier:
        s = frontier.pop()
        for t in succ.get(s, []):
            if t not in reach:
                reach.add(t)
                frontier.append(t)
    assert {space.state_of(i)[1] - space.state_of(i)[0] for i in reach} == {n_half}


@pytest.mark.parametrize("n_half", [1, 4, 25])
def test_reduces_to_single_mode_dicke_rate(n_half):
    for n in range(n_half + 1):
        assert coop_rate_mode1(n, n + n_half, n_half) == n * (n_half - n + 1)


def test_only_ground_absorbs():
    space = StateSpace(5)
    gen = build_generator(space, DecayRates(1.0, 0.5))
    zero = np.flatnonzero(gen.diagonal == 0)
    assert [space.state_of(i) for i in zero] == [(0, 0)]


def test_initial_distributions():
    space = StateSpace(150)
    p = initial_distribution(space, "v-standard")
    assert p[space.index_of(150, 300)] == 1 and p.sum() == 1
    q = initial_distribution(space, InitialKind.TWO_LEVEL_CONVENTIONAL)
    assert np.array_equal(p, q)
    u = initial_distribution(space, "two_level_unconventional")
    i0 = space.index_of(0, 150)
    assert u[i0] == 1 and u.sum() == 1
    gen = build_generator(space, DecayRates(0.0, 1.0))
    assert gen.coop2[i0] == 150 * 151


def test_custom_distribution():
    space = StateSpace(1)
    good = np.full(space.dim, 1 / space.dim)
    np.testing.assert_array_equal(initial_distribution(space, "custom", good), good)
    with pytest.raises(ValidationError):
        initial_distribution(space, "custom", good * 0.9)
    bad = good.copy()
    bad[0] = -0.1
    bad[1] += 0.1
    with pytest.raises(ValidationError):
        initial_distribution(space, "custom", bad)
    with pytest.raises(ValidationError):
        initial_distribution(space, "sideways")
