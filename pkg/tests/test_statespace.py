import pytest
from hypothesis import given, settings, strategies as st

from superradiance.errors import ValidationError
from superradiance.statespace import StateSpace, dimension, index_of, state_of
from superradiance.dynamics import DecayRates, build_generator


@pytest.mark.parametrize("n, dim", [(1, 6), (5, 66), (150, 45451)])
def test_dimension(n, dim):
    assert dimension(n) == dim
    assert StateSpace(n).dim == dim


@pytest.mark.parametrize("bad", [0, -3, 1.5])
def test_dimension_rejects(bad):
    with pytest.raises(ValidationError):
        dimension(bad)


def test_layout_pins():
    space = StateSpace(3)
    assert index_of(6, 6, space) == 0
    assert index_of(3, 6, space) == 3
    assert index_of(0, 0, space) == space.dim - 1
    assert state_of(0, space) == (6, 6)


def test_invalid_pairs():
    space = StateSpace(1)
    with pytest.raises(ValidationError):
        index_of(2, 1, space)
    with pytest.raises(ValidationError):
        index_of(0, 3, space)
    with pytest.raises(ValidationError):
        state_of(space.dim, space)
    with pytest.raises(ValidationError):
        state_of(-1, space)


@pytest.mark.parametrize("n_half", range(1, 21))
def test_exhaustive_bijection(n_half):
    space = StateSpace(n_half)
    pairs = [(n, m) for m in range(2 * n_half + 1) for n in range(m + 1)]
    assert len(pairs) == space.dim
    idx = [space.index_of(n, m) for n, m in pairs]
    assert sorted(idx) == list(range(space.dim))
    assert all(space.state_of(i) == p for i, p in zip(idx, pairs))
    ns, ms = space.arrays()
    assert all((ns[i], ms[i]) == space.state_of(i) for i in range(space.dim))


@settings(max_examples=60, deadline=None)
@given(st.integers(21, 300), st.data())
def test_sampled_bijection(n_half, data):
    space = StateSpace(n_half)
    assert space.dim == (2 * n_half + 1) * (2 * n_half + 2) // 2
    m = data.draw(st.integers(0, 2 * n_half))
    n = data.draw(st.integers(0, m))
    i = space.index_of(n, m)
    assert 0 <= i < space.dim
    assert space.state_of(i) == (n, m)


@pytest.mark.parametrize("n_half", [1, 2, 4, 7])
def test_transitions_point_to_larger_index(n_half):
    gen = build_generator(StateSpace(n_half), DecayRates(1.0, 0.3))
    assert (gen.targets > gen.sources).all()
