import math

import numpy as np
import pytest
import sympy as sp

from superradiance.dynamics import DecayRates, build_generator, initial_distribution
from superradiance.errors import ValidationError
from superradiance.integrator import SolverConfig, integrate
from superradiance.oracle import (
    dense_expm_solve,
    dicke_ladder_moments,
    resolvent_moments,
    two_atom_closed_form,
    two_atom_distribution,
)
from superradiance.statespace import StateSpace


def _sympy_two_atom():
    t = sp.symbols("t", positive=True)
    intensity = sp.exp(-2 * t) * (1 + 2 * t)  # mode 1 at unit rates
    area = sp.integrate(intensity, (t, 0, sp.oo))
    m1 = sp.integrate(t * intensity, (t, 0, sp.oo))
    m2 = sp.integrate(t**2 * intensity, (t, 0, sp.oo))
    tau = m1 / area
    sigma = sp.sqrt(m2 / area - tau**2) / tau
    return float(area), float(tau), float(m2 / area), float(sigma)


def test_sympy_reference_values():
    area, tau, tau2, sigma = _sympy_two_atom()
    assert (area, tau, tau2) == (1.0, 0.75, 1.0)
    assert sigma == pytest.approx(math.sqrt(7) / 3, abs=1e-15)


def test_closed_form_frozen_values():
    cf = two_atom_closed_form(1.0, 1.0, [0.5, 1e3])
    assert cf["P12"][0] == pytest.approx(0.36787944117144233, abs=1e-15)
    assert cf["A1"][1] == pytest.approx(1.0, abs=1e-12)
    assert cf["M1_1"][1] == pytest.approx(0.75, abs=1e-12)
    assert cf["M2_2"][1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gammas", [(1.0, 1.0), (1.0, 0.1), (0.3, 2.0), (1.0, 0.0), (0.0, 0.5)])
def test_closed_form_matches_expm(gammas):
    space = StateSpace(1)
    p0 = initial_distribution(space, "v-standard")
    probes = np.linspace(0, 6, 13)
    res = dense_expm_solve(space, *gammas, p0, probes)
    for t, p in zip(probes, res.distributions):
        np.testing.assert_allclose(p, two_atom_distribution(space, *gammas, t), atol=1e-12, rtol=0)


@pytest.mark.parametrize("n_half", [1, 2, 5])
def test_expm_identity_and_normalization(n_half):
    space = StateSpace(n_half)
    p0 = initial_distribution(space, "v-standard")
    res = dense_expm_solve(space, 1.0, 0.1, p0, [0.0, 0.1, 1.0, 10.0])
    np.testing.assert_array_equal(res.distributions[0], p0)
    for p in res.distributions:
        assert abs(p.sum() - 1) <= 1e-12


def test_expm_guards():
    space = StateSpace(3)
    p0 = initial_distribution(space, "v-standard")
    with pytest.raises(ValidationError):
        dense_expm_solve(space, 1.0, 1.0, p0, [0.0], dim_cap=10)
    with pytest.raises(ValidationError):
        dense_expm_solve(space, 1.0, 1.0, p0, [1.0, 0.5])


def test_mode_swap_symmetry():
    # swapping the rates maps (n, m) -> (m - n, m) for the symmetric start
    space = StateSpace(3)
    p0 = initial_distribution(space, "v-standard")
    a = dense_expm_solve(space, 1.0, 0.2, p0, [0.3]).distributions[0]
    b = dense_expm_solve(space, 0.2, 1.0, p0, [0.3]).distributions[0]
    ns, ms = space.arrays()
    mirror = np.array([space.index_of(m - n, m) for n, m in zip(ns, ms)])
    np.testing.assert_allclose(a, b[mirror], atol=1e-13)


@pytest.mark.parametrize("n_half, gammas", [(4, (1.0, 0.1)), (12, (1.0, 1.0)), (20, (0.5, 2.0))])
def test_resolvent_matches_integrator(n_half, gammas):
    space = StateSpace(n_half)
    p0 = initial_distribution(space, "v-standard")
    ref = resolvent_moments(space, *gammas, p0)
    s = integrate(build_generator(space, DecayRates(*gammas)), p0,
                  SolverConfig(completion_epsilon=1e-13))
    for k in (1, 2):
        assert s.area(k)[-1] == pytest.approx(ref[f"area{k}"], rel=1e-8)
        assert s.first_moment(k)[-1] == pytest.approx(ref[f"m1_{k}"], rel=1e-7)
        assert s.second_moment(k)[-1] == pytest.approx(ref[f"m2_{k}"], rel=1e-6)
        assert ref[f"area{k}"] == pytest.approx(n_half, rel=1e-12)


@pytest.mark.parametrize("n_atoms", [2, 10, 150])
def test_dicke_ladder_mean(n_atoms):
    tau, tau2, sigma = dicke_ladder_moments(n_atoms, 2.0)
    harmonic = sum(1.0 / j for j in range(1, n_atoms + 1))
    assert tau == pytest.approx(harmonic / (2.0 * n_atoms), rel=1e-13)
    assert tau2 > tau * tau and sigma > 0


def test_dicke_ladder_matches_reduced_model():
    n_half = 10
    space = StateSpace(n_half)
    p0 = initial_distribution(space, "two-level-conventional")
    ref = resolvent_moments(space, 1.0, 0.0, p0)
    tau, tau2, _ = dicke_ladder_moments(n_half, 1.0)
    assert ref["m1_1"] / ref["area1"] == pytest.approx(tau, rel=1e-12)
    assert ref["m2_1"] / ref["area1"] == pytest.approx(tau2, rel=1e-12)
