import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lielac._constants import ENERGY_SENTINEL
from lielac.energy import (
    EnergyConfig,
    ProblemInstance,
    boundary_energy,
    dist_interval,
    e_ace,
    e_burgers,
    e_heat,
    heat_domain_bounds,
    kde_nll,
    make_energy,
    transform_instance,
)
from lielac.fields import Field1D, Field2D, QueryWindow, SineICParams, gen_sine_ic
from lielac.groups import AceElement, Se2Element, generator_exp

HEAT_WINDOW = QueryWindow(0.0, 2 * math.pi, 0.0, 16.0)


def heat_instance(amplitude, window=HEAT_WINDOW):
    return ProblemInstance(gen_sine_ic(SineICParams((amplitude,), (2,), (0.0,)), n=65), window, 'heat')


def test_dist_interval():
    assert dist_interval(0.5, 0.0, 1.0) == 0.0
    assert dist_interval(-2.0, 0.0, 1.0) == 2.0
    assert dist_interval(3.0, 0.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        dist_interval(0.0, 1.0, 0.0)


def test_kde_nll():
    assert kde_nll(np.zeros((1, 2)), 1.0, np.zeros(2)) == pytest.approx(math.log(2 * math.pi))
    samples = np.random.default_rng(0).standard_normal((50, 2))
    batch = kde_nll(samples, 0.3, np.array([[0.0, 0.0], [1.0, 1.0], [100.0, 0.0]]))
    assert batch.shape == (3,)
    assert np.all(np.isfinite(batch))
    assert batch[2] > batch[0]
    assert batch[0] == pytest.approx(kde_nll(samples, 0.3, np.zeros(2)))
    with pytest.raises(ValueError):
        kde_nll(samples, 0.0, np.zeros(2))


def test_kde_nll_matches_direct_sum():
    rng = np.random.default_rng(3)
    samples, point, h = rng.standard_normal((40, 2)), rng.standard_normal(2), 0.7
    sq = np.sum((samples - point) ** 2, axis=1)
    density = np.mean(np.exp(-sq / (2 * h ** 2))) / (2 * math.pi * h ** 2)
    assert abs(kde_nll(samples, h, point) + math.log(density)) <= 1e-12


coords = st.floats(-3.0, 3.0, allow_nan=False)


@given(v=coords, w=coords, lo=coords, width=st.floats(0.0, 2.0))
def test_dist_interval_is_1_lipschitz(v, w, lo, width):
    hi = lo + width
    assert dist_interval(v, lo, hi) >= 0.0
    assert abs(dist_interval(v, lo, hi) - dist_interval(w, lo, hi)) <= abs(v - w) + 1e-12


@given(seed=st.integers(0, 2 ** 16), point=st.tuples(coords, coords))
def test_kde_nll_is_permutation_invariant(seed, point):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((12, 2))
    shuffled = samples[rng.permutation(12)]
    assert kde_nll(shuffled, 0.5, np.array(point)) == pytest.approx(kde_nll(samples, 0.5, np.array(point)),
                                                                    rel=1e-12, abs=1e-12)


def test_heat_energy_deviation():
    assert e_heat(heat_instance(5.0)) == pytest.approx(8.0, abs=1e-12)
    assert e_heat(heat_instance(1.0)) == pytest.approx(0.0, abs=1e-12)
    assert e_heat(heat_instance(0.5)) == pytest.approx(1.0, abs=1e-12)


def test_heat_energy_interval_mode():
    for amplitude in (0.25, 0.5, 1.0):
        assert e_heat(heat_instance(amplitude), u_mode='interval') == 0.0
    assert e_heat(heat_instance(3.0), u_mode='interval') == pytest.approx(4.0, abs=1e-12)


def test_heat_energy_window_terms():
    short = heat_instance(1.0, QueryWindow(0.0, 2 * math.pi, 0.0, 8.0))
    assert e_heat(short, tf_mode='interval') == pytest.approx(0.0, abs=1e-12)
    assert e_heat(short, tf_mode='point') == pytest.approx(8.0, abs=1e-12)
    late = heat_instance(1.0, QueryWindow(0.0, 2 * math.pi, 0.0, 20.0))
    assert e_heat(late) == pytest.approx(4.0, abs=1e-12)
    wide = heat_instance(1.0, QueryWindow(-1.0, 2 * math.pi + 0.5, 0.0, 16.0))
    assert e_heat(wide) == pytest.approx(1.5, abs=1e-12)
    assert heat_domain_bounds() == (-1.0, 1.0, 0.0, 2 * math.pi, 0.0, 0.0)


def test_heat_energy_is_invariant_only_for_trivial_elements():
    inst = heat_instance(5.0)
    scaled = transform_instance(generator_exp('heat', 3, -0.1 * math.log(5.0)), inst, 0.1)
    assert e_heat(scaled) == pytest.approx(0.0, abs=1e-12)
    shifted = transform_instance(generator_exp('heat', 2, 1.0), inst, 0.1)
    assert e_heat(shifted) > e_heat(inst)


def test_burgers_energy(burgers_instance):
    assert e_burgers(burgers_instance) == pytest.approx(0.2, abs=1e-12)
    late = ProblemInstance(Field1D(np.zeros(9), 0.0, 1.0, 0.5, True), QueryWindow(0.0, 1.0, 0.5, 1.0), 'burgers')
    assert e_burgers(late) == pytest.approx(0.5)
    assert e_burgers(late, t0_mode='interval') == 0.0
    long = ProblemInstance(Field1D(np.zeros(9), 0.0, 2.0, 0.0, True), QueryWindow(0.0, 2.0, 0.0, 1.0), 'burgers')
    assert e_burgers(long) == pytest.approx(2.0)


def test_boundary_energy():
    v = np.arange(9.0).reshape(3, 3)
    assert boundary_energy(Field2D(v)) == 0 + 1 + 4 + 9 + 36


def test_ace_energy_constraints(ace_instance):
    assert e_ace(ace_instance) == pytest.approx(boundary_energy(ace_instance.ic))
    assert e_ace(ace_instance, inner=lambda f: 7.0) == 7.0
    late = ProblemInstance(Field2D(ace_instance.ic.values, 0.5), ace_instance.query, 'se2')
    assert e_ace(late) == ENERGY_SENTINEL
    tilted = ProblemInstance(Field2D(ace_instance.ic.values, angle=0.3), ace_instance.query, 'se2')
    assert e_ace(tilted) == ENERGY_SENTINEL
    outside = ProblemInstance(ace_instance.ic, QueryWindow(0.0, 1.0, 0.0, 2.0), 'se2')
    assert e_ace(outside) == ENERGY_SENTINEL


def test_transform_instance_shifts_the_se2_window(ace_instance):
    moved = transform_instance(AceElement(Se2Element(), 0.25), ace_instance)
    assert moved.query == QueryWindow(0.0, 1.0, 0.25, 1.25)
    assert moved.ic.time == 0.25


def test_problem_instance_validation(ace_instance):
    with pytest.raises(ValueError):
        ProblemInstance(ace_instance.ic, ace_instance.query, 'heat')
    with pytest.raises(ValueError):
        ProblemInstance(Field1D(np.zeros(4)), ace_instance.query, 'se2')
    with pytest.raises(ValueError):
        ProblemInstance(Field1D(np.zeros(4)), ace_instance.query, 'so2')


def test_make_energy():
    inst = heat_instance(5.0)
    assert make_energy(EnergyConfig('heat_domain'))(inst) == pytest.approx(8.0, abs=1e-12)
    assert make_energy(EnergyConfig('heat_domain', u_mode='interval'))(inst) == pytest.approx(8.0, abs=1e-12)
    regularized = make_energy(EnergyConfig('custom', custom=lambda x: 1.0, alpha_reg=0.5, regularizer=lambda x: 4.0))
    assert regularized(inst) == 3.0
    samples = np.array([[1.0, 0.0], [0.0, 1.0]])
    kde = make_energy(EnergyConfig('kde_nll', samples=samples, bandwidth=0.5))
    assert kde(np.array([1.0, 0.0])) == pytest.approx(kde_nll(samples, 0.5, np.array([1.0, 0.0])))


def test_energy_config_validation():
    with pytest.raises(ValueError):
        EnergyConfig('entropy')
    with pytest.raises(ValueError):
        EnergyConfig('kde_nll')
    with pytest.raises(ValueError):
        EnergyConfig('custom')
    with pytest.raises(ValueError):
        EnergyConfig('heat_domain', alpha_reg=1.0)
    with pytest.raises(AssertionError):
        e_heat(heat_instance(1.0), tf_mode='window')
