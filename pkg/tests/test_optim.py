import math

import numpy as np
import pytest

from lielac._constants import ENERGY_SENTINEL
from lielac._errors import NoFiniteStart, NonFiniteEnergy
from lielac.energy import e_heat, kde_nll
from lielac.groups import Se2Element, as_params, compose, identity
from lielac.jets import so2_act_point
from lielac.optim import (
    GroupAction,
    OptimConfig,
    alg1_global_retraction,
    alg2_lie_descent,
    alg3_coordinate_descent,
    fd_grad,
    initial_coeffs,
    multi_init_canonicalize,
)
from lielac.pipeline import instance_action

ROTATION = GroupAction('so2', so2_act_point)
TARGET = np.array([math.cos(0.7), math.sin(0.7)])
START = np.array([1.0, 0.0])


def quadratic(p):
    return float(np.sum((p - TARGET) ** 2))


@pytest.mark.parametrize('algorithm', [alg1_global_retraction, alg2_lie_descent])
def test_gradient_algorithms_reach_the_target(algorithm):
    cfg = OptimConfig(n_steps=200, n_inner=200, step_size=0.25)
    result = algorithm(quadratic, START, cfg, ROTATION)
    np.testing.assert_allclose(result.canonical, TARGET, atol=1e-6)
    assert result.g_inv.theta == pytest.approx(0.7, abs=1e-6)
    assert np.all(np.diff(result.energy_trace) <= 0)
    assert result.final_energy == result.energy_trace[-1]


def test_coordinate_descent_reaches_the_target():
    result = alg3_coordinate_descent(quadratic, START, OptimConfig(), ROTATION)
    np.testing.assert_allclose(result.canonical, TARGET, atol=1e-8)
    assert result.final_energy < 1e-12
    assert np.all(np.diff(result.energy_trace) < 0)
    assert result.steps[0][0] == 1


@pytest.mark.parametrize('algorithm', [alg1_global_retraction, alg2_lie_descent, alg3_coordinate_descent])
def test_g_inverts_g_inv(algorithm):
    result = algorithm(quadratic, START, OptimConfig(step_size=0.25), ROTATION)
    np.testing.assert_allclose(as_params(compose(result.g, result.g_inv)), as_params(identity('so2')), atol=1e-9)
    np.testing.assert_allclose(so2_act_point(result.g, result.canonical), START, atol=1e-9)


def test_single_outer_round_algorithms_agree():
    cfg = OptimConfig(n_outer=1, n_steps=40, n_inner=40, step_size=0.25)
    a = alg1_global_retraction(quadratic, START, cfg, ROTATION)
    b = alg2_lie_descent(quadratic, START, cfg, ROTATION)
    np.testing.assert_allclose(a.energy_trace, b.energy_trace, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(a.canonical, b.canonical, atol=1e-12)


def test_outer_rounds_continue_the_descent():
    one = alg2_lie_descent(quadratic, START, OptimConfig(n_outer=1, n_inner=3, step_size=0.1), ROTATION)
    three = alg2_lie_descent(quadratic, START, OptimConfig(n_outer=3, n_inner=3, step_size=0.1), ROTATION)
    assert three.final_energy < one.final_energy
    assert len(three.steps) == 3


def test_heat_coordinate_descent_rescales_the_amplitude(heat_instance):
    action = instance_action('heat', 0.1)
    result = alg3_coordinate_descent(e_heat, heat_instance, OptimConfig(n_steps=60), action)
    assert result.final_energy < 1e-6
    assert np.max(np.abs(result.canonical.ic.values)) == pytest.approx(1.0, abs=1e-6)
    assert 3 in [j for j, _ in result.steps]
    assert result.canonical.ic.periodic


def test_active_generators():
    cfg = OptimConfig(active=(3,))
    assert cfg.active_indices('heat') == (3,)
    np.testing.assert_array_equal(cfg.active_mask('burgers'), [False, False, True, False, False])
    with pytest.raises(ValueError):
        OptimConfig(active=(7,)).active_indices('burgers')


def test_config_validation():
    for kwargs in ({'step_size': 0.0}, {'num_inits': 0}, {'coord_pick_rule': 'greedy'}, {'init_rule': 'sobol'},
                   {'step_decay': 1.5}, {'threads': 0}, {'proximal_tau': -1.0}, {'n_steps': -1}):
        with pytest.raises(ValueError):
            OptimConfig(**kwargs)


def test_initial_coeffs():
    grid = initial_coeffs('so2', OptimConfig(num_inits=4, init_rule='grid'))
    np.testing.assert_allclose(np.ravel(grid), [0.0, math.pi / 2, math.pi, -math.pi / 2])
    uniform = initial_coeffs('heat', OptimConfig(num_inits=5, init_scale=0.3, active=(1, 3)))
    assert len(uniform) == 5
    np.testing.assert_array_equal(uniform[0], np.zeros(6))
    for c in uniform[1:]:
        assert np.all(np.abs(c) <= 0.3)
        np.testing.assert_array_equal(c[[1, 3, 4, 5]], 0.0)
    again = initial_coeffs('heat', OptimConfig(num_inits=5, init_scale=0.3, active=(1, 3)))
    np.testing.assert_array_equal(np.array(uniform), np.array(again))
    with pytest.raises(ValueError):
        initial_coeffs('heat', OptimConfig(num_inits=3, init_rule='grid'))


def test_initial_coeffs_spread_around_a_center():
    center = np.array([0.5, -1.0, 0.0, 0.2, 0.0, 0.1])
    inits = initial_coeffs('heat', OptimConfig(num_inits=5, init_scale=0.2, active=(3, 5)), center)
    np.testing.assert_array_equal(inits[0], center)
    for c in inits[1:]:
        assert np.all(np.abs(c - center) <= 0.2)
        np.testing.assert_array_equal((c - center)[[0, 1, 3, 5]], 0.0)
    grid = initial_coeffs('so2', OptimConfig(num_inits=2, init_rule='grid'), [0.25])
    np.testing.assert_allclose(np.ravel(grid), [0.25, 0.25 + math.pi])


def test_overflowing_elements_map_to_the_sentinel(heat_instance):
    action = instance_action('heat', 0.1)
    start = np.array([0.0, 0.0, 1e3, 0.0, 0.0, 0.0])
    with pytest.raises(NoFiniteStart):
        alg3_coordinate_descent(e_heat, heat_instance, OptimConfig(n_steps=5), action, start)
    with pytest.warns(UserWarning), pytest.raises(NoFiniteStart):
        multi_init_canonicalize(alg1_global_retraction, e_heat, heat_instance, OptimConfig(num_inits=2), action,
                                start)
    huge = np.array([0.0, 0.0, 0.0, 1e3, 0.0, 0.0])
    with pytest.raises(NoFiniteStart):
        alg2_lie_descent(e_heat, heat_instance, OptimConfig(n_steps=5), action, huge)


def test_fd_grad():
    target = np.array([0.5, -1.0, 2.0])

    def energy(c):
        return float(np.sum((c - target) ** 2))

    grad = fd_grad(energy, lambda c, x: c + x, np.zeros(3), np.zeros(3), fd_step=1e-4)
    np.testing.assert_allclose(grad, -2 * target, rtol=1e-8)
    masked = fd_grad(energy, lambda c, x: c + x, np.zeros(3), np.zeros(3), active=np.array([True, False, True]))
    assert masked[1] == 0.0
    with pytest.raises(NonFiniteEnergy):
        fd_grad(lambda c: math.inf, lambda c, x: c, np.zeros(2), None)


def test_sentinel_start_is_rejected():
    def energy(p):
        return ENERGY_SENTINEL

    with pytest.raises(NoFiniteStart):
        alg1_global_retraction(energy, START, OptimConfig(), ROTATION)
    with pytest.warns(UserWarning), pytest.raises(NoFiniteStart):
        multi_init_canonicalize(alg3_coordinate_descent, energy, START, OptimConfig(num_inits=3, init_rule='grid'),
                                ROTATION)


def test_multi_init_finds_the_global_minimum():
    samples = np.array([[-2.0, 0.0]] * 3 + [[2.0, 0.0]])
    point = np.array([1.0, 1.0]) * 2 / math.sqrt(2)

    def energy(p):
        return kde_nll(samples, 0.3, p)

    cfg = OptimConfig(n_steps=100, step_size=0.01, num_inits=8, init_scale=math.pi, init_rule='grid', tol=1e-12)
    best = multi_init_canonicalize(alg1_global_retraction, energy, point, cfg, ROTATION)
    np.testing.assert_allclose(best.canonical, [-2.0, 0.0], atol=1e-3)
    single = alg1_global_retraction(energy, point, cfg, ROTATION)
    assert best.final_energy < single.final_energy


def test_multi_init_from_explicit_starts():
    cfg = OptimConfig(n_steps=200, step_size=0.25, num_inits=5)
    best = multi_init_canonicalize(alg1_global_retraction, quadratic, START, cfg, ROTATION, starts=[[0.6], [2.0]])
    assert best.init_index in (0, 1)
    assert best.g_inv.theta == pytest.approx(0.7, abs=1e-6)
    only = multi_init_canonicalize(alg1_global_retraction, quadratic, START, OptimConfig(n_steps=0), ROTATION,
                                   starts=[[0.7]])
    np.testing.assert_allclose(only.canonical, TARGET, atol=1e-12)
    with pytest.raises(ValueError):
        multi_init_canonicalize(alg1_global_retraction, quadratic, START, cfg, ROTATION, starts=[])


def test_multi_init_does_not_depend_on_threads():
    samples = np.random.default_rng(3).standard_normal((40, 2))
    point = np.array([0.8, -0.3])

    def energy(p):
        return kde_nll(samples, 0.4, p)

    base = dict(n_steps=50, step_size=0.05, num_inits=6, init_scale=math.pi, init_rule='grid')
    serial = multi_init_canonicalize(alg1_global_retraction, energy, point, OptimConfig(**base), ROTATION)
    pooled = multi_init_canonicalize(alg1_global_retraction, energy, point, OptimConfig(threads=3, **base), ROTATION)
    assert serial.init_index == pooled.init_index
    assert serial.final_energy == pooled.final_energy
    np.testing.assert_array_equal(serial.canonical, pooled.canonical)
