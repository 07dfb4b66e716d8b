import math
from dataclasses import replace

import numpy as np
import pytest

from lielac._errors import CanonicalizationFailed, GridMismatch, NotPeriodic
from lielac.energy import ProblemInstance, boundary_energy, e_ace, e_heat, transform_instance
from lielac.fields import Field1D, Field2D, QueryWindow, SineICParams, gen_sine_ic, transform_ic_ace
from lielac.groups import AceElement, LieAlgebraCoeffs, Se2Element, as_params, compose, exp_train, identity, inverse
from lielac.jets import JetPoint, base_act, heat_act_point
from lielac.optim import OptimConfig, alg3_coordinate_descent
from lielac.pipeline import (
    ace_canonicalizer,
    ace_discrete_canonicalize,
    ace_operator,
    burgers_canonicalizer,
    burgers_operator,
    equivariant_apply,
    heat_alignment_coeffs,
    heat_canonicalizer,
    heat_frame_canonicalize,
    heat_operator,
    identity_canonicalizer,
    rel_l2_error,
)
from lielac.solvers import AceConfig, HeatConfig, burgers_rk4_solve, heat_spectral_solve

NU = 0.1


def test_heat_pipeline_matches_the_direct_solver(heat_instance):
    times = [0.0, 2.0, 16.0]
    solutions, result = equivariant_apply(heat_operator(NU), heat_canonicalizer(nu=NU), heat_instance, times, NU)
    assert result.final_energy < 1e-6
    assert np.max(np.abs(result.canonical.ic.values)) == pytest.approx(1.0, abs=1e-6)
    direct = heat_spectral_solve(heat_instance.ic, HeatConfig(NU), times)
    for a, b in zip(solutions, direct):
        assert a.time == b.time
        assert rel_l2_error(a, b) < 1e-8


def test_heat_pipeline_with_small_amplitudes(heat_instance):
    ic = Field1D(heat_instance.ic.values / 10, heat_instance.ic.x_lo, heat_instance.ic.x_hi, 0.0, True)
    inst = ProblemInstance(ic, heat_instance.query, 'heat')
    solutions, result = equivariant_apply(heat_operator(NU), heat_canonicalizer(nu=NU), inst, [4.0], NU)
    assert np.max(np.abs(result.canonical.ic.values)) == pytest.approx(1.0, abs=1e-6)
    assert rel_l2_error(solutions[0], heat_spectral_solve(ic, HeatConfig(NU), [4.0])[0]) < 1e-8


def test_burgers_pipeline_removes_the_mean(burgers_instance):
    times = [0.0, 0.5, 1.0]
    solutions, result = equivariant_apply(burgers_operator(0.01), burgers_canonicalizer(), burgers_instance, times)
    assert abs(result.canonical.ic.mean()) < 1e-8
    assert result.final_energy < 1e-6
    reference = burgers_rk4_solve(burgers_instance.ic, 0.01, times)
    for a, b in zip(solutions, reference):
        assert rel_l2_error(a, b) < 1e-3


def test_rejected_canonicalization(heat_instance):
    with pytest.raises(CanonicalizationFailed):
        equivariant_apply(heat_operator(NU), identity_canonicalizer(e_heat), heat_instance, [1.0], NU)
    with pytest.raises(CanonicalizationFailed):
        equivariant_apply(heat_operator(NU, horizon=1.0), identity_canonicalizer(), heat_instance, [2.0], NU)
    with pytest.raises(ValueError):
        equivariant_apply(burgers_operator(), identity_canonicalizer(), heat_instance, [1.0])


def test_identity_canonicalizer_reproduces_the_operator(heat_instance):
    solutions, result = equivariant_apply(heat_operator(NU), identity_canonicalizer(), heat_instance, [3.0], NU)
    assert result.final_energy == 0.0
    direct = heat_spectral_solve(heat_instance.ic, HeatConfig(NU), [3.0])[0]
    np.testing.assert_allclose(solutions[0].values, direct.values, atol=1e-12)


def random_discrete_element(n, rng):
    k, sx, sy = rng.integers(0, 4), rng.integers(0, n), rng.integers(0, n)
    return AceElement(Se2Element(k * math.pi / 2, sx / n, sy / n))


def test_ace_canonical_form_is_orbit_invariant(ace_instance, rng):
    base = ace_discrete_canonicalize(ace_instance)
    assert base.final_energy <= e_ace(ace_instance)
    assert base.final_energy == pytest.approx(boundary_energy(base.canonical.ic))
    n = ace_instance.ic.nx
    for _ in range(6):
        g = random_discrete_element(n, rng)
        moved = ProblemInstance(transform_ic_ace(g, ace_instance.ic), ace_instance.query, 'se2')
        result = ace_discrete_canonicalize(moved)
        np.testing.assert_array_equal(result.canonical.ic.values, base.canonical.ic.values)
        assert result.final_energy == base.final_energy


def test_ace_brute_force_agrees_with_the_seam_search(ace_instance):
    fast = ace_discrete_canonicalize(ace_instance)
    slow = ace_discrete_canonicalize(ace_instance, inner=lambda f: boundary_energy(f))
    np.testing.assert_array_equal(slow.canonical.ic.values, fast.canonical.ic.values)
    np.testing.assert_allclose(as_params(compose(fast.g, fast.g_inv)), as_params(identity('se2')), atol=1e-12)


def test_ace_pipeline_is_equivariant(ace_instance, rng):
    op = ace_operator(AceConfig(10.0, 1e-3))
    times = [0.005]
    solutions, _ = equivariant_apply(op, ace_canonicalizer(), ace_instance, times)
    assert solutions[0].time == pytest.approx(0.005)
    n = ace_instance.ic.nx
    for _ in range(3):
        g = random_discrete_element(n, rng)
        moved = ProblemInstance(transform_ic_ace(g, ace_instance.ic), ace_instance.query, 'se2')
        moved_solutions, _ = equivariant_apply(op, ace_canonicalizer(), moved, times)
        assert rel_l2_error(moved_solutions[0], transform_ic_ace(g, solutions[0])) < 1e-12


def test_ace_pipeline_rejects_tilted_domains(ace_instance):
    tilted = transform_ic_ace(Se2Element(17 * math.pi / 180), ace_instance.ic)
    inst = ProblemInstance(tilted, ace_instance.query, 'se2')
    with pytest.raises(CanonicalizationFailed):
        equivariant_apply(ace_operator(), ace_canonicalizer(), inst, [0.01])


def test_rel_l2_error():
    a = Field1D(np.array([1.0, 2.0, 1.0]))
    b = Field1D(np.array([1.0, 1.0, 1.0]))
    assert rel_l2_error(a, b) == pytest.approx(1 / math.sqrt(3))
    assert rel_l2_error(a, a) == 0.0
    assert rel_l2_error(a, Field1D(np.zeros(3))) == pytest.approx(math.sqrt(6))
    with pytest.raises(GridMismatch):
        rel_l2_error(a, Field1D(np.ones(4)))
    with pytest.raises(GridMismatch):
        rel_l2_error(a, Field1D(np.ones(3), 0.0, 2.0))
    with pytest.raises(GridMismatch):
        rel_l2_error(a, Field2D(np.ones((3, 3))))


def sine_instance(amplitude=5.0, n=129):
    ic = gen_sine_ic(SineICParams((amplitude,), (2,), (0.0,)), n=n)
    return ProblemInstance(ic, QueryWindow(0.0, 2 * math.pi, 0.0, 16.0), 'heat')


def regular_elements(rng, count, scale=0.2, horizon=16.0):
    # elements whose time map has a pole inside [0, horizon] do not act on the query window
    found = []
    while len(found) < count:
        g = exp_train(LieAlgebraCoeffs('heat', rng.uniform(-scale, scale, 6)))
        if min(g.a.gamma * t + g.a.delta for t in (0.0, horizon)) > 0.05:
            found.append(g)
    return found


def test_heat_canonical_form_is_orbit_invariant(rng):
    inst = sine_instance()
    canonicalize = heat_canonicalizer(nu=NU)
    base = canonicalize(inst)
    assert base.final_energy < 1e-9
    assert base.canonical.ic.periodic
    for g in regular_elements(rng, 20):
        moved = transform_instance(g, inst, NU)
        result = canonicalize(moved)
        assert abs(result.final_energy - base.final_energy) <= 1e-3
        assert rel_l2_error(result.canonical.ic, base.canonical.ic) <= 1e-2
        assert result.canonical.query.tf_hi == pytest.approx(16.0, rel=1e-9)
        assert result.canonical.ic.periodic


def test_heat_canonical_form_without_a_periodic_frame(rng):
    # the balancing tilt alone recovers the canonical values, only the periodic flag is lost
    inst = sine_instance()
    base = heat_frame_canonicalize(inst, NU)
    for g in regular_elements(rng, 5):
        moved = transform_instance(g, inst, NU)
        stripped = ProblemInstance(replace(moved.ic, periodic_frame=None), moved.query, 'heat')
        result = heat_frame_canonicalize(stripped, NU)
        assert abs(result.final_energy - base.final_energy) <= 1e-3
        assert rel_l2_error(result.canonical.ic, base.canonical.ic) <= 1e-2
        assert not result.canonical.ic.periodic


def test_heat_alignment_fixes_the_base_space(rng):
    inst = sine_instance(2.0)
    for g in regular_elements(rng, 5):
        moved = transform_instance(g, inst, NU)
        aligned = transform_instance(exp_train(LieAlgebraCoeffs('heat', heat_alignment_coeffs(moved))), moved, NU)
        assert aligned.ic.time == pytest.approx(0.0, abs=1e-12)
        assert (aligned.ic.x_lo, aligned.ic.x_hi) == pytest.approx((0.0, 2 * math.pi), abs=1e-9)
        assert aligned.query.tf_hi == pytest.approx(16.0, rel=1e-9)


def test_heat_frame_keeps_periodic_inputs_periodic():
    for phase in (0.3, 1.1):
        ic = gen_sine_ic(SineICParams((3.0,), (2,), (phase,)), n=129)
        inst = ProblemInstance(ic, QueryWindow(0.0, 2 * math.pi, 0.0, 8.0), 'heat')
        result = heat_frame_canonicalize(inst, NU)
        assert result.canonical.ic.periodic
        assert result.g_inv.h.lambda1 == 0.0
        assert result.g_inv.a.gamma == 0.0
        assert np.max(np.abs(result.canonical.ic.values)) == pytest.approx(1.0, abs=1e-12)


def test_heat_pipeline_on_a_moved_instance(rng):
    inst = sine_instance()
    g = regular_elements(rng, 1)[0]
    moved = transform_instance(g, inst, NU)
    t_moved = float(base_act(g, 4.0, 0.0)[0])
    solutions, result = equivariant_apply(heat_operator(NU), heat_canonicalizer(nu=NU), moved, [t_moved], NU)
    assert result.canonical.ic.periodic
    # exact solution 5 exp(-4 nu t) sin(2x) of the unmoved problem, pushed through g
    t, x = base_act(inverse(g), t_moved, moved.ic.grid)
    expected = heat_act_point(g, NU, JetPoint(t, x, 5.0 * np.exp(-4 * NU * t) * np.sin(2 * x))).u
    assert np.linalg.norm(solutions[0].values - expected) <= 1e-2 * np.linalg.norm(expected)


def test_heat_descent_path_starts_from_the_aligned_element():
    inst = sine_instance()
    cfg = OptimConfig(n_steps=60, active=(3, 5))
    result = heat_canonicalizer(cfg, NU, algorithm=alg3_coordinate_descent)(inst)
    assert result.final_energy < 1e-6


def test_operators_reject_non_periodic_canonical_ics():
    x = np.linspace(0.0, 2 * math.pi, 129)
    ic = Field1D(np.sin(1.5 * x), 0.0, 2 * math.pi, 0.0, False)
    inst = ProblemInstance(ic, QueryWindow(0.0, 2 * math.pi, 0.0, 16.0), 'heat')
    with pytest.raises(NotPeriodic):
        heat_operator(NU).solve(inst, [1.0])
    with pytest.raises(NotPeriodic):
        equivariant_apply(heat_operator(NU), heat_canonicalizer(nu=NU), inst, [1.0], NU)
    flat = ProblemInstance(Field1D(np.sin(math.pi * np.linspace(0, 1, 65))), QueryWindow(0.0, 1.0, 0.0, 1.0), 'burgers')
    with pytest.raises(NotPeriodic):
        burgers_operator(0.01).solve(flat, [0.5])


@pytest.mark.parametrize('amplitude', [0.5, 1.0, 2.0, 3.0, 5.0])
def test_heat_pipeline_amplitude_sweep(amplitude):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        phase = float(rng.uniform(0, 2 * math.pi))
        ic = gen_sine_ic(SineICParams((amplitude,), (2,), (phase,)), n=257)
        inst = ProblemInstance(ic, QueryWindow(0.0, 2 * math.pi, 0.0, 16.0), 'heat')
        g = regular_elements(rng, 1)[0]
        moved = transform_instance(g, inst, NU)
        times = [float(base_act(g, t, 0.0)[0]) for t in (2.0, 8.0)]
        solutions, result = equivariant_apply(heat_operator(NU), heat_canonicalizer(nu=NU), moved, times, NU)
        assert result.canonical.ic.periodic
        for t_moved, solution in zip(times, solutions):
            t, x = base_act(inverse(g), t_moved, moved.ic.grid)
            exact = amplitude * np.exp(-4 * NU * t) * np.sin(2 * x + phase)
            expected = heat_act_point(g, NU, JetPoint(t, x, exact)).u
            assert np.linalg.norm(solution.values - expected) <= 1e-2 * np.linalg.norm(expected)
