"""
Canonicalize, solve, decanonicalize.

An operator that only knows the training domain is made equivariant by moving each problem instance to its
canonical representative, solving there, and mapping the solution back through g.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ._constants import get_default
from ._errors import CanonicalizationFailed, GridMismatch
from .energy import EnergyConfig, ProblemInstance, boundary_energy, e_ace, e_heat, make_energy, transform_instance
from .fields import Field1D, Field2D, rotate90, roll_cells, transform_ic_ace
from .groups import AceElement, LieAlgebraCoeffs, Se2Element, compose, exp_train, identity, inverse
from .jets import JetPoint, base_act, burgers_act_point, heat_act_point
from .optim import CanonResult, GroupAction, OptimConfig, alg3_coordinate_descent, multi_init_canonicalize
from .solvers import AceConfig, HeatConfig, ace_solve, burgers_solve, heat_spectral_solve

__all__ = [
    'OperatorHandle',
    'heat_operator',
    'burgers_operator',
    'ace_operator',
    'instance_action',
    'heat_canonicalizer',
    'heat_alignment_coeffs',
    'heat_frame_canonicalize',
    'burgers_canonicalizer',
    'ace_canonicalizer',
    'identity_canonicalizer',
    'ace_discrete_canonicalize',
    'equivariant_apply',
    'rel_l2_error',
]

logger = logging.getLogger(__name__)

QUARTER_TURN = math.pi / 2
MAX_TILT = 1e6


@dataclass(frozen=True)
class OperatorHandle:
    """
    A solver defined on canonical instances.

    solve(instance, times) returns one field per absolute time. horizon is the last time the operator supports.
    """
    solve: Callable[[ProblemInstance, Sequence[float]], List]
    name: str
    group_id: str
    horizon: float = math.inf


def heat_operator(nu: float = None, horizon: float = None) -> OperatorHandle:
    """
    Spectral heat solver on canonical instances

    The canonical IC must carry the periodic flag; heat_spectral_solve raises NotPeriodic otherwise.
    """
    cfg = HeatConfig(nu)
    horizon = get_default('heat_horizon') if horizon is None else horizon

    def solve(inst, times):
        return heat_spectral_solve(inst.ic, cfg, times)
    return OperatorHandle(solve, 'heat_spectral', 'heat', horizon)


def burgers_operator(nu: float = None, horizon: float = None) -> OperatorHandle:
    """Cole-Hopf Burgers solver on canonical instances, periodic ones only"""
    horizon = get_default('burgers_horizon') if horizon is None else horizon

    def solve(inst, times):
        return burgers_solve(inst.ic, nu, times)
    return OperatorHandle(solve, 'burgers_cole_hopf', 'burgers', horizon)


def ace_operator(cfg: AceConfig = None, horizon: float = 1.0) -> OperatorHandle:
    def solve(inst, times):
        return ace_solve(inst.ic, cfg, times)
    return OperatorHandle(solve, 'ace_strang', 'se2', horizon)


def instance_action(group_id: str, nu: float = None) -> GroupAction:
    """The action of a group on problem instances"""
    if group_id not in ('heat', 'burgers', 'se2'):
        raise ValueError(f'Unsupported group id for problem instances: {group_id}')
    return GroupAction(group_id, lambda g, inst: transform_instance(g, inst, nu))


def _heat_optim() -> OptimConfig:
    return OptimConfig(n_steps=60, num_inits=8, init_scale=0.2, active=(3, 5), coord_pick_rule='cyclic')


def _burgers_optim() -> OptimConfig:
    return OptimConfig(n_steps=60, coord_pick_rule='cyclic')


def heat_canonicalizer(cfg: OptimConfig = None, nu: float = None, energy_cfg: EnergyConfig = None,
                       algorithm: Callable = None,
                       pin_horizon: bool = True) -> Callable[[ProblemInstance], CanonResult]:
    """
    Canonicalizer of heat instances against the heat training domain

    Without an algorithm this is heat_frame_canonicalize. With one of the descent algorithms it runs a
    multi-init search whose initializations are spread around the aligned start heat_alignment_coeffs.

    Args:
        cfg: optimizer settings for the descent path, 8 inits over the scaling and boost generators by default
        nu: diffusivity
        energy_cfg: energy settings, heat_domain by default
        algorithm: optional descent algorithm
        pin_horizon: map the query end of non-periodic instances to the horizon

    Returns:
        callable mapping a ProblemInstance to a CanonResult
    """
    energy_cfg = EnergyConfig('heat_domain') if energy_cfg is None else energy_cfg
    energy = make_energy(energy_cfg)
    length = None if energy_cfg.domain is None else energy_cfg.domain.x_max - energy_cfg.domain.x_min
    horizon = energy_cfg.horizon
    if algorithm is None:
        return lambda inst: heat_frame_canonicalize(inst, nu, energy, length, horizon, pin_horizon)
    cfg = _heat_optim() if cfg is None else cfg
    action = instance_action('heat', nu)

    def canonicalize(inst):
        start = heat_alignment_coeffs(inst, length, horizon, pin_horizon and not inst.ic.periodic)
        return multi_init_canonicalize(algorithm, energy, inst, cfg, action, start)
    return canonicalize


def burgers_canonicalizer(cfg: OptimConfig = None, energy_cfg: EnergyConfig = None,
                          algorithm: Callable = alg3_coordinate_descent) -> Callable[[ProblemInstance], CanonResult]:
    """Multi-init canonicalizer of Burgers instances against the unit training box"""
    cfg = _burgers_optim() if cfg is None else cfg
    energy = make_energy(EnergyConfig('burgers_domain') if energy_cfg is None else energy_cfg)
    action = instance_action('burgers')
    return lambda inst: multi_init_canonicalize(algorithm, energy, inst, cfg, action)


def heat_alignment_coeffs(inst: ProblemInstance, length: float = None, horizon: float = None,
                          pin_horizon: bool = True) -> np.ndarray:
    """
    exp_train coefficients that move the IC slice to t = 0 and its domain onto [0, L]

    With pin_horizon the projective generator v6 then stretches time about t = 0 so that the end of the query
    window lands on the horizon. v6 leaves the t = 0 slice and its domain in place.

    Args:
        inst: a heat instance
        length: training domain length, heat_length by default
        horizon: training horizon, heat_horizon by default
        pin_horizon: also map the query end to the horizon

    Returns:
        np.ndarray of the six heat coefficients
    """
    length = get_default('heat_length') if length is None else length
    horizon = get_default('heat_horizon') if horizon is None else horizon
    f = inst.ic
    dilation = math.log(length / f.length)
    coeffs = np.array([-f.x_lo, -f.time, 0.0, dilation, 0.0, 0.0])
    t_end = (inst.query.tf_hi - f.time) * math.exp(2 * dilation)
    if pin_horizon and t_end > 0:
        coeffs[5] = 1 / t_end - 1 / horizon
    return coeffs


def _balancing_tilt(x: np.ndarray, u: np.ndarray, tol: float) -> float:
    # slope b with max(u exp(b x)) = -min(u exp(b x)); the log gap is piecewise linear in b
    pos, neg = u > 0, u < 0
    if not (pos.any() and neg.any()):
        return 0.0
    log_pos, x_pos = np.log(u[pos]), x[pos]
    log_neg, x_neg = np.log(-u[neg]), x[neg]

    def gap(b):
        return float(np.max(log_pos + b * x_pos) - np.max(log_neg + b * x_neg))

    g0 = gap(0.0)
    if abs(g0) <= tol:
        return 0.0
    width = 1.0 / (x[-1] - x[0])
    while width <= MAX_TILT:
        for end in (width, -width):
            if gap(end) * g0 < 0:
                return float(brentq(gap, *sorted((0.0, end)), xtol=1e-15))
        width *= 2
    warnings.warn(f'No balancing tilt within |b| <= {MAX_TILT:g}, keeping the aligned field', stacklevel=2)
    return 0.0


def heat_frame_canonicalize(inst: ProblemInstance, nu: float = None, energy: Callable = None,
                            length: float = None, horizon: float = None, pin_horizon: bool = True) -> CanonResult:
    """
    Closed-form canonicalization of a heat instance

    The base-space part of the frame is fixed exactly by heat_alignment_coeffs. What is left acts on the t = 0
    slice as u -> u exp(a + b x): the boost v5 picks the tilt b that balances the IC extrema (max u = -min u)
    and the scaling v3 then sets max |u| = 1. Both are orbit invariant, so every member of an orbit reaches the
    same canonical instance up to resampling and root-finding error.

    Periodic ICs stay in the periodicity-preserving subgroup: no tilt and no horizon stretch. An IC that carries
    a periodic_frame is canonicalized through its periodic source, so the result keeps the periodic flag.

    Args:
        inst: a heat instance
        nu: diffusivity, heat_nu by default
        energy: energy reported for the result, e_heat by default
        length: training domain length
        horizon: training horizon
        pin_horizon: map the query end of non-periodic instances to the horizon

    Returns:
        CanonResult with energy_trace (start, aligned, canonical)
    """
    nu = get_default('heat_nu') if nu is None else nu
    energy = e_heat if energy is None else energy
    periodic = inst.ic.periodic
    frame = inst.ic.periodic_frame
    if not periodic and frame is not None:
        source = transform_instance(inverse(frame), inst, nu)
        if source.ic.periodic:
            base = heat_frame_canonicalize(source, nu, energy, length, horizon, pin_horizon)
            g_inv = compose(base.g_inv, inverse(frame))
            canonical = transform_instance(g_inv, inst, nu)
            trace = np.array([energy(inst), energy(source), energy(canonical)], dtype=float)
            return CanonResult(canonical, inverse(g_inv), g_inv, trace, 0, float(trace[-1]), base.steps)
    coeffs = heat_alignment_coeffs(inst, length, horizon, pin_horizon and not periodic)
    aligned = transform_instance(exp_train(LieAlgebraCoeffs('heat', coeffs)), inst, nu)
    x, u = aligned.ic.grid, aligned.ic.values
    b = 0.0 if periodic else _balancing_tilt(x, u, get_default('constraint_tol'))
    nonzero = u != 0
    if nonzero.any():
        coeffs[2] = -nu * float(np.max(np.log(np.abs(u[nonzero])) + b * x[nonzero]))
    coeffs[4] = -2 * nu * b
    g_inv = exp_train(LieAlgebraCoeffs('heat', coeffs))
    canonical = transform_instance(g_inv, inst, nu)
    trace = np.array([energy(inst), energy(aligned), energy(canonical)], dtype=float)
    logger.debug(f'heat frame: coefficients {coeffs}, energy {trace[-1]:.6e}')
    return CanonResult(canonical, inverse(g_inv), g_inv, trace, 0, float(trace[-1]), [coeffs])


def ace_canonicalizer(inner: Callable[[Field2D], float] = None) -> Callable[[ProblemInstance], CanonResult]:
    return lambda inst: ace_discrete_canonicalize(inst, inner)


def identity_canonicalizer(energy: Callable = None) -> Callable[[ProblemInstance], CanonResult]:
    """Leaves every instance where it is; final_energy is energy(inst), or 0 without an energy"""
    def canonicalize(inst):
        e = 0.0 if energy is None else float(energy(inst))
        g = identity(inst.group_id)
        return CanonResult(inst, g, g, np.array([e]), 0, e)
    return canonicalize


def _seam_energies(values: np.ndarray) -> np.ndarray:
    # E[r, c]: seam energy after moving row r and column c to index 0
    squares = values * values
    row = np.array([math.fsum(r) for r in squares])
    col = np.array([math.fsum(c) for c in squares.T])
    return row[:, None] + col[None, :] - squares


def ace_discrete_canonicalize(inst: ProblemInstance, inner: Callable[[Field2D], float] = None) -> CanonResult:
    """
    Exhaustive canonicalization over quarter turns and whole-cell translations of the periodic grid

    Every candidate g_inv = (k quarter turns, (sx, sy) cells, time shift -t0) is scored with the constrained
    Allen-Cahn energy. Exact ties are broken by the smallest byte string of the candidate field, so the canonical
    field is the same for every member of the discrete orbit.

    Args:
        inst: an se2 problem instance
        inner: energy of the field, the seam energy (boundary_energy) by default

    Returns:
        CanonResult with canonical = transform_instance(g_inv, inst)
    """
    f = inst.ic
    n = f.nx
    fast = inner is None or inner is boundary_energy
    best_energy, candidates = math.inf, []
    for k in range(4):
        rotated = rotate90(f.values, k)
        if fast:
            energies = _seam_energies(rotated)
            shifts = [(r, c) for r, c in zip(*np.nonzero(energies == energies.min()))]
            e_k = float(energies.min())
        else:
            scores = {}
            for r in range(n):
                for c in range(n):
                    scores[(r, c)] = float(inner(Field2D(roll_cells(rotated, -c, -r), 0.0, f.periodic)))
            e_k = min(scores.values())
            shifts = [rc for rc, e in scores.items() if e == e_k]
        if e_k < best_energy:
            best_energy, candidates = e_k, []
        if e_k == best_energy:
            candidates.extend((k, int(r), int(c), rotated) for r, c in shifts)

    def field_key(candidate):
        k, r, c, rotated = candidate
        return roll_cells(rotated, -c, -r).tobytes()

    k, r, c, _ = min(candidates, key=field_key)
    sx, sy = (-c) % n, (-r) % n
    g_inv = AceElement(Se2Element(k * QUARTER_TURN, sx / n, sy / n), -f.time)
    canonical = transform_instance(g_inv, inst)
    start, final = e_ace(inst, inner), e_ace(canonical, inner)
    logger.debug(f'discrete ACE canonicalization: k={k}, shift=({sx}, {sy}), energy {final:.6e}')
    return CanonResult(canonical, inverse(g_inv), g_inv, np.array([start, final]), 0, final, [(k, sx, sy)])


def _decanonicalize_1d(op: OperatorHandle, result: CanonResult, inst: ProblemInstance, t: float,
                       nu: float) -> Field1D:
    canonical = result.canonical
    t_c, x_c = base_act(result.g_inv, t, inst.ic.grid)
    t_c = float(t_c)
    if t_c < canonical.ic.time or t_c > op.horizon:
        raise CanonicalizationFailed(
            f'Query time {t} maps to {t_c}, outside the operator range [{canonical.ic.time}, {op.horizon}]')
    solution = op.solve(canonical, [t_c])[0]
    u_c = np.interp(x_c, solution.grid[:-1], solution.values[:-1], period=solution.length)
    jet = JetPoint(t_c, x_c, u_c)
    if inst.group_id == 'heat':
        nu = get_default('heat_nu') if nu is None else nu
        pushed = heat_act_point(result.g, nu, jet)
    else:
        pushed = burgers_act_point(result.g, jet)
    return Field1D(np.asarray(pushed.u, dtype=float), inst.ic.x_lo, inst.ic.x_hi, t, inst.ic.periodic)


def equivariant_apply(op: OperatorHandle, canonizer: Callable[[ProblemInstance], CanonResult], inst: ProblemInstance,
                      query_times: Sequence[float], nu: float = None,
                      accept_threshold: float = None) -> Tuple[List, CanonResult]:
    """
    Evaluates op equivariantly: O[x](t) = g . O[g^-1 . x](g^-1 . t)

    The original query grid at each time is pulled back through g_inv, the canonical solution is interpolated
    there (periodically), and the values are pushed forward through g.

    Args:
        op: the operator on canonical instances
        canonizer: maps an instance to a CanonResult
        inst: the problem instance
        query_times: absolute times of the requested solutions
        nu: heat diffusivity used to push values back
        accept_threshold: largest accepted canonical energy, the accept_threshold default when None

    Returns:
        (list of solution fields on the original grid, CanonResult)

    Raises:
        CanonicalizationFailed: if the canonical energy exceeds the threshold or a query time leaves the
            operator's time range
        NotPeriodic: if the canonical IC of a heat or Burgers instance is not periodic
    """
    if op.group_id != inst.group_id:
        raise ValueError(f'Operator {op.name} acts on {op.group_id}, instance is {inst.group_id}')
    accept_threshold = get_default('accept_threshold') if accept_threshold is None else accept_threshold
    result = canonizer(inst)
    if not result.final_energy <= accept_threshold:
        raise CanonicalizationFailed(
            f'Canonical energy {result.final_energy:.6e} exceeds the acceptance threshold {accept_threshold}')
    logger.info(f'{op.name}: canonicalized with energy {result.final_energy:.3e}')

    if inst.group_id == 'se2':
        shift = result.g_inv.t_shift
        canonical_times = [t + shift for t in query_times]
        if any(t < result.canonical.ic.time or t > op.horizon for t in canonical_times):
            raise CanonicalizationFailed('A query time maps outside the operator time range')
        solutions = op.solve(result.canonical, canonical_times)
        return [transform_ic_ace(result.g, s) for s in solutions], result
    return [_decanonicalize_1d(op, result, inst, float(t), nu) for t in query_times], result


def rel_l2_error(a, b) -> float:
    """
    Relative L2 error |a - b| / |b| of two fields on the same grid

    Returns |a| when |b| < 1e-14.

    Raises:
        GridMismatch: if the grids differ
    """
    if isinstance(a, Field1D) and isinstance(b, Field1D):
        if a.n != b.n or abs(a.x_lo - b.x_lo) > 1e-12 or abs(a.x_hi - b.x_hi) > 1e-12:
            raise GridMismatch('Fields are sampled on different grids')
    elif isinstance(a, Field2D) and isinstance(b, Field2D):
        if a.values.shape != b.values.shape:
            raise GridMismatch('Fields are sampled on different grids')
    else:
        raise GridMismatch(f'Cannot compare {type(a).__name__} with {type(b).__name__}')
    norm_b = float(np.linalg.norm(b.values))
    if norm_b < 1e-14:
        return float(np.linalg.norm(a.values))
    return float(np.linalg.norm(a.values - b.values)) / norm_b
