"""
Energy-minimizing canonicalization over Lie group orbits.

All algorithms return the canonicalizing element g_inv together with its inverse g, so that
canonical = act(g_inv, x) and x = act(g, canonical) up to resampling error.
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ._constants import get_default
from ._errors import DegenerateDomain, NoFiniteStart, NonFiniteEnergy, SingularTransform
from .groups import (
    LieAlgebraCoeffs,
    algebra_dim,
    compose,
    exp_train,
    generator_exp,
    identity,
    inverse,
)

__all__ = [
    'PICK_RULES',
    'INIT_RULES',
    'OptimConfig',
    'GroupAction',
    'CanonResult',
    'fd_grad',
    'alg1_global_retraction',
    'alg2_lie_descent',
    'alg3_coordinate_descent',
    'multi_init_canonicalize',
    'initial_coeffs',
]

logger = logging.getLogger(__name__)

PICK_RULES = ('cyclic', 'random')
INIT_RULES = ('uniform', 'grid')


@dataclass(frozen=True)
class OptimConfig:
    """
    Iteration budgets, step schedule and initialization settings shared by the three algorithms.

    active is a tuple of 1-based generator indices; None optimizes over every generator.
    """
    n_outer: int = 1
    n_inner: int = 50
    n_steps: int = 200
    step_size: float = 1e-2
    step_decay: float = 1.0
    fd_step: float = None
    num_inits: int = 1
    init_scale: float = 0.0
    seed: int = 0
    coord_pick_rule: str = 'cyclic'
    proximal_tau: Optional[float] = None
    line_search_bound: float = 1.0
    active: Optional[Tuple[int, ...]] = None
    init_rule: str = 'uniform'
    max_halvings: int = 20
    tol: float = 0.0
    threads: int = 1

    def __post_init__(self):
        if self.fd_step is None:
            object.__setattr__(self, 'fd_step', get_default('fd_step'))
        if min(self.n_outer, self.n_inner, self.n_steps) < 0:
            raise ValueError('Iteration budgets must be nonnegative')
        if self.step_size <= 0:
            raise ValueError('step_size must be positive')
        if not 0 < self.step_decay <= 1:
            raise ValueError('step_decay must lie in (0, 1]')
        if self.fd_step <= 0:
            raise ValueError('fd_step must be positive')
        if self.num_inits < 1:
            raise ValueError('num_inits must be at least 1')
        if self.init_scale < 0:
            raise ValueError('init_scale must be nonnegative')
        if self.coord_pick_rule not in PICK_RULES:
            raise ValueError(f'Unsupported coordinate pick rule: {self.coord_pick_rule}')
        if self.init_rule not in INIT_RULES:
            raise ValueError(f'Unsupported init rule: {self.init_rule}')
        if self.proximal_tau is not None and self.proximal_tau <= 0:
            raise ValueError('proximal_tau must be positive')
        if self.line_search_bound <= 0:
            raise ValueError('line_search_bound must be positive')
        if self.threads < 1:
            raise ValueError('threads must be at least 1')
        if self.active is not None:
            object.__setattr__(self, 'active', tuple(int(i) for i in self.active))

    def active_indices(self, group_id: str) -> Tuple[int, ...]:
        dim = algebra_dim(group_id)
        if self.active is None:
            return tuple(range(1, dim + 1))
        if not self.active or any(not 1 <= i <= dim for i in self.active):
            raise ValueError(f'active generators {self.active} out of range 1..{dim}')
        return self.active

    def active_mask(self, group_id: str) -> np.ndarray:
        mask = np.zeros(algebra_dim(group_id), dtype=bool)
        mask[[i - 1 for i in self.active_indices(group_id)]] = True
        return mask


@dataclass(frozen=True)
class GroupAction:
    """A group id with its action act(g, x) on the objects being canonicalized"""
    group_id: str
    act: Callable[[Any, Any], Any]


@dataclass
class CanonResult:
    canonical: Any
    g: Any
    g_inv: Any
    energy_trace: np.ndarray
    init_index: int = 0
    final_energy: float = math.inf
    steps: List = field(default_factory=list)


def _element(build: Callable):
    # None when the coefficients overflow the group parameters
    try:
        return build()
    except (OverflowError, ValueError):
        return None


def _evaluate(energy: Callable, action: GroupAction, g, x) -> float:
    sentinel = get_default('energy_sentinel')
    if g is None:
        return sentinel
    try:
        value = float(energy(action.act(g, x)))
    except (SingularTransform, DegenerateDomain, OverflowError, FloatingPointError):
        return sentinel
    if not math.isfinite(value):
        return sentinel
    return min(value, sentinel)


def _objective_grad(objective: Callable, c: np.ndarray, fd_step: float, mask: np.ndarray) -> np.ndarray:
    sentinel = get_default('energy_sentinel')
    grad = np.zeros_like(c)
    for j in np.flatnonzero(mask):
        offset = np.zeros_like(c)
        offset[j] = fd_step
        plus, minus = objective(c + offset), objective(c - offset)
        if not (math.isfinite(plus) and math.isfinite(minus)) or max(plus, minus) >= sentinel:
            raise NonFiniteEnergy(f'Finite-difference step along coefficient {j + 1} left the finite region')
        grad[j] = (plus - minus) / (2 * fd_step)
    return grad


def fd_grad(energy: Callable, transform: Callable, xi, x, fd_step: float = None,
            active: np.ndarray = None) -> np.ndarray:
    """
    Central-difference gradient of energy(transform(coeffs, x)) with respect to Lie-algebra coefficients

    Args:
        energy: energy of a transformed object
        transform: maps (coefficient array, x) to the transformed object
        xi: LieAlgebraCoeffs or coefficient array where the gradient is taken
        x: the object being transformed
        fd_step: finite-difference step, fd_step default by default
        active: optional boolean mask; masked-out coefficients get a zero gradient

    Returns:
        np.ndarray

    Raises:
        NonFiniteEnergy: if a difference step hits a singular transform or the energy sentinel
    """
    fd_step = get_default('fd_step') if fd_step is None else fd_step
    c = np.array(xi.array if isinstance(xi, LieAlgebraCoeffs) else xi, dtype=float)
    mask = np.ones(c.size, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    sentinel = get_default('energy_sentinel')

    def objective(coeffs):
        try:
            value = float(energy(transform(coeffs, x)))
        except (SingularTransform, DegenerateDomain, OverflowError, FloatingPointError):
            return sentinel
        return value if math.isfinite(value) else sentinel

    return _objective_grad(objective, c, fd_step, mask)


def _descend(objective: Callable, c0: np.ndarray, cfg: OptimConfig, n_steps: int, mask: np.ndarray) -> Tuple:
    """
    Gradient descent with backtracking: a step is accepted when it does not raise the energy, halving the
    step up to max_halvings times. Returns the final coefficients and the trace of accepted energies.
    """
    c = np.array(c0, dtype=float)
    e = objective(c)
    trace = [e]
    step = cfg.step_size
    for i in range(n_steps):
        try:
            grad = _objective_grad(objective, c, cfg.fd_step, mask)
        except NonFiniteEnergy:
            try:
                grad = _objective_grad(objective, c, cfg.fd_step / 10, mask)
                warnings.warn('Finite-difference step hit the energy sentinel, retried with a smaller step',
                              stacklevel=2)
            except NonFiniteEnergy:
                warnings.warn(f'Stopping descent at iteration {i}: no finite gradient', stacklevel=2)
                break
        if not np.any(grad):
            break
        eta = step
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            candidate = c - eta * grad
            e_candidate = objective(candidate)
            if e_candidate <= e:
                accepted = True
                break
            eta /= 2
        if not accepted:
            break
        decrease = e - e_candidate
        c, e = candidate, e_candidate
        trace.append(e)
        logger.debug(f'descent step {i}: energy {e:.6e}, step {eta:.3e}')
        step *= cfg.step_decay
        if decrease <= cfg.tol:
            break
    return c, trace


def _finish(action: GroupAction, x, g_inv, trace: list, steps: list) -> CanonResult:
    canonical = action.act(g_inv, x)
    return CanonResult(
        canonical=canonical,
        g=inverse(g_inv),
        g_inv=g_inv,
        energy_trace=np.asarray(trace, dtype=float),
        final_energy=float(trace[-1]),
        steps=steps,
    )


def _check_start(e0: float):
    if e0 >= get_default('energy_sentinel'):
        raise NoFiniteStart('The energy is not finite at the starting element')


def _start_coeffs(group_id: str, xi0) -> np.ndarray:
    if xi0 is None:
        return np.zeros(algebra_dim(group_id))
    return np.array(xi0.array if isinstance(xi0, LieAlgebraCoeffs) else xi0, dtype=float)


def alg1_global_retraction(energy: Callable, x, cfg: OptimConfig, action: GroupAction, xi0=None) -> CanonResult:
    """
    Descent on the coefficients xi of the retraction exp_train(xi)

    Minimizes energy(act(exp_train(xi), x)) starting at xi0. With n_outer > 1 the descent restarts from xi = 0
    around the element reached so far.

    Args:
        energy: energy of a transformed object
        x: the object to canonicalize
        cfg: optimizer settings, n_steps descent iterations per outer round
        action: group id and action
        xi0: optional starting coefficients

    Returns:
        CanonResult

    Raises:
        NoFiniteStart: if the energy is the sentinel at the start
    """
    group_id = action.group_id
    mask = cfg.active_mask(group_id)
    g_total = identity(group_id)
    c0 = _start_coeffs(group_id, xi0)
    trace, steps = [], []
    for outer in range(max(cfg.n_outer, 1)):
        base = g_total

        def objective(c, base=base):
            g = _element(lambda: compose(exp_train(LieAlgebraCoeffs(group_id, c)), base))
            return _evaluate(energy, action, g, x)

        if outer == 0:
            _check_start(objective(c0))
        c_star, outer_trace = _descend(objective, c0, cfg, cfg.n_steps, mask)
        trace.extend(outer_trace if outer == 0 else outer_trace[1:])
        steps.append(c_star)
        g_total = compose(exp_train(LieAlgebraCoeffs(group_id, c_star)), base)
        c0 = np.zeros_like(c0)
    return _finish(action, x, g_total, trace, steps)


def alg2_lie_descent(energy: Callable, x, cfg: OptimConfig, action: GroupAction, xi0=None) -> CanonResult:
    """
    Lie-algebra descent with recalibration

    Each outer round descends on xi from 0 for n_inner iterations with objective energy(act(g_inv exp(-xi), x)),
    then moves g_inv to g_inv exp(-xi*). g is rebuilt from the stored steps.
    """
    group_id = action.group_id
    mask = cfg.active_mask(group_id)
    g_inv0 = _element(lambda: exp_train(LieAlgebraCoeffs(group_id, _start_coeffs(group_id, xi0))))
    g_inv = g_inv0
    _check_start(_evaluate(energy, action, g_inv, x))
    trace, steps = [], []
    for outer in range(max(cfg.n_outer, 1)):
        base = g_inv

        def objective(xi, base=base):
            g = _element(lambda: compose(base, exp_train(LieAlgebraCoeffs(group_id, -xi))))
            return _evaluate(energy, action, g, x)

        xi_star, inner_trace = _descend(objective, np.zeros(algebra_dim(group_id)), cfg, cfg.n_inner, mask)
        trace.extend(inner_trace if outer == 0 else inner_trace[1:])
        steps.append(xi_star)
        g_inv = compose(base, exp_train(LieAlgebraCoeffs(group_id, -xi_star)))
        logger.debug(f'alg2 outer round {outer}: energy {trace[-1]:.6e}')

    result = _finish(action, x, g_inv, trace, steps)
    g = inverse(g_inv0)
    for xi_star in steps:
        g = compose(inverse(exp_train(LieAlgebraCoeffs(group_id, -xi_star))), g)
    result.g = g
    return result


def alg3_coordinate_descent(energy: Callable, x, cfg: OptimConfig, action: GroupAction, xi0=None) -> CanonResult:
    """
    Coordinate descent along single generators

    Each step picks a generator v_j (cyclic or random) and line-searches
    lambda* = argmin energy(act(g_inv exp(-lambda v_j), x)) [+ lambda^2 / (2 tau)] over [-B, B] with bounded
    Brent minimization. The step is accepted only if the energy strictly decreases. The run stops after a full
    cycle of generators without an accepted step, or after n_steps coordinate steps.
    """
    group_id = action.group_id
    indices = cfg.active_indices(group_id)
    rng = np.random.default_rng(cfg.seed)
    bound = cfg.line_search_bound
    g_inv = _element(lambda: exp_train(LieAlgebraCoeffs(group_id, _start_coeffs(group_id, xi0))))
    e = _evaluate(energy, action, g_inv, x)
    _check_start(e)
    trace, steps = [e], []
    since_accept = 0
    for k in range(cfg.n_steps):
        j = indices[k % len(indices)] if cfg.coord_pick_rule == 'cyclic' else int(rng.choice(indices))

        def line(lam, j=j):
            value = _evaluate(energy, action, compose(g_inv, generator_exp(group_id, j, -lam)), x)
            if cfg.proximal_tau is not None:
                value += lam ** 2 / (2 * cfg.proximal_tau)
            return value

        lam = float(minimize_scalar(line, bounds=(-bound, bound), method='bounded', options={'xatol': 1e-10}).x)
        candidate = compose(g_inv, generator_exp(group_id, j, -lam))
        e_candidate = _evaluate(energy, action, candidate, x)
        if e_candidate < e:
            decrease = e - e_candidate
            g_inv, e = candidate, e_candidate
            trace.append(e)
            steps.append((j, lam))
            since_accept = 0
            logger.debug(f'alg3 step {k}: v{j} lambda={lam:.6e} energy {e:.6e}')
            if cfg.tol > 0 and decrease <= cfg.tol:
                break
        else:
            since_accept += 1
            if since_accept >= len(indices):
                break

    result = _finish(action, x, g_inv, trace, steps)
    g = inverse(exp_train(LieAlgebraCoeffs(group_id, _start_coeffs(group_id, xi0))))
    for j, lam in steps:
        g = compose(generator_exp(group_id, j, lam), g)
    result.g = g
    return result


def initial_coeffs(group_id: str, cfg: OptimConfig, center=None) -> List[np.ndarray]:
    """
    Starting coefficients of every initialization; init 0 is always the center, the identity by default

    'uniform' adds draws from U[-init_scale, init_scale] on the active generators with default_rng(seed) to the
    center. 'grid' (one-dimensional algebras) spreads the inits over angles 2 pi k / num_inits wrapped into
    (-pi, pi].
    """
    dim = algebra_dim(group_id)
    mask = cfg.active_mask(group_id)
    center = _start_coeffs(group_id, center)
    inits = [center]
    if cfg.init_rule == 'grid':
        if dim != 1:
            raise ValueError('The grid init rule needs a one-dimensional algebra')
        for k in range(1, cfg.num_inits):
            angle = 2 * math.pi * k / cfg.num_inits
            if angle > math.pi:
                angle -= 2 * math.pi
            inits.append(center + angle)
        return inits
    rng = np.random.default_rng(cfg.seed)
    for _ in range(1, cfg.num_inits):
        inits.append(center + np.where(mask, rng.uniform(-cfg.init_scale, cfg.init_scale, dim), 0.0))
    return inits


def multi_init_canonicalize(algorithm: Callable, energy: Callable, x, cfg: OptimConfig,
                            action: GroupAction, xi0=None, starts: Sequence = None) -> CanonResult:
    """
    Runs a canonicalization algorithm from several initializations and keeps the lowest final energy

    Runs execute on a thread pool of cfg.threads workers. Ties are broken by the lowest init index, so the
    result does not depend on the thread count.

    Args:
        algorithm: one of alg1_global_retraction, alg2_lie_descent, alg3_coordinate_descent
        energy: energy of a transformed object
        x: the object to canonicalize
        cfg: optimizer settings
        action: group id and action
        xi0: optional coefficients the initializations are spread around
        starts: explicit starting coefficients, replacing initial_coeffs

    Returns:
        CanonResult with init_index set

    Raises:
        NoFiniteStart: if no initialization starts at a finite energy
    """
    if starts is None:
        inits = initial_coeffs(action.group_id, cfg, xi0)
    else:
        inits = [_start_coeffs(action.group_id, s) for s in starts]
    if not inits:
        raise ValueError('multi_init_canonicalize needs at least one start')

    def run(item):
        index, start = item
        try:
            result = algorithm(energy, x, cfg, action, start)
        except NoFiniteStart:
            return None
        result.init_index = index
        return result

    if cfg.threads == 1:
        results = [run(item) for item in enumerate(inits)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            results = list(executor.map(run, enumerate(inits)))

    finished = [r for r in results if r is not None]
    if len(finished) < len(results):
        warnings.warn(f'{len(results) - len(finished)} of {len(results)} initializations could not start',
                      stacklevel=2)
    if not finished:
        raise NoFiniteStart('No initialization reached a finite energy')
    best = min(finished, key=lambda r: (r.final_energy, r.init_index))
    logger.info(f'multi-init: best init {best.init_index} with energy {best.final_energy:.6e}')
    return best
