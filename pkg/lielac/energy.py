"""
Energies minimized over group orbits: Gaussian KDE negative log-likelihood, distances of a problem instance to
the heat and Burgers training domains, and the constrained Allen-Cahn energy.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp

from ._constants import get_default
from .fields import (
    Field1D,
    Field2D,
    JetBounds,
    QueryWindow,
    jet_bounds,
    transform_ic_ace,
    transform_ic_burgers,
    transform_ic_heat,
    transform_window,
)

__all__ = [
    'ENERGY_KINDS',
    'ProblemInstance',
    'EnergyConfig',
    'transform_instance',
    'dist_interval',
    'kde_nll',
    'heat_domain_bounds',
    'e_heat',
    'e_burgers',
    'boundary_energy',
    'e_ace',
    'make_energy',
]

logger = logging.getLogger(__name__)

ENERGY_KINDS = ('kde_nll', 'heat_domain', 'burgers_domain', 'ace_constrained', 'custom')


@dataclass(frozen=True)
class ProblemInstance:
    ic: Union[Field1D, Field2D]
    query: QueryWindow
    group_id: str

    def __post_init__(self):
        if self.group_id in ('heat', 'burgers'):
            if not isinstance(self.ic, Field1D):
                raise ValueError(f'{self.group_id} instances need a Field1D initial condition')
        elif self.group_id == 'se2':
            if not isinstance(self.ic, Field2D):
                raise ValueError('se2 instances need a Field2D initial condition')
        else:
            raise ValueError(f'Unsupported group id for problem instances: {self.group_id}')


def transform_instance(g, inst: ProblemInstance, nu: float = None) -> ProblemInstance:
    """
    Applies g to the initial condition and the query window of a problem instance

    Args:
        g: element of the instance's group
        inst: the instance
        nu: heat diffusivity, defaults to heat_nu

    Returns:
        ProblemInstance
    """
    if inst.group_id == 'heat':
        nu = get_default('heat_nu') if nu is None else nu
        return ProblemInstance(transform_ic_heat(g, nu, inst.ic), transform_window(g, inst.query), 'heat')
    elif inst.group_id == 'burgers':
        return ProblemInstance(transform_ic_burgers(g, inst.ic), transform_window(g, inst.query), 'burgers')
    q = inst.query
    query = QueryWindow(q.xf_lo, q.xf_hi, q.tf_lo + g.t_shift, q.tf_hi + g.t_shift)
    return ProblemInstance(transform_ic_ace(g, inst.ic), query, 'se2')


def dist_interval(v: float, lo: float, hi: float) -> float:
    """Distance from v to the closed interval [lo, hi]"""
    if lo > hi:
        raise ValueError(f'Interval bounds out of order: [{lo}, {hi}]')
    return max(lo - v, 0.0, v - hi)


def kde_nll(samples: np.ndarray, h: float, point: np.ndarray) -> Union[float, np.ndarray]:
    """
    Negative log-likelihood of a Gaussian kernel density estimate

    -log( 1/N sum_i (2 pi h^2)^(-d/2) exp(-|point - s_i|^2 / (2 h^2)) ), evaluated with log-sum-exp so that far
    away points give large finite values.

    Args:
        samples: (N, d) array of kernel centres
        h: bandwidth
        point: a (d,) point or an (M, d) batch

    Returns:
        float, or an (M,) array for a batch
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 1:
        raise ValueError('kde_nll needs at least one sample')
    if h <= 0:
        raise ValueError('KDE bandwidth must be positive')
    point = np.asarray(point, dtype=float)
    batch = np.atleast_2d(point)
    n, d = samples.shape
    sq = np.sum((batch[:, None, :] - samples[None, :, :]) ** 2, axis=-1)
    log_kernel = -sq / (2 * h ** 2) - 0.5 * d * math.log(2 * math.pi * h ** 2)
    nll = math.log(n) - logsumexp(log_kernel, axis=1)
    return float(nll[0]) if point.ndim == 1 else nll


def heat_domain_bounds(length: float = None) -> JetBounds:
    """Jet extrema of the heat training ICs: u in [-1, 1] on [0, L] at t = 0"""
    length = get_default('heat_length') if length is None else length
    return JetBounds(-1.0, 1.0, 0.0, length, 0.0, 0.0)


def e_heat(inst: ProblemInstance, domain: JetBounds = None, horizon: float = None,
           tf_mode: str = 'interval', u_mode: str = 'deviation') -> float:
    """
    Distance of a heat instance to the training domain

    Sums the absolute deviations of the jet extrema of the IC from those of the training domain, the distances
    of the query x-window ends to the spatial domain and the distance of the query times to the horizon.

    Args:
        inst: the instance
        domain: training jet extrema, heat_domain_bounds() by default
        horizon: final training time, heat_horizon by default
        tf_mode: 'interval' measures the t-window ends against [t0, horizon], 'point' measures tf_hi against horizon
        u_mode: 'deviation' compares u extrema with the domain's, 'interval' only penalizes values outside it

    Returns:
        float
    """
    assert tf_mode in ('interval', 'point'), f'Unsupported tf_mode: {tf_mode}'
    assert u_mode in ('deviation', 'interval'), f'Unsupported u_mode: {u_mode}'
    domain = heat_domain_bounds() if domain is None else domain
    horizon = get_default('heat_horizon') if horizon is None else horizon
    jb = jet_bounds(inst.ic)
    q = inst.query

    if u_mode == 'deviation':
        energy = abs(jb.u_max - domain.u_max) + abs(jb.u_min - domain.u_min)
    else:
        energy = (dist_interval(jb.u_max, domain.u_min, domain.u_max)
                  + dist_interval(jb.u_min, domain.u_min, domain.u_max))
    energy += abs(jb.x_max - domain.x_max) + abs(jb.x_min - domain.x_min)
    energy += abs(jb.t_max - domain.t_max) + abs(jb.t_min - domain.t_min)
    energy += dist_interval(q.xf_lo, domain.x_min, domain.x_max) + dist_interval(q.xf_hi, domain.x_min, domain.x_max)
    if tf_mode == 'interval':
        energy += dist_interval(q.tf_lo, domain.t_min, horizon) + dist_interval(q.tf_hi, domain.t_min, horizon)
    else:
        energy += abs(q.tf_hi - horizon)
    return float(energy)


def e_burgers(inst: ProblemInstance, t0_mode: str = 'point') -> float:
    """
    Distance of a Burgers instance to the unit training box

    |length - 1| + dist(t0, {0}) + |mean(u0)| + distances of the query window ends to [0, 1]

    Args:
        inst: the instance
        t0_mode: 'point' measures t0 against 0, 'interval' against [0, 1]

    Returns:
        float
    """
    assert t0_mode in ('point', 'interval'), f'Unsupported t0_mode: {t0_mode}'
    f, q = inst.ic, inst.query
    energy = abs(f.length - 1.0)
    energy += abs(f.time) if t0_mode == 'point' else dist_interval(f.time, 0.0, 1.0)
    energy += abs(f.mean())
    energy += dist_interval(q.xf_lo, 0.0, 1.0) + dist_interval(q.xf_hi, 0.0, 1.0)
    energy += dist_interval(q.tf_lo, 0.0, 1.0) + dist_interval(q.tf_hi, 0.0, 1.0)
    return float(energy)


def boundary_energy(f: Field2D) -> float:
    """Sum of u^2 on the seam x = 0 or y = 0 of the periodic square, each node counted once"""
    v = f.values
    return float(np.sum(v[0] ** 2) + np.sum(v[:, 0] ** 2) - v[0, 0] ** 2)


def e_ace(inst: ProblemInstance, inner: Callable[[Field2D], float] = None, tol: float = None) -> float:
    """
    Constrained Allen-Cahn energy

    Returns the energy sentinel when the domain is not axis aligned, t0 is not 0, or the query window leaves
    the unit square or [0, 1] in time. Otherwise returns inner(u0).
    """
    inner = boundary_energy if inner is None else inner
    tol = get_default('constraint_tol') if tol is None else tol
    f, q = inst.ic, inst.query
    violated = (
        abs(f.time) > tol
        or not f.is_axis_aligned(tol)
        or dist_interval(q.tf_lo, 0.0, 1.0) > tol
        or dist_interval(q.tf_hi, 0.0, 1.0) > tol
        or dist_interval(q.xf_lo, 0.0, 1.0) > tol
        or dist_interval(q.xf_hi, 0.0, 1.0) > tol
    )
    if violated:
        return get_default('energy_sentinel')
    return float(inner(f))


@dataclass(frozen=True, eq=False)
class EnergyConfig:
    """
    Selects and parameterizes an energy.

    kde_nll uses samples and bandwidth (default kde_bandwidth_factor times the sample scale). The optional
    regularizer R is added with weight alpha_reg.
    """
    kind: str = 'heat_domain'
    bandwidth: Optional[float] = None
    samples: Optional[np.ndarray] = None
    domain: Optional[JetBounds] = None
    horizon: Optional[float] = None
    tf_mode: str = 'interval'
    u_mode: str = 'deviation'
    t0_mode: str = 'point'
    constraint_tol: Optional[float] = None
    inner: Optional[Callable] = None
    custom: Optional[Callable] = None
    alpha_reg: float = 0.0
    regularizer: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ENERGY_KINDS:
            raise ValueError(f'Unsupported energy kind: {self.kind}')
        if self.kind == 'kde_nll':
            if self.samples is None:
                raise ValueError('kde_nll needs samples')
            if self.bandwidth is not None and self.bandwidth <= 0:
                raise ValueError('KDE bandwidth must be positive')
        if self.kind == 'custom' and self.custom is None:
            raise ValueError('custom energies need a callable')
        if self.alpha_reg < 0:
            raise ValueError('alpha_reg must be nonnegative')
        if self.alpha_reg > 0 and self.regularizer is None:
            raise ValueError('alpha_reg > 0 needs a regularizer')


def _kde_bandwidth(samples: np.ndarray) -> float:
    scale = float(np.max(np.linalg.norm(samples, axis=1)))
    return get_default('kde_bandwidth_factor') * (scale if scale > 0 else 1.0)


def make_energy(cfg: EnergyConfig) -> Callable:
    """
    Builds the energy function described by cfg

    Args:
        cfg: the energy configuration

    Returns:
        callable taking a ProblemInstance (or a point for kde_nll) and returning a float
    """
    if cfg.kind == 'kde_nll':
        samples = np.atleast_2d(np.asarray(cfg.samples, dtype=float))
        h = _kde_bandwidth(samples) if cfg.bandwidth is None else cfg.bandwidth
        logger.debug(f'kde_nll energy with {samples.shape[0]} samples and bandwidth {h}')

        def base(x):
            return kde_nll(samples, h, x)
    elif cfg.kind == 'heat_domain':
        def base(x):
            return e_heat(x, cfg.domain, cfg.horizon, cfg.tf_mode, cfg.u_mode)
    elif cfg.kind == 'burgers_domain':
        def base(x):
            return e_burgers(x, cfg.t0_mode)
    elif cfg.kind == 'ace_constrained':
        def base(x):
            return e_ace(x, cfg.inner, cfg.constraint_tol)
    else:
        base = cfg.custom

    if cfg.alpha_reg == 0:
        return base

    def composite(x):
        return base(x) + cfg.alpha_reg * cfg.regularizer(x)
    return composite
