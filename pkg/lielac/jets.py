"""
Closed-form actions of group elements and generator flows on zeroth-order jets.

All point functions accept numpy arrays in place of scalars and broadcast them, so a whole sampled field can be
pushed through a single call.
"""
import math
from typing import Callable, NamedTuple, Tuple, Union

import numpy as np
import pandas as pd

from ._constants import get_default
from ._errors import SingularTransform
from .groups import (
    AceElement,
    BurgersGroupElement,
    HeatGroupElement,
    Se2Element,
    algebra_dim,
)

__all__ = [
    'JetPoint',
    'JetPoint2D',
    'GeneratorId',
    'HEAT_BRACKETS',
    'BURGERS_BRACKETS',
    'base_act',
    'heat_act_point',
    'heat_flow',
    'burgers_act_point',
    'burgers_flow',
    'ace_act_point',
    'so2_act_point',
    'flow',
    'generator_field',
    'tabulated_bracket',
    'bracket_commutator_estimate',
    'bracket_table',
    'point_action',
]


class JetPoint(NamedTuple):
    t: float
    x: float
    u: float


class JetPoint2D(NamedTuple):
    t: float
    x: float
    y: float
    u: float


class GeneratorId(NamedTuple):
    group_id: str
    index: int

    def check(self) -> 'GeneratorId':
        dim = algebra_dim(self.group_id)
        if not 1 <= self.index <= dim:
            raise ValueError(f'Generator index {self.index} out of range 1..{dim} for {self.group_id}')
        return self


# nonzero brackets [v_i, v_j] = sum_k c_k v_k, keyed by (i, j) -> {k: c_k}
HEAT_BRACKETS = {
    (4, 2): {2: -2.0},
    (4, 6): {6: 2.0},
    (2, 6): {4: 1.0},
    (2, 5): {1: 1.0},
    (4, 5): {5: 1.0},
    (4, 1): {1: -1.0},
    (6, 1): {5: -1.0},
    (5, 1): {3: 0.5},
}

BURGERS_BRACKETS = {
    (3, 2): {2: -2.0},
    (3, 5): {5: 2.0},
    (2, 5): {3: 1.0},
    (2, 4): {1: 1.0},
    (3, 4): {4: 1.0},
    (3, 1): {1: -1.0},
    (5, 1): {4: -1.0},
}


def _check_denominator(d, sing_tol=None):
    sing_tol = get_default('sing_tol') if sing_tol is None else sing_tol
    if np.any(np.abs(d) < sing_tol):
        raise SingularTransform(f'|gamma*t + delta| fell below {sing_tol}')


def base_act(g: Union[HeatGroupElement, BurgersGroupElement], t, x) -> Tuple:
    """The (t, x) part of the heat or Burgers action, shared by both groups"""
    a = g.a
    lambda1, lambda0 = (g.h.lambda1, g.h.lambda0) if isinstance(g, HeatGroupElement) else (g.lambda1, g.lambda0)
    d = a.gamma * t + a.delta
    _check_denominator(d)
    return (a.alpha * t + a.beta) / d, (x + lambda1 * t + lambda0) / d


def heat_act_point(g: HeatGroupElement, nu: float, p: JetPoint) -> JetPoint:
    """
    Applies a heat group element to jet points

    t -> (alpha t + beta) / (gamma t + delta)
    x -> (x + lambda1 t + lambda0) / (gamma t + delta)
    u -> sqrt|gamma t + delta| exp(gamma s^2 / (4 nu D) - lambda1 x / (2 nu) - lambda1^2 t / (4 nu) + ln_sigma / nu) u
    with s = x + lambda1 t + lambda0 and D = gamma t + delta.

    Args:
        g: the group element
        nu: diffusivity, > 0
        p: the jet point(s); fields may be numpy arrays

    Returns:
        JetPoint

    Raises:
        SingularTransform: if |gamma t + delta| < the singularity tolerance
    """
    if nu <= 0:
        raise ValueError('nu must be positive')
    a, h = g.a, g.h
    t, x, u = p
    d = a.gamma * t + a.delta
    _check_denominator(d)
    s = x + h.lambda1 * t + h.lambda0
    exponent = (
        a.gamma * s ** 2 / (4 * nu * d)
        - h.lambda1 * x / (2 * nu)
        - h.lambda1 ** 2 * t / (4 * nu)
        + h.ln_sigma / nu
    )
    # overflow gives inf, which the energies map to the sentinel
    with np.errstate(over='ignore', invalid='ignore'):
        scaled = np.sqrt(np.abs(d)) * np.exp(exponent) * u
    return JetPoint((a.alpha * t + a.beta) / d, s / d, scaled)


def heat_flow(v: GeneratorId, eps: float, nu: float, p: JetPoint) -> JetPoint:
    """
    The one-parameter flow exp(eps v) of a heat generator

    v1 = d/dx, v2 = d/dt, v3 = u d/du / nu, v4 = 2t d/dt + x d/dx - u/2 d/du, v5 = t d/dx - x u / (2 nu) d/du,
    v6 = t^2 d/dt + t x d/dx - (x^2 + 2 nu t) u / (4 nu) d/du
    """
    index = GeneratorId(*v).check().index
    t, x, u = p
    if index == 1:
        return JetPoint(t, x + eps, u)
    elif index == 2:
        return JetPoint(t + eps, x, u)
    elif index == 3:
        with np.errstate(over='ignore', invalid='ignore'):
            return JetPoint(t, x, np.exp(eps / nu) * u)
    elif index == 4:
        return JetPoint(math.exp(2 * eps) * t, math.exp(eps) * x, math.exp(-eps / 2) * u)
    elif index == 5:
        return JetPoint(t, x + eps * t, np.exp(-(eps ** 2 * t + 2 * eps * x) / (4 * nu)) * u)
    d = 1 - eps * t
    _check_denominator(d)
    return JetPoint(t / d, x / d, np.sqrt(np.abs(d)) * np.exp(-eps * x ** 2 / (4 * nu * d)) * u)


def burgers_act_point(g: BurgersGroupElement, p: JetPoint) -> JetPoint:
    """
    Applies a Burgers group element to jet points

    t -> (alpha t + beta) / D, x -> (x + lambda1 t + lambda0) / D, u -> D u - gamma x + lambda1 delta - lambda0 gamma
    with D = gamma t + delta.

    Raises:
        SingularTransform: if |D| < the singularity tolerance
    """
    a = g.a
    t, x, u = p
    d = a.gamma * t + a.delta
    _check_denominator(d)
    return JetPoint(
        (a.alpha * t + a.beta) / d,
        (x + g.lambda1 * t + g.lambda0) / d,
        d * u - a.gamma * x + g.lambda1 * a.delta - g.lambda0 * a.gamma,
    )


def burgers_flow(v: GeneratorId, eps: float, p: JetPoint) -> JetPoint:
    """
    The one-parameter flow exp(eps v) of a Burgers generator

    v1 = d/dx, v2 = d/dt, v3 = 2t d/dt + x d/dx - u d/du, v4 = t d/dx + d/du, v5 = t^2 d/dt + t x d/dx + (x - t u) d/du
    """
    index = GeneratorId(*v).check().index
    t, x, u = p
    if index == 1:
        return JetPoint(t, x + eps, u)
    elif index == 2:
        return JetPoint(t + eps, x, u)
    elif index == 3:
        return JetPoint(math.exp(2 * eps) * t, math.exp(eps) * x, math.exp(-eps) * u)
    elif index == 4:
        return JetPoint(t, x + eps * t, u + eps)
    d = 1 - eps * t
    _check_denominator(d)
    return JetPoint(t / d, x / d, u * d + eps * x)


def ace_act_point(g: Se2Element, t_shift: float, p: JetPoint2D) -> JetPoint2D:
    """Rigid motion of (x, y) and a shift of t; u is left unchanged"""
    c, s = math.cos(g.theta), math.sin(g.theta)
    t, x, y, u = p
    return JetPoint2D(t + t_shift, c * x - s * y + g.tx, s * x + c * y + g.ty, u)


def so2_act_point(g: Se2Element, point: np.ndarray) -> np.ndarray:
    """Rotates planar points (shape (2,) or (n, 2)) about the origin"""
    c, s = math.cos(g.theta), math.sin(g.theta)
    point = np.asarray(point, dtype=float)
    return point @ np.array([[c, s], [-s, c]])


def flow(group_id: str, index: int, eps: float, p: JetPoint, nu: float = None) -> JetPoint:
    if group_id == 'heat':
        nu = get_default('heat_nu') if nu is None else nu
        return heat_flow(GeneratorId(group_id, index), eps, nu, p)
    elif group_id == 'burgers':
        return burgers_flow(GeneratorId(group_id, index), eps, p)
    raise ValueError(f'Unsupported group id for jet flows: {group_id}')


def generator_field(group_id: str, index: int, p: JetPoint, nu: float = None) -> np.ndarray:
    """Components (dt, dx, du) of the generator vector field v_index at p"""
    t, x, u = p
    if group_id == 'heat':
        nu = get_default('heat_nu') if nu is None else nu
        return np.array({
            1: (0.0, 1.0, 0.0),
            2: (1.0, 0.0, 0.0),
            3: (0.0, 0.0, u / nu),
            4: (2 * t, x, -u / 2),
            5: (0.0, t, -x * u / (2 * nu)),
            6: (t ** 2, t * x, -(x ** 2 + 2 * nu * t) * u / (4 * nu)),
        }[GeneratorId(group_id, index).check().index])
    elif group_id == 'burgers':
        return np.array({
            1: (0.0, 1.0, 0.0),
            2: (1.0, 0.0, 0.0),
            3: (2 * t, x, -u),
            4: (0.0, t, 1.0),
            5: (t ** 2, t * x, x - t * u),
        }[GeneratorId(group_id, index).check().index])
    raise ValueError(f'Unsupported group id for jet flows: {group_id}')


def tabulated_bracket(group_id: str, i: int, j: int) -> dict:
    """Coefficients {k: c_k} of [v_i, v_j] from the bracket tables, using antisymmetry"""
    table = {'heat': HEAT_BRACKETS, 'burgers': BURGERS_BRACKETS}.get(group_id)
    if table is None:
        raise ValueError(f'Unsupported group id for bracket tables: {group_id}')
    if (i, j) in table:
        return dict(table[(i, j)])
    if (j, i) in table:
        return {k: -c for k, c in table[(j, i)].items()}
    return {}


def bracket_commutator_estimate(vi: GeneratorId, vj: GeneratorId, eps: float, nu: float, p: JetPoint) -> np.ndarray:
    """
    Jet displacement of the commutator of flows, Phi_j^-eps Phi_i^-eps Phi_j^eps Phi_i^eps (p) - p

    Phi_i^eps is applied first. Divided by eps^2 this tends to the vector-field bracket [v_i, v_j] at p.

    Args:
        vi: first generator
        vj: second generator
        eps: flow parameter
        nu: diffusivity, only used by the heat group
        p: the jet point

    Returns:
        np.ndarray of (dt, dx, du)
    """
    if vi.group_id != vj.group_id:
        raise ValueError('Both generators must belong to the same group')
    group_id = vi.group_id
    q = flow(group_id, vi.index, eps, p, nu)
    q = flow(group_id, vj.index, eps, q, nu)
    q = flow(group_id, vi.index, -eps, q, nu)
    q = flow(group_id, vj.index, -eps, q, nu)
    return np.array(q, dtype=float) - np.array(p, dtype=float)


def bracket_table(group_id: str, eps: float = 1e-2, nu: float = None, p: JetPoint = None,
                  rel_tol: float = 0.05, zero_tol: float = 1e-3) -> Tuple[pd.DataFrame, int]:
    """
    Compares commutator-of-flows estimates with the tabulated brackets for every generator pair

    One global sign s is fitted over all nonzero pairs. A nonzero pair passes when
    |Delta / eps^2 - s B| <= rel_tol |B|, a zero pair when |Delta| / eps^2 <= zero_tol.

    Args:
        group_id: heat or burgers
        eps: flow parameter
        nu: diffusivity for the heat group
        p: evaluation point, default (0.5, 0.5, 1.0)
        rel_tol: relative tolerance on nonzero brackets
        zero_tol: absolute tolerance on zero brackets

    Returns:
        (pandas DataFrame with one row per pair, fitted sign)
    """
    nu = get_default('heat_nu') if nu is None else nu
    p = JetPoint(0.5, 0.5, 1.0) if p is None else p
    dim = algebra_dim(group_id)
    rows = []
    for i in range(1, dim + 1):
        for j in range(i + 1, dim + 1):
            estimate = bracket_commutator_estimate(GeneratorId(group_id, i), GeneratorId(group_id, j), eps, nu, p)
            estimate = estimate / eps ** 2
            expected = np.zeros(3)
            for k, c in tabulated_bracket(group_id, i, j).items():
                expected += c * generator_field(group_id, k, p, nu)
            rows.append({'i': i, 'j': j, 'estimate': estimate, 'expected': expected})

    alignment = sum(float(np.dot(r['estimate'], r['expected'])) for r in rows)
    sign = -1 if alignment < 0 else 1

    records = []
    for r in rows:
        expected_norm = float(np.linalg.norm(r['expected']))
        if expected_norm > 0:
            error = float(np.linalg.norm(r['estimate'] - sign * r['expected'])) / expected_norm
            passed = error <= rel_tol
        else:
            error = float(np.linalg.norm(r['estimate']))
            passed = error <= zero_tol
        records.append({
            'i': r['i'],
            'j': r['j'],
            'est_t': r['estimate'][0],
            'est_x': r['estimate'][1],
            'est_u': r['estimate'][2],
            'tab_t': r['expected'][0],
            'tab_x': r['expected'][1],
            'tab_u': r['expected'][2],
            'zero_bracket': expected_norm == 0,
            'error': error,
            'passed': passed,
        })
    return pd.DataFrame(records), sign


def point_action(group_id: str, nu: float = None) -> Callable:
    """The jet action g, p -> g.p of a group, with nu bound for the heat group"""
    if group_id == 'heat':
        nu = get_default('heat_nu') if nu is None else nu
        return lambda g, p: heat_act_point(g, nu, p)
    elif group_id == 'burgers':
        return burgers_act_point
    elif group_id == 'se2':
        return lambda g, p: ace_act_point(g.rigid, g.t_shift, p)
    elif group_id == 'so2':
        return so2_act_point
    raise ValueError(f'Unsupported group id {group_id}')
