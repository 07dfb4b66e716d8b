"""
Exact arithmetic for the symmetry groups acted on by lielac.

heat     SL(2) semidirect the polarized Heisenberg group, 6 generators
burgers  SL(2) semidirect (R^2, +), 5 generators
se2      rigid motions of the periodic unit square plus a time shift, 4 generators
so2      planar rotations about the origin, 1 generator

Elements are immutable dataclasses. ``compose(g1, g2)`` is the element acting as g1 after g2.
"""
import functools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    'ALGEBRA_DIM',
    'Sl2Matrix',
    'HeisenbergPol',
    'HeatGroupElement',
    'BurgersGroupElement',
    'Se2Element',
    'AceElement',
    'LieAlgebraCoeffs',
    'heisenberg_mul',
    'heisenberg_inverse',
    'heat_phi',
    'heat_compose',
    'heat_inverse',
    'burgers_compose',
    'burgers_inverse',
    'se2_compose',
    'se2_inverse',
    'ace_compose',
    'ace_inverse',
    'identity',
    'compose',
    'inverse',
    'generator_exp',
    'exp_train',
    'algebra_dim',
    'group_of',
    'as_params',
    'random_element',
]

ALGEBRA_DIM = {
    'heat': 6,
    'burgers': 5,
    'se2': 4,
    'so2': 1,
}

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Sl2Matrix:
    """
    The matrix [[alpha, beta], [gamma, delta]], rescaled on construction so that its determinant is 1
    """
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        det = self.alpha * self.delta - self.beta * self.gamma
        if not math.isfinite(det) or det <= 0:
            raise ValueError(f'Sl2Matrix needs a positive finite determinant, got {det}')
        if det != 1.0:
            scale = 1 / math.sqrt(det)
            for name in ('alpha', 'beta', 'gamma', 'delta'):
                object.__setattr__(self, name, float(getattr(self, name)) * scale)

    @property
    def det(self) -> float:
        return self.alpha * self.delta - self.beta * self.gamma

    def __matmul__(self, other: 'Sl2Matrix') -> 'Sl2Matrix':
        return Sl2Matrix(
            self.alpha * other.alpha + self.beta * other.gamma,
            self.alpha * other.beta + self.beta * other.delta,
            self.gamma * other.alpha + self.delta * other.gamma,
            self.gamma * other.beta + self.delta * other.delta,
        )

    def inverse(self) -> 'Sl2Matrix':
        return Sl2Matrix(self.delta, -self.beta, -self.gamma, self.alpha)

    def as_array(self) -> np.ndarray:
        return np.array([[self.alpha, self.beta], [self.gamma, self.delta]])


@dataclass(frozen=True)
class HeisenbergPol:
    """
    Coordinates (lambda1, lambda0, ln_sigma) of the polarized Heisenberg group.

    ln_sigma is stored in diffusivity-normalized units: an element multiplies u by exp(ln_sigma / nu). With this
    convention the group law does not depend on nu and the generator u*d/du / nu integrates to ln_sigma = eps.
    """
    lambda1: float = 0.0
    lambda0: float = 0.0
    ln_sigma: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lambda1, self.lambda0, self.ln_sigma)):
            raise ValueError('HeisenbergPol coordinates must be finite')

    def as_matrix(self) -> np.ndarray:
        return np.array([
            [1.0, -self.lambda1 / 2, self.ln_sigma],
            [0.0, 1.0, self.lambda0],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class HeatGroupElement:
    a: Sl2Matrix = Sl2Matrix()
    h: HeisenbergPol = HeisenbergPol()


@dataclass(frozen=True)
class BurgersGroupElement:
    a: Sl2Matrix = Sl2Matrix()
    lambda1: float = 0.0
    lambda0: float = 0.0


@dataclass(frozen=True)
class Se2Element:
    """Rotation by theta about the origin followed by the translation (tx, ty)"""
    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'theta', float(self.theta) % TWO_PI)

    def as_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.tx], [s, c, self.ty], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class AceElement:
    """A rigid motion of the square together with a shift of the time coordinate"""
    rigid: Se2Element = Se2Element()
    t_shift: float = 0.0


GroupElement = Union[HeatGroupElement, BurgersGroupElement, Se2Element, AceElement]


@dataclass(frozen=True)
class LieAlgebraCoeffs:
    """Coefficients over the generator basis v1 ... vn of a group's Lie algebra"""
    group_id: str
    coeffs: tuple

    def __post_init__(self):
        dim = algebra_dim(self.group_id)
        coeffs = tuple(float(c) for c in np.ravel(self.coeffs))
        if len(coeffs) != dim:
            raise ValueError(f'{self.group_id} algebra has dimension {dim}, got {len(coeffs)} coefficients')
        object.__setattr__(self, 'coeffs', coeffs)

    @classmethod
    def zeros(cls, group_id: str) -> 'LieAlgebraCoeffs':
        return cls(group_id, (0.0,) * algebra_dim(group_id))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs)


def algebra_dim(group_id: str) -> int:
    try:
        return ALGEBRA_DIM[group_id]
    except KeyError:
        raise ValueError(f'Unsupported group id {group_id}, choose one of {tuple(ALGEBRA_DIM)}')


# heat group

def heisenberg_mul(h1: HeisenbergPol, h2: HeisenbergPol) -> HeisenbergPol:
    """Heisenberg product, the same as multiplying the 3x3 matrix embeddings of h1 and h2"""
    return HeisenbergPol(
        h1.lambda1 + h2.lambda1,
        h1.lambda0 + h2.lambda0,
        h1.ln_sigma + h2.ln_sigma - h1.lambda1 * h2.lambda0 / 2,
    )


def heisenberg_inverse(h: HeisenbergPol) -> HeisenbergPol:
    return HeisenbergPol(-h.lambda1, -h.lambda0, -h.ln_sigma - h.lambda1 * h.lambda0 / 2)


def heat_phi(a: Sl2Matrix, h: HeisenbergPol) -> HeisenbergPol:
    """
    The antihomomorphism phi: SL(2) -> Aut(H) of the heat group semidirect product, phi(AB) = phi(B) o phi(A)

    Args:
        a: the SL(2) part
        h: the Heisenberg element to transform

    Returns:
        HeisenbergPol
    """
    k1 = a.alpha * h.lambda1 + a.gamma * h.lambda0
    k0 = a.beta * h.lambda1 + a.delta * h.lambda0
    return HeisenbergPol(k1, k0, h.ln_sigma + (h.lambda0 * h.lambda1 - k1 * k0) / 4)


def heat_compose(g1: HeatGroupElement, g2: HeatGroupElement) -> HeatGroupElement:
    """
    Product (A1, H1)(A2, H2) = (A1 A2, phi(A2)(H1) H2); acting with the product equals acting with g2 then g1

    Args:
        g1: the element applied last
        g2: the element applied first

    Returns:
        HeatGroupElement
    """
    return HeatGroupElement(g1.a @ g2.a, heisenberg_mul(heat_phi(g2.a, g1.h), g2.h))


def heat_inverse(g: HeatGroupElement) -> HeatGroupElement:
    a_inv = g.a.inverse()
    return HeatGroupElement(a_inv, heat_phi(a_inv, heisenberg_inverse(g.h)))


# burgers group

def burgers_compose(g1: BurgersGroupElement, g2: BurgersGroupElement) -> BurgersGroupElement:
    """
    Product (A1, l1)(A2, l2) = (A1 A2, l1 A2 + l2) with the translations l = (lambda1, lambda0) as row vectors

    Args:
        g1: the element applied last
        g2: the element applied first

    Returns:
        BurgersGroupElement
    """
    a2 = g2.a
    return BurgersGroupElement(
        g1.a @ a2,
        g2.lambda1 + a2.alpha * g1.lambda1 + a2.gamma * g1.lambda0,
        g2.lambda0 + a2.beta * g1.lambda1 + a2.delta * g1.lambda0,
    )


def burgers_inverse(g: BurgersGroupElement) -> BurgersGroupElement:
    a_inv = g.a.inverse()
    return BurgersGroupElement(
        a_inv,
        -(a_inv.alpha * g.lambda1 + a_inv.gamma * g.lambda0),
        -(a_inv.beta * g.lambda1 + a_inv.delta * g.lambda0),
    )


# rigid motions

def se2_compose(g1: Se2Element, g2: Se2Element) -> Se2Element:
    c, s = math.cos(g1.theta), math.sin(g1.theta)
    return Se2Element(
        g1.theta + g2.theta,
        c * g2.tx - s * g2.ty + g1.tx,
        s * g2.tx + c * g2.ty + g1.ty,
    )


def se2_inverse(g: Se2Element) -> Se2Element:
    c, s = math.cos(g.theta), math.sin(g.theta)
    return Se2Element(-g.theta, -(c * g.tx + s * g.ty), -(-s * g.tx + c * g.ty))


def ace_compose(g1: AceElement, g2: AceElement) -> AceElement:
    return AceElement(se2_compose(g1.rigid, g2.rigid), g1.t_shift + g2.t_shift)


def ace_inverse(g: AceElement) -> AceElement:
    return AceElement(se2_inverse(g.rigid), -g.t_shift)


# generic interface

def identity(group_id: str) -> GroupElement:
    if group_id == 'heat':
        return HeatGroupElement()
    elif group_id == 'burgers':
        return BurgersGroupElement()
    elif group_id == 'se2':
        return AceElement()
    elif group_id == 'so2':
        return Se2Element()
    raise ValueError(f'Unsupported group id {group_id}')


@functools.singledispatch
def compose(g1, g2):
    raise TypeError(f'Cannot compose elements of type {type(g1).__name__}')


compose.register(HeatGroupElement, heat_compose)
compose.register(BurgersGroupElement, burgers_compose)
compose.register(Se2Element, se2_compose)
compose.register(AceElement, ace_compose)


@functools.singledispatch
def inverse(g):
    raise TypeError(f'Cannot invert elements of type {type(g).__name__}')


inverse.register(HeatGroupElement, heat_inverse)
inverse.register(BurgersGroupElement, burgers_inverse)
inverse.register(Se2Element, se2_inverse)
inverse.register(AceElement, ace_inverse)


def group_of(g: GroupElement) -> str:
    if isinstance(g, HeatGroupElement):
        return 'heat'
    elif isinstance(g, BurgersGroupElement):
        return 'burgers'
    elif isinstance(g, AceElement):
        return 'se2'
    elif isinstance(g, Se2Element):
        return 'so2'
    raise TypeError(f'Not a group element: {type(g).__name__}')


def generator_exp(group_id: str, index: int, eps: float) -> GroupElement:
    """
    The group element exp(eps * v_index), whose jet action is the one-parameter flow of generator v_index

    Args:
        group_id: heat, burgers, se2 or so2
        index: 1-based generator index
        eps: flow parameter

    Returns:
        the group element
    """
    dim = algebra_dim(group_id)
    if not 1 <= index <= dim:
        raise ValueError(f'Generator index {index} out of range 1..{dim} for {group_id}')
    eps = float(eps)
    if group_id == 'heat':
        if index == 1:
            return HeatGroupElement(h=HeisenbergPol(lambda0=eps))
        elif index == 2:
            return HeatGroupElement(a=Sl2Matrix(beta=eps))
        elif index == 3:
            return HeatGroupElement(h=HeisenbergPol(ln_sigma=eps))
        elif index == 4:
            return HeatGroupElement(a=Sl2Matrix(math.exp(eps), 0.0, 0.0, math.exp(-eps)))
        elif index == 5:
            return HeatGroupElement(h=HeisenbergPol(lambda1=eps))
        return HeatGroupElement(a=Sl2Matrix(gamma=-eps))
    elif group_id == 'burgers':
        if index == 1:
            return BurgersGroupElement(lambda0=eps)
        elif index == 2:
            return BurgersGroupElement(a=Sl2Matrix(beta=eps))
        elif index == 3:
            return BurgersGroupElement(a=Sl2Matrix(math.exp(eps), 0.0, 0.0, math.exp(-eps)))
        elif index == 4:
            return BurgersGroupElement(lambda1=eps)
        return BurgersGroupElement(a=Sl2Matrix(gamma=-eps))
    elif group_id == 'se2':
        if index == 1:
            return AceElement(t_shift=eps)
        elif index == 2:
            return AceElement(Se2Element(tx=eps))
        elif index == 3:
            return AceElement(Se2Element(ty=eps))
        return AceElement(Se2Element(theta=eps))
    return Se2Element(theta=eps)


def exp_train(xi: LieAlgebraCoeffs) -> GroupElement:
    """
    The train of exponentials exp(a_n v_n) ... exp(a_1 v_1).

    Acting on a jet, exp(a_1 v_1) is applied first and exp(a_n v_n) last. This ordering is the single convention
    shared by the optimizers, the CLI and the tests.

    Args:
        xi: coefficients a_1 ... a_n

    Returns:
        the group element
    """
    g = identity(xi.group_id)
    for index, a in enumerate(xi.coeffs, start=1):
        if a != 0.0:
            g = compose(generator_exp(xi.group_id, index, a), g)
    return g


def as_params(g: GroupElement) -> np.ndarray:
    """
    Flat parameter vector of an element, used for tolerance comparisons and result files

    heat: alpha, beta, gamma, delta, lambda1, lambda0, ln_sigma
    burgers: alpha, beta, gamma, delta, lambda1, lambda0
    so2: cos(theta), sin(theta), tx, ty
    se2: cos(theta), sin(theta), tx, ty, t_shift
    """
    if isinstance(g, HeatGroupElement):
        a, h = g.a, g.h
        return np.array([a.alpha, a.beta, a.gamma, a.delta, h.lambda1, h.lambda0, h.ln_sigma])
    elif isinstance(g, BurgersGroupElement):
        a = g.a
        return np.array([a.alpha, a.beta, a.gamma, a.delta, g.lambda1, g.lambda0])
    elif isinstance(g, Se2Element):
        return np.array([math.cos(g.theta), math.sin(g.theta), g.tx, g.ty])
    elif isinstance(g, AceElement):
        return np.append(as_params(g.rigid), g.t_shift)
    raise TypeError(f'Not a group element: {type(g).__name__}')


def random_element(group_id: str, rng: np.random.Generator, scale: float = 0.5) -> GroupElement:
    """exp_train of coefficients drawn uniformly from [-scale, scale]"""
    coeffs = rng.uniform(-scale, scale, algebra_dim(group_id))
    return exp_train(LieAlgebraCoeffs(group_id, coeffs))
