"""
Sampled fields, the group actions on whole initial conditions, and the initial-condition generators.

A Field1D always lives on the closed uniform grid linspace(x_lo, x_hi, n). For periodic fields the last node
duplicates the first one. A Field2D lives on the open periodic grid x_i = i / n, y_j = j / n of the unit square
and stores values[j, i] (rows are y).
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
import xarray as xr
from scipy.integrate import trapezoid
from scipy.ndimage import map_coordinates

from ._constants import get_default
from ._errors import DegenerateDomain
from .groups import AceElement, BurgersGroupElement, HeatGroupElement, Se2Element, compose
from .jets import JetPoint, base_act, burgers_act_point, heat_act_point

__all__ = [
    'Field1D',
    'Field2D',
    'JetBounds',
    'QueryWindow',
    'SineICParams',
    'GrfParams',
    'AceIcParams',
    'transform_ic_heat',
    'transform_ic_burgers',
    'transform_ic_ace',
    'transform_window',
    'keeps_periodicity',
    'rotate90',
    'roll_cells',
    'jet_bounds',
    'gen_sine_ic',
    'sample_sine_ic_params',
    'gen_grf_ic',
    'grf_mode_std',
    'gen_ace_ic',
    'sample_ace_ic_params',
    'write_field_csv',
    'read_field_csv',
    'fields_to_dataset',
]

QUARTER_TURN = math.pi / 2


@dataclass(frozen=True, eq=False)
class Field1D:
    """
    A sampled 1D field.

    periodic_frame, when set, is the group element that carries a periodic field onto this one. Transforms
    compose it, so a field moved off and back onto a periodic frame gets its periodic flag back.
    """
    values: np.ndarray
    x_lo: float = 0.0
    x_hi: float = 1.0
    time: float = 0.0
    periodic: bool = False
    periodic_frame: Optional[Any] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError('Field1D values must be a 1D array with at least 2 samples')
        if not self.x_lo < self.x_hi:
            raise ValueError(f'Field1D needs x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]')
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'x_lo', float(self.x_lo))
        object.__setattr__(self, 'x_hi', float(self.x_hi))
        object.__setattr__(self, 'time', float(self.time))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n)

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def spacing(self) -> float:
        return self.length / (self.n - 1)

    @property
    def periodic_values(self) -> np.ndarray:
        """The n - 1 samples of one period, without the duplicated end node"""
        return self.values[:-1]

    def mean(self) -> float:
        """Trapezoid mean over the domain; for periodic fields this is the plain mean of one period"""
        return float(trapezoid(self.values, self.grid) / self.length)


@dataclass(frozen=True, eq=False)
class Field2D:
    values: np.ndarray
    time: float = 0.0
    periodic: bool = True
    angle: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f'Field2D values must be a square matrix, got shape {values.shape}')
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'time', float(self.time))
        object.__setattr__(self, 'angle', float(self.angle))

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    def is_axis_aligned(self, tol: float = None) -> bool:
        """True when the domain orientation is a multiple of a quarter turn"""
        tol = get_default('constraint_tol') if tol is None else tol
        turns = self.angle / QUARTER_TURN
        return abs(turns - round(turns)) * QUARTER_TURN <= tol


class JetBounds(NamedTuple):
    u_min: float
    u_max: float
    x_min: float
    x_max: float
    t_min: float
    t_max: float


@dataclass(frozen=True)
class QueryWindow:
    """Bounding window of the evaluation points x_f and times t_f"""
    xf_lo: float
    xf_hi: float
    tf_lo: float
    tf_hi: float

    def __post_init__(self):
        if not (self.xf_lo <= self.xf_hi and self.tf_lo <= self.tf_hi):
            raise ValueError(f'QueryWindow bounds out of order: {self}')


@dataclass(frozen=True)
class SineICParams:
    amps: tuple = (1.0,)
    freqs: tuple = (2,)
    phases: tuple = (0.0,)
    length: float = 2 * math.pi

    def __post_init__(self):
        amps, freqs, phases = (tuple(float(v) for v in np.atleast_1d(a)) for a in (self.amps, self.freqs, self.phases))
        if not len(amps) == len(freqs) == len(phases) >= 1:
            raise ValueError('amps, freqs and phases must have the same length K >= 1')
        if any(f != round(f) for f in freqs):
            raise ValueError('Sine IC frequencies must be integers')
        if self.length <= 0:
            raise ValueError('Sine IC domain length must be positive')
        object.__setattr__(self, 'amps', amps)
        object.__setattr__(self, 'freqs', freqs)
        object.__setattr__(self, 'phases', phases)

    @property
    def k(self) -> int:
        return len(self.amps)


@dataclass(frozen=True)
class GrfParams:
    scale: float = 25.0
    shift: float = 5.0
    power: int = 4
    mean_offset: float = 0.0

    def __post_init__(self):
        if self.power < 1:
            raise ValueError('GRF power must be >= 1')


@dataclass(frozen=True, eq=False)
class AceIcParams:
    a_coeffs: np.ndarray
    r: float = 0.85
    x0_shift: float = 0.0
    y0_shift: float = 0.0

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.a_coeffs, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError('a_coeffs must be a K x K matrix')
        if np.any(np.abs(a) > 1):
            raise ValueError('a_coeffs must lie in [-1, 1]')
        if self.r <= 0:
            raise ValueError('r must be positive')
        if not (0 <= self.x0_shift <= 1 and 0 <= self.y0_shift <= 1):
            raise ValueError('shifts must lie in [0, 1]')
        object.__setattr__(self, 'a_coeffs', a)

    @property
    def k(self) -> int:
        return self.a_coeffs.shape[0]


def _resample(new_x: np.ndarray, new_u: np.ndarray, time: float, periodic: bool, frame=None) -> Field1D:
    order = np.argsort(new_x, kind='stable')
    xs, us = new_x[order], new_u[order]
    lo, hi = float(xs[0]), float(xs[-1])
    if hi - lo < get_default('min_domain_length'):
        raise DegenerateDomain(f'Transformed domain [{lo}, {hi}] is degenerate')
    grid = np.linspace(lo, hi, xs.size)
    values = us if np.array_equal(grid, xs) else np.interp(grid, xs, us)
    return Field1D(values, lo, hi, float(time), periodic, frame)


def keeps_periodicity(g: Union[HeatGroupElement, BurgersGroupElement], tol: float = None) -> bool:
    """
    True when g maps periodic solutions to periodic solutions on the image interval

    That is the subgroup of translations, dilations and u-scalings (and Burgers boosts): |gamma| <= tol, plus
    |lambda1| <= tol for the heat group, whose boost multiplies u by a non-periodic exponential.
    """
    tol = get_default('periodic_tol') if tol is None else tol
    if abs(g.a.gamma) > tol:
        return False
    return not isinstance(g, HeatGroupElement) or abs(g.h.lambda1) <= tol


def _periodic_flags(g, f: Field1D):
    if f.periodic:
        chain = g
    elif f.periodic_frame is not None:
        chain = compose(g, f.periodic_frame)
    else:
        return False, None
    if keeps_periodicity(chain):
        return True, None
    return False, chain


def transform_ic_heat(g: HeatGroupElement, nu: float, f: Field1D) -> Field1D:
    """
    Pushes a heat initial condition through g and resamples it on a uniform grid over the image interval

    Args:
        g: heat group element
        nu: diffusivity
        f: the field

    Returns:
        Field1D with the same sample count at the transformed time
        The periodic flag survives when g composed with f.periodic_frame keeps periodicity.

    Raises:
        SingularTransform: if g maps f.time through the projective singularity
        DegenerateDomain: if the image interval collapses
    """
    p = heat_act_point(g, nu, JetPoint(f.time, f.grid, f.values))
    periodic, frame = _periodic_flags(g, f)
    return _resample(np.asarray(p.x, dtype=float), np.asarray(p.u, dtype=float), p.t, periodic, frame)


def transform_ic_burgers(g: BurgersGroupElement, f: Field1D) -> Field1D:
    """Burgers analogue of transform_ic_heat"""
    p = burgers_act_point(g, JetPoint(f.time, f.grid, f.values))
    periodic, frame = _periodic_flags(g, f)
    return _resample(np.asarray(p.x, dtype=float), np.asarray(p.u, dtype=float), p.t, periodic, frame)


def rotate90(values: np.ndarray, k: int = 1) -> np.ndarray:
    """
    Exact action of k quarter turns about the origin on a periodic square grid.

    Node (i, j) moves to (-j, i) mod n, so a value at x_i, y_j lands at the rotated node.
    """
    n = values.shape[0]
    k %= 4
    if k == 0:
        return values.copy()
    jj, ii = np.indices(values.shape)
    i2, j2 = ii, jj
    for _ in range(k):
        i2, j2 = -j2, i2
    out = np.empty_like(values)
    out[j2 % n, i2 % n] = values
    return out


def roll_cells(values: np.ndarray, sx: int, sy: int) -> np.ndarray:
    """Translation by whole grid cells with periodic wrap"""
    return np.roll(values, (int(sy), int(sx)), axis=(0, 1))


def _as_cells(v: float, n: int, tol: float):
    cells = v * n
    nearest = round(cells)
    if abs(cells - nearest) <= tol * n:
        return int(nearest)
    return None


def transform_ic_ace(g: Union[AceElement, Se2Element], f: Field2D) -> Field2D:
    """
    Moves an Allen-Cahn field by a rigid motion of the periodic unit square and shifts its time

    Quarter turns combined with whole-cell translations permute the samples exactly. Any other motion is
    resampled bilinearly with periodic wrap.

    Args:
        g: AceElement, or a bare Se2Element for no time shift
        f: the field

    Returns:
        Field2D
    """
    if isinstance(g, Se2Element):
        g = AceElement(g)
    rigid = g.rigid
    n = f.nx
    tol = get_default('constraint_tol')
    turns = rigid.theta / QUARTER_TURN
    k = round(turns)
    sx, sy = _as_cells(rigid.tx, n, tol), _as_cells(rigid.ty, n, tol)
    if abs(turns - k) * QUARTER_TURN <= tol and sx is not None and sy is not None:
        values = roll_cells(rotate90(f.values, k), sx, sy)
    else:
        c, s = math.cos(rigid.theta), math.sin(rigid.theta)
        yy, xx = np.indices(f.values.shape) / n
        dx, dy = xx - rigid.tx, yy - rigid.ty
        src_x = c * dx + s * dy
        src_y = -s * dx + c * dy
        values = map_coordinates(f.values, [src_y * n, src_x * n], order=1, mode='grid-wrap')
    return Field2D(values, f.time + g.t_shift, f.periodic, f.angle + rigid.theta)


def transform_window(g: Union[HeatGroupElement, BurgersGroupElement], q: QueryWindow) -> QueryWindow:
    """
    Image of a query window under the base-space part of g

    The time window maps through t -> (alpha t + beta) / (gamma t + delta). The x window is mapped on the
    starting time slice tf_lo.
    """
    t_ends, _ = base_act(g, np.array([q.tf_lo, q.tf_hi]), np.zeros(2))
    _, x_ends = base_act(g, np.full(2, q.tf_lo), np.array([q.xf_lo, q.xf_hi]))
    return QueryWindow(float(min(x_ends)), float(max(x_ends)), float(min(t_ends)), float(max(t_ends)))


def jet_bounds(f: Field1D, q: QueryWindow = None) -> JetBounds:
    """
    Componentwise extrema of the zeroth-order jet (u, x, t) of a sampled initial condition

    Args:
        f: the field
        q: optional query window; its x and t ranges are folded into the x and t extrema

    Returns:
        JetBounds
    """
    x_min, x_max, t_min, t_max = f.x_lo, f.x_hi, f.time, f.time
    if q is not None:
        x_min, x_max = min(x_min, q.xf_lo), max(x_max, q.xf_hi)
        t_min, t_max = min(t_min, q.tf_lo), max(t_max, q.tf_hi)
    return JetBounds(float(np.min(f.values)), float(np.max(f.values)), x_min, x_max, t_min, t_max)


def gen_sine_ic(p: SineICParams, n: int = None) -> Field1D:
    """
    Sum of sines u0(x) = sum_k A_k sin(2 pi l_k x / L + phi_k) sampled on n nodes of [0, L]

    Args:
        p: sine parameters
        n: number of grid nodes including both ends

    Returns:
        periodic Field1D at time 0
    """
    n = get_default('heat_n') if n is None else n
    if n < 2:
        raise ValueError('n must be at least 2')
    x = np.linspace(0, p.length, n)
    u = np.zeros(n)
    for a, l, phi in zip(p.amps, p.freqs, p.phases):
        u += a * np.sin(2 * math.pi * l * x / p.length + phi)
    u[-1] = u[0]
    return Field1D(u, 0.0, p.length, 0.0, True)


def sample_sine_ic_params(rng: np.random.Generator, amp_range: Sequence[float] = (0.5, 5.0),
                          length: float = None) -> SineICParams:
    """A single l = 2, phi = 0 sine whose amplitude is drawn uniformly from amp_range"""
    length = get_default('heat_length') if length is None else length
    return SineICParams((float(rng.uniform(*amp_range)),), (2,), (0.0,), length)


def grf_mode_std(p: GrfParams, m: int) -> np.ndarray:
    """Standard deviation of each rfft mode 0..m//2 of a GRF on the unit periodic interval"""
    k = np.arange(m // 2 + 1)
    std = p.scale * ((2 * math.pi * k) ** 2 + p.shift ** 2) ** (-p.power / 2)
    std[0] = 0.0
    if m % 2 == 0:
        std[-1] = 0.0
    return std


def gen_grf_ic(p: GrfParams, n: int = None, seed: int = 0) -> Field1D:
    """
    Samples the Gaussian random field N(0, scale^2 (-Laplacian + shift^2 I)^-power) on the periodic unit interval

    The zero mode is excluded and mean_offset is added afterwards, so the field mean equals mean_offset up to
    rounding. Nyquist is left empty to keep the sample real.

    Args:
        p: GRF parameters
        n: number of closed-grid nodes, the period holds n - 1 samples
        seed: seed for numpy's default_rng

    Returns:
        periodic Field1D on [0, 1] at time 0
    """
    n = get_default('burgers_n') if n is None else n
    if n < 8:
        raise ValueError('n must be at least 8')
    m = n - 1
    rng = np.random.default_rng(seed)
    std = grf_mode_std(p, m)
    noise = rng.standard_normal(std.size) + 1j * rng.standard_normal(std.size)
    u = np.fft.irfft(m * std * noise / math.sqrt(2), n=m) + p.mean_offset
    return Field1D(np.append(u, u[0]), 0.0, 1.0, 0.0, True)


def gen_ace_ic(p: AceIcParams, n: int = None) -> Field2D:
    """
    sum_ij a_ij (i^2 + j^2)^-r sin(pi i {x - x0}) sin(pi j {y - y0}) on the periodic n x n grid

    {.} is the sawtooth (fractional part). With zero shifts the field vanishes on the boundary.
    """
    n = get_default('ace_n') if n is None else n
    if n < 16:
        raise ValueError('n must be at least 16')
    idx = np.arange(1, p.k + 1)
    weights = p.a_coeffs * (idx[:, None] ** 2 + idx[None, :] ** 2) ** (-p.r)
    grid = np.arange(n) / n
    sx = np.sin(math.pi * np.outer(idx, np.mod(grid - p.x0_shift, 1.0)))
    sy = np.sin(math.pi * np.outer(idx, np.mod(grid - p.y0_shift, 1.0)))
    return Field2D(sy.T @ weights.T @ sx, 0.0, True, 0.0)


def sample_ace_ic_params(rng: np.random.Generator, shifted: bool = False) -> AceIcParams:
    """K ~ U{16..32}, r ~ U[0.7, 1], a_ij ~ U[-1, 1]; shifted draws x0, y0 ~ U[0, 1]"""
    k = int(rng.integers(16, 33))
    r = float(rng.uniform(0.7, 1.0))
    a = rng.uniform(-1.0, 1.0, (k, k))
    x0, y0 = (float(v) for v in rng.uniform(0.0, 1.0, 2)) if shifted else (0.0, 0.0)
    return AceIcParams(a, r, x0, y0)


def _sidecar(path: Path) -> Path:
    return path.with_suffix('.json')


def write_field_csv(f: Union[Field1D, Field2D], path: Union[str, Path]) -> Path:
    """Writes the field as x,u or x,y,u rows plus a JSON sidecar {time, periodic, domain}"""
    path = Path(path)
    if isinstance(f, Field1D):
        df = pd.DataFrame({'x': f.grid, 'u': f.values})
        domain = [f.x_lo, f.x_hi]
        meta = {'time': f.time, 'periodic': f.periodic, 'domain': domain}
    else:
        yy, xx = np.indices(f.values.shape) / f.nx
        df = pd.DataFrame({'x': xx.ravel(), 'y': yy.ravel(), 'u': f.values.ravel()})
        meta = {'time': f.time, 'periodic': f.periodic, 'domain': [[0.0, 1.0], [0.0, 1.0]], 'angle': f.angle}
    df.to_csv(path, index=False, float_format='%.17g')
    with open(_sidecar(path), 'w') as sidecar:
        json.dump(meta, sidecar, indent=2)
    return path


def read_field_csv(path: Union[str, Path]) -> Union[Field1D, Field2D]:
    path = Path(path)
    df = pd.read_csv(path)
    with open(_sidecar(path)) as sidecar:
        meta = json.load(sidecar)
    if 'y' in df.columns:
        n = int(round(math.sqrt(len(df))))
        return Field2D(df['u'].to_numpy().reshape(n, n), meta['time'], meta['periodic'], meta.get('angle', 0.0))
    x_lo, x_hi = meta['domain']
    return Field1D(df['u'].to_numpy(), x_lo, x_hi, meta['time'], meta['periodic'])


def fields_to_dataset(fields: List[Field1D], return_format: str = 'xarray') -> Union[xr.Dataset, pd.DataFrame]:
    """
    Stacks solution snapshots that share a grid

    Args:
        fields: Field1D snapshots on a common grid
        return_format: 'xarray' for a Dataset with dims (time, x), 'df' for a long DataFrame with columns time, x, u

    Returns:
        xarray.Dataset or pandas.DataFrame
    """
    assert return_format in ('xarray', 'df'), f'Unsupported return format requested: {return_format}'
    if not fields:
        raise ValueError('No fields to stack')
    grid = fields[0].grid
    if any(f.n != grid.size or f.x_lo != fields[0].x_lo or f.x_hi != fields[0].x_hi for f in fields):
        raise ValueError('All fields must share a grid')
    ds = xr.Dataset(
        {'u': (('time', 'x'), np.stack([f.values for f in fields]))},
        coords={'time': [f.time for f in fields], 'x': grid},
    )
    if return_format == 'xarray':
        return ds
    return ds.to_dataframe().reset_index()
