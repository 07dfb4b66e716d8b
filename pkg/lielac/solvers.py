"""
Classical periodic solvers for the heat, viscous Burgers and Allen-Cahn equations, and finite-difference residual
checks.

Every solver returns one field per requested time. A requested time equal to the IC time returns the IC values
unchanged.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ._constants import get_default
from ._errors import NonZeroMean, NotPeriodic, UnstableStep
from .fields import Field1D, Field2D

__all__ = [
    'HeatConfig',
    'AceConfig',
    'heat_spectral_solve',
    'burgers_solve',
    'burgers_rk4_solve',
    'ace_solve',
    'pde_residual',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeatConfig:
    nu: float = None
    n_modes: Optional[int] = None

    def __post_init__(self):
        if self.nu is None:
            object.__setattr__(self, 'nu', get_default('heat_nu'))
        if self.nu <= 0:
            raise ValueError('nu must be positive')
        if self.n_modes is not None and self.n_modes < 0:
            raise ValueError('n_modes must be nonnegative')


@dataclass(frozen=True)
class AceConfig:
    epsilon: float = None
    dt: float = None
    n_steps: int = 100

    def __post_init__(self):
        if self.epsilon is None:
            object.__setattr__(self, 'epsilon', get_default('ace_epsilon'))
        if self.dt is None:
            object.__setattr__(self, 'dt', get_default('ace_dt'))
        if self.n_steps < 0:
            raise ValueError('n_steps must be nonnegative')


def _as_times(times) -> np.ndarray:
    return np.atleast_1d(np.asarray(times, dtype=float))


def _check_periodic(ic):
    if not ic.periodic:
        raise NotPeriodic('The solvers require a periodic initial condition')


def _wavenumbers(m: int, length: float) -> np.ndarray:
    return 2 * math.pi / length * np.arange(m // 2 + 1)


def _closed(u: np.ndarray) -> np.ndarray:
    return np.append(u, u[0])


def _check_forward(tau: float):
    if tau < 0:
        raise ValueError('Requested time lies before the initial condition')


def heat_spectral_solve(ic: Field1D, cfg: HeatConfig = None, times: Sequence[float] = (1.0,)) -> List[Field1D]:
    """
    Exact Fourier-mode decay exp(-nu k^2 t) of a periodic heat initial condition

    Args:
        ic: periodic initial condition
        cfg: diffusivity and optional truncation to the first n_modes modes
        times: absolute output times, not before ic.time

    Returns:
        list of Field1D

    Raises:
        NotPeriodic: if ic is not periodic
    """
    cfg = HeatConfig() if cfg is None else cfg
    _check_periodic(ic)
    m = ic.n - 1
    k = _wavenumbers(m, ic.length)
    coeffs = np.fft.rfft(ic.periodic_values)
    if cfg.n_modes is not None:
        coeffs[cfg.n_modes + 1:] = 0.0
    out = []
    for t in _as_times(times):
        tau = t - ic.time
        _check_forward(tau)
        if tau == 0 and cfg.n_modes is None:
            out.append(Field1D(ic.values, ic.x_lo, ic.x_hi, t, True))
            continue
        u = np.fft.irfft(coeffs * np.exp(-cfg.nu * k ** 2 * tau), n=m)
        out.append(Field1D(_closed(u), ic.x_lo, ic.x_hi, t, True))
    return out


def _galilean_shift(u: np.ndarray, k: np.ndarray, speed: float, tau: float) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(u) * np.exp(-1j * k * speed * tau), n=u.size)


def burgers_solve(ic: Field1D, nu: float = None, times: Sequence[float] = (1.0,)) -> List[Field1D]:
    """
    Solves u_t + u u_x = nu u_xx on a periodic domain with the Cole-Hopf transform

    u = -2 nu phi_x / phi turns the equation into the heat equation for phi, which is solved exactly in Fourier
    space. Any residual mean below the tolerance is carried by an exact Galilean shift.

    Args:
        ic: periodic, zero-mean initial condition
        nu: viscosity, burgers_nu by default
        times: absolute output times, not before ic.time

    Returns:
        list of Field1D

    Raises:
        NotPeriodic: if ic is not periodic
        NonZeroMean: if |mean(u0)| exceeds burgers_mean_tol * max(1, max|u0|)
    """
    nu = get_default('burgers_nu') if nu is None else nu
    _check_periodic(ic)
    u0 = ic.periodic_values
    mean = float(np.mean(u0))
    if abs(mean) > get_default('burgers_mean_tol') * max(1.0, float(np.max(np.abs(u0)))):
        raise NonZeroMean(f'Cole-Hopf needs a zero-mean initial condition, got mean {mean}')
    m = u0.size
    k = _wavenumbers(m, ic.length)
    ik = 1j * k
    u_hat = np.fft.rfft(u0 - mean)
    antiderivative_hat = np.zeros_like(u_hat)
    antiderivative_hat[1:] = u_hat[1:] / ik[1:]
    psi = -np.fft.irfft(antiderivative_hat, n=m) / (2 * nu)
    phi_hat = np.fft.rfft(np.exp(psi - np.max(psi)))

    out = []
    for t in _as_times(times):
        tau = t - ic.time
        _check_forward(tau)
        if tau == 0:
            out.append(Field1D(ic.values, ic.x_lo, ic.x_hi, t, True))
            continue
        decayed = phi_hat * np.exp(-nu * k ** 2 * tau)
        u = -2 * nu * np.fft.irfft(ik * decayed, n=m) / np.fft.irfft(decayed, n=m)
        if mean != 0:
            u = _galilean_shift(u, k, mean, tau) + mean
        out.append(Field1D(_closed(u), ic.x_lo, ic.x_hi, t, True))
    return out


def burgers_rk4_solve(ic: Field1D, nu: float = None, times: Sequence[float] = (1.0,),
                      dt: float = None) -> List[Field1D]:
    """
    Pseudo-spectral integrating-factor RK4 for viscous Burgers, any mean

    The nonlinearity is taken in conservative form -(ik / 2) FFT(u^2) with 2/3 dealiasing. The step is adjusted
    so that every output interval holds a whole number of steps.
    """
    nu = get_default('burgers_nu') if nu is None else nu
    dt = get_default('burgers_rk4_dt') if dt is None else dt
    if dt <= 0:
        raise UnstableStep('dt must be positive')
    _check_periodic(ic)
    m = ic.n - 1
    k = _wavenumbers(m, ic.length)
    dealias = np.arange(k.size) <= m / 3

    def nonlinear(v_hat):
        u = np.fft.irfft(v_hat, n=m)
        return -0.5j * k * np.fft.rfft(u * u) * dealias

    times = _as_times(times)
    order = np.argsort(times, kind='stable')
    u_hat = np.fft.rfft(ic.periodic_values)
    current = ic.time
    results = {}
    for idx in order:
        t = times[idx]
        interval = t - current
        _check_forward(interval)
        if t == ic.time:
            results[idx] = Field1D(ic.values, ic.x_lo, ic.x_hi, t, True)
            continue
        n_steps = max(1, math.ceil(interval / dt - 1e-9)) if interval > 0 else 0
        if n_steps:
            h = interval / n_steps
            e_full = np.exp(-nu * k ** 2 * h)
            e_half = np.exp(-nu * k ** 2 * h / 2)
            for _ in range(n_steps):
                a = nonlinear(u_hat)
                b = nonlinear(e_half * (u_hat + h / 2 * a))
                c = nonlinear(e_half * u_hat + h / 2 * b)
                d = nonlinear(e_full * u_hat + h * e_half * c)
                u_hat = e_full * u_hat + h / 6 * (e_full * a + 2 * e_half * (b + c) + d)
        current = t
        results[idx] = Field1D(_closed(np.fft.irfft(u_hat, n=m)), ic.x_lo, ic.x_hi, t, True)
        logger.debug(f'burgers_rk4_solve reached t={t} after {n_steps} steps')
    return [results[i] for i in range(times.size)]


def _reaction(u: np.ndarray, a: float) -> np.ndarray:
    # exact flow of u' = eps^2 u (1 - u^2) over eps^2 * tau = a
    growth = math.exp(a)
    return u * growth / np.sqrt(1 + u * u * (growth * growth - 1))


def ace_solve(ic: Field2D, cfg: AceConfig = None, times: Sequence[float] = None) -> List[Field2D]:
    """
    Strang splitting for u_t = u_xx + u_yy - eps^2 u (u^2 - 1) on the periodic unit square

    Half a reaction step, an exact spectral diffusion step, and another half reaction step. Both substeps are
    exact, so u = -1, 0, 1 stay fixed.

    Args:
        ic: periodic initial condition
        cfg: reaction coefficient eps, step dt and the default number of steps
        times: absolute output times, by default ic.time + dt * n_steps

    Returns:
        list of Field2D

    Raises:
        UnstableStep: if dt <= 0 or eps^2 dt exceeds ace_max_reaction_step
    """
    cfg = AceConfig() if cfg is None else cfg
    _check_periodic(ic)
    if cfg.dt <= 0 or cfg.epsilon ** 2 * cfg.dt > get_default('ace_max_reaction_step'):
        raise UnstableStep(f'dt={cfg.dt} is unstable for epsilon={cfg.epsilon}')
    if times is None:
        times = [ic.time + cfg.dt * cfg.n_steps]
    times = _as_times(times)

    n = ic.nx
    ky = 2 * math.pi * np.fft.fftfreq(n, d=1.0 / n)
    kx = 2 * math.pi * np.fft.rfftfreq(n, d=1.0 / n)
    k2 = ky[:, None] ** 2 + kx[None, :] ** 2
    eps2 = cfg.epsilon ** 2

    order = np.argsort(times, kind='stable')
    u = np.array(ic.values)
    current = ic.time
    results = {}
    for idx in order:
        t = times[idx]
        interval = t - current
        _check_forward(interval)
        if t == ic.time:
            results[idx] = Field2D(ic.values, t, ic.periodic, ic.angle)
            continue
        n_steps = math.ceil(interval / cfg.dt - 1e-9) if interval > 0 else 0
        if n_steps:
            h = interval / n_steps
            diffusion = np.exp(-k2 * h)
            half = eps2 * h / 2
            for _ in range(n_steps):
                u = _reaction(u, half)
                u = np.fft.irfft2(np.fft.rfft2(u) * diffusion, s=u.shape)
                u = _reaction(u, half)
        current = t
        results[idx] = Field2D(u, t, ic.periodic, ic.angle)
    return [results[i] for i in range(times.size)]


def pde_residual(kind: str, u: Union[Callable, np.ndarray], nu: float, t: np.ndarray = None, x: np.ndarray = None,
                 dt: float = 1e-3, dx: float = 1e-3) -> float:
    """
    Maximum central-difference residual of the heat or Burgers equation

    heat: u_t - nu u_xx, burgers: u_t + u u_x - nu u_xx

    Args:
        kind: 'heat' or 'burgers'
        u: a function u(t, x) accepting numpy arrays, or a (n_t, n_x) array sampled with spacings dt and dx
        nu: diffusivity or viscosity
        t: evaluation times when u is a function
        x: evaluation positions when u is a function
        dt: time step of the differences
        dx: space step of the differences

    Returns:
        float, the maximum absolute residual over the interior nodes
    """
    assert kind in ('heat', 'burgers'), f'Unsupported PDE kind: {kind}'
    if callable(u):
        tt, xx = np.meshgrid(np.asarray(t, dtype=float), np.asarray(x, dtype=float), indexing='ij')
        centre = u(tt, xx)
        u_t = (u(tt + dt, xx) - u(tt - dt, xx)) / (2 * dt)
        right, left = u(tt, xx + dx), u(tt, xx - dx)
    else:
        stack = np.asarray(u, dtype=float)
        centre = stack[1:-1, 1:-1]
        u_t = (stack[2:, 1:-1] - stack[:-2, 1:-1]) / (2 * dt)
        right, left = stack[1:-1, 2:], stack[1:-1, :-2]
    u_xx = (right - 2 * centre + left) / dx ** 2
    residual = u_t - nu * u_xx
    if kind == 'burgers':
        residual = residual + centre * (right - left) / (2 * dx)
    return float(np.max(np.abs(residual)))
