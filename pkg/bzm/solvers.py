"""
Time stepping and elliptic solvers of the zero-Mach system

- Heat semigroup, per-block decay and the heat smallness time
- Linear transport-diffusion density step (integrating-factor RK2,
  or Crank-Nicolson with an iterated explicit remainder)
- Variable-coefficient pressure solve with preconditioned conjugate gradients
- Velocity transport step with pressure and Leray projection
- evolve: the coupled nonlinear stepper
- picard_driver: the iteration of linear systems with frozen coefficients

"""

import time
import inspect
import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd
from pandas import DataFrame
from scipy.sparse.linalg import LinearOperator, cg
from typing import Optional, Union, Callable, Dict, List, Tuple

from bzm.spectral import Field, check_same_grid, gradient, divergence, leray_project, \
    dealiased_product, advect, low_pass
from bzm.besov import Trajectory, lebesgue_norm, block_norms, block_weights, chemin_lerner_norm
from bzm.model import FlowState
from bzm.parameter import BesovParams, PhysicalParams, MonitorConfig
from bzm.monitor import ContinuationMonitor
from bzm.utils import Array, time_lq, cumulative_trapezoid, lr_sum
from bzm.errors import NegativeTimeError, CFLViolation, KappaDegenerateError, LambdaDegenerateError, \
    PressureNonconvergence, DensityBoundViolation, NonSolenoidalError, ComponentMismatchError, DomainViolation

logger = logging.getLogger(__name__)

cfl_limit = 0.9
density_schemes = ['imex', 'fully_spectral_picard']
"""list: Time discretizations accepted by density_step"""

FieldOrCallable = Union[Field, Callable[[float], Field], None]


def _at(x: FieldOrCallable, t: float) -> Optional[Field]:
    return x(t) if callable(x) else x


#%% Heat semigroup
def heat_semigroup(f: Field, t: float) -> Field:
    """e^{t Lap} f, the multiplier exp(-t |xi|^2)

    Raises
    ------
    NegativeTimeError
        t < 0
    """
    if t < 0:
        raise NegativeTimeError('Heat semigroup needs t >= 0, got {}'.format(t))
    if t == 0:
        return f
    return f.apply(np.exp(-t * f.grid.k_norm**2))


def _block_l2(f: Field) -> Array:
    # components combined in l^2, one entry per block
    return np.sqrt(np.sum(block_norms(f, 2)**2, axis=0))


def heat_block_decay(f: Field, times: List[float]) -> DataFrame:
    """Measured constants c_j with |e^{t Lap} Delta_j f|_2 = e^{-c_j t 2^{2j}} |Delta_j f|_2

    Returns
    -------
    DataFrame
        One row per block j >= 0 with the smallest and largest constant
        over the positive times; empty blocks are marked degenerate
    """
    times = np.array([t for t in times if t > 0], dtype=float)
    if times.size == 0:
        raise ValueError('heat_block_decay needs at least one positive time')
    grid = f.grid
    base = _block_l2(f)
    scale = np.max(base)
    decayed = np.stack([_block_l2(heat_semigroup(f, t)) for t in times])
    rows = []
    for jj in range(1, grid.n_blocks):
        j = jj - 1
        if base[jj] <= 1e-12 * scale or np.min(decayed[:, jj]) <= 0.0:
            rows.append({'j': j, 'c_min': np.nan, 'c_max': np.nan, 'degenerate': True})
            continue
        c = -np.log(decayed[:, jj] / base[jj]) / (times * 4.0**j)
        rows.append({'j': j, 'c_min': float(np.min(c)), 'c_max': float(np.max(c)), 'degenerate': False})
    return pd.DataFrame(rows)


@dataclass
class HeatSmallness:
    """Largest sample time where the heat flow is below tau^2 in both norms"""
    T_star: float
    tau: float
    reached: bool
    achieved: float
    times: Array = field(repr=False, default=None)
    norm_l2: Array = field(repr=False, default=None)
    norm_l1: Array = field(repr=False, default=None)


def heat_smallness_time(
    rho0: Field,
    tau: float,
    params: BesovParams,
    horizon: Optional[float] = 1.0,
    n_times: Optional[int] = 257,
) -> HeatSmallness:
    """Time budget of the heat flow of rho0

    The Chemin-Lerner norms in L~^2_T(B^{s+1}_{p,r}) and L~^1_T(B^{s+2}_{p,r})
    grow with T; T_star is the largest sample time where both are <= tau^2,
    located by bisection on the nondecreasing prefix norms.

    Both norms vanish at T = 0, so the smallest such time would always be 0.
    The largest one is the usable budget: zero data give the whole horizon
    rather than T_star = 0, and T_star grows with tau instead of decreasing.

    Parameters
    ----------
    rho0 : Field
        Initial density perturbation
    tau : float
        Positive smallness parameter
    params : BesovParams
        Space B^s_{p,r}
    horizon : Optional[float], optional
        Last sample time, by default 1.0
    n_times : Optional[int], optional
        Number of uniform sample times, by default 257

    Returns
    -------
    HeatSmallness
        T_star with the prefix norm histories; reached is False when already
        the first positive sample exceeds tau^2, achieved is then its norm

    Raises
    ------
    DomainViolation
        tau <= 0
    """
    if not tau > 0:
        raise DomainViolation('tau must be positive, got {}'.format(tau))
    grid = rho0.grid
    times = np.linspace(0.0, horizon, n_times)
    history = np.stack([block_norms(heat_semigroup(rho0, t), params.p) for t in times])
    w2 = block_weights(grid, params.s + 1)
    w1 = block_weights(grid, params.s + 2)
    # prefix time integrals per block
    prefix2 = np.sqrt(np.apply_along_axis(cumulative_trapezoid, 0, history**2, times))
    prefix1 = np.apply_along_axis(cumulative_trapezoid, 0, history, times)
    norm_l2 = np.array([lr_sum(p2 * w2[None], params.r) for p2 in prefix2])
    norm_l1 = np.array([lr_sum(p1 * w1[None], params.r) for p1 in prefix1])
    combined = np.maximum.accumulate(np.maximum(norm_l2, norm_l1))
    target = tau**2
    index = int(np.searchsorted(combined, target, side='right')) - 1
    if index <= 0 and combined[-1] > 0:
        logger.warning('Heat flow exceeds tau^2 = %.3g already at t = %.3g', target, times[1])
        return HeatSmallness(0.0, tau, False, float(combined[1]), times, norm_l2, norm_l1)
    return HeatSmallness(float(times[index]), tau, True, float(combined[index]), times, norm_l2, norm_l1)


#%% Stability checks
def cfl_number(dt: float, *drifts: Field) -> float:
    """dt sum_i max|w_i| / dx, the largest over the drifts"""
    numbers = [0.0]
    for w in drifts:
        if w is None:
            continue
        dx = w.grid.period / w.grid.N
        numbers.append(dt * float(np.sum(np.max(np.abs(w.samples), axis=w.grid.axes))) / dx)
    return max(numbers)


def check_cfl(dt: float, *drifts: Field):
    """Raise CFLViolation above the advective limit"""
    number = cfl_number(dt, *drifts)
    if number > cfl_limit:
        raise CFLViolation('Advective CFL number {:.3f} exceeds {}'.format(number, cfl_limit),
                           {'cfl': number, 'dt': dt, 'limit': cfl_limit})


def _check_kappa(kappa: Field, kappa_min: float):
    low = float(np.min(kappa.samples))
    if low <= kappa_min:
        raise KappaDegenerateError('Conductivity minimum {:.3e} is not above {:.3e}'.format(low, kappa_min),
                                   {'kappa_min': low})


def _check_drift(w: Field, tol: float = 1e-8):
    div = lebesgue_norm(divergence(w), np.inf)
    if div > tol:
        raise NonSolenoidalError('Drift divergence {:.3e} exceeds {:.0e}'.format(div, tol))


#%% Density equation
def density_rate(rho: Field, drift: Field, kappa: Field, kappa_bar: float, forcing: Optional[Field] = None) -> Field:
    """Explicit part -u . grad rho + div((kappa - kappa_bar) grad rho) + f"""
    rate = divergence(dealiased_product(kappa - kappa_bar, gradient(rho)))
    if drift is not None:
        rate = rate - advect(drift, rho)
    if forcing is not None:
        rate = rate + forcing
    return rate


def density_step(
    rho_in: Field,
    u_drift: FieldOrCallable,
    kappa: FieldOrCallable,
    f: FieldOrCallable = None,
    dt: float = 1e-2,
    scheme: Optional[str] = 'imex',
    t: Optional[float] = 0.0,
    kappa_min: Optional[float] = 0.0,
) -> Field:
    """One step of d_t rho + u . grad rho - div(kappa grad rho) = f

    The mean diffusion kappa_bar Lap is integrated exactly, the remainder and
    the transport explicitly. Coefficients and forcing may be Fields or
    functions of time.

    Parameters
    ----------
    rho_in : Field
        Density at time t
    u_drift : FieldOrCallable
        Divergence-free drift
    kappa : FieldOrCallable
        Conductivity, bounded below by kappa_min
    f : FieldOrCallable, optional
        Forcing, by default None
    dt : float
        Step size
    scheme : Optional[str], optional
        imex (integrating-factor Heun) or fully_spectral_picard
        (Crank-Nicolson with the explicit remainder iterated to a fixed point),
        by default 'imex'
    t : Optional[float], optional
        Current time, by default 0.0
    kappa_min : Optional[float], optional
        Lower bound of kappa, by default 0.0

    Returns
    -------
    Field
        Density at t + dt

    Raises
    ------
    KappaDegenerateError
        kappa not above kappa_min
    CFLViolation
        Advective CFL number above 0.9
    NonSolenoidalError
        Drift divergence above 1e-8
    """
    if scheme not in density_schemes:
        raise ValueError('scheme must be one of {}, got {}'.format(density_schemes, scheme))
    grid = rho_in.grid
    kappa0, drift0 = _at(kappa, t), _at(u_drift, t)
    kappa1, drift1 = _at(kappa, t + dt), _at(u_drift, t + dt)
    for k in (kappa0, kappa1):
        _check_kappa(k, kappa_min)
    for w in (drift0, drift1):
        if w is not None:
            _check_drift(w)
    check_cfl(dt, drift0, drift1)
    kappa_bar = float(kappa0.mean()[0])
    rate0 = density_rate(rho_in, drift0, kappa0, kappa_bar, _at(f, t))

    if scheme == 'imex':
        E = np.exp(-kappa_bar * grid.k_norm**2 * dt)
        rho_star = (rho_in + dt * rate0).apply(E)
        rate1 = density_rate(rho_star, drift1, kappa1, kappa_bar, _at(f, t + dt))
        rho_out = 0.5 * rho_in.apply(E) + 0.5 * (rho_star + dt * rate1)
    else:
        rho_out = _crank_nicolson_fixed_point(rho_in, rate0, drift1, kappa1, kappa_bar, _at(f, t + dt), dt)

    if f is None:
        lo, hi = np.min(rho_in.samples), np.max(rho_in.samples)
        slack = 1e-6 * dt
        if np.min(rho_out.samples) < lo - slack or np.max(rho_out.samples) > hi + slack:
            logger.warning('Density step leaves [%.6g, %.6g]: got [%.6g, %.6g]', lo, hi,
                           np.min(rho_out.samples), np.max(rho_out.samples))
    return rho_out


def _crank_nicolson_fixed_point(rho, rate0, drift1, kappa1, kappa_bar, f1, dt, tol=1e-12, max_sweeps=50) -> Field:
    symbol = -kappa_bar * rho.grid.k_norm**2
    explicit = (1.0 + 0.5 * dt * symbol) * rho.coeffs + 0.5 * dt * rate0.coeffs
    implicit = 1.0 / (1.0 - 0.5 * dt * symbol)
    current = rho
    scale = max(1.0, float(np.max(np.abs(rho.samples))))
    for sweep in range(max_sweeps):
        rate1 = density_rate(current, drift1, kappa1, kappa_bar, f1)
        new = Field(rho.grid, coeffs=(explicit + 0.5 * dt * rate1.coeffs) * implicit)
        change = float(np.max(np.abs(new.samples - current.samples)))
        current = new
        if change <= tol * scale:
            logger.debug('Crank-Nicolson remainder converged after %d sweeps', sweep + 1)
            return current
    logger.warning('Crank-Nicolson remainder not converged after %d sweeps, last change %.3e', max_sweeps, change)
    return current


#%% Pressure
# the relative tolerance keyword of cg was renamed in scipy 1.12
_cg_tol = 'rtol' if 'rtol' in inspect.signature(cg).parameters else 'tol'


def pressure_solve(
    lam: Field,
    F: Field,
    tol: Optional[float] = 1e-12,
    maxiter: Optional[int] = 500,
    lambda_min: Optional[float] = 0.0,
    check_tol: Optional[float] = 1e-10,
) -> Dict[str, Union[Field, int, float, bool]]:
    """Solve div(lambda grad pi) = div F

    Conjugate gradients on -div(lambda grad .) with the exact inverse of
    the Laplacian as preconditioner; the mean of pi is pinned to 0.

    Parameters
    ----------
    lam : Field
        Positive scalar coefficient
    F : Field
        Vector field
    tol : Optional[float], optional
        Relative tolerance of the Krylov iteration, by default 1e-12
    maxiter : Optional[int], optional
        Iteration cap, by default 500
    lambda_min : Optional[float], optional
        lam must exceed this bound, by default 0.0
    check_tol : Optional[float], optional
        Accepted relative residual |div(lambda grad pi) - div F| / |div F|,
        by default 1e-10

    Returns
    -------
    Dict[str, Union[Field, int, float, bool]]
        grad_pi, pi, iterations, residual (relative) and energy_ok, the check
        min(lambda) |grad pi|_2 <= (1 + 1e-8) |F|_2

    Raises
    ------
    LambdaDegenerateError
        lam not above lambda_min
    PressureNonconvergence
        Relative residual above check_tol
    """
    grid = check_same_grid(lam, F)
    if not F.is_vector:
        raise ComponentMismatchError('Pressure solve needs a vector right-hand side')
    lam_min = float(np.min(lam.samples))
    if lam_min <= lambda_min:
        raise LambdaDegenerateError('lambda minimum {:.3e} is not above {:.3e}'.format(lam_min, lambda_min),
                                    {'lambda_min': lam_min})
    shape = grid.shape
    n = int(np.prod(shape))
    b = -divergence(F).samples[0].ravel()
    norm_b = np.linalg.norm(b)
    if norm_b <= 1e-300:
        zero = Field.zeros(grid, grid.d)
        return {'grad_pi': zero, 'pi': Field.zeros(grid), 'iterations': 0, 'residual': 0.0, 'energy_ok': True}

    inv_k2 = np.divide(1.0, grid.k2_deriv, out=np.zeros(shape), where=grid.k2_deriv > 0)

    def matvec(x):
        pi = Field(grid, samples=np.reshape(x, shape))
        return -divergence(lam * gradient(pi)).samples[0].ravel()

    def precondition(x):
        return Field(grid, samples=np.reshape(x, shape)).apply(inv_k2).samples[0].ravel()

    A = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    M = LinearOperator((n, n), matvec=precondition, dtype=np.float64)
    iterations = [0]

    def count(xk):
        iterations[0] += 1

    x, info = cg(A, b, M=M, maxiter=maxiter, callback=count, atol=0.0, **{_cg_tol: tol})
    residual = float(np.linalg.norm(matvec(x) - b) / norm_b)
    if residual > check_tol:
        raise PressureNonconvergence('Pressure solve residual {:.3e} after {} iterations'.format(residual, iterations[0]),
                                     {'residual': residual, 'iterations': iterations[0], 'info': int(info)})
    pi = Field(grid, samples=np.reshape(x - np.mean(x), shape))
    grad_pi = gradient(pi)
    energy_ok = lam_min * lebesgue_norm(grad_pi, 2) <= (1.0 + 1e-8) * lebesgue_norm(F, 2)
    if not energy_ok:
        logger.warning('Pressure energy bound violated: %.6g > %.6g', lam_min * lebesgue_norm(grad_pi, 2), lebesgue_norm(F, 2))
    logger.debug('Pressure solve: %d iterations, residual %.3e', iterations[0], residual)
    return {'grad_pi': grad_pi, 'pi': pi, 'iterations': iterations[0], 'residual': residual, 'energy_ok': bool(energy_ok)}


#%% Velocity equation
def velocity_rate(
    u: Field,
    drift: Optional[Field],
    lam: Field,
    h: Optional[Field],
    forcing: Optional[Field] = None,
    **pressure_kwargs,
) -> Tuple[Field, dict]:
    """Rate G - lambda grad pi with G = h + f - (w . grad) u and div(G - lambda grad pi) = 0"""
    G = Field.zeros(u.grid, u.n_components)
    if h is not None:
        G = G + h
    if forcing is not None:
        G = G + forcing
    if drift is not None:
        G = G - advect(drift, u)
    pressure = pressure_solve(lam, G, **pressure_kwargs)
    return G - lam * pressure['grad_pi'], pressure


def velocity_step(
    u_in: Field,
    drift: FieldOrCallable,
    lam: FieldOrCallable,
    h: FieldOrCallable,
    dt: float,
    forcing: FieldOrCallable = None,
    t: Optional[float] = 0.0,
    **pressure_kwargs,
) -> Dict[str, Union[Field, int]]:
    """One Heun step of d_t u + w . grad u + lambda grad pi = h + f, div u = 0

    Each stage solves for the pressure and ends with a Leray projection.

    Parameters
    ----------
    u_in : Field
        Divergence-free velocity at time t
    drift : FieldOrCallable
        Transport field w
    lam : FieldOrCallable
        Specific volume lambda
    h : FieldOrCallable
        Source term
    dt : float
        Step size
    forcing : FieldOrCallable, optional
        Extra forcing, by default None
    t : Optional[float], optional
        Current time, by default 0.0

    Returns
    -------
    Dict[str, Union[Field, int]]
        u_out, grad_pi at time t and the total pressure iterations

    Raises
    ------
    NonSolenoidalError
        div u_in above 1e-8
    CFLViolation
        Advective CFL number above 0.9
    PressureNonconvergence
        From pressure_solve
    """
    div = lebesgue_norm(divergence(u_in), np.inf)
    if div > 1e-8:
        raise NonSolenoidalError('Velocity divergence {:.3e} exceeds 1e-08'.format(div))
    drift0, drift1 = _at(drift, t), _at(drift, t + dt)
    check_cfl(dt, drift0, drift1)
    rate0, pressure0 = velocity_rate(u_in, drift0, _at(lam, t), _at(h, t), _at(forcing, t), **pressure_kwargs)
    u_star = leray_project(u_in + dt * rate0)
    rate1, pressure1 = velocity_rate(u_star, drift1, _at(lam, t + dt), _at(h, t + dt), _at(forcing, t + dt), **pressure_kwargs)
    u_out = leray_project(0.5 * u_in + 0.5 * (u_star + dt * rate1))
    return {'u_out': u_out, 'grad_pi': pressure0['grad_pi'],
            'iterations': pressure0['iterations'] + pressure1['iterations']}


#%% Coupled stepping
def frozen_coefficients(rho: Field, u: Field, params: PhysicalParams) -> Dict[str, Union[Field, float]]:
    """Coefficients of the linear system at one instant

    Returns
    -------
    Dict[str, Union[Field, float]]
        drift_rho = u, kappa, kappa_bar, lambda, drift_u = u + grad b,
        h, b and the state itself
    """
    state = FlowState(rho, u, params=params)
    return {'drift_rho': u, 'kappa': state.kappa, 'kappa_bar': float(state.kappa.mean()[0]),
            'lambda': state.lam, 'drift_u': state.v, 'h': state.h, 'b': state.b, 'state': state}


def _stage_rates(rho, u, coeffs, kappa_bar, forcing, t, pressure_kwargs):
    f_rho = _at(forcing.get('rho'), t) if forcing else None
    f_u = _at(forcing.get('u'), t) if forcing else None
    r_rho = density_rate(rho, coeffs['drift_rho'], coeffs['kappa'], kappa_bar, f_rho)
    r_u, pressure = velocity_rate(u, coeffs['drift_u'], coeffs['lambda'], coeffs['h'], f_u, **pressure_kwargs)
    return r_rho, r_u, pressure


def _heun_predict(rho, u, rates, E, dt):
    r_rho, r_u, _ = rates
    return (rho + dt * r_rho).apply(E), leray_project(u + dt * r_u)


def _heun_correct(rho, u, rho_star, u_star, rates_star, E, dt):
    r_rho, r_u, _ = rates_star
    rho_new = 0.5 * rho.apply(E) + 0.5 * (rho_star + dt * r_rho)
    u_new = leray_project(0.5 * u + 0.5 * (u_star + dt * r_u))
    return rho_new, u_new


def _step_count(T: float, dt: float) -> Tuple[int, float]:
    if not T > 0 or not dt > 0:
        raise DomainViolation('T and dt must be positive, got T = {}, dt = {}'.format(T, dt))
    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    return n_steps, T / n_steps


def _check_bounds(rho: Field, bounds: Tuple[float, float], t: float):
    lo, hi = float(np.min(rho.samples)), float(np.max(rho.samples))
    if lo < bounds[0] or hi > bounds[1]:
        raise DensityBoundViolation('Density range [{:.8g}, {:.8g}] leaves [{:.8g}, {:.8g}] at t = {:.6g}'.format(
            lo, hi, bounds[0], bounds[1], t), {'t': t, 'rho_min': lo, 'rho_max': hi,
                                               'lower': bounds[0], 'upper': bounds[1]})


def evolve(
    rho0: Field,
    u0: Field,
    params: Optional[PhysicalParams] = None,
    T: Optional[float] = 1.0,
    dt: Optional[float] = 1e-2,
    monitor: Optional[MonitorConfig] = None,
    forcing: Optional[Dict[str, FieldOrCallable]] = None,
    stride: Optional[int] = None,
    **pressure_kwargs,
) -> Trajectory:
    """Integrate the nonlinear system over [0, T]

    Each step is an integrating-factor Heun step of the coupled system:
    the predictor uses the coefficients of the current state, the corrector
    those of the predicted state.

    Parameters
    ----------
    rho0 : Field
        Initial density, positive
    u0 : Field
        Initial divergence-free velocity
    params : Optional[PhysicalParams], optional
        Gas constants and conductivity law, by default PhysicalParams()
    T : Optional[float], optional
        Final time, by default 1.0
    dt : Optional[float], optional
        Step size, shortened so that it divides T, by default 1e-2
    monitor : Optional[MonitorConfig], optional
        Continuation monitor settings, by default MonitorConfig()
    forcing : Optional[Dict[str, FieldOrCallable]], optional
        Forcings of the density ('rho') and velocity ('u') equations, by default None
    stride : Optional[int], optional
        Steps between stored samples, by default monitor.stride

    Returns
    -------
    Trajectory
        Channels rho, u, grad_pi with the monitor quantities; flags
        continuation_triggered and trigger_quantity

    Raises
    ------
    DensityBoundViolation
        Unforced density leaves its initial range by more than max_principle_tol
    CFLViolation
        Advective CFL number above 0.9
    PressureNonconvergence
        From pressure_solve
    """
    params = params if params is not None else PhysicalParams()
    cfg = monitor if monitor is not None else MonitorConfig()
    stride = stride if stride is not None else cfg.stride
    n_steps, dt = _step_count(T, dt)
    grid = check_same_grid(rho0, u0)
    traj = Trajectory(grid, {'params': params, 'T': T, 'dt': dt, 'n_steps': n_steps, 'stride': stride})
    traj.flags['continuation_triggered'] = False
    watcher = ContinuationMonitor(grid, cfg, params)
    bounds = None
    if not forcing or forcing.get('rho') is None:
        tol = cfg.max_principle_tol
        bounds = (float(np.min(rho0.samples)) - tol, float(np.max(rho0.samples)) + tol)

    rho, u = rho0, u0
    start = time.time()
    for k in range(n_steps + 1):
        t = k * dt
        coeffs = frozen_coefficients(rho, u, params)
        kappa_bar = coeffs['kappa_bar']
        rates = _stage_rates(rho, u, coeffs, kappa_bar, forcing, t, pressure_kwargs)
        if k % stride == 0 or k == n_steps:
            traj.append(t, rho=rho, u=u, grad_pi=rates[2]['grad_pi'])
            traj.record(**watcher.update(t, coeffs['state'], rates[2]['grad_pi']))
            if watcher.triggered is not None:
                traj.flags['continuation_triggered'] = True
                traj.flags['trigger_quantity'] = watcher.triggered
                logger.info('Continuation criterion triggered by %s at t = %.6g', watcher.triggered, t)
                break
        if k == n_steps:
            break
        check_cfl(dt, coeffs['drift_rho'], coeffs['drift_u'])
        E = np.exp(-kappa_bar * grid.k_norm**2 * dt)
        rho_star, u_star = _heun_predict(rho, u, rates, E, dt)
        coeffs_star = frozen_coefficients(rho_star, u_star, params)
        rates_star = _stage_rates(rho_star, u_star, coeffs_star, kappa_bar, forcing, t + dt, pressure_kwargs)
        rho, u = _heun_correct(rho, u, rho_star, u_star, rates_star, E, dt)
        if bounds is not None:
            _check_bounds(rho, bounds, t + dt)
        logger.debug('step %d/%d, t = %.6g', k + 1, n_steps, t + dt)
    traj.flags['wall_time'] = time.time() - start
    logger.info('Evolved %d steps to t = %.6g in %.2f s', k, traj.T, traj.flags['wall_time'])
    return traj


#%% Picard iteration
@dataclass
class IterationRecord:
    """Diagnostics of one Picard iterate"""
    n: int
    B_n: float
    ratio: float
    rho_norm: float
    u_norm: float
    grad_pi_norm: float
    F_norm: float
    H_norm: float
    rho_bar_norm: float
    rho_L_norm: float
    stagnating: bool
    wall_time: float


@dataclass
class PicardResult:
    """Stored iterates and their diagnostics"""
    trajectories: List[Trajectory]
    records: DataFrame
    converged: bool
    stagnated: bool


def _linear_stage(rho, u, prev_coeffs, dt, n_steps, bounds, pressure_kwargs):
    """Solve the frozen-coefficient system from (rho, u); returns states and pressures at every step"""
    grid = rho.grid
    rhos, us, pis = [rho], [u], []
    for k in range(n_steps + 1):
        coeffs = prev_coeffs[k]
        kappa_bar = coeffs['kappa_bar']
        rates = _stage_rates(rho, u, coeffs, kappa_bar, None, k * dt, pressure_kwargs)
        pis.append(rates[2]['grad_pi'])
        if k == n_steps:
            break
        check_cfl(dt, coeffs['drift_rho'], coeffs['drift_u'])
        E = np.exp(-kappa_bar * grid.k_norm**2 * dt)
        rho_star, u_star = _heun_predict(rho, u, rates, E, dt)
        rates_star = _stage_rates(rho_star, u_star, prev_coeffs[k + 1], kappa_bar, None, (k + 1) * dt, pressure_kwargs)
        rho, u = _heun_correct(rho, u, rho_star, u_star, rates_star, E, dt)
        _check_bounds(rho, bounds, (k + 1) * dt)
        rhos.append(rho)
        us.append(u)
    return rhos, us, pis


def _series_norm(fields: List[Field], times: Array, q: float, space: BesovParams, with_l2: bool = False) -> float:
    """Chemin-Lerner norm L~^q_T(B^s_{p,r}) of a sampled series, plus L^q_T(L^2) when with_l2"""
    series = Trajectory(fields[0].grid)
    for t, f in zip(times, fields):
        series.append(t, value=f)
    norm = chemin_lerner_norm(series, 'value', q, space)
    if with_l2:
        norm += float(time_lq([lebesgue_norm(f, 2) for f in fields], times, q))
    return norm


def _difference_forcings(k, cur, prev):
    """F and H of the difference system at step k, from iterates n-1 (cur) and n-2 (prev)"""
    c, p = cur['coeffs'][k], prev['coeffs'][k]
    rho, u, gp = cur['rho'][k], cur['u'][k], cur['grad_pi'][k]
    du = u - prev['u'][k]
    F = -advect(du, rho) + divergence(dealiased_product(c['kappa'] - p['kappa'], gradient(rho)))
    H = c['h'] - p['h'] - advect(du + gradient(c['b'] - p['b']), u) - (c['lambda'] - p['lambda']) * gp
    return F, H


def picard_driver(
    rho0: Field,
    u0: Field,
    params: Optional[PhysicalParams] = None,
    T_star: Optional[float] = 0.1,
    n_max: Optional[int] = 10,
    dt: Optional[float] = 5e-3,
    stride: Optional[int] = 1,
    tol: Optional[float] = 1e-10,
    besov: Optional[BesovParams] = None,
    max_principle_tol: Optional[float] = 1e-6,
    **pressure_kwargs,
) -> PicardResult:
    """Iterate linear systems with coefficients frozen from the previous iterate

    Iterate 0 is (S_0 varrho_0, S_0 u_0, 0) = (0, 0, 0). Iterate n starts
    from (S_n varrho_0, S_n u_0) and is transported and diffused with
    kappa, lambda, b and h of iterate n - 1 at the step times.

    B_n measures iterate n minus iterate n - 1 in Chemin-Lerner norms at the
    critical regularity d/p: L~^inf and L~^1 (two more derivatives) for the
    density, L~^inf for the velocity, L~^1 plus L^1_T(L^2) for the pressure gradient.

    Parameters
    ----------
    rho0 : Field
        Initial density, positive
    u0 : Field
        Initial divergence-free velocity
    params : Optional[PhysicalParams], optional
        Gas constants and conductivity law, by default PhysicalParams()
    T_star : Optional[float], optional
        Horizon, by default 0.1
    n_max : Optional[int], optional
        Largest iterate, by default 10
    dt : Optional[float], optional
        Step size, by default 5e-3
    stride : Optional[int], optional
        Steps between stored samples, by default 1
    tol : Optional[float], optional
        Stop once B_n < tol, by default 1e-10
    besov : Optional[BesovParams], optional
        Space B^s_{p,r} of the heat-split diagnostics, by default B^{1+d/2}_{2,1}
    max_principle_tol : Optional[float], optional
        Allowed overshoot of the initial density range, by default 1e-6

    Returns
    -------
    PicardResult
        Trajectory per iterate, one IterationRecord row per n >= 1,
        convergence and stagnation flags

    Raises
    ------
    DensityBoundViolation
        An iterate leaves the range of its initial density
    CFLViolation
        Advective CFL number above 0.9
    """
    params = params if params is not None else PhysicalParams()
    grid = check_same_grid(rho0, u0)
    d = grid.d
    besov = besov if besov is not None else BesovParams(1 + d / 2, 2, 1, d)
    critical = BesovParams(d / besov.p, besov.p, 1, d)
    n_steps, dt = _step_count(T_star, dt)
    times = np.arange(n_steps + 1) * dt
    varrho0 = rho0 - 1.0
    heat = [heat_semigroup(varrho0, t) for t in times]

    def package(rhos, us, pis):
        coeffs = [frozen_coefficients(r, v, params) for r, v in zip(rhos, us)]
        return {'rho': rhos, 'u': us, 'grad_pi': pis, 'coeffs': coeffs}

    def store(it, n):
        traj = Trajectory(grid, {'params': params, 'n': n, 'dt': dt, 'T_star': T_star})
        for k in range(0, n_steps + 1):
            if k % stride == 0 or k == n_steps:
                traj.append(times[k], rho=it['rho'][k], u=it['u'][k], grad_pi=it['grad_pi'][k])
        return traj

    one = Field.constant(grid, 1.0)
    zero_u = Field.zeros(grid, d)
    current = package([one] * (n_steps + 1), [zero_u] * (n_steps + 1), [zero_u] * (n_steps + 1))
    previous = None
    trajectories = [store(current, 0)]
    records = []
    converged, stagnated = False, False
    slow = 0
    for n in range(1, n_max + 1):
        start = time.time()
        rho_n0 = 1.0 + low_pass(varrho0, n)
        u_n0 = low_pass(u0, n)
        bounds = (float(np.min(rho_n0.samples)) - max_principle_tol, float(np.max(rho_n0.samples)) + max_principle_tol)
        rhos, us, pis = _linear_stage(rho_n0, u_n0, current['coeffs'], dt, n_steps, bounds, pressure_kwargs)
        new = package(rhos, us, pis)

        d_rho = [a - b for a, b in zip(new['rho'], current['rho'])]
        d_u = [a - b for a, b in zip(new['u'], current['u'])]
        d_pi = [a - b for a, b in zip(new['grad_pi'], current['grad_pi'])]
        B_n = (_series_norm(d_rho, times, np.inf, critical)
               + _series_norm(d_rho, times, 1, critical.replace(s=critical.s + 2))
               + _series_norm(d_u, times, np.inf, critical)
               + _series_norm(d_pi, times, 1, critical, with_l2=True))

        F_norm, H_norm = np.nan, np.nan
        if previous is not None:
            pairs = [_difference_forcings(k, current, previous) for k in range(n_steps + 1)]
            F_norm = _series_norm([p[0] for p in pairs], times, 1, critical)
            H_norm = _series_norm([p[1] for p in pairs], times, 1, critical, with_l2=True)

        split = Trajectory(grid)
        for k, t in enumerate(times):
            rho_L = low_pass(heat[k], n)
            split.append(t, rho_L=rho_L, rho_bar=new['rho'][k] - 1.0 - rho_L)
        rho_bar_norm = chemin_lerner_norm(split, 'rho_bar', np.inf, besov) \
            + chemin_lerner_norm(split, 'rho_bar', 1, besov.replace(s=besov.s + 2))
        rho_L_norm = chemin_lerner_norm(split, 'rho_L', 2, besov.replace(s=besov.s + 1)) \
            + chemin_lerner_norm(split, 'rho_L', 1, besov.replace(s=besov.s + 2))

        ratio = np.nan
        if records and records[-1].B_n > 0:
            ratio = B_n / records[-1].B_n
        slow = slow + 1 if ratio > 0.95 else 0
        record = IterationRecord(n, B_n, ratio,
                                 _series_norm([r - 1.0 for r in new['rho']], times, np.inf, critical),
                                 _series_norm(new['u'], times, np.inf, critical),
                                 _series_norm(new['grad_pi'], times, 1, critical),
                                 F_norm, H_norm, rho_bar_norm, rho_L_norm, slow >= 3, time.time() - start)
        records.append(record)
        trajectories.append(store(new, n))
        logger.info('Picard iterate %d: B_n = %.3e', n, B_n)

        previous, current = current, new
        if B_n < tol:
            converged = True
            break
        if slow >= 3:
            stagnated = True
            logger.warning('Picard iteration stagnates at n = %d, B_n = %.3e', n, B_n)
            break

    table = pd.DataFrame([asdict(r) for r in records])
    return PicardResult(trajectories, table, converged, stagnated)
