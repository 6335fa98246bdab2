"""
Lifespan study of evolve runs

- lifespan_study: measured growth quantities against the lower bound
- parabolic_bernstein: per-block gain of the diffusion term
- lifespan_sweep: stable horizons over velocity amplitudes

"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pandas import DataFrame
from typing import Optional, List, Callable

from bzm.spectral import Grid, Field, dyadic_block, gradient, divergence
from bzm.besov import Trajectory, besov_norm, besov_history
from bzm.model import lifespan_lower_bound
from bzm.parameter import BesovParams, PhysicalParams, LifespanParams, MonitorConfig
from bzm.solvers import evolve
from bzm.doe import taylor_green
from bzm.utils import Exponent, cumulative_trapezoid, check_exponent

logger = logging.getLogger(__name__)


def lifespan_space(d: int) -> BesovParams:
    """B^{1+d/4}_{4,1}, where the lifespan bound is measured"""
    return BesovParams(1.0 + d / 4.0, 4, 1, d)


def _last_before_failure(ok: np.ndarray, times: np.ndarray) -> Optional[float]:
    # sup of the times where the condition still holds, None if it never fails
    failed = np.flatnonzero(~ok)
    if failed.size == 0:
        return None
    if failed[0] == 0:
        return 0.0
    return float(times[failed[0] - 1])


@dataclass
class LifespanReport:
    """Growth quantities of one run against the lifespan lower bound"""
    U0: float
    R0: float
    bound: float
    horizon: float
    T_R: Optional[float]
    T_U: Optional[float]
    triggered: Optional[str]
    stayed_regular: bool
    series: DataFrame = field(repr=False)
    trajectory: Trajectory = field(repr=False)


def lifespan_study(
    rho0: Field,
    u0: Field,
    params: Optional[PhysicalParams] = None,
    lp: Optional[LifespanParams] = None,
    cfg: Optional[MonitorConfig] = None,
    T: Optional[float] = 0.0,
    dt: Optional[float] = 1e-2,
) -> LifespanReport:
    """Run evolve past the lifespan lower bound and track the growth quantities

    R(t) = sup |varrho|, U(t) = sup |u| and S(t) = int |varrho|_{B^{3+d/4}_{4,1}},
    with the sup norms in B^{1+d/4}_{4,1}. T_R is the last sample with
    int R^3 <= 2 R0, T_U the last one with E = exp(C int (1 + U)) <= 2 and
    (1 + R0^{delta+4}) int (U + U^2) <= 2 (1 + U0 + R0^{delta+4}).

    Parameters
    ----------
    rho0 : Field
        Initial density, positive
    u0 : Field
        Initial divergence-free velocity
    params : Optional[PhysicalParams], optional
        Gas constants, by default PhysicalParams()
    lp : Optional[LifespanParams], optional
        Constants of the bound, by default cfg.lifespan
    cfg : Optional[MonitorConfig], optional
        Monitor settings of the run, by default MonitorConfig()
    T : Optional[float], optional
        Configured horizon; the run covers max(bound, T), by default 0.0
    dt : Optional[float], optional
        Step size, by default 1e-2

    Returns
    -------
    LifespanReport
        Crossing times are None when not crossed during the run;
        stayed_regular is True when no monitor threshold fired before the bound
    """
    params = params if params is not None else PhysicalParams()
    cfg = cfg if cfg is not None else MonitorConfig()
    lp = lp if lp is not None else cfg.lifespan
    space = lifespan_space(rho0.grid.d)
    U0 = besov_norm(u0, space)
    R0 = besov_norm(rho0 - 1.0, space)
    bound = lifespan_lower_bound(U0, R0, lp)
    horizon = max(bound, T)
    logger.info('Lifespan study: U0 = %.4g, R0 = %.4g, bound %.4g, horizon %.4g', U0, R0, bound, horizon)

    traj = evolve(rho0, u0, params, horizon, dt, monitor=cfg)
    times = np.asarray(traj.times)
    R = np.maximum.accumulate(besov_history(traj, 'varrho', space))
    U = np.maximum.accumulate(besov_history(traj, 'u', space))
    S = cumulative_trapezoid(besov_history(traj, 'varrho', space.replace(s=space.s + 2)), times)
    energy = np.exp(lp.C_energy * cumulative_trapezoid(1.0 + U, times))
    R_integral = cumulative_trapezoid(R**3, times)
    U_integral = cumulative_trapezoid(U + U**2, times)
    weight = R0**(lp.delta + 4)

    T_R = _last_before_failure(R_integral <= 2 * R0, times)
    T_U = _last_before_failure((energy <= 2.0) & ((1 + weight) * U_integral <= 2 * (1 + U0 + weight)), times)
    triggered = traj.flags.get('trigger_quantity')
    stayed_regular = traj.T >= bound * (1 - 1e-12) or triggered is None
    series = pd.DataFrame({'t': times, 'R': R, 'S': S, 'U': U, 'energy': energy,
                           'R_integral': R_integral, 'U_integral': U_integral})
    return LifespanReport(U0, R0, bound, horizon, T_R, T_U, triggered, bool(stayed_regular), series, traj)


def parabolic_bernstein(rho: Field, kappa: Field, p: Optional[Exponent] = 2) -> DataFrame:
    """Per-block gain of the diffusion term in L^p

    For every j >= 0 with varrho_j = Delta_j rho,
    C_j = -int div(kappa grad varrho_j) |varrho_j|^{p-2} varrho_j / (2^{2j} int |varrho_j|^p),
    and identity_gap is the relative gap to (p - 1) int kappa |grad varrho_j|^2 |varrho_j|^{p-2}.

    Parameters
    ----------
    rho : Field
        Scalar density
    kappa : Field
        Conductivity
    p : Optional[Exponent], optional
        Finite exponent >= 2, by default 2

    Returns
    -------
    DataFrame
        Columns j, C, identity_gap, degenerate
    """
    check_exponent(p, 'p')
    if np.isinf(p) or p < 2:
        raise ValueError('parabolic_bernstein needs a finite p >= 2, got {}'.format(p))
    grid = rho.grid
    scale = float(np.max(np.abs((rho - float(rho.mean()[0])).coeffs)))
    rows = []
    for j in range(grid.j_max + 1):
        block = dyadic_block(rho, j)
        values = block.samples[0]
        power = np.mean(np.abs(values)**p)
        if np.max(np.abs(block.coeffs)) <= 1e-12 * max(scale, 1e-300) or power == 0.0:
            rows.append({'j': j, 'C': np.nan, 'identity_gap': np.nan, 'degenerate': True})
            continue
        weight = np.abs(values)**(p - 2) * values
        flux = divergence(kappa * gradient(block)).samples[0]
        dissipation = -np.mean(flux * weight)
        grad_sq = np.sum(gradient(block).samples**2, axis=0)
        identity = (p - 1) * np.mean(kappa.samples[0] * grad_sq * np.abs(values)**(p - 2))
        rows.append({'j': j, 'C': dissipation / (4.0**j * power),
                     'identity_gap': abs(dissipation - identity) / abs(identity) if identity else np.nan,
                     'degenerate': False})
    return pd.DataFrame(rows)


def lifespan_sweep(
    amplitudes: List[float],
    rho0: Field,
    params: Optional[PhysicalParams] = None,
    cfg: Optional[MonitorConfig] = None,
    T: Optional[float] = 1.0,
    dt: Optional[float] = 1e-2,
    velocity: Optional[Callable[[Grid, float], Field]] = None,
) -> DataFrame:
    """Stable-run horizon for velocities of growing amplitude

    Parameters
    ----------
    amplitudes : List[float]
        Velocity amplitudes
    rho0 : Field
        Common initial density
    params : Optional[PhysicalParams], optional
        Gas constants, by default PhysicalParams()
    cfg : Optional[MonitorConfig], optional
        Monitor settings with the thresholds that end a run, by default MonitorConfig()
    T : Optional[float], optional
        Horizon of every run, by default 1.0
    dt : Optional[float], optional
        Step size, by default 1e-2
    velocity : Optional[Callable[[Grid, float], Field]], optional
        Profile (grid, amplitude) -> u0, by default taylor_green

    Returns
    -------
    DataFrame
        amplitude, U0, R0, bound, stable_horizon (time of the first
        monitor trigger, or the horizon) and triggered
    """
    cfg = cfg if cfg is not None else MonitorConfig()
    velocity = velocity if velocity is not None else (lambda grid, a: taylor_green(grid, a))
    rows = []
    for amplitude in amplitudes:
        report = lifespan_study(rho0, velocity(rho0.grid, amplitude), params, cfg.lifespan, cfg, T, dt)
        rows.append({'amplitude': amplitude, 'U0': report.U0, 'R0': report.R0, 'bound': report.bound,
                     'stable_horizon': report.trajectory.T, 'triggered': report.triggered})
        logger.info('Amplitude %.4g: stable horizon %.4g', amplitude, report.trajectory.T)
    return pd.DataFrame(rows)
