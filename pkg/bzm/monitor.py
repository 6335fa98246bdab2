"""
Continuation-criterion monitor

Running quantities along a solution, updated one sample at a time:

- continuation_sup: sup_t |(grad rho, u)|_inf
- continuation_integral: int |(grad^2 rho, grad u)|_inf^2 + |grad pi|_{B^{-sigma}_{p,inf}} + |grad pi|_inf
- K: int 1 + |grad u|_{B^{d/p}_{p,1}} + |grad u|_{B^{s-1}_{p,r}} + |grad kappa|_{B^s_{p,r}}^2
- W: int |grad w|_{B^{d/p}_{p,1} n B^{s-1}_{p,r}}, w = u + grad b
- lambda_star: sup_t |lambda|_inf + |grad lambda|_{L~^inf_t(B^{d/p}_{p,1} n B^{s-1}_{p,r})}

"""

import logging

import numpy as np
import pandas as pd
from pandas import DataFrame
from typing import Optional, Dict

from bzm.spectral import Grid, Field, gradient
from bzm.besov import Trajectory, lebesgue_norm, besov_norm, block_norms, weighted_sum
from bzm.model import FlowState
from bzm.parameter import BesovParams, PhysicalParams, MonitorConfig, critical_params, monitor_quantities
from bzm.utils import intersection_norm

logger = logging.getLogger(__name__)


class ContinuationMonitor():
    """
    ContinuationMonitor class,
    accumulates the monitored quantities over the samples of a run
    and flags the first one to exceed its threshold
    """
    def __init__(
        self,
        grid: Grid,
        cfg: Optional[MonitorConfig] = None,
        params: Optional[PhysicalParams] = None,
    ):
        """
        Parameters
        ----------
        grid : Grid
            Grid of the monitored fields
        cfg : Optional[MonitorConfig], optional
            Norm indices and thresholds, by default MonitorConfig()
        params : Optional[PhysicalParams], optional
            Gas constants and conductivity law, by default PhysicalParams()
        """
        self.grid = grid
        self.cfg = cfg if cfg is not None else MonitorConfig()
        self.params = params if params is not None else PhysicalParams()
        d = grid.d
        self.space = self.cfg.besov(d)
        self.critical = critical_params(d, self.cfg.p)
        self.lower = self.space.replace(s=self.space.s - 1.0)
        self.negative = BesovParams(-self.cfg.sigma, self.cfg.p, np.inf, d)

        self.t = None
        self.integrands = None
        self.values = {name: 0.0 for name in monitor_quantities}
        self._sup_flow = 0.0
        self._sup_lambda = 0.0
        self._lambda_blocks = None
        self.triggered = None
        self.history = []

    def _integrands(self, state: FlowState, grad_pi: Field) -> Dict[str, float]:
        u, rho = state.u, state.rho
        grad_u = gradient(u)
        second = Field.stack([gradient(gradient(rho)), grad_u])
        pressure = besov_norm(grad_pi, self.negative)
        grad_w = gradient(state.v)
        return {
            'continuation_integral': lebesgue_norm(second, np.inf)**2 + pressure + lebesgue_norm(grad_pi, np.inf),
            'K': 1.0 + besov_norm(grad_u, self.critical) + besov_norm(grad_u, self.lower)
                 + besov_norm(gradient(state.kappa), self.space)**2,
            'W': intersection_norm([besov_norm(grad_w, self.critical), besov_norm(grad_w, self.lower)]),
        }

    def update(self, t: float, state: FlowState, grad_pi: Optional[Field] = None) -> Dict[str, float]:
        """Add the sample at time t

        Parameters
        ----------
        t : float
            Sample time, after the previous one
        state : FlowState
            Density and velocity at time t
        grad_pi : Optional[Field], optional
            Pressure gradient, by default state.grad_pi

        Returns
        -------
        Dict[str, float]
            Current value of every monitored quantity
        """
        grad_pi = grad_pi if grad_pi is not None else state.grad_pi
        flow = Field.stack([gradient(state.rho), state.u])
        self._sup_flow = max(self._sup_flow, lebesgue_norm(flow, np.inf))
        self._sup_lambda = max(self._sup_lambda, lebesgue_norm(state.lam, np.inf))
        blocks = block_norms(gradient(state.lam), self.cfg.p)
        self._lambda_blocks = blocks if self._lambda_blocks is None else np.maximum(self._lambda_blocks, blocks)

        integrands = self._integrands(state, grad_pi)
        if self.t is not None:
            step = t - self.t
            for name, value in integrands.items():
                self.values[name] += 0.5 * step * (value + self.integrands[name])
        self.t, self.integrands = t, integrands

        self.values['continuation_sup'] = self._sup_flow
        self.values['lambda_star'] = self._sup_lambda + intersection_norm([
            weighted_sum(self._lambda_blocks, self.grid, self.critical),
            weighted_sum(self._lambda_blocks, self.grid, self.lower)])

        for name, threshold in self.cfg.thresholds.items():
            if self.triggered is None and self.values[name] > threshold:
                self.triggered = name
                logger.warning('Monitor quantity %s = %.6g exceeds %.6g at t = %.6g', name, self.values[name], threshold, t)
        self.history.append(dict(t=t, **self.values))
        return dict(self.values)

    def report(self) -> DataFrame:
        """One row per sample: t and every monitored quantity"""
        return pd.DataFrame(self.history, columns=['t'] + monitor_quantities)


def continuation_monitor(
    traj: Trajectory,
    cfg: Optional[MonitorConfig] = None,
    params: Optional[PhysicalParams] = None,
) -> DataFrame:
    """Monitored quantities along a stored trajectory

    Parameters
    ----------
    traj : Trajectory
        Channels rho and u, grad_pi when available
    cfg : Optional[MonitorConfig], optional
        Monitor settings, by default MonitorConfig()
    params : Optional[PhysicalParams], optional
        Gas constants, by default those in traj.metadata

    Returns
    -------
    DataFrame
        One row per sample, plus a column triggered naming the
        first quantity above its threshold
    """
    if traj.n_samples == 0:
        raise ValueError('Trajectory has no samples')
    params = params if params is not None else traj.metadata.get('params', PhysicalParams())
    monitor = ContinuationMonitor(traj.grid, cfg, params)
    for i, t in enumerate(traj.times):
        monitor.update(t, FlowState.from_trajectory(traj, i, params))
    report = monitor.report()
    report['triggered'] = monitor.triggered
    return report
