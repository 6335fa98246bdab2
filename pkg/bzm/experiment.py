"""
Experiment pipelines behind the command line

An Experiment holds a flat configuration, builds the typed parameter
objects from it and runs one command, writing CSV tables and a JSON
manifest into its folder.
"""

import os
import time
import copy
import logging

import numpy as np
import pandas as pd
from pandas import DataFrame
from typing import Optional, Dict, Any, List, Tuple

from bzm.spectral import Grid, Field, make_grid, block_decomposition, dealiased_product
from bzm.besov import lebesgue_norm, besov_norm
from bzm.paradiff import paraproduct, remainder, inequality_probe, inequality_ids, input_channels
from bzm.model import system_residual, total_mass
from bzm.parameter import BesovParams, PhysicalParams, MonitorConfig, LifespanParams
from bzm.solvers import evolve, picard_driver, heat_smallness_time
from bzm.monitor import continuation_monitor
from bzm.lifespan import lifespan_study, lifespan_sweep
from bzm.doe import random_fields, profiles
from bzm.io import default_config, read_field, write_csv, write_manifest
from bzm.utils import as_list
from bzm.errors import BZMError, ConfigParseError

logger = logging.getLogger(__name__)

commands = ['decompose', 'norm', 'bony-check', 'inequality-probe', 'solve', 'picard', 'lifespan', 'continuation']
"""list: Commands of the bzm entry point"""

exit_success = 0
exit_error = 1
exit_monitor_stop = 2

default_probe_parameters = {
    'prod_para': {'s': 1.0, 'p': 2, 'r': 1},
    'prod_remainder': {'s1': 1.0, 's2': 1.0, 'p': 2, 'r': 1},
    'prod_timedep': {'s': 1.0, 'p': 2, 'r': 1, 'q': 1},
    'comm_basic': {'s': 1.0, 'p': 2, 'r': 1},
    'comm_tilde_41': {'s': 1.0, 'p': 2, 'r': 1},
    'comm_tilde_42_deriv': {'s': 1.0, 'p': 2, 'r': 1, 'theta': 0.5, 's1': 1.5, 's2': 2.5,
                            'eta': 0.5, 'sigma1': 1.5, 'sigma2': 2.5, 'eps': 1.0},
    'prod_lemma_42': {'s': 1.0, 'p': 2, 'r': 1, 'theta': 0.5, 's1': 0.5, 's2': 1.5,
                      'eta': 0.5, 'sigma1': 0.5, 'sigma2': 1.5, 'eps': 1.0},
}
"""dict: Keys are the inequality ids, values are the indices used when the configuration gives none"""


class Experiment():
    """
    Experiment class,
    a configured run with its output folder
    """
    def __init__(
        self,
        config: Optional[Dict[str, Any]] = None,
        name: Optional[str] = None,
        seed: Optional[int] = None,
    ):
        """
        Parameters
        ----------
        config : Optional[Dict[str, Any]], optional
            Flat configuration, by default default_config()
        name : Optional[str], optional
            Output folder, by default config['run.out']
        seed : Optional[int], optional
            Random seed overriding config['run.seed'], by default None

        Raises
        ------
        ConfigParseError
            Unknown keys or values that do not build the parameter objects
        """
        base = default_config()
        config = copy.deepcopy(config) if config is not None else base
        unknown = [k for k in config if k not in base]
        if unknown:
            raise ConfigParseError('Unknown configuration keys: {}'.format(', '.join(sorted(unknown))))
        for key, value in base.items():
            config.setdefault(key, value)
        if seed is not None:
            config['run.seed'] = int(seed)
        if name is not None:
            config['run.out'] = name
        self.config = config
        self.name = config['run.out']
        self.exp_path = os.path.join(os.getcwd(), self.name) if not os.path.isabs(self.name) else self.name
        self.seed = int(config['run.seed'])
        try:
            self.grid = make_grid(int(config['grid.d']), int(config['grid.N']), float(config['grid.period']))
            self.params = PhysicalParams(config['physics.gamma'], config['physics.P0'], config['physics.R_gas'],
                                         config['physics.kappa_spec'], config['physics.kappa0'], config['physics.kappa_m'])
            self.besov = BesovParams(config['besov.s'], config['besov.p'], config['besov.r'], self.grid.d)
            self.lifespan = LifespanParams(config['lifespan.L'], config['lifespan.ell'],
                                           config['lifespan.delta'], config['lifespan.C_energy'])
            self.monitor = MonitorConfig(config['monitor.sigma'], config['monitor.p'], config['monitor.s'],
                                         config['monitor.r'], config['monitor.thresholds'], config['monitor.stride'],
                                         self.lifespan, config['monitor.max_principle_tol'])
        except (TypeError, ValueError) as error:
            raise ConfigParseError('Invalid configuration: {}'.format(error)) from error
        self.artifacts = []

    #%% Inputs
    def initial_data(self) -> Tuple[Field, Field]:
        """Initial density and velocity from files or named profiles"""
        c = self.config
        if c['data.rho_file']:
            rho0 = read_field(c['data.rho_file'], self.grid)
        else:
            rho0 = self._profile('density', c['data.rho_profile'], c['data.rho_amplitude'],
                                 c['data.rho_mode'], self.seed)
        if c['data.u_file']:
            u0 = read_field(c['data.u_file'], self.grid)
        else:
            u0 = self._profile('velocity', c['data.u_profile'], c['data.u_amplitude'],
                               c['data.u_mode'], self.seed + 1)
        return rho0, u0

    def _profile(self, channel: str, name: str, amplitude: float, mode, seed: int) -> Field:
        table = profiles[channel]
        if name not in table:
            raise ConfigParseError('Unknown {} profile {}, expected one of {}'.format(channel, name, sorted(table)))
        return table[name](self.grid, amplitude, mode, int(self.config['data.k_max']), seed)

    def grids(self) -> List[Grid]:
        """The run grid, and its refinement when probes are refined"""
        if self.config['probe.refine']:
            return [self.grid, self.grid.refine(2)]
        return [self.grid]

    def ensemble_pairs(self) -> List[List[Tuple[Field, Field]]]:
        """Seeded random pairs, the same continuous fields on every grid"""
        n, k_max = int(self.config['data.n_samples']), int(self.config['data.k_max'])
        grids = self.grids()
        first = random_fields(grids, n, k_max, seed=self.seed)
        second = random_fields(grids, n, k_max, seed=self.seed + 1)
        return [list(zip(a, b)) for a, b in zip(first, second)]

    #%% Output
    def save_table(self, data: DataFrame, file_name: str):
        if not os.path.exists(self.exp_path): os.makedirs(self.exp_path)
        path = os.path.join(self.exp_path, file_name)
        write_csv(data, path, verbose=False)
        self.artifacts.append(file_name)
        logger.info('Wrote %s', path)

    def save_manifest(self, command: str, wall_time: float, status: int, error: Optional[dict] = None, **summary):
        if not os.path.exists(self.exp_path): os.makedirs(self.exp_path)
        extra = {'error': error} if error is not None else {}
        write_manifest(os.path.join(self.exp_path, 'manifest.json'), self.config, command=command,
                       seed=self.seed, wall_time=wall_time, exit_status=status,
                       artifacts=list(self.artifacts), summary=summary, **extra)

    #%% Commands
    def decompose(self) -> Tuple[int, dict]:
        """Block norms of the initial density fluctuation"""
        rho0, _ = self.initial_data()
        varrho = rho0 - 1.0
        blocks = block_decomposition(varrho)
        rows = []
        for jj in range(self.grid.n_blocks):
            block = Field(self.grid, samples=blocks[jj])
            rows.append({'j': jj - 1, 'L2': lebesgue_norm(block, 2), 'Linf': lebesgue_norm(block, np.inf)})
        self.save_table(pd.DataFrame(rows), 'decompose.csv')
        reconstruction = float(np.max(np.abs(np.sum(blocks, axis=0) - varrho.samples)))
        partition = self.grid.cutoff.partition_error(np.unique(self.grid.k_norm), self.grid.j_max)
        return exit_success, {'reconstruction_error': reconstruction, 'partition_error': partition}

    def norm(self) -> Tuple[int, dict]:
        """Besov and Lebesgue norms of the initial data"""
        rho0, u0 = self.initial_data()
        rows = []
        for name, f in (('varrho', rho0 - 1.0), ('u', u0)):
            rows.append({'field': name, 's': self.besov.s, 'p': self.besov.p, 'r': self.besov.r,
                         'besov_norm': besov_norm(f, self.besov),
                         'L2': lebesgue_norm(f, 2), 'Linf': lebesgue_norm(f, np.inf)})
        self.save_table(pd.DataFrame(rows), 'norm.csv')
        return exit_success, {}

    def bony_check(self) -> Tuple[int, dict]:
        """Relative defect of the paraproduct splitting against the dealiased product"""
        rows = []
        for pairs in self.ensemble_pairs():
            for i, (u, v) in enumerate(pairs):
                product = dealiased_product(u, v)
                split = paraproduct(u, v) + paraproduct(v, u) + remainder(u, v)
                scale = lebesgue_norm(product, 2)
                defect = lebesgue_norm(split - product, 2) / scale if scale > 0 else lebesgue_norm(split, 2)
                rows.append({'sample': i, 'N': u.grid.N, 'defect': defect})
        data = pd.DataFrame(rows)
        self.save_table(data, 'bony_check.csv')
        return exit_success, {'max_defect': float(data['defect'].max())}

    def inequality_probe(self) -> Tuple[int, dict]:
        """Measured ratios of the product and commutator estimates"""
        chosen = self.config['probe.inequality']
        ids = inequality_ids if chosen == 'all' else as_list(chosen)
        ensembles = self.ensemble_pairs()
        rows = []
        summary = {}
        for inequality_id in ids:
            if inequality_id not in inequality_ids:
                raise ConfigParseError('Unknown inequality {}'.format(inequality_id))
            parameters = dict(default_probe_parameters[inequality_id])
            parameters.update(self.config['probe.parameters'])
            names = input_channels[inequality_id]
            maxima = []
            for pairs in ensembles:
                ratios = []
                for i, (a, b) in enumerate(pairs):
                    report = inequality_probe(inequality_id, {names[0]: a, names[1]: b}, parameters)
                    rows.append({'inequality_id': inequality_id, 'sample': i, 'N': a.grid.N,
                                 'lhs': report.lhs, 'rhs': report.rhs, 'ratio': report.ratio})
                    ratios.append(report.ratio)
                maxima.append(float(np.max(ratios)))
            summary[inequality_id] = {'max_ratio': maxima,
                                      'growth': maxima[-1] / maxima[0] if len(maxima) > 1 and maxima[0] > 0 else None}
        self.save_table(pd.DataFrame(rows), 'inequality_probe.csv')
        return exit_success, summary

    def _run_table(self, traj) -> DataFrame:
        data = traj.to_dataframe()
        rhos, us = traj.channel('rho'), traj.channel('u')
        data['mass'] = [total_mass(r) for r in rhos]
        data['rho_min'] = [float(np.min(r.samples)) for r in rhos]
        data['rho_max'] = [float(np.max(r.samples)) for r in rhos]
        residuals = {'res_density': [], 'res_momentum': [], 'res_divergence': []}
        for i in range(traj.n_samples):
            if 0 < i < traj.n_samples - 1:
                res = system_residual(traj, i, self.params)
                values = (res['density'], res['momentum'], res['divergence'])
            else:
                values = (np.nan, np.nan, np.nan)
            for key, value in zip(residuals, values):
                residuals[key].append(value)
        for key, values in residuals.items():
            data[key] = values
        return data

    def solve(self) -> Tuple[int, dict]:
        """Nonlinear run with the continuation monitor"""
        rho0, u0 = self.initial_data()
        c = self.config
        traj = evolve(rho0, u0, self.params, c['solver.T'], c['solver.dt'], monitor=self.monitor,
                      tol=c['solver.pressure_tol'])
        self.save_table(self._run_table(traj), 'solve.csv')
        triggered = traj.flags.get('continuation_triggered', False)
        return (exit_monitor_stop if triggered else exit_success), {
            'T_reached': traj.T, 'continuation_triggered': triggered,
            'trigger_quantity': traj.flags.get('trigger_quantity')}

    def picard(self) -> Tuple[int, dict]:
        """Frozen-coefficient iteration with its convergence record"""
        rho0, u0 = self.initial_data()
        c = self.config
        smallness = heat_smallness_time(rho0 - 1.0, c['solver.tau'], self.besov)
        result = picard_driver(rho0, u0, self.params, c['solver.T_star'], int(c['solver.n_max']),
                               c['solver.picard_dt'], tol=c['solver.picard_tol'],
                               max_principle_tol=self.monitor.max_principle_tol)
        self.save_table(result.records, 'picard.csv')
        return exit_success, {'converged': result.converged, 'stagnated': result.stagnated,
                              'iterations': len(result.records), 'heat_T_star': smallness.T_star,
                              'heat_target_reached': smallness.reached}

    def lifespan_run(self) -> Tuple[int, dict]:
        """Growth quantities against the lifespan bound, and the amplitude sweep"""
        rho0, u0 = self.initial_data()
        c = self.config
        report = lifespan_study(rho0, u0, self.params, self.lifespan, self.monitor, c['solver.T'], c['solver.dt'])
        self.save_table(report.series, 'lifespan.csv')
        amplitudes = as_list(c['lifespan.amplitudes'])
        if amplitudes:
            sweep = lifespan_sweep(amplitudes, rho0, self.params, self.monitor, c['solver.T'], c['solver.dt'])
            self.save_table(sweep, 'lifespan_sweep.csv')
        return exit_success, {'U0': report.U0, 'R0': report.R0, 'bound': report.bound, 'T_R': report.T_R,
                              'T_U': report.T_U, 'stayed_regular': report.stayed_regular}

    def continuation(self) -> Tuple[int, dict]:
        """Monitor report of a run, stopping at the first threshold crossing"""
        rho0, u0 = self.initial_data()
        c = self.config
        traj = evolve(rho0, u0, self.params, c['solver.T'], c['solver.dt'], monitor=self.monitor,
                      tol=c['solver.pressure_tol'])
        report = continuation_monitor(traj, self.monitor, self.params)
        self.save_table(report, 'continuation.csv')
        triggered = traj.flags.get('continuation_triggered', False)
        return (exit_monitor_stop if triggered else exit_success), {
            'T_reached': traj.T, 'trigger_quantity': traj.flags.get('trigger_quantity')}

    def run(self, command: str) -> int:
        """Run a command and write its manifest

        Parameters
        ----------
        command : str
            One of commands

        Returns
        -------
        int
            Exit status: 0 on success, 2 on a monitor stop

        Raises
        ------
        BZMError
            Re-raised after a manifest with exit status 1, the error class,
            its message and its diagnostics has been written
        """
        handlers = {'decompose': self.decompose, 'norm': self.norm, 'bony-check': self.bony_check,
                    'inequality-probe': self.inequality_probe, 'solve': self.solve, 'picard': self.picard,
                    'lifespan': self.lifespan_run, 'continuation': self.continuation}
        if command not in handlers:
            raise ValueError('command must be one of {}, got {}'.format(commands, command))
        start = time.time()
        try:
            status, summary = handlers[command]()
        except BZMError as error:
            failure = {'type': type(error).__name__, 'message': str(error),
                       'diagnostics': getattr(error, 'diagnostics', {})}
            self.save_manifest(command, time.time() - start, exit_error, error=failure)
            raise
        self.save_manifest(command, time.time() - start, status, **summary)
        return status


def run(command: str, config: Optional[Dict[str, Any]] = None, out: Optional[str] = None,
        seed: Optional[int] = None) -> int:
    """Build an Experiment from a configuration and run one command"""
    return Experiment(config, out, seed).run(command)
