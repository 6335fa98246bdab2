"""
Test that the figures render and save
"""
import os

import matplotlib
matplotlib.use('agg')

import numpy as np
import pandas as pd

from bzm import plotting
from bzm.spectral import make_grid
from bzm.monitor import continuation_monitor
from bzm.model import ManufacturedSolution
from bzm.experiment import Experiment
from bzm.io import default_config
from bzm.doe import cos_mode, taylor_green

grid = make_grid(2, 16)


def test_cutoff_partition(tmp_path):
    plotting.cutoff_partition(j_max=3, save_fig=True, save_path=str(tmp_path))
    assert os.path.exists(os.path.join(str(tmp_path), 'cutoff_partition.png'))


def test_block_spectrum(tmp_path):
    fields = [cos_mode(grid, [3, 0]), taylor_green(grid)]
    plotting.block_spectrum(fields, ['rho', 'u'], save_fig=True, save_path=str(tmp_path), i_iter=0)
    assert os.path.exists(os.path.join(str(tmp_path), 'block_spectrum_0.png'))


def test_run_figures(tmp_path):
    traj = ManufacturedSolution(grid).trajectory(np.linspace(0, 0.1, 4), forcing=False)
    report = continuation_monitor(traj)
    plotting.monitor_series(report, {'K': 0.2}, save_fig=True, save_path=str(tmp_path))
    records = pd.DataFrame({'n': [1, 2, 3], 'B_n': [1e-2, 1e-4, 0.0], 'ratio': [np.nan, 1e-2, 0.0]})
    plotting.picard_convergence(records, save_fig=True, save_path=str(tmp_path))
    probe = pd.DataFrame({'inequality_id': ['prod_para'] * 4, 'N': [16, 16, 32, 32],
                          'ratio': [0.1, 0.2, 0.15, 0.25]})
    plotting.probe_ratios(probe, save_fig=True, save_path=str(tmp_path))
    for name in ('monitor_series', 'picard_convergence', 'probe_ratios'):
        assert os.path.exists(os.path.join(str(tmp_path), name + '.png'))


def test_experiment_figure(tmp_path):
    config = default_config()
    config['grid.N'] = 16
    exp = Experiment(config, name=str(tmp_path / 'exp'))
    plotting.block_spectrum_exp(exp, save_fig=True)
    assert os.path.exists(os.path.join(exp.exp_path, 'block_spectrum_initial.png'))
