"""
Creates figures of dyadic spectra, monitor series and probe results
The plots are rendered using matplotlib_ as a backend

.. _matplotlib: https://matplotlib.org/stable/index.html
"""

import os
import matplotlib.pyplot as plt
from matplotlib import cm

import numpy as np
from pandas import DataFrame
from typing import Optional, List

from bzm.spectral import Field, CutoffPair, default_cutoff
from bzm.besov import block_norms
from bzm.parameter import monitor_quantities
from bzm.utils import Exponent
from bzm.experiment import Experiment

# Set global plotting variables
colormap = cm.jet
figformat = 'png'
backgroundtransparency = False


def _save(fig, save_fig: bool, save_path: Optional[str], name: str):
    if save_fig:
        if save_path is None:
            save_path = os.getcwd()
        if not os.path.exists(save_path): os.makedirs(save_path)
        fig.savefig(os.path.join(save_path, name + '.' + figformat),
                    bbox_inches="tight", transparent=backgroundtransparency)


#%% Cutoff functions
def cutoff_partition(
    cutoff: Optional[CutoffPair] = None,
    j_max: Optional[int] = 4,
    save_fig: Optional[bool] = False,
    save_path: Optional[str] = None):
    """Plot chi, the dilated phi and their sum over the radius

    Parameters
    ----------
    cutoff : Optional[CutoffPair], optional
        Cutoff pair, by default the shared default
    j_max : Optional[int], optional
        Last dilation shown, by default 4
    save_fig: Optional[bool], optional
        if true save the plot
        by default False
    save_path: Optional[str], optional
        Path where the figure is being saved
        by default the current directory
    """
    cutoff = cutoff if cutoff is not None else default_cutoff()
    radii = np.linspace(0.0, 2.0**(j_max + 1), 1000)
    colors = colormap(np.linspace(0, 1, j_max + 2))

    fig, ax = plt.subplots(figsize=(8, 4))
    total = cutoff.chi(radii)
    ax.plot(radii, total, color=colors[0], label=r'$\chi$')
    for j in range(j_max + 1):
        phi_j = cutoff.phi(radii / 2.0**j)
        total = total + phi_j
        ax.plot(radii, phi_j, color=colors[j + 1], label=r'$\varphi_{}$'.format(j))
    ax.plot(radii, total, 'k--', label='sum')
    ax.set_xlabel('|k|')
    ax.set_ylim([-0.05, 1.1])
    ax.legend(bbox_to_anchor=(1.02, 1), loc='upper left')
    plt.show()
    _save(fig, save_fig, save_path, 'cutoff_partition')


#%% Dyadic spectra
def block_spectrum(
    fields: List[Field],
    labels: Optional[List[str]] = None,
    p: Optional[Exponent] = 2,
    save_fig: Optional[bool] = False,
    save_path: Optional[str] = None,
    i_iter: Optional[str] = ''):
    """Plot |Delta_j f|_{L^p} against j on a log scale

    Parameters
    ----------
    fields : List[Field]
        Fields on a common grid
    labels : Optional[List[str]], optional
        Legend entries, by default none
    p : Optional[Exponent], optional
        Lebesgue exponent, by default 2
    save_fig: Optional[bool], optional
        if true save the plot
        by default False
    save_path: Optional[str], optional
        Path where the figure is being saved
        by default the current directory
    i_iter: Optional[str], optional
        Suffix of the figure name
        by default ''
    """
    labels = labels if labels is not None else [None] * len(fields)
    colors = colormap(np.linspace(0, 1, max(len(fields), 2)))

    fig, ax = plt.subplots(figsize=(6, 4))
    for f, label, color in zip(fields, labels, colors):
        norms = np.max(block_norms(f, p), axis=0)
        js = np.arange(norms.size) - 1
        positive = norms > 0
        ax.semilogy(js[positive], norms[positive], 'o-', color=color, label=label)
    ax.set_xlabel('j')
    ax.set_ylabel(r'$\|\Delta_j f\|_{L^p}$')
    if any(label is not None for label in labels):
        ax.legend()
    plt.show()
    _save(fig, save_fig, save_path, 'block_spectrum_' + str(i_iter))


def block_spectrum_exp(
    Exp: Experiment,
    save_fig: Optional[bool] = False):
    """Block spectrum of the initial data of an Experiment"""
    rho0, u0 = Exp.initial_data()
    block_spectrum([rho0 - 1.0, u0], labels=['varrho', 'u'], p=Exp.besov.p,
                   save_fig=save_fig, save_path=Exp.exp_path, i_iter='initial')


#%% Runs
def monitor_series(
    report: DataFrame,
    thresholds: Optional[dict] = None,
    save_fig: Optional[bool] = False,
    save_path: Optional[str] = None):
    """Plot every monitored quantity against time, thresholds dashed"""
    thresholds = thresholds if thresholds is not None else {}
    fig, axes = plt.subplots(1, len(monitor_quantities), figsize=(4 * len(monitor_quantities), 3.5))
    for ax, name in zip(axes, monitor_quantities):
        ax.plot(report['t'], report[name], 'k-')
        if name in thresholds:
            ax.axhline(thresholds[name], color='r', linestyle='--')
        ax.set_xlabel('t')
        ax.set_title(name)
    fig.tight_layout()
    plt.show()
    _save(fig, save_fig, save_path, 'monitor_series')


def monitor_series_exp(
    Exp: Experiment,
    report: DataFrame,
    save_fig: Optional[bool] = False):
    """Monitor series of a run with the Experiment thresholds"""
    monitor_series(report, Exp.monitor.thresholds, save_fig, Exp.exp_path)


def picard_convergence(
    records: DataFrame,
    save_fig: Optional[bool] = False,
    save_path: Optional[str] = None):
    """Plot B_n and the ratio B_{n+1}/B_n against the iteration"""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    positive = records['B_n'] > 0
    ax1.semilogy(records['n'][positive], records['B_n'][positive], 'o-')
    ax1.set_xlabel('n')
    ax1.set_ylabel(r'$B_n$')
    ax2.plot(records['n'], records['ratio'], 's-')
    ax2.axhline(0.5, color='k', linestyle='--')
    ax2.set_xlabel('n')
    ax2.set_ylabel(r'$B_{n+1} / B_n$')
    fig.tight_layout()
    plt.show()
    _save(fig, save_fig, save_path, 'picard_convergence')


#%% Probes
def probe_ratios(
    probe: DataFrame,
    save_fig: Optional[bool] = False,
    save_path: Optional[str] = None):
    """Histogram of the measured ratios, one panel per inequality and one color per N"""
    ids = list(dict.fromkeys(probe['inequality_id']))
    Ns = sorted(set(probe['N']))
    colors = colormap(np.linspace(0, 1, max(len(Ns), 2)))
    fig, axes = plt.subplots(1, len(ids), figsize=(4 * len(ids), 3.5), squeeze=False)
    for ax, inequality_id in zip(axes[0], ids):
        rows = probe[probe['inequality_id'] == inequality_id]
        for N, color in zip(Ns, colors):
            ratios = rows['ratio'][rows['N'] == N]
            ax.hist(ratios[np.isfinite(ratios)], bins=20, alpha=0.6, color=color, label='N = {}'.format(N))
        ax.set_title(inequality_id)
        ax.set_xlabel('lhs / rhs')
        ax.legend()
    fig.tight_layout()
    plt.show()
    _save(fig, save_fig, save_path, 'probe_ratios')


def probe_ratios_exp(
    Exp: Experiment,
    probe: DataFrame,
    save_fig: Optional[bool] = False):
    """Probe histogram saved in the Experiment folder"""
    probe_ratios(probe, save_fig, Exp.exp_path)
