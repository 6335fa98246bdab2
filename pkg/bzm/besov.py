"""
Besov and Chemin-Lerner norms

- Grid L^p norms and per-block norms |Delta_j f|_{L^p}
- Besov norms of Fields
- Trajectory container for time-dependent fields
- Chemin-Lerner norms (time norm taken per block) and plain L^q_T(B^s) norms
- Embedding and interpolation probes

"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pandas import DataFrame
from typing import Optional, Union, List, Dict

from bzm.spectral import Grid, Field, block_decomposition
from bzm.parameter import BesovParams
from bzm.utils import Array, Matrix, Exponent, grid_lp, lr_sum, time_lq, check_exponent
from bzm.errors import MissingChannelError, HypothesisViolation, ComponentMismatchError

logger = logging.getLogger(__name__)


#%% Norms of a single Field
def lebesgue_norm(f: Field, p: Exponent) -> float:
    """Unit-volume L^p norm of the pointwise magnitude, sample max for p = inf"""
    check_exponent(p, 'p')
    return float(grid_lp(f.magnitude(), p))


def block_norms(f: Field, p: Exponent) -> Matrix:
    """|Delta_j f_c|_{L^p} for every component c and block j

    Returns
    -------
    Matrix
        Array of shape (c, j_max + 2), column 0 is the j = -1 block
    """
    check_exponent(p, 'p')
    blocks = block_decomposition(f)
    norms = grid_lp(blocks, p, axes=f.grid.axes)
    return np.asarray(norms).reshape(blocks.shape[:2]).T


def block_weights(grid: Grid, s: float) -> Array:
    """2^{js} for j = -1, ..., j_max"""
    return 2.0**(s * np.arange(-1, grid.j_max + 1))


def weighted_sum(norms: Matrix, grid: Grid, params: BesovParams) -> float:
    """l^r sum of 2^{js} times per-block norms over components and blocks"""
    return lr_sum(norms * block_weights(grid, params.s)[None], params.r)


def besov_norm(f: Field, params: BesovParams) -> float:
    """Inhomogeneous Besov norm

    Parameters
    ----------
    f : Field
        Scalar, vector or tensor field; components enter the l^r sum
        next to the blocks
    params : BesovParams
        Space B^s_{p,r}

    Returns
    -------
    float
        (sum_j 2^{rjs} |Delta_j f|_{L^p}^r)^{1/r}, sup over j for r = inf
    """
    return weighted_sum(block_norms(f, params.p), f.grid, params)


#%% Trajectory
class Trajectory():
    """
    Trajectory class,
    time-stamped snapshots of named channels on one grid,
    plus monitor values recorded at the same instants

    The channel 'varrho' is derived from 'rho' as rho - 1 when not stored.
    """
    def __init__(self, grid: Grid, metadata: Optional[dict] = None):
        """
        Parameters
        ----------
        grid : Grid
            Grid of every snapshot
        metadata : Optional[dict], optional
            Run parameters kept alongside, by default None
        """
        self.grid = grid
        self.times = []
        self.channels = {}
        self.monitor = {}
        self.metadata = dict(metadata or {})
        self.flags = {}
        self._cache = {}

    @classmethod
    def constant(cls, grid: Grid, T: Optional[float] = 1.0, **fields: Field) -> 'Trajectory':
        """Two-sample trajectory constant in time on [0, T]"""
        traj = cls(grid)
        traj.append(0.0, **fields)
        traj.append(T, **fields)
        return traj

    def append(self, t: float, **fields: Field):
        """Store the snapshot at time t

        Raises
        ------
        ValueError
            t not after the last stored time, first time not 0,
            or channel names differ from the first snapshot
        """
        if not self.times and t != 0.0:
            raise ValueError('The first sample must be at t = 0, got {}'.format(t))
        if self.times and t <= self.times[-1]:
            raise ValueError('Times must increase strictly, got {} after {}'.format(t, self.times[-1]))
        if self.times and set(fields) != set(self.channels):
            raise ValueError('Channels {} differ from {}'.format(sorted(fields), sorted(self.channels)))
        for name, f in fields.items():
            if f.grid != self.grid:
                raise ValueError('Channel {} lives on {}, not {}'.format(name, f.grid, self.grid))
            self.channels.setdefault(name, []).append(f)
        self.times.append(float(t))
        self._cache.clear()

    def record(self, **values: float):
        """Monitor values at the last stored time"""
        n = len(self.times)
        for name, value in values.items():
            series = self.monitor.setdefault(name, [])
            series.extend([np.nan] * (n - 1 - len(series)))
            series.append(float(value))

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def T(self) -> float:
        return self.times[-1] if self.times else 0.0

    def has_channel(self, name: str) -> bool:
        return name in self.channels or (name == 'varrho' and 'rho' in self.channels)

    def channel(self, name: str) -> List[Field]:
        """Snapshots of a channel

        Raises
        ------
        MissingChannelError
            No such channel
        """
        if name in self.channels:
            return self.channels[name]
        if name == 'varrho' and 'rho' in self.channels:
            key = ('derived', 'varrho')
            if key not in self._cache:
                self._cache[key] = [rho - 1.0 for rho in self.channels['rho']]
            return self._cache[key]
        raise MissingChannelError('Trajectory has no channel {}, available: {}'.format(name, sorted(self.channels)))

    def block_norm_history(self, name: str, p: Exponent) -> Matrix:
        """Per-block norms of a channel at every sample, shape (n_t, c, j_max + 2)"""
        key = ('blocks', name, float(p))
        if key not in self._cache:
            self._cache[key] = np.stack([block_norms(f, p) for f in self.channel(name)])
        return self._cache[key]

    def subsample(self, stride: int) -> 'Trajectory':
        """Every stride-th sample, keeping the last one"""
        index = list(range(0, self.n_samples, stride))
        if index[-1] != self.n_samples - 1:
            index.append(self.n_samples - 1)
        traj = Trajectory(self.grid, self.metadata)
        for i in index:
            traj.append(self.times[i], **{name: fields[i] for name, fields in self.channels.items()})
            traj.record(**{name: series[i] for name, series in self.monitor.items() if i < len(series)})
        traj.flags = dict(self.flags)
        return traj

    def to_dataframe(self) -> DataFrame:
        """Times and monitor values, one row per sample"""
        data = {'t': self.times}
        for name, series in self.monitor.items():
            data[name] = list(series) + [np.nan] * (self.n_samples - len(series))
        return pd.DataFrame(data)


#%% Time-dependent norms
def chemin_lerner_norm(traj: Trajectory, channel: str, q: Exponent, params: BesovParams) -> float:
    """Chemin-Lerner norm of a channel over [0, T]

    Parameters
    ----------
    traj : Trajectory
        Time samples
    channel : str
        Channel name
    q : Exponent
        Time exponent; composite trapezoid for finite q, running max for q = inf
    params : BesovParams
        Space B^s_{p,r}

    Returns
    -------
    float
        |(2^{js} |Delta_j f|_{L^q_T(L^p)})_j|_{l^r}
    """
    check_exponent(q, 'q')
    history = traj.block_norm_history(channel, params.p)
    per_block = time_lq(history, traj.times, q, axis=0)
    return weighted_sum(per_block, traj.grid, params)


def besov_history(traj: Trajectory, channel: str, params: BesovParams) -> Array:
    """besov_norm of the channel at every sample"""
    history = traj.block_norm_history(channel, params.p)
    return np.array([weighted_sum(h, traj.grid, params) for h in history])


def time_besov_norm(traj: Trajectory, channel: str, q: Exponent, params: BesovParams) -> float:
    """Plain L^q_T(B^s_{p,r}) norm, the time norm taken last"""
    check_exponent(q, 'q')
    return float(time_lq(besov_history(traj, channel, params), traj.times, q))


def sampling_self_check(traj: Trajectory, channel: str, q: Exponent, params: BesovParams) -> float:
    """Relative change of the Chemin-Lerner norm when every other sample is dropped"""
    full = chemin_lerner_norm(traj, channel, q, params)
    coarse = chemin_lerner_norm(traj.subsample(2), channel, q, params)
    if full == 0.0:
        return 0.0 if coarse == 0.0 else np.inf
    return abs(coarse - full) / full


@dataclass
class InterpolationChain:
    """Three norms of the chain L^1(B^s_{p,1}) <- L~^1(B^{s+e/2}_{p,1}) <- L~^1(B^{s+e}_{p,inf})"""
    plain: float
    tilde_mid: float
    tilde_top: float
    constants: tuple
    holds: bool


def interpolation_chain(traj: Trajectory, channel: str, s: float, p: Exponent, eps: float) -> InterpolationChain:
    """Check the embedding chain on a stored trajectory

    The constants are those of the inhomogeneous sums: 2^{eps/2} from
    the j = -1 block in the first step, sum_{j>=-1} 2^{-j eps/2} in the second.
    """
    if eps <= 0:
        raise ValueError('eps must be positive, got {}'.format(eps))
    d = traj.grid.d
    plain = time_besov_norm(traj, channel, 1, BesovParams(s, p, 1, d))
    mid = chemin_lerner_norm(traj, channel, 1, BesovParams(s + eps / 2, p, 1, d))
    top = chemin_lerner_norm(traj, channel, 1, BesovParams(s + eps, p, np.inf, d))
    c1 = 2.0**(eps / 2)
    c2 = 2.0**(eps / 2) / (1.0 - 2.0**(-eps / 2))
    slack = 1.0 + 1e-12
    holds = plain <= c1 * mid * slack + 1e-300 and mid <= c2 * top * slack + 1e-300
    return InterpolationChain(plain, mid, top, (c1, c2), bool(holds))


#%% Embedding probe
def embedding_admissible(params1: BesovParams, params2: Union[BesovParams, str]) -> Optional[str]:
    """Name of the violated embedding hypothesis, None when admissible"""
    d = params1.d
    if isinstance(params2, str):
        if params2 != 'Linf':
            raise ValueError('Target must be BesovParams or Linf, got {}'.format(params2))
        if params1.s > d / params1.p or (params1.s == d / params1.p and params1.r == 1):
            return None
        return 's > d/p, or s = d/p with r = 1'
    if params1.p > params2.p:
        return 'p1 <= p2'
    bound = params1.s - d / params1.p + d / params2.p
    if params2.s < bound - 1e-14:
        return None
    if abs(params2.s - bound) <= 1e-14:
        return None if params1.r <= params2.r else 'r1 <= r2 at s2 = s1 - d/p1 + d/p2'
    return 's2 <= s1 - d/p1 + d/p2'


@dataclass
class EmbeddingReport:
    """Ratios |f|_2 / |f|_1 over an ensemble"""
    ratios: Array
    max_ratio: float
    refined_max_ratio: Optional[float] = None
    growth: Optional[float] = None
    n_skipped: int = 0


def _target_norm(f: Field, target: Union[BesovParams, str]) -> float:
    if isinstance(target, str):
        return lebesgue_norm(f, np.inf)
    return besov_norm(f, target)


def _ensemble_ratios(ensemble: List[Field], params1, params2):
    ratios = []
    skipped = 0
    for f in ensemble:
        bottom = besov_norm(f, params1)
        if bottom == 0.0:
            skipped += 1
            continue
        ratios.append(_target_norm(f, params2) / bottom)
    return np.array(ratios), skipped


def embedding_probe(
    ensemble: List[Field],
    params1: BesovParams,
    params2: Union[BesovParams, str],
    refined_ensemble: Optional[List[Field]] = None,
) -> EmbeddingReport:
    """Measure the embedding constant of B^{s1}_{p1,r1} into the target

    Parameters
    ----------
    ensemble : List[Field]
        Sample fields
    params1 : BesovParams
        Source space
    params2 : Union[BesovParams, str]
        Target space, or 'Linf'
    refined_ensemble : Optional[List[Field]], optional
        The same fields sampled on a refined grid, by default None

    Returns
    -------
    EmbeddingReport
        Per-sample ratios and maxima; growth is the refined over the base maximum

    Raises
    ------
    HypothesisViolation
        Inadmissible pair of spaces
    """
    violated = embedding_admissible(params1, params2)
    if violated is not None:
        raise HypothesisViolation(violated)
    ratios, skipped = _ensemble_ratios(ensemble, params1, params2)
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    report = EmbeddingReport(ratios, max_ratio, n_skipped=skipped)
    if refined_ensemble is not None:
        fine, _ = _ensemble_ratios(refined_ensemble, params1, params2)
        report.refined_max_ratio = float(np.max(fine)) if fine.size else 0.0
        report.growth = report.refined_max_ratio / max_ratio if max_ratio > 0 else None
    logger.info('Embedding probe over %d fields: max ratio %.6g', len(ratios), max_ratio)
    return report
