"""
Test Besov, Chemin-Lerner norms and the embedding probe
"""
import numpy as np
import pytest

from bzm.spectral import Field, make_grid
from bzm.besov import Trajectory, lebesgue_norm, block_norms, besov_norm, chemin_lerner_norm, \
    time_besov_norm, besov_history, sampling_self_check, interpolation_chain, embedding_admissible, \
    embedding_probe
from bzm.parameter import BesovParams, critical_params
from bzm.doe import cos_mode, random_fields
from bzm.errors import MissingChannelError, HypothesisViolation, DomainViolation

grid = make_grid(2, 32)
mode3 = cos_mode(grid, [3, 0])

# decaying two-mode trajectory
traj = Trajectory(grid)
for t in np.linspace(0, 1, 11):
    traj.append(t, f=np.exp(-t) * mode3 + np.exp(-2 * t) * cos_mode(grid, [0, 6]))


def test_lebesgue_norm():
    two = Field.constant(grid, 2.0)
    assert lebesgue_norm(two, 2) == pytest.approx(2.0)
    assert lebesgue_norm(two, np.inf) == pytest.approx(2.0)
    assert lebesgue_norm(mode3, 2) == pytest.approx(np.sqrt(0.5), rel=1e-12)
    with pytest.raises(DomainViolation):
        lebesgue_norm(two, 0.5)


def test_single_block_besov_norm():
    # cos(3 x1) lives in block 1 only
    norms = block_norms(mode3, 2)
    assert norms.shape == (1, grid.n_blocks)
    assert norms[0, 2] == pytest.approx(np.sqrt(0.5), rel=1e-12)
    assert np.sum(norms) == pytest.approx(np.sqrt(0.5), rel=1e-12)
    assert besov_norm(mode3, BesovParams(1, 2, 1)) == pytest.approx(2 * np.sqrt(0.5), rel=1e-12)
    assert besov_norm(mode3, BesovParams(-1, 2, np.inf)) == pytest.approx(0.5 * np.sqrt(0.5), rel=1e-12)


def test_trajectory_ordering():
    t = Trajectory(grid)
    with pytest.raises(ValueError):
        t.append(0.5, f=mode3)
    t.append(0.0, f=mode3)
    with pytest.raises(ValueError):
        t.append(0.0, f=mode3)
    with pytest.raises(MissingChannelError):
        t.channel('u')


def test_varrho_channel():
    t = Trajectory.constant(grid, 1.0, rho=1.0 + mode3)
    assert t.has_channel('varrho')
    assert np.allclose(t.channel('varrho')[0].samples, mode3.samples)


def test_chemin_lerner_equals_plain_for_q_r_one():
    params = BesovParams(1, 2, 1)
    assert chemin_lerner_norm(traj, 'f', 1, params) == pytest.approx(time_besov_norm(traj, 'f', 1, params), rel=1e-12)


def test_chemin_lerner_constant_trajectory():
    params = BesovParams(0.5, 2, 2)
    const = Trajectory.constant(grid, 1.0, f=mode3)
    assert chemin_lerner_norm(const, 'f', np.inf, params) == pytest.approx(besov_norm(mode3, params), rel=1e-12)
    assert chemin_lerner_norm(const, 'f', 1, params) == pytest.approx(besov_norm(mode3, params), rel=1e-12)


def test_chemin_lerner_minkowski():
    # L~^inf(B^s_{2,1}) is above L^inf(B^s_{2,1})
    params = BesovParams(1, 2, 1)
    assert chemin_lerner_norm(traj, 'f', np.inf, params) >= time_besov_norm(traj, 'f', np.inf, params) * (1 - 1e-12)
    assert besov_history(traj, 'f', params).shape == (traj.n_samples,)


def test_sampling_self_check():
    assert sampling_self_check(traj, 'f', 1, BesovParams(1, 2, 1)) < 2e-2


def test_interpolation_chain():
    chain = interpolation_chain(traj, 'f', 1.0, 2, 1.0)
    assert chain.holds
    with pytest.raises(ValueError):
        interpolation_chain(traj, 'f', 1.0, 2, 0.0)


def test_embedding_admissible():
    assert embedding_admissible(critical_params(2, 2), 'Linf') is None
    assert embedding_admissible(BesovParams(0.5, 2, 1), 'Linf') is not None
    assert embedding_admissible(BesovParams(2, 2, 1), BesovParams(1, 4, 1)) is None
    assert embedding_admissible(BesovParams(2, 4, 1), BesovParams(1, 2, 1)) == 'p1 <= p2'


def test_embedding_probe():
    grids = [grid, grid.refine(2)]
    ensembles = random_fields(grids, 8, k_max=6, seed=5)
    report = embedding_probe(ensembles[0], critical_params(2, 2), 'Linf', ensembles[1])
    assert report.ratios.shape == (8,)
    assert 0 < report.max_ratio < 10
    # the refined grid contains the coarse samples
    assert 1 - 1e-12 <= report.growth < 1.3
    with pytest.raises(HypothesisViolation):
        embedding_probe(ensembles[0], BesovParams(0.5, 2, 1), 'Linf')
