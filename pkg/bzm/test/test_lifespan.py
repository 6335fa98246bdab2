"""
Test the lifespan study and the parabolic Bernstein gains
"""
import numpy as np
import pytest

from bzm.spectral import Field, make_grid
from bzm.lifespan import lifespan_study, lifespan_sweep, parabolic_bernstein, lifespan_space
from bzm.parameter import LifespanParams, MonitorConfig
from bzm.doe import cos_mode

grid = make_grid(2, 16)


def test_zero_data_stays_regular():
    lp = LifespanParams(L=0.1)
    report = lifespan_study(Field.constant(grid, 1.0), Field.zeros(grid, 2), lp=lp)
    assert report.U0 == 0.0 and report.R0 == 0.0
    assert report.bound == pytest.approx(0.1)
    assert report.T_R is None and report.T_U is None
    assert report.stayed_regular
    assert np.all(report.series[['R', 'S', 'U']].values == 0.0)
    assert report.trajectory.T == pytest.approx(0.1)


def test_sweep_horizons_shrink_with_amplitude():
    cfg = MonitorConfig(thresholds={'continuation_integral': 0.05})
    table = lifespan_sweep([0.25, 0.5, 1.0], Field.constant(grid, 1.0), cfg=cfg, T=1.0)
    assert list(table.columns) == ['amplitude', 'U0', 'R0', 'bound', 'stable_horizon', 'triggered']
    assert np.all(np.diff(table['U0']) > 0)
    assert np.all(np.diff(table['stable_horizon']) <= 1e-12)
    assert table['triggered'].iloc[-1] == 'continuation_integral'


def test_parabolic_bernstein_single_modes():
    fine = make_grid(2, 64)
    rho = Field.constant(fine, 1.0)
    for k in (3, 6, 12, 24):
        rho = rho + cos_mode(fine, [k, 0], 0.05)
    kappa = Field.from_function(fine, lambda x1, x2: 1.0 + 0.2 * np.cos(x2))
    table = parabolic_bernstein(rho, kappa)
    active = table[~table['degenerate']]
    assert list(active['j']) == [1, 2, 3, 4]
    # |k|^2 / 4^j with the mean of kappa equal to 1
    assert np.allclose(active['C'], 2.25, rtol=1e-10)
    assert np.all(active['identity_gap'] < 1e-10)


def test_parabolic_bernstein_exponent():
    rho = cos_mode(grid, [3, 0], 0.1, offset=1.0)
    kappa = Field.constant(grid, 1.0)
    with pytest.raises(ValueError):
        parabolic_bernstein(rho, kappa, p=1)
    with pytest.raises(ValueError):
        parabolic_bernstein(rho, kappa, p=np.inf)
    # higher p keeps the gain positive
    table = parabolic_bernstein(rho, kappa, p=4)
    assert np.all(table[~table['degenerate']]['C'] > 0)


def test_lifespan_space():
    assert lifespan_space(3).s == pytest.approx(1.75)
    assert lifespan_space(2).p == 4
