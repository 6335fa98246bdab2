"""
Test the heat semigroup, the linear steps, the pressure solve,
evolve and the Picard iteration
"""
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bzm.spectral import Field, make_grid, gradient, divergence, leray_project, advect
from bzm.besov import Trajectory, lebesgue_norm, besov_norm, chemin_lerner_norm
from bzm.model import ManufacturedSolution, total_mass
from bzm.parameter import BesovParams, PhysicalParams, MonitorConfig
from bzm.solvers import heat_semigroup, heat_block_decay, heat_smallness_time, density_step, \
    pressure_solve, velocity_step, evolve, picard_driver, cfl_number
from bzm.doe import cos_mode, taylor_green, random_field, random_solenoidal
from bzm.utils import time_lq
from bzm.errors import NegativeTimeError, DomainViolation, KappaDegenerateError, CFLViolation, \
    LambdaDegenerateError, NonSolenoidalError

grid = make_grid(2, 32)
small = make_grid(2, 16)
x = grid.x


#%% Heat semigroup
def test_heat_semigroup():
    f = cos_mode(grid, [3, 0])
    assert heat_semigroup(f, 0.0) is f
    assert np.allclose(heat_semigroup(f, 0.1).samples, np.exp(-0.9) * f.samples, atol=1e-14)
    with pytest.raises(NegativeTimeError):
        heat_semigroup(f, -1.0)


def test_heat_block_decay():
    f = cos_mode(grid, [3, 0]) + cos_mode(grid, [0, 6]) + cos_mode(grid, [12, 0])
    table = heat_block_decay(f, [0.01, 0.05])
    active = table[~table['degenerate']]
    assert list(active['j']) == [1, 2, 3]
    # |k|^2 / 4^j = 9/4 for |k| = 3 2^{j-1}
    assert np.allclose(active['c_min'], 2.25, rtol=1e-8)
    assert np.allclose(active['c_max'], 2.25, rtol=1e-8)
    assert bool(table[table['j'] == 0]['degenerate'].iloc[0])


def test_heat_smallness_time():
    amplitude = 0.02
    f = cos_mode(grid, [3, 0], amplitude)
    params = BesovParams(1, 2, 1)
    result = heat_smallness_time(f, 0.1, params)
    assert result.reached
    assert 0 < result.T_star < 1
    index = int(np.searchsorted(result.times, result.T_star))
    combined = np.maximum(result.norm_l2, result.norm_l1)
    assert combined[index] <= 0.01
    assert combined[index + 1] > 0.01
    # block 1 alone: 2^{s+2} |f|_2 (1 - e^{-9T})/9
    expected = 8 * amplitude / np.sqrt(2) * (1 - np.exp(-9 * result.times)) / 9
    assert np.allclose(result.norm_l1, expected, rtol=1e-3, atol=1e-12)
    # a larger budget never shortens the time
    assert heat_smallness_time(f, 0.2, params).T_star >= result.T_star
    with pytest.raises(DomainViolation):
        heat_smallness_time(f, 0.0, params)


def test_heat_smallness_zero_data_keeps_horizon():
    result = heat_smallness_time(Field.zeros(grid, 1), 0.1, BesovParams(1, 2, 1), horizon=0.5)
    assert result.reached
    assert result.T_star == 0.5
    assert result.achieved == 0.0


def test_heat_smallness_unreachable():
    result = heat_smallness_time(cos_mode(grid, [3, 0], 10.0), 0.01, BesovParams(1, 2, 1))
    assert not result.reached
    assert result.T_star == 0.0
    assert result.achieved > 1e-4


#%% Density step
def test_density_step_is_heat_flow():
    rho = cos_mode(grid, [3, 0], 0.1, offset=1.0)
    kappa = Field.constant(grid, 1.0)
    out = density_step(rho, None, kappa, dt=0.01)
    expected = 1.0 + 0.1 * np.exp(-0.09) * np.cos(3 * x[0])
    assert np.allclose(out.samples[0], expected, atol=1e-8)
    out_cn = density_step(rho, None, kappa, dt=0.01, scheme='fully_spectral_picard')
    assert np.allclose(out_cn.samples[0], expected, atol=1e-5)


def test_density_step_keeps_constants():
    rho = Field.constant(grid, 1.3)
    params = PhysicalParams()
    kappa = Field(grid, samples=params.kappa(rho.samples))
    out = density_step(rho, taylor_green(grid, 0.5), kappa, dt=0.01)
    assert np.allclose(out.samples, 1.3, atol=1e-13)


def test_density_step_variable_kappa_time_dependent():
    rho = cos_mode(grid, [1, 1], 0.1, offset=1.0)
    kappa = lambda t: Field.from_function(grid, lambda x1, x2: 0.1 + 0.05 * np.cos(x1) * np.exp(-t))
    drift = lambda t: taylor_green(grid, 0.2 * (1 + t))
    out = density_step(rho, drift, kappa, dt=0.01, t=0.5)
    # mass is conserved and the extrema do not grow
    assert total_mass(out) == pytest.approx(total_mass(rho), rel=1e-12)
    assert np.max(out.samples) <= np.max(rho.samples) + 1e-8
    assert np.min(out.samples) >= np.min(rho.samples) - 1e-8


def test_density_step_errors():
    rho = Field.constant(grid, 1.0)
    with pytest.raises(KappaDegenerateError):
        density_step(rho, None, Field.constant(grid, 0.1), kappa_min=0.2)
    with pytest.raises(CFLViolation):
        density_step(rho, taylor_green(grid, 10.0), Field.constant(grid, 0.1), dt=0.1)
    with pytest.raises(NonSolenoidalError):
        density_step(rho, Field.from_function(grid, lambda x1, x2: [np.sin(x1), 0 * x2]), Field.constant(grid, 0.1))
    with pytest.raises(ValueError):
        density_step(rho, None, Field.constant(grid, 0.1), scheme='euler')


#%% Pressure
def test_pressure_constant_lambda():
    g = Field.from_function(grid, lambda x1, x2: np.cos(x1) * np.cos(2 * x2))
    result = pressure_solve(Field.constant(grid, 1.0), gradient(g))
    assert np.allclose(result['grad_pi'].samples, gradient(g).samples, atol=1e-9)
    assert result['residual'] <= 1e-10
    assert abs(result['pi'].mean()[0]) < 1e-14


def test_pressure_solenoidal_rhs():
    result = pressure_solve(Field.constant(grid, 1.0), taylor_green(grid))
    assert lebesgue_norm(result['grad_pi'], 2) < 1e-10


def test_pressure_manufactured():
    lam = Field.from_function(grid, lambda x1, x2: 1.0 + 0.3 * np.cos(x1))
    pi = Field.from_function(grid, lambda x1, x2: np.sin(x1) * np.cos(x2))
    F = lam * gradient(pi) + random_solenoidal(grid, 3, seed=4)
    result = pressure_solve(lam, F)
    assert np.allclose(result['grad_pi'].samples, gradient(pi).samples, atol=1e-8)
    assert result['energy_ok']
    with pytest.raises(LambdaDegenerateError):
        pressure_solve(Field.constant(grid, -1.0), F)


def test_pressure_energy_bound():
    for seed in range(32):
        rho = 1.0 + random_field(small, k_max=3, seed=seed, amplitude=0.5)
        lam = Field(small, samples=1.0 / rho.samples)
        F = random_field(small, k_max=5, components=2, seed=100 + seed)
        result = pressure_solve(lam, F)
        assert result['energy_ok']
        residual = divergence(lam * result['grad_pi'] - F)
        assert lebesgue_norm(residual, 2) <= 1e-9 * lebesgue_norm(divergence(F), 2)


#%% Velocity step
def test_velocity_step_absorbs_gradients():
    u = taylor_green(grid, 0.2)
    g = Field.from_function(grid, lambda x1, x2: np.sin(2 * x1) * np.cos(x2))
    out = velocity_step(u, None, Field.constant(grid, 1.0), None, 0.01, forcing=gradient(g))
    assert np.allclose(out['u_out'].samples, u.samples, atol=1e-10)
    with pytest.raises(NonSolenoidalError):
        velocity_step(Field.from_function(grid, lambda x1, x2: [np.sin(x1), 0 * x2]), None,
                      Field.constant(grid, 1.0), None, 0.01)


def test_velocity_step_energy():
    u = random_solenoidal(grid, 3, seed=7)
    drift = taylor_green(grid)
    out = velocity_step(u, drift, Field.constant(grid, 1.0), None, 0.01)
    energy = lebesgue_norm(u, 2)**2
    assert abs(lebesgue_norm(out['u_out'], 2)**2 - energy) <= 1e-5 * energy
    assert np.max(np.abs(divergence(out['u_out']).samples)) < 1e-10


def test_velocity_step_convergence():
    # frozen drift, one step against a fine reference
    u = random_solenoidal(small, 2, seed=8)
    drift = taylor_green(small, 0.5)
    lam = Field.constant(small, 1.0)
    rate = lambda w: leray_project(-advect(drift, w))

    def reference(T, n):
        w = u
        h = T / n
        for _ in range(n):
            k1 = rate(w)
            k2 = rate(w + 0.5 * h * k1)
            k3 = rate(w + 0.5 * h * k2)
            k4 = rate(w + h * k3)
            w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return w

    errors = []
    for dt in (0.04, 0.02):
        out = velocity_step(u, drift, lam, None, dt)['u_out']
        errors.append(lebesgue_norm(out - reference(dt, 32), 2))
    # local error of a second order step is O(dt^3)
    assert errors[0] / errors[1] > 6


#%% evolve
def test_evolve_steady():
    traj = evolve(Field.constant(small, 1.0), Field.zeros(small, 2), T=0.1, dt=0.01)
    assert traj.times == pytest.approx([0.0, 0.04, 0.08, 0.1])
    for rho, u in zip(traj.channel('rho'), traj.channel('u')):
        assert np.allclose(rho.samples, 1.0, atol=1e-14)
        assert np.allclose(u.samples, 0.0, atol=1e-14)
    assert not traj.flags['continuation_triggered']
    assert list(traj.to_dataframe().columns) == ['t', 'continuation_sup', 'continuation_integral', 'K', 'W', 'lambda_star']


def test_evolve_euler_reference():
    # rho = 1 keeps lambda = 1 and b = 0, so u solves the projected Euler system
    u0 = random_solenoidal(small, 3, seed=9, amplitude=0.5)
    traj = evolve(Field.constant(small, 1.0), u0, T=0.1, dt=0.01, stride=1)
    rate = lambda w: leray_project(-advect(w, w))
    w = u0
    for _ in range(10):
        w_star = leray_project(w + 0.01 * rate(w))
        w = leray_project(0.5 * w + 0.5 * (w_star + 0.01 * rate(w_star)))
    assert np.allclose(traj.channel('u')[-1].samples, w.samples, atol=1e-6)


def test_evolve_one_dimensional_fickian():
    kappa0 = 0.1
    params = PhysicalParams(kappa_spec='fickian', kappa0=kappa0)
    rho0 = cos_mode(small, [1, 0], 0.2, offset=1.0)
    traj = evolve(rho0, Field.zeros(small, 2), params, T=0.2, dt=0.005, stride=8)

    # rho_t = kappa0 d_xx log(rho) on the x1 line
    N = small.N
    k = np.fft.fftfreq(N, d=1.0 / N)
    k[N // 2] = 0.0

    def dx(values):
        return np.real(np.fft.ifft(1j * k * np.fft.fft(values)))

    def rhs(t, r):
        return kappa0 * dx(dx(r) / r)

    line = rho0.samples[0, :, 0]
    solution = solve_ivp(rhs, (0.0, 0.2), line, method='DOP853', rtol=1e-11, atol=1e-13)
    final = traj.channel('rho')[-1].samples[0]
    assert np.allclose(final, solution.y[:, -1][:, None], atol=1e-5)
    assert lebesgue_norm(traj.channel('u')[-1], np.inf) < 1e-10


def test_evolve_second_order():
    ms = ManufacturedSolution(small, amplitude=0.05)
    forcing = {'rho': ms.forcing_rho, 'u': ms.forcing_u}
    T = 0.4
    errors = []
    for dt in (0.02, 0.01):
        traj = evolve(ms.rho(0.0), ms.u(0.0), ms.params, T=T, dt=dt, forcing=forcing, stride=1000)
        assert traj.T == pytest.approx(T)
        errors.append(lebesgue_norm(traj.channel('rho')[-1] - ms.rho(T), 2)
                      + lebesgue_norm(traj.channel('u')[-1] - ms.u(T), 2))
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_evolve_invariants():
    rho0 = cos_mode(small, [1, 0], 0.05, offset=1.0)
    u0 = taylor_green(small, 0.05)
    traj = evolve(rho0, u0, T=0.2, dt=0.01, stride=1)
    mass = total_mass(rho0)
    lo, hi = np.min(rho0.samples), np.max(rho0.samples)
    for rho, u in zip(traj.channel('rho'), traj.channel('u')):
        assert total_mass(rho) == pytest.approx(mass, rel=1e-10)
        assert lebesgue_norm(divergence(u), np.inf) < 1e-10
        assert lo - 1e-6 <= np.min(rho.samples) and np.max(rho.samples) <= hi + 1e-6
    assert traj.n_samples == 21


def test_evolve_monitor_stops_growing_flow():
    gamma = 2.0
    tg = taylor_green(small)
    forcing = {'u': lambda t: gamma * np.exp(gamma * t) * tg}
    cfg = MonitorConfig(thresholds={'continuation_sup': 2.0}, stride=1)
    traj = evolve(Field.constant(small, 1.0), Field.zeros(small, 2), T=1.0, dt=0.01, monitor=cfg, forcing=forcing)
    assert traj.flags['continuation_triggered']
    assert traj.flags['trigger_quantity'] == 'continuation_sup'
    # |u|_inf = e^{gamma t} - 1 crosses 2 at t = ln(3)/2
    assert np.log(3) / 2 - 0.02 < traj.T < np.log(3) / 2 + 0.05


def test_cfl_number():
    dx = 2 * np.pi / 16
    assert cfl_number(0.1, taylor_green(small)) == pytest.approx(0.1 * 2 / dx, rel=1e-12)


#%% Picard
def test_picard_zero_data():
    result = picard_driver(Field.constant(small, 1.0), Field.zeros(small, 2), T_star=0.02, dt=0.01)
    assert result.converged
    assert len(result.records) == 1
    assert result.records['B_n'].iloc[0] == 0.0


def test_picard_constant_density():
    u0 = taylor_green(small, 0.1)
    result = picard_driver(Field.constant(small, 1.0), u0, T_star=0.02, n_max=3, dt=0.01)
    for traj in result.trajectories:
        for rho in traj.channel('rho'):
            assert np.allclose(rho.samples, 1.0, atol=1e-12)


def test_picard_first_increment_in_tilde_norms():
    rho0 = cos_mode(small, [1, 0], 0.05, offset=1.0)
    u0 = taylor_green(small, 0.05)
    result = picard_driver(rho0, u0, T_star=0.02, n_max=1, dt=0.005)
    first = result.trajectories[1]
    # iterate 0 is (1, 0, 0)
    increment = Trajectory(small)
    for t, rho, u, grad_pi in zip(first.times, first.channel('rho'), first.channel('u'), first.channel('grad_pi')):
        increment.append(t, rho=rho - 1.0, u=u, grad_pi=grad_pi)
    critical = BesovParams(1.0, 2, 1)
    expected = (chemin_lerner_norm(increment, 'rho', np.inf, critical)
                + chemin_lerner_norm(increment, 'rho', 1, critical.replace(s=3.0))
                + chemin_lerner_norm(increment, 'u', np.inf, critical)
                + chemin_lerner_norm(increment, 'grad_pi', 1, critical)
                + time_lq([lebesgue_norm(g, 2) for g in increment.channel('grad_pi')], increment.times, 1))
    assert result.records['B_n'].iloc[0] == pytest.approx(expected, rel=1e-12)


def test_picard_contracts_to_evolve():
    rho0 = cos_mode(small, [1, 0], 0.05, offset=1.0)
    u0 = taylor_green(small, 0.05)
    critical = BesovParams(1.0, 2, 1)

    def sup_distance(a, b):
        return max(besov_norm(f - g, critical) for f, g in zip(a, b))

    for dt in (0.005, 0.0025):
        result = picard_driver(rho0, u0, T_star=0.1, n_max=8, dt=dt)
        B = result.records['B_n'].to_numpy()
        assert np.all(result.records['ratio'].iloc[1:] <= 0.5)
        assert np.all(np.diff(B) <= 0)
        assert not result.stagnated
        traj = evolve(rho0, u0, T=0.1, dt=dt, stride=1)
        last = result.trajectories[-1]
        assert last.n_samples == traj.n_samples
        assert sup_distance(last.channel('rho'), traj.channel('rho')) <= 1e-6
        assert sup_distance(last.channel('u'), traj.channel('u')) <= 1e-6
        if dt == 0.005:
            coarse = last
    # halving the step moves the limit by less than the tolerance
    assert sup_distance(coarse.channel('rho'), last.channel('rho')[::2]) <= 1e-6
    assert sup_distance(coarse.channel('u'), last.channel('u')[::2]) <= 1e-6
