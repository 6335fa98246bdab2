"""
Test the coefficients, flow states, residuals and rescaling of the model
"""
import numpy as np
import pytest

from bzm.spectral import Field, make_grid, gradient
from bzm.besov import lebesgue_norm
from bzm.model import coefficients_from_density, FlowState, source_h_forms, velocity_split, \
    velocity_join, total_mass, system_residual, lifespan_lower_bound, scaled_lifespan_bound, \
    rescale_state, rescale_trajectory, ManufacturedSolution
from bzm.parameter import PhysicalParams, LifespanParams
from bzm.doe import cos_mode, taylor_green, shear_wave
from bzm.errors import NonSolenoidalError, InsufficientSamplesError, IncompatibleScaleError, \
    DensityRangeError, DomainViolation

grid = make_grid(2, 32)
rho = cos_mode(grid, [1, 1], 0.2, offset=1.0)
u = taylor_green(grid, 0.1)


@pytest.mark.parametrize('law', ['constant', 'fickian', 'power'])
def test_primitive_residuals(law):
    params = PhysicalParams(kappa_spec=law, kappa_m=2.0)
    coeffs = coefficients_from_density(rho, params)
    assert coeffs['residual_a'] < 1e-10
    assert coeffs['residual_b'] < 1e-10
    assert np.allclose(coeffs['lambda'].samples * rho.samples, 1.0)


def test_custom_law_matches_power():
    power = PhysicalParams(kappa_spec='power', kappa0=0.1, kappa_m=2.0)
    custom = PhysicalParams(kappa_spec='custom', kappa_func=lambda r: 0.1 * r**2)
    values = np.array([0.5, 1.0, 1.7])
    assert np.allclose(power.primitive_a(values), custom.primitive_a(values), atol=1e-10)
    assert np.allclose(power.primitive_b(values), custom.primitive_b(values), atol=1e-10)


def test_density_range():
    with pytest.raises(DensityRangeError):
        coefficients_from_density(cos_mode(grid, [1, 0], 2.0), PhysicalParams())


def test_flow_state():
    state = FlowState(rho, u)
    assert np.allclose(state.v.samples, (u + gradient(state.b)).samples)
    assert state.h.n_components == 2
    assert state.h_expansion_gap < 1e-8
    with pytest.raises(NonSolenoidalError):
        FlowState(rho, Field.from_function(grid, lambda x, y: [np.sin(x), 0 * y]))
    with pytest.raises(DomainViolation):
        FlowState(rho, u, rho_bounds=(0.9, 1.1))


def test_source_vanishes_for_constant_density():
    state = FlowState(Field.constant(grid, 1.0), shear_wave(grid, 0.3))
    assert lebesgue_norm(state.h, np.inf) < 1e-14


def test_source_forms_agree():
    forms = source_h_forms(FlowState(rho, u))
    assert lebesgue_norm(forms['compact'] - forms['expanded'], 2) < 1e-8


def test_velocity_split_and_join():
    params = PhysicalParams()
    b = Field(grid, samples=params.primitive_b(rho.samples))
    v = velocity_join(u, b)
    split = velocity_split(v, rho, params)
    assert np.allclose(split['u'].samples, u.samples, atol=1e-12)
    assert split['compatibility_residual'] < 1e-10


def test_total_mass():
    assert total_mass(Field.constant(grid, 1.0)) == pytest.approx(4 * np.pi**2)
    assert total_mass(rho) == pytest.approx(4 * np.pi**2)


def test_manufactured_residuals():
    ms = ManufacturedSolution(grid, amplitude=0.05)
    traj = ms.trajectory([0.0, 1e-3, 2e-3])
    residual = system_residual(traj, 1)
    assert residual['density'] < 1e-6
    assert residual['momentum'] < 1e-6
    assert residual['momentum_difference'] < 1e-12
    assert residual['divergence'] < 1e-12
    with pytest.raises(InsufficientSamplesError):
        system_residual(traj, 0)


def test_lifespan_bounds():
    lp = LifespanParams(L=0.1)
    assert lifespan_lower_bound(0.0, 0.0, lp) == pytest.approx(0.1)
    assert lifespan_lower_bound(1.0, 0.0, lp) < lifespan_lower_bound(0.5, 0.0, lp)
    assert scaled_lifespan_bound(0.0, 0.5, lp) == np.inf
    with pytest.raises(DomainViolation):
        lifespan_lower_bound(-1.0, 0.0)
    with pytest.raises(DomainViolation):
        LifespanParams(ell=6)


def test_rescale_state():
    state = FlowState(rho, u)
    scaled = rescale_state(state, 0.5)
    assert scaled.grid.N == 64
    assert lebesgue_norm(scaled.u, np.inf) == pytest.approx(2 * lebesgue_norm(u, np.inf))
    assert np.max(scaled.rho.samples) == pytest.approx(np.max(rho.samples))
    assert rescale_state(state, 1.0) is state
    with pytest.raises(IncompatibleScaleError):
        rescale_state(state, 0.3)


def test_rescale_trajectory():
    ms = ManufacturedSolution(make_grid(2, 16), amplitude=0.05)
    traj = ms.trajectory([0.0, 0.01, 0.02])
    scaled = rescale_trajectory(traj, 0.5)
    assert scaled.times == pytest.approx([0.0, 0.0025, 0.005])
    # the rescaled fields solve the rescaled system
    assert system_residual(scaled, 1)['density'] < 1e-3
