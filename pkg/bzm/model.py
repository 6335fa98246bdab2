"""
Zero-Mach heat-conducting flow model

- Coefficients kappa, lambda and the primitives a, b of a density field
- FlowState: density, solenoidal velocity and pressure gradient
  with lazily derived coefficients and source term
- Source term h = lambda div(v x grad a), velocity split v = u + grad b
- Pointwise residuals of the evolution system on a Trajectory
- Lifespan formulas, dyadic rescaling and manufactured solutions

"""

import logging
from functools import cached_property

import numpy as np
from typing import Optional, Dict, Callable, Union

from bzm.spectral import Grid, Field, check_same_grid, gradient, divergence, laplacian, \
    leray_project, dealias, truncate_samples, dealiased_product, advect
from bzm.besov import Trajectory, lebesgue_norm
from bzm.parameter import PhysicalParams, LifespanParams
from bzm.doe import taylor_green
from bzm.errors import NonSolenoidalError, InsufficientSamplesError, IncompatibleScaleError, \
    DomainViolation, ComponentMismatchError

logger = logging.getLogger(__name__)

# velocity fields are solenoidal to this tolerance in L^inf
solenoidal_tol = 1e-10


#%% Coefficients
def coefficients_from_density(rho: Field, params: PhysicalParams) -> Dict[str, Union[Field, float]]:
    """Coefficients of the model as functions of the density

    Parameters
    ----------
    rho : Field
        Scalar density
    params : PhysicalParams
        Gas constants and conductivity law

    Returns
    -------
    Dict[str, Union[Field, float]]
        kappa, lambda = 1/rho, a = A(rho), b = B(rho) as Fields, and the
        L^2 norms residual_a of grad a - kappa grad rho and
        residual_b of grad a + rho grad b

    Raises
    ------
    DensityRangeError
        rho outside the validity interval of the law
    """
    if not rho.is_scalar:
        raise ComponentMismatchError('Density must be a scalar field')
    params.check_density(rho.samples)
    grid = rho.grid
    values = rho.samples
    kappa = Field(grid, samples=params.kappa(values))
    lam = Field(grid, samples=1.0 / values)
    a = Field(grid, samples=params.primitive_a(values))
    b = Field(grid, samples=params.primitive_b(values))

    grad_a = gradient(a)
    grad_rho = gradient(rho)
    residual_a = lebesgue_norm(grad_a - kappa * grad_rho, 2)
    residual_b = lebesgue_norm(grad_a + rho * gradient(b), 2)
    return {'kappa': kappa, 'lambda': lam, 'a': a, 'b': b,
            'residual_a': residual_a, 'residual_b': residual_b}


def divergence_of_outer(v: Field, w: Field) -> Field:
    """div(v x w) with (div M)_k = sum_i d_i M_ik, the outer product dealiased"""
    grid = check_same_grid(v, w)
    d = grid.d
    if not (v.is_vector and w.is_vector):
        raise ComponentMismatchError('Outer product needs two vector fields')
    V = dealias(v).samples
    W = dealias(w).samples
    tensor = (V[:, None] * W[None]).reshape((d * d,) + grid.shape)
    return divergence(truncate_samples(grid, tensor))


#%% Flow state
class FlowState():
    """
    FlowState class,
    density, divergence-free velocity and pressure gradient at one instant

    Coefficients and the source term are derived on first access and cached;
    operations that change a state return a new one.
    """
    def __init__(
        self,
        rho: Field,
        u: Field,
        grad_pi: Optional[Field] = None,
        params: Optional[PhysicalParams] = None,
        rho_bounds: Optional[tuple] = None,
    ):
        """
        Parameters
        ----------
        rho : Field
            Scalar density
        u : Field
            Velocity, divergence free
        grad_pi : Optional[Field], optional
            Pressure gradient, by default zero
        params : Optional[PhysicalParams], optional
            Gas constants and conductivity law, by default PhysicalParams()
        rho_bounds : Optional[tuple], optional
            Declared (rho_min, rho_max), by default the sample extrema

        Raises
        ------
        DensityRangeError
            rho outside the validity interval or the declared bounds
        NonSolenoidalError
            |div u|_inf above 1e-10
        """
        grid = check_same_grid(rho, u)
        if not rho.is_scalar or not u.is_vector:
            raise ComponentMismatchError('FlowState needs a scalar density and a vector velocity')
        self.grid = grid
        self.params = params if params is not None else PhysicalParams()
        self.params.check_density(rho.samples)
        lo, hi = float(np.min(rho.samples)), float(np.max(rho.samples))
        if rho_bounds is not None:
            if lo < rho_bounds[0] or hi > rho_bounds[1]:
                raise DomainViolation('Density range [{:.6g}, {:.6g}] leaves the declared bounds {}'.format(lo, hi, rho_bounds))
            lo, hi = rho_bounds
        if lo <= 0:
            raise DomainViolation('Density must be positive, got minimum {}'.format(lo))
        self.rho_min, self.rho_max = lo, hi

        div_u = lebesgue_norm(divergence(u), np.inf)
        if div_u > solenoidal_tol:
            raise NonSolenoidalError('Velocity divergence {:.3e} exceeds {:.0e}'.format(div_u, solenoidal_tol))

        self.rho = rho
        self.u = u
        self.grad_pi = grad_pi if grad_pi is not None else Field.zeros(grid, grid.d)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, i: int, params: Optional[PhysicalParams] = None) -> 'FlowState':
        """State stored at sample i of a trajectory"""
        grad_pi = traj.channel('grad_pi')[i] if traj.has_channel('grad_pi') else None
        return cls(traj.channel('rho')[i], traj.channel('u')[i], grad_pi, params)

    @cached_property
    def coefficients(self) -> Dict[str, Union[Field, float]]:
        return coefficients_from_density(self.rho, self.params)

    @property
    def kappa(self) -> Field:
        return self.coefficients['kappa']

    @property
    def lam(self) -> Field:
        return self.coefficients['lambda']

    @property
    def a(self) -> Field:
        return self.coefficients['a']

    @property
    def b(self) -> Field:
        return self.coefficients['b']

    @property
    def varrho(self) -> Field:
        return self.rho - 1.0

    @cached_property
    def v(self) -> Field:
        """Full velocity u + grad b"""
        return self.u + gradient(self.b)

    @cached_property
    def h(self) -> Field:
        return source_h(self)

    @cached_property
    def h_expansion_gap(self) -> float:
        """Relative L^2 gap between the compact and expanded source term"""
        return source_h_forms(self)['relative_gap']

    def replace(self, **kwargs) -> 'FlowState':
        """Copy with some of rho, u, grad_pi replaced"""
        values = dict(rho=self.rho, u=self.u, grad_pi=self.grad_pi)
        values.update(kwargs)
        return FlowState(params=self.params, **values)

    def __repr__(self):
        return 'FlowState(rho in [{:.4g}, {:.4g}] on {})'.format(self.rho_min, self.rho_max, self.grid)


#%% Source term and velocity split
def source_h_forms(state: FlowState) -> Dict[str, Union[Field, float]]:
    """Compact and expanded forms of the source term

    compact = lambda div(v x grad a),
    expanded = lambda (Lap b grad a + (u . grad) grad a + (grad b . grad) grad a)

    Returns
    -------
    Dict[str, Union[Field, float]]
        compact, expanded and relative_gap (L^2)
    """
    grad_a = gradient(state.a)
    grad_b = gradient(state.b)
    compact = state.lam * divergence_of_outer(state.v, grad_a)
    expanded_div = dealiased_product(laplacian(state.b), grad_a) + advect(state.u, grad_a) + advect(grad_b, grad_a)
    expanded = state.lam * expanded_div
    gap = lebesgue_norm(compact - expanded, 2)
    scale = lebesgue_norm(compact, 2)
    relative = gap / scale if scale > 0 else gap
    return {'compact': compact, 'expanded': expanded, 'relative_gap': relative}


def source_h(state: FlowState) -> Field:
    """Source term h = lambda div(v x grad a) of the velocity equation

    Parameters
    ----------
    state : FlowState
        Current state; v is rebuilt as u + grad b

    Returns
    -------
    Field
        Vector field h, zero for constant density
    """
    return state.lam * divergence_of_outer(state.v, gradient(state.a))


def velocity_split(v: Field, rho: Field, params: PhysicalParams) -> Dict[str, Union[Field, float]]:
    """Split v into its solenoidal part u and gradient part

    Returns
    -------
    Dict[str, Union[Field, float]]
        u = P v, q_part = v - u and compatibility_residual,
        the L^2 norm of grad B(rho) - q_part
    """
    check_same_grid(v, rho)
    u = leray_project(v)
    q_part = v - u
    b = Field(rho.grid, samples=params.primitive_b(rho.samples))
    residual = lebesgue_norm(gradient(b) - q_part, 2)
    return {'u': u, 'q_part': q_part, 'compatibility_residual': residual}


def velocity_join(u: Field, b: Field, tol: Optional[float] = 1e-8) -> Field:
    """Full velocity v = u + grad b

    Raises
    ------
    NonSolenoidalError
        |div u|_inf above tol
    """
    check_same_grid(u, b)
    div_u = lebesgue_norm(divergence(u), np.inf)
    if div_u > tol:
        raise NonSolenoidalError('Velocity divergence {:.3e} exceeds {:.0e}'.format(div_u, tol))
    return u + gradient(b)


#%% Residuals
def total_mass(rho: Field) -> float:
    """Integral of a scalar field over the torus"""
    return float(rho.mean()[0] * rho.grid.period**rho.grid.d)


def density_operator(rho: Field, u: Field, kappa: Field) -> Field:
    """u . grad rho - div(kappa grad rho)"""
    return advect(u, rho) - divergence(dealiased_product(kappa, gradient(rho)))


def momentum_terms(state: FlowState) -> Dict[str, Field]:
    """Spatial terms of the velocity equation: transport (v . grad) u and div(v x grad a)"""
    return {'transport': advect(state.v, state.u),
            'flux': divergence_of_outer(state.v, gradient(state.a))}


def system_residual(traj: Trajectory, i: int, params: Optional[PhysicalParams] = None) -> Dict[str, float]:
    """L^2 residuals of the evolution system at sample i

    The time derivative is the centered difference over samples i - 1, i + 1.
    Forcing channels forcing_rho and forcing_u are subtracted when stored.

    Parameters
    ----------
    traj : Trajectory
        Channels rho, u, grad_pi
    i : int
        Sample index with neighbours on both sides
    params : Optional[PhysicalParams], optional
        Gas constants, by default those in traj.metadata['params'] or PhysicalParams()

    Returns
    -------
    Dict[str, float]
        density, momentum (divided form), momentum_pre (multiplied by rho),
        momentum_difference (lambda times the second minus the first)
        and divergence (L^inf of div u)

    Raises
    ------
    InsufficientSamplesError
        i has no neighbour on one side
    """
    if i < 1 or i > traj.n_samples - 2:
        raise InsufficientSamplesError('Sample {} needs neighbours, trajectory has {} samples'.format(i, traj.n_samples))
    if params is None:
        params = traj.metadata.get('params', PhysicalParams())
    times = traj.times
    dt = times[i + 1] - times[i - 1]
    rho_ch, u_ch = traj.channel('rho'), traj.channel('u')
    grad_pi = traj.channel('grad_pi')[i] if traj.has_channel('grad_pi') else Field.zeros(traj.grid, traj.grid.d)

    rho, u = rho_ch[i], u_ch[i]
    coeffs = coefficients_from_density(rho, params)
    lam, b, a = coeffs['lambda'], coeffs['b'], coeffs['a']
    drho = (rho_ch[i + 1] - rho_ch[i - 1]) / dt
    du = (u_ch[i + 1] - u_ch[i - 1]) / dt

    density = drho + density_operator(rho, u, coeffs['kappa'])
    if traj.has_channel('forcing_rho'):
        density = density - traj.channel('forcing_rho')[i]

    v = u + gradient(b)
    transport = advect(v, u)
    flux = divergence_of_outer(v, gradient(a))
    forcing_u = traj.channel('forcing_u')[i] if traj.has_channel('forcing_u') else Field.zeros(traj.grid, traj.grid.d)
    # raw pointwise products keep lambda times the first equal to the second
    momentum = du + transport + lam * grad_pi - lam * flux - forcing_u
    momentum_pre = rho * (du + transport) + grad_pi - flux - rho * forcing_u
    difference = lam * momentum_pre - momentum

    return {'density': lebesgue_norm(density, 2),
            'momentum': lebesgue_norm(momentum, 2),
            'momentum_pre': lebesgue_norm(momentum_pre, 2),
            'momentum_difference': lebesgue_norm(difference, 2),
            'divergence': lebesgue_norm(divergence(u), np.inf)}


#%% Lifespan
def lifespan_lower_bound(U0: float, R0: float, lp: Optional[LifespanParams] = None) -> float:
    """Lower bound L/(1 + U0 + R0^ell) of the existence time

    Parameters
    ----------
    U0 : float
        Norm of the initial velocity
    R0 : float
        Norm of the initial density perturbation
    lp : Optional[LifespanParams], optional
        Constants L and ell, by default LifespanParams()

    Raises
    ------
    DomainViolation
        Negative norms
    """
    if U0 < 0 or R0 < 0:
        raise DomainViolation('Norms must be nonnegative, got U0 = {}, R0 = {}'.format(U0, R0))
    lp = lp if lp is not None else LifespanParams()
    return lp.L / (1.0 + U0 + R0**lp.ell)


def scaled_lifespan_bound(U0: float, R0: float, lp: Optional[LifespanParams] = None) -> float:
    """Lower bound obtained through the rescaling with eps^2 = U0

    eps^-2 L / (1 + eps^-1 R0^ell), infinite for U0 = 0
    """
    if U0 < 0 or R0 < 0:
        raise DomainViolation('Norms must be nonnegative, got U0 = {}, R0 = {}'.format(U0, R0))
    lp = lp if lp is not None else LifespanParams()
    if U0 == 0:
        return np.inf
    eps = np.sqrt(U0)
    return lp.L / (eps**2 + eps * R0**lp.ell)


#%% Rescaling
def _dyadic_exponent(eps: float) -> int:
    if not eps > 0:
        raise IncompatibleScaleError('eps must be positive, got {}'.format(eps))
    m = -np.log2(eps)
    if m < -1e-12 or abs(m - round(m)) > 1e-12:
        raise IncompatibleScaleError('eps must be 2^-m with integer m >= 0, got {}'.format(eps))
    return int(round(m))


def tile_field(f: Field, grid: Grid, copies: int, factor: Optional[float] = 1.0) -> Field:
    """factor * f(copies x) sampled on a grid with copies times more points per axis"""
    reps = (1,) + (copies,) * f.grid.d
    return Field(grid, samples=factor * np.tile(f.samples, reps))


def rescale_state(state: FlowState, eps: float) -> FlowState:
    """Rescaled state (rho, u/eps, grad_pi/eps^2)(x/eps)

    Parameters
    ----------
    state : FlowState
        Original state on an N-grid
    eps : float
        Dyadic factor 2^-m

    Returns
    -------
    FlowState
        State on the (N 2^m)-grid of the same torus

    Raises
    ------
    IncompatibleScaleError
        eps not a nonpositive power of two
    """
    m = _dyadic_exponent(eps)
    if m == 0:
        return state
    copies = 2**m
    grid = Grid(state.grid.d, state.grid.N * copies, state.grid.period, state.grid.cutoff)
    return FlowState(tile_field(state.rho, grid, copies),
                     tile_field(state.u, grid, copies, 1.0 / eps),
                     tile_field(state.grad_pi, grid, copies, 1.0 / eps**2),
                     state.params)


channel_scaling = {'rho': 0, 'varrho': 0, 'u': 1, 'grad_pi': 2, 'forcing_rho': 2, 'forcing_u': 3}
"""dict: Keys are channel names, values the power of 1/eps applied by the rescaling"""


def rescale_trajectory(traj: Trajectory, eps: float) -> Trajectory:
    """Rescale every stored channel and shrink the times by eps^2

    Raises
    ------
    IncompatibleScaleError
        eps not a nonpositive power of two, or a channel without a known scaling
    """
    m = _dyadic_exponent(eps)
    copies = 2**m
    grid = Grid(traj.grid.d, traj.grid.N * copies, traj.grid.period, traj.grid.cutoff)
    for name in traj.channels:
        if name not in channel_scaling:
            raise IncompatibleScaleError('No scaling known for channel {}'.format(name))
    out = Trajectory(grid, dict(traj.metadata, eps=eps))
    for i, t in enumerate(traj.times):
        fields = {name: tile_field(series[i], grid, copies, eps**(-channel_scaling[name]))
                  for name, series in traj.channels.items()}
        out.append(eps**2 * t, **fields)
    return out


#%% Manufactured solutions
class ManufacturedSolution():
    """
    ManufacturedSolution class,
    smooth exact fields and the forcings that make them solve the system

    rho = 1 + A cos(w t) cos(k (x1 + x2)),
    u = A cos(w t) TG_k (Taylor-Green),
    pi = A cos(w t) sin(k x1) sin(k x2)
    """
    def __init__(
        self,
        grid: Grid,
        params: Optional[PhysicalParams] = None,
        amplitude: Optional[float] = 0.05,
        omega: Optional[float] = 1.0,
        k: Optional[int] = 1,
    ):
        """
        Parameters
        ----------
        grid : Grid
            Grid of the exact fields
        params : Optional[PhysicalParams], optional
            Gas constants, by default PhysicalParams()
        amplitude : Optional[float], optional
            Amplitude A, by default 0.05
        omega : Optional[float], optional
            Angular frequency in time, by default 1.0
        k : Optional[int], optional
            Integer wavenumber, by default 1
        """
        self.grid = grid
        self.params = params if params is not None else PhysicalParams()
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.k = int(k)
        c = grid.scale * self.k
        x = grid.x
        self._rho_shape = Field(grid, samples=np.cos(c * (x[0] + x[1])))
        self._u_shape = taylor_green(grid, 1.0, self.k)
        self._grad_pi_shape = gradient(Field(grid, samples=np.sin(c * x[0]) * np.sin(c * x[1])))

    def _c(self, t: float) -> float:
        return self.amplitude * np.cos(self.omega * t)

    def _dc(self, t: float) -> float:
        return -self.amplitude * self.omega * np.sin(self.omega * t)

    def rho(self, t: float) -> Field:
        return 1.0 + self._c(t) * self._rho_shape

    def u(self, t: float) -> Field:
        return self._c(t) * self._u_shape

    def grad_pi(self, t: float) -> Field:
        return self._c(t) * self._grad_pi_shape

    def state(self, t: float) -> FlowState:
        return FlowState(self.rho(t), self.u(t), self.grad_pi(t), self.params)

    def forcing_rho(self, t: float) -> Field:
        """d_t rho + u . grad rho - div(kappa grad rho) at the exact solution"""
        rho = self.rho(t)
        kappa = Field(self.grid, samples=self.params.kappa(rho.samples))
        return self._dc(t) * self._rho_shape + density_operator(rho, self.u(t), kappa)

    def forcing_u(self, t: float) -> Field:
        """d_t u + (v . grad) u + lambda grad pi - h at the exact solution"""
        state = self.state(t)
        terms = momentum_terms(state)
        return self._dc(t) * self._u_shape + terms['transport'] + state.lam * state.grad_pi - state.lam * terms['flux']

    def trajectory(self, times: Union[list, np.ndarray], forcing: Optional[bool] = True) -> Trajectory:
        """Exact samples at the given times, with the forcing channels when asked"""
        traj = Trajectory(self.grid, {'params': self.params, 'manufactured': True})
        for t in times:
            fields = dict(rho=self.rho(t), u=self.u(t), grad_pi=self.grad_pi(t))
            if forcing:
                fields.update(forcing_rho=self.forcing_rho(t), forcing_u=self.forcing_u(t))
            traj.append(float(t), **fields)
        return traj
