"""
Periodic grids, fields and the dyadic Littlewood-Paley calculus

- Grid: periodic lattice with its discrete frequencies and FFT transforms (PyTorch)
- Field: scalar, vector or tensor function sampled on a Grid
- CutoffPair: the smooth radial cutoffs chi and phi
- Dyadic blocks, low-pass filters, spectral derivatives,
  Leray projection, 2/3-rule dealiasing and Bernstein probes

"""

import logging
import itertools
import functools
from dataclasses import dataclass

import numpy as np
import torch
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from typing import Optional, Union, List, Sequence, Callable

from bzm.utils import Array, Matrix, Exponent, grid_lp, is_power_of_two, check_exponent, \
    np_to_tensor, tensor_to_np
from bzm.errors import InvalidDimensionError, InvalidResolutionError, GridError, \
    GridMismatchError, ComponentMismatchError

logger = logging.getLogger(__name__)


#%% Cutoff functions
class CutoffPair():
    """
    CutoffPair class,
    the radial profile chi, equal to 1 on [0, 3/4], 0 on [4/3, inf)
    and nonincreasing in between, and phi(t) = chi(t/2) - chi(t)

    The transition is the normalized integral of the bump
    exp(-1/(1-t^2)), tabulated and evaluated with a monotone
    cubic (PCHIP) interpolant.
    """
    inner = 3.0 / 4.0
    outer = 4.0 / 3.0

    def __init__(self, n_table: Optional[int] = 2**14):
        """
        Parameters
        ----------
        n_table : Optional[int], optional
            Number of radial samples of the transition, by default 2**14
        """
        s = np.linspace(0.0, 1.0, n_table)
        bump = np.zeros_like(s)
        interior = (s > 0) & (s < 1)
        x = 2.0 * s[interior] - 1.0
        bump[interior] = np.exp(-1.0 / (1.0 - x**2))
        # smooth step from 0 to 1
        step = integrate.cumulative_trapezoid(bump, s, initial=0.0)
        step /= step[-1]

        self.n_table = n_table
        self._radii = self.inner + s * (self.outer - self.inner)
        self._table = PchipInterpolator(self._radii, 1.0 - step)

    def chi(self, t: Union[float, Array]) -> Union[float, Array]:
        """Evaluate chi at radii t"""
        t = np.abs(np.asarray(t, dtype=float))
        shape = t.shape
        t = t.reshape(-1)
        out = np.ones_like(t)
        out[t >= self.outer] = 0.0
        middle = (t > self.inner) & (t < self.outer)
        out[middle] = np.clip(self._table(t[middle]), 0.0, 1.0)
        if len(shape) == 0:
            return float(out[0])
        return out.reshape(shape)

    def phi(self, t: Union[float, Array]) -> Union[float, Array]:
        """Evaluate phi(t) = chi(t/2) - chi(t)"""
        t = np.asarray(t, dtype=float)
        return self.chi(t / 2.0) - self.chi(t)

    def partition_error(self, radii: Array, j_max: int) -> float:
        """Max of |chi + sum_{j=0}^{j_max} phi(2^-j .) - 1| over the radii"""
        radii = np.asarray(radii, dtype=float)
        total = self.chi(radii)
        for j in range(j_max + 1):
            total = total + self.phi(radii / 2.0**j)
        return float(np.max(np.abs(total - 1.0)))


@functools.lru_cache(maxsize=None)
def default_cutoff() -> CutoffPair:
    """Shared CutoffPair with the default tabulation"""
    return CutoffPair()


#%% Grid
class Grid():
    """
    Grid class,
    a periodic lattice of N^d points on the torus [0, period)^d
    together with its frequency set and transforms
    """
    def __init__(
        self,
        d: int,
        N: int,
        period: Optional[float] = 2 * np.pi,
        cutoff: Optional[CutoffPair] = None,
    ):
        """Define the lattice

        Parameters
        ----------
        d : int
            Dimension, 2 or 3
        N : int
            Points per axis, a power of two >= 8
        period : Optional[float], optional
            Box length, by default 2 pi
        cutoff : Optional[CutoffPair], optional
            Radial cutoffs for the dyadic blocks, by default the shared one

        Raises
        ------
        InvalidDimensionError
            d not in {2, 3}
        InvalidResolutionError
            N not a power of two or below 8
        GridError
            Nonpositive period
        """
        if d not in (2, 3):
            raise InvalidDimensionError('Dimension must be 2 or 3, got {}'.format(d))
        if not is_power_of_two(N) or N < 8:
            raise InvalidResolutionError('N must be a power of two >= 8, got {}'.format(N))
        if not period > 0:
            raise GridError('period must be positive, got {}'.format(period))

        self.d = int(d)
        self.N = int(N)
        self.period = float(period)
        self.scale = 2 * np.pi / self.period
        self.shape = (self.N,) * self.d
        self.axes = tuple(range(-self.d, 0))
        self.cutoff = cutoff if cutoff is not None else default_cutoff()

        # integer frequencies in [-N/2, N/2)
        k1d = np.fft.fftfreq(self.N, d=1.0 / self.N)
        self.k = np.stack(np.meshgrid(*([k1d] * self.d), indexing='ij'))
        self.wavevector = self.scale * self.k
        # Nyquist rows are dropped from derivatives
        nyquist = np.abs(self.k) == self.N // 2
        self.k_deriv = np.where(nyquist, 0.0, self.wavevector)
        self.k2_deriv = np.sum(self.k_deriv**2, axis=0)
        self.k_norm = np.sqrt(np.sum(self.wavevector**2, axis=0))
        self.dealias_mask = np.all(np.abs(self.k) <= self.N / 3.0, axis=0)

        # sample coordinates
        x1d = self.period * np.arange(self.N) / self.N
        self.x = np.stack(np.meshgrid(*([x1d] * self.d), indexing='ij'))

        self.j_max = self._block_range()
        multipliers = [self.cutoff.chi(self.k_norm)]
        for j in range(self.j_max + 1):
            multipliers.append(self.cutoff.phi(self.k_norm / 2.0**j))
        # index 0 holds the j = -1 block
        self.block_multipliers = np.stack(multipliers)
        for m in (self.k, self.wavevector, self.k_deriv, self.k2_deriv, self.k_norm,
                  self.dealias_mask, self.x, self.block_multipliers):
            m.setflags(write=False)

    def _block_range(self) -> int:
        top = self.N / 2.0 * self.scale * 0.75
        j_max = int(np.ceil(np.log2(top))) + 1 if top > 1 else 0
        j_max = max(j_max, 0)
        # every grid frequency must be covered by chi(2^-(j_max+1) .)
        while self.cutoff.chi(np.max(self.k_norm) / 2.0**(j_max + 1)) < 1.0:
            j_max += 1
        return j_max

    @property
    def n_blocks(self) -> int:
        """Number of blocks j = -1, ..., j_max"""
        return self.j_max + 2

    @property
    def frequency_set(self) -> Matrix:
        """Integer multi-indices, shape (d, N, ..., N)"""
        return self.k

    def forward(self, samples: Matrix) -> Matrix:
        """Fourier coefficients over the last d axes, zero mode = mean"""
        x = np_to_tensor(np.real(samples))
        X = torch.fft.fftn(x, dim=self.axes, norm='forward')
        return tensor_to_np(X)

    def inverse(self, coeffs: Matrix) -> Matrix:
        """Real samples from Fourier coefficients over the last d axes"""
        X = np_to_tensor(np.asarray(coeffs, dtype=np.complex128))
        x = torch.fft.ifftn(X, dim=self.axes, norm='forward')
        return tensor_to_np(x.real.contiguous())

    def refine(self, factor: Optional[int] = 2) -> 'Grid':
        """Grid with factor times more points per axis"""
        return Grid(self.d, self.N * factor, self.period, self.cutoff)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.d, self.N, self.period) == (other.d, other.N, other.period)

    def __hash__(self):
        return hash((self.d, self.N, self.period))

    def __repr__(self):
        return 'Grid(d={}, N={}, period={})'.format(self.d, self.N, self.period)


def make_grid(d: int, N: int, period: Optional[float] = 2 * np.pi) -> Grid:
    """Create a periodic grid

    Parameters
    ----------
    d : int
        Dimension, 2 or 3
    N : int
        Points per axis, power of two >= 8
    period : Optional[float], optional
        Box length, by default 2 pi

    Returns
    -------
    Grid
        The grid with its frequency set and block multipliers
    """
    grid = Grid(d, N, period)
    logger.debug('Created %s with j_max = %d', grid, grid.j_max)
    return grid


def check_same_grid(*fields: 'Field') -> Grid:
    """Common grid of the fields

    Raises
    ------
    GridMismatchError
        Fields on different grids
    """
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError('Fields live on different grids: {} and {}'.format(grid, f.grid))
    return grid


#%% Field
class Field():
    """
    Field class,
    real function on a Grid with c components

    Samples have shape (c, N, ..., N). The physical samples and the
    spectral coefficients are computed from each other on first access
    and cached; a Field is never modified after construction.
    """
    # numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(
        self,
        grid: Grid,
        samples: Optional[Matrix] = None,
        coeffs: Optional[Matrix] = None,
    ):
        """
        Parameters
        ----------
        grid : Grid
            Underlying grid
        samples : Optional[Matrix], optional
            Physical samples of shape (c, N, ..., N) or (N, ..., N)
        coeffs : Optional[Matrix], optional
            Fourier coefficients with the same shape conventions

        Raises
        ------
        ValueError
            Neither or both representations given, or wrong shape
        """
        if (samples is None) == (coeffs is None):
            raise ValueError('Field: must input exactly one of samples or coeffs.')
        data = samples if samples is not None else coeffs
        data = np.asarray(data)
        if data.shape == grid.shape:
            data = data[None]
        if data.ndim != grid.d + 1 or data.shape[1:] != grid.shape:
            raise ValueError('Field data of shape {} does not match {}'.format(data.shape, grid))

        self.grid = grid
        if samples is not None:
            self._samples = np.asarray(data, dtype=np.float64)
            self._coeffs = None
        else:
            self._samples = None
            self._coeffs = np.asarray(data, dtype=np.complex128)

    #%% Constructors
    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., Union[Array, Sequence[Array]]]) -> 'Field':
        """Field with samples func(x_1, ..., x_d)"""
        values = func(*grid.x)
        if isinstance(values, (list, tuple)):
            values = np.stack([np.broadcast_to(vi, grid.shape) for vi in values])
        else:
            values = np.broadcast_to(values, grid.shape)
        return cls(grid, samples=np.array(values, dtype=np.float64))

    @classmethod
    def zeros(cls, grid: Grid, components: Optional[int] = 1) -> 'Field':
        return cls(grid, samples=np.zeros((components,) + grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: Union[float, Sequence[float]], components: Optional[int] = None) -> 'Field':
        """Constant scalar, or constant vector when value is a sequence"""
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if components is not None and value.size == 1:
            value = np.repeat(value, components)
        samples = np.ones((value.size,) + grid.shape) * value.reshape((-1,) + (1,) * grid.d)
        return cls(grid, samples=samples)

    @classmethod
    def stack(cls, fields: List['Field']) -> 'Field':
        """Concatenate the components of fields on one grid"""
        grid = check_same_grid(*fields)
        if all(f._samples is not None for f in fields):
            return cls(grid, samples=np.concatenate([f._samples for f in fields]))
        return cls(grid, coeffs=np.concatenate([f.coeffs for f in fields]))

    #%% Representations
    @property
    def samples(self) -> Matrix:
        if self._samples is None:
            self._samples = self.grid.inverse(self._coeffs)
        return self._samples

    @property
    def coeffs(self) -> Matrix:
        if self._coeffs is None:
            self._coeffs = self.grid.forward(self._samples)
        return self._coeffs

    @property
    def n_components(self) -> int:
        data = self._samples if self._samples is not None else self._coeffs
        return data.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.n_components == 1

    @property
    def is_vector(self) -> bool:
        return self.n_components == self.grid.d

    def component(self, i: int) -> 'Field':
        """The i-th component as a scalar Field"""
        if self._samples is not None:
            return Field(self.grid, samples=self._samples[i:i+1])
        return Field(self.grid, coeffs=self._coeffs[i:i+1])

    def components(self) -> List['Field']:
        return [self.component(i) for i in range(self.n_components)]

    def magnitude(self) -> Matrix:
        """Pointwise Euclidean norm over the components"""
        return np.sqrt(np.sum(self.samples**2, axis=0))

    def apply(self, multiplier: Matrix) -> 'Field':
        """Fourier multiplier, broadcast over the components"""
        return Field(self.grid, coeffs=self.coeffs * multiplier)

    def map(self, func: Callable[[Matrix], Matrix]) -> 'Field':
        """Pointwise nonlinear function of the samples"""
        return Field(self.grid, samples=func(self.samples))

    def mean(self) -> Array:
        """Mean of each component"""
        return np.mean(self.samples, axis=self.grid.axes)

    #%% Arithmetic
    def _combine(self, other, op) -> 'Field':
        if isinstance(other, Field):
            check_same_grid(self, other)
            if self._samples is None and other._samples is None:
                return Field(self.grid, coeffs=op(self._coeffs, other._coeffs))
            return Field(self.grid, samples=op(self.samples, other.samples))
        if self._samples is not None:
            return Field(self.grid, samples=op(self._samples, other))
        # constants only touch the zero mode
        coeffs = self._coeffs.copy()
        zero = (slice(None),) + (0,) * self.grid.d
        coeffs[zero] = op(coeffs[zero], other)
        return Field(self.grid, coeffs=coeffs)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        if self._samples is not None:
            return Field(self.grid, samples=-self._samples)
        return Field(self.grid, coeffs=-self._coeffs)

    def __mul__(self, other):
        """Scaling, or the raw (aliased) pointwise product with another Field"""
        if isinstance(other, Field):
            check_same_grid(self, other)
            return Field(self.grid, samples=self.samples * other.samples)
        if self._samples is not None:
            return Field(self.grid, samples=self._samples * other)
        return Field(self.grid, coeffs=self._coeffs * other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return Field(self.grid, samples=self.samples / other.samples)
        return self.__mul__(1.0 / other)

    def __repr__(self):
        return 'Field({} components on {})'.format(self.n_components, self.grid)


#%% Dyadic blocks
def dyadic_block(f: Field, j: int) -> Field:
    """Littlewood-Paley block Delta_j f

    Parameters
    ----------
    f : Field
        Input field
    j : int
        Block index >= -1

    Returns
    -------
    Field
        chi(D) f for j = -1, phi(2^-j D) f for j >= 0,
        zero beyond the grid's last block

    Raises
    ------
    ValueError
        j < -1
    """
    if j < -1:
        raise ValueError('Block index must be >= -1, got {}'.format(j))
    if j > f.grid.j_max:
        return Field.zeros(f.grid, f.n_components)
    return f.apply(f.grid.block_multipliers[j + 1])


def block_decomposition(f: Field) -> Matrix:
    """Physical samples of all blocks j = -1, ..., j_max

    Returns
    -------
    Matrix
        Array of shape (j_max + 2, c, N, ..., N)
    """
    grid = f.grid
    coeffs = f.coeffs[None] * grid.block_multipliers[:, None]
    return grid.inverse(coeffs)


def low_pass(f: Field, j: int) -> Field:
    """Low-frequency cut-off S_j f = chi(2^-j D) f, zero for j <= 0

    Parameters
    ----------
    f : Field
        Input field
    j : int
        Cut-off index

    Returns
    -------
    Field
        S_j f, equal to the sum of the blocks j' <= j - 1 for j >= 1
    """
    if j <= 0:
        return Field.zeros(f.grid, f.n_components)
    return f.apply(f.grid.cutoff.chi(f.grid.k_norm / 2.0**j))


def partial_sums(f: Field) -> Matrix:
    """Samples of sum_{j' <= m-1} Delta_j' f for m = -1, ..., j_max + 1

    Unlike low_pass, the m = 0 entry is Delta_-1 f, which keeps
    the Bony splitting exact on the lowest blocks.

    Returns
    -------
    Matrix
        Array of shape (j_max + 3, c, N, ..., N), entry m + 1 for index m
    """
    blocks = block_decomposition(f)
    sums = np.zeros((blocks.shape[0] + 1,) + blocks.shape[1:])
    sums[1:] = np.cumsum(blocks, axis=0)
    return sums


#%% Differential operators
differential_kinds = ['gradient', 'divergence', 'laplacian']
"""list: Kinds accepted by differentiate"""


def differentiate(f: Field, kind: str) -> Field:
    """Exact spectral derivative

    Parameters
    ----------
    f : Field
        Input field with c components
    kind : str
        gradient (c*d components, index c_i * d + axis),
        divergence (vector -> scalar, or d x d tensor -> vector,
        contracting the first index) or laplacian

    Returns
    -------
    Field
        Differentiated field

    Raises
    ------
    ComponentMismatchError
        Divergence of a field that is neither a vector nor a tensor
    ValueError
        Unknown kind
    """
    grid = f.grid
    d = grid.d
    ik = 1j * grid.k_deriv
    c = f.n_components
    if kind == 'gradient':
        coeffs = f.coeffs[:, None] * ik[None]
        return Field(grid, coeffs=coeffs.reshape((c * d,) + grid.shape))
    if kind == 'divergence':
        if c == d:
            return Field(grid, coeffs=np.sum(ik * f.coeffs, axis=0, keepdims=True))
        if c == d * d:
            tensor = f.coeffs.reshape((d, d) + grid.shape)
            return Field(grid, coeffs=np.sum(ik[:, None] * tensor, axis=0))
        raise ComponentMismatchError('Divergence needs a vector or a d x d tensor field, got {} components'.format(c))
    if kind == 'laplacian':
        return f.apply(-grid.k2_deriv)
    raise ValueError('kind must be one of {}, got {}'.format(differential_kinds, kind))


def gradient(f: Field) -> Field:
    return differentiate(f, 'gradient')


def divergence(f: Field) -> Field:
    return differentiate(f, 'divergence')


def laplacian(f: Field) -> Field:
    return differentiate(f, 'laplacian')


def leray_project(v: Field) -> Field:
    """Projection onto divergence-free vector fields

    v_hat - k (k . v_hat)/|k|^2, the zero mode and modes without a
    differentiable direction pass through

    Raises
    ------
    ComponentMismatchError
        Input is not a vector field
    """
    grid = v.grid
    if not v.is_vector:
        raise ComponentMismatchError('Leray projection needs a vector field, got {} components'.format(v.n_components))
    k = grid.k_deriv
    k2 = grid.k2_deriv
    inv_k2 = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    k_dot_v = np.sum(k * v.coeffs, axis=0)
    return Field(grid, coeffs=v.coeffs - k * (k_dot_v * inv_k2)[None])


def leray_complement(v: Field) -> Field:
    """Gradient part Q v = v - P v"""
    return v - leray_project(v)


#%% Dealiasing
def dealias(f: Field) -> Field:
    """Zero the coefficients with some |k_i| > N/3"""
    return f.apply(f.grid.dealias_mask)


def _broadcast(a: Matrix, b: Matrix):
    # scalar samples broadcast over the components of the other factor
    if a.shape[0] == b.shape[0] or a.shape[0] == 1 or b.shape[0] == 1:
        return a * b
    raise ComponentMismatchError('Cannot multiply fields with {} and {} components'.format(a.shape[0], b.shape[0]))


def truncate_samples(grid: Grid, samples: Matrix) -> Field:
    """Field of the samples with the 2/3-rule truncation applied"""
    return Field(grid, coeffs=grid.forward(samples) * grid.dealias_mask)


def dealiased_product(u: Field, v: Field) -> Field:
    """Pointwise product with the 2/3 rule

    Both factors and the result are truncated to |k_i| <= N/3,
    so the retained modes carry no aliasing error.
    A scalar factor multiplies every component of the other.
    """
    grid = check_same_grid(u, v)
    return truncate_samples(grid, _broadcast(dealias(u).samples, dealias(v).samples))


def advect(w: Field, f: Field) -> Field:
    """Dealiased transport term (w . grad) f, componentwise in f"""
    grid = check_same_grid(w, f)
    if not w.is_vector:
        raise ComponentMismatchError('Drift must be a vector field, got {} components'.format(w.n_components))
    d = grid.d
    W = dealias(w).samples
    G = dealias(gradient(f)).samples.reshape((f.n_components, d) + grid.shape)
    return truncate_samples(grid, np.sum(W[None] * G, axis=1))


#%% Bernstein probe
@dataclass
class BernsteinReport:
    """Measured Bernstein ratios of one block"""
    j: int
    k: int
    p: float
    q: float
    ratio: Optional[float]
    annulus_ratio: Optional[float]
    degenerate: bool


def derivative_magnitude(f: Field, order: int) -> Matrix:
    """Pointwise Frobenius norm of the order-th derivative tensor of a scalar field"""
    grid = f.grid
    if order == 0:
        return np.abs(f.samples[0])
    total = np.zeros(grid.shape)
    ik = 1j * grid.k_deriv
    for alpha in itertools.product(range(grid.d), repeat=order):
        symbol = np.ones(grid.shape, dtype=complex)
        for axis in alpha:
            symbol = symbol * ik[axis]
        total += f.apply(symbol).samples[0]**2
    return np.sqrt(total)


def bernstein_probe(f: Field, j: int, deriv_order: int, p: Exponent, q: Exponent) -> BernsteinReport:
    """Measure the Bernstein ratios of the block Delta_j f

    Parameters
    ----------
    f : Field
        Scalar field
    j : int
        Block index >= -1
    deriv_order : int
        Derivative order k >= 0
    p : Exponent
        Integrability of the reference norm
    q : Exponent
        Integrability of the measured norm, q >= p

    Returns
    -------
    BernsteinReport
        ratio = |grad^k Delta_j f|_q / (2^{j(k + d(1/p - 1/q))} |Delta_j f|_p)
        and, for j >= 0, annulus_ratio = |grad^k Delta_j f|_p / (2^{jk} |Delta_j f|_p);
        degenerate with no ratios when the block is empty

    Raises
    ------
    ValueError
        q < p, negative order or vector input
    """
    check_exponent(p, 'p')
    check_exponent(q, 'q')
    if q < p:
        raise ValueError('q must be >= p, got p = {}, q = {}'.format(p, q))
    if deriv_order < 0:
        raise ValueError('Derivative order must be >= 0, got {}'.format(deriv_order))
    if not f.is_scalar:
        raise ComponentMismatchError('Bernstein probe needs a scalar field')

    d = f.grid.d
    block = dyadic_block(f, j)
    reference = np.max(np.abs(f.coeffs))
    if reference == 0.0 or np.max(np.abs(block.coeffs)) <= 1e-14 * reference:
        return BernsteinReport(j, deriv_order, p, q, None, None, True)

    block_p = grid_lp(block.samples[0], p)
    deriv = derivative_magnitude(block, deriv_order)
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    ratio = grid_lp(deriv, q) / (2.0**(j * (deriv_order + d * (inv_p - inv_q))) * block_p)
    annulus = None
    if j >= 0:
        annulus = grid_lp(deriv, p) / (2.0**(j * deriv_order) * block_p)
    return BernsteinReport(j, deriv_order, p, q, float(ratio),
                           None if annulus is None else float(annulus), False)
