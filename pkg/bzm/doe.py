"""
Generates initial data and randomized designs

Includes named analytic profiles, seeded random band-limited ensembles
that can be sampled on several grids, and latin hypercube parameter designs
"""

import itertools
import numpy as np
from typing import Optional, List, Tuple, Dict, Callable, Sequence

import pyDOE2 as DOE

from bzm.spectral import Grid, Field, leray_project, dyadic_block
from bzm.utils import Array, Matrix, MatrixLike2d, as_list


#%% Analytic profiles
def cos_mode(grid: Grid, k: Sequence[int], amplitude: Optional[float] = 1.0, offset: Optional[float] = 0.0) -> Field:
    """offset + amplitude cos(k . x) in physical frequency units"""
    k = np.asarray(list(k) + [0] * (grid.d - len(k)), dtype=float)
    return Field.from_function(grid, lambda *x: offset + amplitude * np.cos(grid.scale * sum(ki * xi for ki, xi in zip(k, x))))


def taylor_green(grid: Grid, amplitude: Optional[float] = 1.0, k: Optional[int] = 1) -> Field:
    """Divergence-free Taylor-Green type velocity, acting in the (x1, x2) plane"""
    c = grid.scale * k

    def velocity(*x):
        u1 = amplitude * np.cos(c * x[0]) * np.sin(c * x[1])
        u2 = -amplitude * np.sin(c * x[0]) * np.cos(c * x[1])
        return [u1, u2] + [np.zeros_like(x[0])] * (grid.d - 2)

    return Field.from_function(grid, velocity)


def shear_wave(grid: Grid, amplitude: Optional[float] = 1.0, k: Optional[int] = 1) -> Field:
    """u = (amplitude sin(k x2), amplitude sin(k x1), 0), divergence free"""
    c = grid.scale * k

    def velocity(*x):
        return [amplitude * np.sin(c * x[1]), amplitude * np.sin(c * x[0])] + [np.zeros_like(x[0])] * (grid.d - 2)

    return Field.from_function(grid, velocity)


#%% Random band-limited ensembles
def mode_list(d: int, k_max: int) -> Matrix:
    """Integer modes with 0 < |k| <= k_max in a fixed order, shape (n_modes, d)"""
    modes = [k for k in itertools.product(range(-k_max, k_max + 1), repeat=d)
             if 0 < np.sqrt(np.sum(np.square(k))) <= k_max]
    return np.array(modes, dtype=int)


def band_limited_coefficients(
    d: int,
    k_max: int,
    n_fields: int,
    components: Optional[int] = 1,
    seed: Optional[int] = None,
    decay: Optional[float] = 1.0,
) -> Tuple[Matrix, Matrix]:
    """Draw random Fourier coefficients on the modes |k| <= k_max

    Parameters
    ----------
    d : int
        Dimension
    k_max : int
        Largest integer frequency magnitude
    n_fields : int
        Number of fields
    components : Optional[int], optional
        Components per field, by default 1
    seed : Optional[int], optional
        Random seed, by default None
    decay : Optional[float], optional
        Coefficients scale like (1 + |k|)^-decay, by default 1.0

    Returns
    -------
    modes: Matrix
        Integer modes, shape (n_modes, d)
    coeffs: Matrix
        Complex coefficients, shape (n_fields, components, n_modes),
        normalized so that the sum of moduli of each component is 1
    """
    modes = mode_list(d, k_max)
    rng = np.random.RandomState(seed)
    shape = (n_fields, components, len(modes))
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs *= (1.0 + np.sqrt(np.sum(modes**2, axis=1)))**(-decay)
    coeffs /= np.sum(np.abs(coeffs), axis=-1, keepdims=True)
    return modes, coeffs


def fields_from_coefficients(grid: Grid, modes: Matrix, coeffs: Matrix, amplitude: Optional[float] = 1.0) -> List[Field]:
    """Sample f = Re sum_k c_k e^{i k.x} on a grid

    The same (modes, coeffs) give the same continuous fields on every grid
    resolving the modes, so ensembles can be compared under refinement.
    """
    index = tuple(np.mod(modes, grid.N).T)
    fields = []
    for field_coeffs in coeffs:
        full = np.zeros((field_coeffs.shape[0],) + grid.shape, dtype=complex)
        for c, values in enumerate(field_coeffs):
            full[(c,) + index] = amplitude * values
        fields.append(Field(grid, samples=grid.inverse(full)))
    return fields


def random_fields(
    grids: List[Grid],
    n_fields: int,
    k_max: Optional[int] = 6,
    components: Optional[int] = 1,
    seed: Optional[int] = None,
    amplitude: Optional[float] = 1.0,
    decay: Optional[float] = 1.0,
) -> List[List[Field]]:
    """The same random band-limited ensemble on each grid

    Returns
    -------
    List[List[Field]]
        One ensemble per grid
    """
    d = grids[0].d
    modes, coeffs = band_limited_coefficients(d, k_max, n_fields, components, seed, decay)
    return [fields_from_coefficients(g, modes, coeffs, amplitude) for g in grids]


def random_field(grid: Grid, k_max: Optional[int] = 6, components: Optional[int] = 1,
                 seed: Optional[int] = None, amplitude: Optional[float] = 1.0) -> Field:
    """A single random band-limited field"""
    return random_fields([grid], 1, k_max, components, seed, amplitude)[0][0]


def random_solenoidal(grid: Grid, k_max: Optional[int] = 3, seed: Optional[int] = None,
                      amplitude: Optional[float] = 1.0) -> Field:
    """Random divergence-free band-limited vector field with max modulus <= amplitude"""
    v = random_field(grid, k_max, grid.d, seed, amplitude)
    return leray_project(v)


def block_localized(fields: List[Field], j: int) -> List[Field]:
    """Delta_j of every field"""
    return [dyadic_block(f, j) for f in fields]


#%% Parameter designs
def latin_hypercube(
    n_dim: int,
    n_points: int,
    seed: Optional[int] = None,
    criterion: Optional[str] = None
) -> Matrix:
    """Generates latin hypercube design

    Parameters
    ----------
    n_dim : int
        Number of independent variables
    n_points : int
        Total number of points in the design
    seed : Optional[int], optional
        Random seed, by default None
    criterion : Optional[str], optional
        String that tells lhs how to sample the points, by default None
        which simply randomizes the points within the intervals.
        Other options: "center", "maximin", "centermaximin", or "correlation"

    Returns
    -------
    X_unit: Matrix
        Normalized sampling plan with the shape of n_point * n_dim
    """
    X_unit = DOE.lhs(n_dim, samples=n_points, criterion=criterion, random_state=seed)

    return X_unit


def scale_design(X_unit: MatrixLike2d, ranges: MatrixLike2d, log_flags: Optional[List[bool]] = None) -> Matrix:
    """Map a unit design onto ranges, geometrically where log_flags is True"""
    X_unit = np.asarray(X_unit, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    if log_flags is None:
        log_flags = [False] * ranges.shape[0]
    X = np.empty_like(X_unit)
    for i, (lo, hi) in enumerate(ranges):
        if log_flags[i]:
            X[:, i] = np.exp(np.log(lo) + X_unit[:, i] * (np.log(hi) - np.log(lo)))
        else:
            X[:, i] = lo + X_unit[:, i] * (hi - lo)
    return X


def young_design(n_points: int, seed: Optional[int] = None) -> Matrix:
    """Columns (a, b, theta, epsilon) for sweeps of the Young bound"""
    X_unit = latin_hypercube(4, n_points, seed=seed)
    return scale_design(X_unit, [[0.0, 10.0], [0.0, 10.0], [0.01, 0.99], [1e-3, 1e3]],
                        log_flags=[False, False, False, True])


#%% Named initial data
def _density_cos_mode(grid, amplitude, mode, k_max, seed):
    return cos_mode(grid, as_list(mode), amplitude, offset=1.0)


def _density_constant(grid, amplitude, mode, k_max, seed):
    return Field.constant(grid, 1.0)


def _density_random(grid, amplitude, mode, k_max, seed):
    return 1.0 + random_field(grid, k_max, seed=seed, amplitude=amplitude)


def _velocity_taylor_green(grid, amplitude, mode, k_max, seed):
    return taylor_green(grid, amplitude, int(mode))


def _velocity_shear_wave(grid, amplitude, mode, k_max, seed):
    return shear_wave(grid, amplitude, int(mode))


def _velocity_zero(grid, amplitude, mode, k_max, seed):
    return Field.zeros(grid, grid.d)


def _velocity_random(grid, amplitude, mode, k_max, seed):
    return random_solenoidal(grid, 3, seed=seed, amplitude=amplitude)


profiles = {
    'density': {'cos-mode': _density_cos_mode,
                'constant': _density_constant,
                'random': _density_random},
    'velocity': {'taylor-green': _velocity_taylor_green,
                 'shear-wave': _velocity_shear_wave,
                 'zero': _velocity_zero,
                 'random': _velocity_random},
}
"""dict: Keys are density and velocity, values map a profile name to a function
of (grid, amplitude, mode, k_max, seed)"""
