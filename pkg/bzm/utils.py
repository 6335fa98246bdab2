"""
Utility functions shared by the spectral modules

- PyTorch tensor to numpy array conversion
- Sequence norms (l^r sums) and grid L^p means
- Composite trapezoid integration in time
- Small argument checks


"""

import numpy as np
import torch
from torch import Tensor
from scipy import integrate

from typing import Optional, TypeVar, Union, Sequence

from bzm import device
from bzm.errors import DomainViolation

# Create a type variable for 1D arrays from numpy, np.ndarray
Array = TypeVar('Array')
# Create a type variable for multi-dimensional arrays from numpy, np.ndarray, and call it as a matrix
Matrix = TypeVar('Matrix')

# Create a type variable which is array like (1D) including list, array, 1d tensor
ArrayLike1d = Union[list, Array, Tensor]
# Create a type variable which is matrix like including matrix, tensor, nested list
# This also includes ArrayList1d types
MatrixLike2d = Union[list, Matrix, Tensor]

# Exponents may be infinite
Exponent = Union[int, float]


#%% Type conversion
def np_to_tensor(X: MatrixLike2d) -> Tensor:
    """Converts numpy objects to double precision tensors on bzm.device
    Returns a copy

    Parameters
    ----------
    X : MatrixLike2d
        numpy objects, real or complex

    Returns
    -------
    X: Tensor
        tensor objects
    """
    if isinstance(X, Tensor):
        return X.detach().clone().to(device)
    X = np.asarray(X)
    if np.iscomplexobj(X):
        X = X.astype(np.complex128)
    else:
        X = X.astype(np.float64)

    return torch.from_numpy(np.ascontiguousarray(X)).to(device)


def tensor_to_np(X: MatrixLike2d) -> Matrix:
    """Convert tensor objects to numpy array objects
    Returns a copy with no gradient information

    Parameters
    ----------
    X : MatrixLike2d
        tensor objects

    Returns
    -------
    Matrix
        numpy objects
    """
    if not isinstance(X, np.ndarray):
        X = X.detach().cpu().numpy().copy()
    else:
        X = X.copy()

    return X


#%% Norm helpers
def check_exponent(p: Exponent, name: Optional[str] = 'p'):
    """Check that an integrability or summation exponent lies in [1, inf]

    Raises
    ------
    DomainViolation
        Exponent below 1 or not a number
    """
    if p is None or np.isnan(p) or p < 1:
        raise DomainViolation('{} must lie in [1, inf], got {}'.format(name, p))


def lr_sum(values: ArrayLike1d, r: Exponent) -> float:
    """l^r norm of a finite nonnegative sequence,
    the maximum when r is infinite

    Parameters
    ----------
    values : ArrayLike1d
        Nonnegative sequence
    r : Exponent
        Summation exponent in [1, inf]

    Returns
    -------
    float
        The l^r norm
    """
    values = np.abs(np.asarray(values, dtype=float)).ravel()
    if values.size == 0:
        return 0.0
    if np.isinf(r):
        return float(np.max(values))
    # rescale before the power to avoid overflow on large weights
    top = np.max(values)
    if top == 0.0:
        return 0.0
    return float(top * np.sum((values / top)**r)**(1.0 / r))


def grid_lp(samples: Matrix, p: Exponent, axes: Optional[tuple] = None) -> Union[float, Array]:
    """Unit-volume normalized L^p norm of grid samples

    Parameters
    ----------
    samples : Matrix
        Pointwise magnitudes
    p : Exponent
        Integrability exponent, np.inf for the sample maximum
    axes : Optional[tuple], optional
        Axes to reduce, by default all

    Returns
    -------
    Union[float, Array]
        (mean |f|^p)^(1/p)
    """
    a = np.abs(samples)
    if np.isinf(p):
        return np.max(a, axis=axes)
    top = np.max(a, axis=axes, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    out = np.squeeze(safe, axis=axes) * np.mean((a / safe)**p, axis=axes)**(1.0 / p)
    out = np.where(np.squeeze(top, axis=axes) > 0, out, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def trapezoid(y: ArrayLike1d, t: ArrayLike1d, axis: Optional[int] = 0) -> Union[float, Array]:
    """Composite trapezoid rule on stored sample instants"""
    y = np.asarray(y, dtype=float)
    if len(t) < 2:
        return np.zeros(y.shape[:axis] + y.shape[axis+1:]) if y.ndim > 1 else 0.0
    return integrate.trapezoid(y, x=np.asarray(t, dtype=float), axis=axis)


def cumulative_trapezoid(y: ArrayLike1d, t: ArrayLike1d) -> Array:
    """Running trapezoid integral starting at 0"""
    y = np.asarray(y, dtype=float)
    if len(t) < 2:
        return np.zeros(len(t))
    return integrate.cumulative_trapezoid(y, x=np.asarray(t, dtype=float), initial=0.0)


def time_lq(y: ArrayLike1d, t: ArrayLike1d, q: Exponent, axis: Optional[int] = 0) -> Union[float, Array]:
    """L^q norm in time of nonnegative samples;
    trapezoid for finite q, maximum for q infinite
    """
    y = np.abs(np.asarray(y, dtype=float))
    if np.isinf(q):
        return np.max(y, axis=axis)
    return trapezoid(y**q, t, axis=axis)**(1.0 / q)


def is_power_of_two(n: int) -> bool:
    """True for 1, 2, 4, 8, ..."""
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def as_list(x) -> list:
    """Wrap a scalar into a list"""
    if isinstance(x, (list, tuple)):
        return list(x)
    return [x]


def intersection_norm(norms: Sequence[float]) -> float:
    """Norm of an intersection space X1 n X2 n ..., taken as the sum"""
    return float(np.sum(norms))
