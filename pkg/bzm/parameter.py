"""
Creates the parameter classes of a run

- BesovParams: regularity triplet (s, p, r) with its admissibility flags
- PhysicalParams: gas constants and the conductivity law kappa(rho)
- LifespanParams: constants of the lifespan lower bound
- MonitorConfig: continuation-criterion monitor settings

"""

import numpy as np
from scipy import integrate
from typing import Optional, Callable, Dict, Tuple, Union

from bzm.utils import Array, Exponent, check_exponent
from bzm.errors import DensityRangeError, DomainViolation

#%% Function spaces
class BesovParams():
    """
    BesovParams class,
    stores the triplet (s, p, r) of a Besov space B^s_{p,r}
    on a d-dimensional torus
    """
    def __init__(
        self,
        s: float,
        p: Exponent,
        r: Exponent,
        d: Optional[int] = 2,
    ):
        """Define the space

        Parameters
        ----------
        s : float
            Regularity index
        p : Exponent
            Integrability exponent in [1, inf]
        r : Exponent
            Summation exponent in [1, inf]
        d : Optional[int], optional
            Space dimension, by default 2

        Raises
        ------
        DomainViolation
            p or r below 1
        """
        check_exponent(p, 'p')
        check_exponent(r, 'r')
        self.s = float(s)
        self.p = float(p)
        self.r = float(r)
        self.d = int(d)

    # flags are properties so that they can never go stale
    @property
    def satisfies_lipschitz_condition(self) -> bool:
        """s > 1 + d/p, or s = 1 + d/p with r = 1"""
        critical = 1.0 + self.d / self.p
        return self.s > critical or (np.isclose(self.s, critical, rtol=0, atol=1e-14) and self.r == 1)

    @property
    def satisfies_pressure_condition(self) -> bool:
        """p in [2, 4]"""
        return 2.0 <= self.p <= 4.0

    def replace(self, **kwargs) -> 'BesovParams':
        """Copy with some of (s, p, r, d) replaced"""
        values = dict(s=self.s, p=self.p, r=self.r, d=self.d)
        values.update(kwargs)
        return BesovParams(**values)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.s, self.p, self.r)

    def __repr__(self):
        return 'BesovParams(s={}, p={}, r={}, d={})'.format(self.s, self.p, self.r, self.d)

    def __eq__(self, other):
        if not isinstance(other, BesovParams):
            return NotImplemented
        return self.as_tuple() == other.as_tuple() and self.d == other.d


def critical_params(d: int, p: Optional[Exponent] = 2) -> BesovParams:
    """The critical space B^{d/p}_{p,1}"""
    return BesovParams(d / p, p, 1, d)


#%% Conductivity laws
kappa_laws = ['constant', 'fickian', 'power', 'custom']
"""list: Names of the supported conductivity laws kappa(rho)"""


class PhysicalParams():
    """
    PhysicalParams class,
    stores the gas constants and the law kappa(rho) together with
    the primitives a = A(rho), b = B(rho), A' = kappa, B' = -kappa/rho,
    A(1) = B(1) = 0
    """
    def __init__(
        self,
        gamma: Optional[float] = 1.4,
        P0: Optional[float] = 1.0,
        R_gas: Optional[float] = 1.0,
        kappa_spec: Optional[str] = 'fickian',
        kappa0: Optional[float] = 0.1,
        kappa_m: Optional[float] = 1.0,
        kappa_func: Optional[Callable[[float], float]] = None,
        rho_range: Optional[Tuple[float, float]] = (0.0, np.inf),
    ):
        """Define the gas and the conductivity law

        Parameters
        ----------
        gamma : Optional[float], optional
            Adiabatic index, must exceed 1, by default 1.4
        P0 : Optional[float], optional
            Reference pressure, by default 1.0
        R_gas : Optional[float], optional
            Gas constant, by default 1.0
        kappa_spec : Optional[str], optional
            One of constant, fickian, power or custom, by default 'fickian'
        kappa0 : Optional[float], optional
            Scale of kappa, by default 0.1
        kappa_m : Optional[float], optional
            Exponent of the power law kappa0 rho^m, by default 1.0
        kappa_func : Optional[Callable], optional
            Scalar function rho -> kappa for the custom law, by default None
        rho_range : Optional[Tuple[float, float]], optional
            Open validity interval of the law, by default (0, inf)

        Raises
        ------
        DomainViolation
            Invalid constants or unknown law
        """
        if gamma <= 1:
            raise DomainViolation('gamma must exceed 1, got {}'.format(gamma))
        if P0 <= 0 or R_gas <= 0:
            raise DomainViolation('P0 and R_gas must be positive')
        if kappa_spec not in kappa_laws:
            raise DomainViolation('kappa_spec must be one of {}, got {}'.format(kappa_laws, kappa_spec))
        if kappa_spec != 'custom' and kappa0 <= 0:
            raise DomainViolation('kappa0 must be positive, got {}'.format(kappa0))
        if kappa_spec == 'custom' and kappa_func is None:
            raise DomainViolation('Custom conductivity law: must input kappa_func.')
        lo, hi = rho_range
        if not (0 <= lo < 1 < hi):
            raise DomainViolation('rho_range must contain the reference density 1')

        self.gamma = float(gamma)
        self.P0 = float(P0)
        self.R_gas = float(R_gas)
        self.kappa_spec = kappa_spec
        self.kappa0 = float(kappa0)
        self.kappa_m = float(kappa_m)
        self.kappa_func = kappa_func
        self.rho_range = (float(lo), float(hi))

    @property
    def C_v(self) -> float:
        return self.R_gas / (self.gamma - 1.0)

    @property
    def C_p(self) -> float:
        return self.C_v + self.R_gas

    @property
    def alpha(self) -> float:
        """(gamma - 1)/(gamma P0)"""
        return (self.gamma - 1.0) / (self.gamma * self.P0)

    def alpha_consistency(self) -> float:
        """Absolute gap between the two expressions of alpha"""
        return abs(self.alpha - self.R_gas / (self.C_p * self.P0))

    def check_density(self, rho: Array):
        """Raise if rho leaves the validity interval"""
        rho = np.asarray(rho)
        lo, hi = self.rho_range
        if not np.all(np.isfinite(rho)) or np.min(rho) <= max(lo, 0.0) or np.max(rho) >= hi:
            raise DensityRangeError('Density range [{:.6g}, {:.6g}] outside the validity interval ({}, {}) of the {} law'.format(
                np.nanmin(rho), np.nanmax(rho), lo, hi, self.kappa_spec))

    def kappa(self, rho: Array) -> Array:
        """Pointwise conductivity kappa(rho)"""
        rho = np.asarray(rho, dtype=float)
        if self.kappa_spec == 'constant':
            return np.full_like(rho, self.kappa0)
        if self.kappa_spec == 'fickian':
            return self.kappa0 / rho
        if self.kappa_spec == 'power':
            return self.kappa0 * rho**self.kappa_m
        return np.vectorize(self.kappa_func, otypes=[float])(rho)

    def primitive_a(self, rho: Array) -> Array:
        """A(rho) with A' = kappa, A(1) = 0"""
        rho = np.asarray(rho, dtype=float)
        k0, m = self.kappa0, self.kappa_m
        if self.kappa_spec == 'constant':
            return k0 * (rho - 1.0)
        if self.kappa_spec == 'fickian':
            return k0 * np.log(rho)
        if self.kappa_spec == 'power':
            if m == -1.0:
                return k0 * np.log(rho)
            return k0 * (rho**(m + 1.0) - 1.0) / (m + 1.0)
        return self._quadrature(rho, self.kappa_func)

    def primitive_b(self, rho: Array) -> Array:
        """B(rho) with B' = -kappa/rho, B(1) = 0"""
        rho = np.asarray(rho, dtype=float)
        k0, m = self.kappa0, self.kappa_m
        if self.kappa_spec == 'constant':
            return -k0 * np.log(rho)
        if self.kappa_spec == 'fickian':
            return k0 * (1.0 / rho - 1.0)
        if self.kappa_spec == 'power':
            if m == 0.0:
                return -k0 * np.log(rho)
            return -k0 * (rho**m - 1.0) / m
        return self._quadrature(rho, lambda x: -self.kappa_func(x) / x)

    @staticmethod
    def _quadrature(rho: Array, integrand: Callable[[float], float]) -> Array:
        # samples repeat a lot, integrate each distinct value once
        values, inverse = np.unique(rho, return_inverse=True)
        out = np.array([integrate.quad(integrand, 1.0, v, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
                        for v in values])
        return out[inverse].reshape(rho.shape)

    def to_dict(self) -> Dict[str, Union[float, str]]:
        return dict(gamma=self.gamma, P0=self.P0, R_gas=self.R_gas, kappa_spec=self.kappa_spec,
                    kappa0=self.kappa0, kappa_m=self.kappa_m, rho_min=self.rho_range[0],
                    rho_max=self.rho_range[1])


#%% Lifespan and monitor settings
class LifespanParams():
    """
    LifespanParams class,
    constants of the lower bound L/(1 + U0 + R0^ell)
    """
    def __init__(
        self,
        L: Optional[float] = 0.1,
        ell: Optional[float] = 7.0,
        delta: Optional[float] = 2.0,
        C_energy: Optional[float] = 1.0,
    ):
        """
        Parameters
        ----------
        L : Optional[float], optional
            Positive calibration constant, by default 0.1
        ell : Optional[float], optional
            Exponent, must exceed 6, by default 7.0
        delta : Optional[float], optional
            Interpolation exponent, must exceed 1, by default 2.0
        C_energy : Optional[float], optional
            Constant C in E(t) = exp(C int (1 + U)), by default 1.0

        Raises
        ------
        DomainViolation
            L <= 0, ell <= 6 or delta <= 1
        """
        if L <= 0:
            raise DomainViolation('L must be positive, got {}'.format(L))
        if ell <= 6:
            raise DomainViolation('ell must exceed 6, got {}'.format(ell))
        if delta <= 1:
            raise DomainViolation('delta must exceed 1, got {}'.format(delta))
        if C_energy <= 0:
            raise DomainViolation('C_energy must be positive, got {}'.format(C_energy))
        self.L = float(L)
        self.ell = float(ell)
        self.delta = float(delta)
        self.C_energy = float(C_energy)


monitor_quantities = ['continuation_sup', 'continuation_integral', 'K', 'W', 'lambda_star']
"""list: Names of the monitored quantities that may carry a threshold"""


class MonitorConfig():
    """
    MonitorConfig class,
    settings of the continuation-criterion monitor
    """
    def __init__(
        self,
        sigma: Optional[float] = 0.5,
        p: Optional[Exponent] = 2,
        s: Optional[float] = None,
        r: Optional[Exponent] = 1,
        thresholds: Optional[Dict[str, float]] = None,
        stride: Optional[int] = 4,
        lifespan: Optional[LifespanParams] = None,
        max_principle_tol: Optional[float] = 1e-6,
    ):
        """
        Parameters
        ----------
        sigma : Optional[float], optional
            Positive order of the B^{-sigma}_{p,inf} pressure norm, by default 0.5
        p : Optional[Exponent], optional
            Integrability of the monitored Besov norms, by default 2
        s : Optional[float], optional
            Regularity s of B^s_{p,r}, by default None, i.e. 1 + d/p
        r : Optional[Exponent], optional
            Summation exponent, by default 1
        thresholds : Optional[Dict[str, float]], optional
            Stop thresholds keyed by the names in monitor_quantities,
            by default None, i.e. never stop
        stride : Optional[int], optional
            Steps between stored samples, by default 4
        lifespan : Optional[LifespanParams], optional
            Lifespan constants, by default None, i.e. LifespanParams()
        max_principle_tol : Optional[float], optional
            Allowed overshoot of the density bounds, by default 1e-6

        Raises
        ------
        DomainViolation
            sigma <= 0, stride < 1 or an unknown threshold name
        """
        if sigma <= 0:
            raise DomainViolation('sigma must be positive, got {}'.format(sigma))
        if stride < 1:
            raise DomainViolation('stride must be at least 1, got {}'.format(stride))
        check_exponent(p, 'p')
        check_exponent(r, 'r')
        thresholds = dict(thresholds or {})
        for key in thresholds:
            if key not in monitor_quantities:
                raise DomainViolation('Unknown monitor quantity {}, must be one of {}'.format(key, monitor_quantities))
        self.sigma = float(sigma)
        self.p = float(p)
        self.s = s
        self.r = float(r)
        self.thresholds = thresholds
        self.stride = int(stride)
        self.lifespan = lifespan if lifespan is not None else LifespanParams()
        self.max_principle_tol = float(max_principle_tol)

    def besov(self, d: int) -> BesovParams:
        """Space B^s_{p,r} of the monitor in dimension d"""
        s = self.s if self.s is not None else 1.0 + d / self.p
        return BesovParams(s, self.p, self.r, d)
