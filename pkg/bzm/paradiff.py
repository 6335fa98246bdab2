"""
Paradifferential calculus on the torus

- Bony paraproducts T_u v, the tilde paraproduct and the remainder R(u, v)
- Frequency-localized commutators [phi, Delta_j] grad psi and their
  five-term splitting
- Measured two-sided inequality probes and the Young splitting bound

All products use the 2/3 rule, see spectral.dealiased_product.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from typing import Optional, Union, Dict, Tuple

from bzm.spectral import Field, check_same_grid, dealias, partial_sums, block_decomposition, \
    truncate_samples, dealiased_product, dyadic_block, gradient, _broadcast
from bzm.besov import Trajectory, besov_norm, lebesgue_norm, chemin_lerner_norm, besov_history, block_weights
from bzm.parameter import BesovParams
from bzm.utils import Array, grid_lp, lr_sum, trapezoid, time_lq
from bzm.errors import HypothesisViolation, DomainViolation, ComponentMismatchError

logger = logging.getLogger(__name__)


#%% Bony decomposition
def paraproduct(u: Field, v: Field) -> Field:
    """Paraproduct T_u v = sum_j S_{j-1} u Delta_j v

    The low-frequency factor of block j is sum_{j' <= j-2} Delta_j' u,
    which is S_{j-1} u for j >= 2 and Delta_-1 u for j = 1.

    Parameters
    ----------
    u : Field
        Low-frequency factor
    v : Field
        High-frequency factor; a scalar factor is broadcast over
        the components of the other

    Returns
    -------
    Field
        T_u v, dealiased

    Raises
    ------
    GridMismatchError
        u and v on different grids
    """
    grid = check_same_grid(u, v)
    low = partial_sums(dealias(u))
    blocks = block_decomposition(dealias(v))
    total = 0.0
    for jj in range(2, blocks.shape[0]):
        total = total + _broadcast(low[jj - 1], blocks[jj])
    if np.isscalar(total):
        return Field.zeros(grid, max(u.n_components, v.n_components))
    return truncate_samples(grid, total)


def tilde_paraproduct(f: Field, g: Field) -> Field:
    """T'_f g = sum_k S_{k+2} f Delta_k g, equal to T_f g + R(g, f)"""
    grid = check_same_grid(f, g)
    low = partial_sums(dealias(f))
    blocks = block_decomposition(dealias(g))
    last = low.shape[0] - 1
    total = 0.0
    for jj in range(blocks.shape[0]):
        total = total + _broadcast(low[min(jj + 2, last)], blocks[jj])
    return truncate_samples(grid, total)


def remainder(u: Field, v: Field) -> Field:
    """Remainder R(u, v) = sum_j sum_{|j'-j| <= 1} Delta_j u Delta_j' v, dealiased

    Raises
    ------
    GridMismatchError
        u and v on different grids
    """
    grid = check_same_grid(u, v)
    bu = block_decomposition(dealias(u))
    bv = block_decomposition(dealias(v))
    n = bu.shape[0]
    total = 0.0
    for a in range(n):
        near = bv[max(a - 1, 0):min(a + 2, n)].sum(axis=0)
        total = total + _broadcast(bu[a], near)
    return truncate_samples(grid, total)


#%% Commutators
def commutator(phi: Field, j: int, psi: Field) -> Field:
    """[phi, Delta_j] grad psi = phi Delta_j grad psi - Delta_j(phi grad psi)

    Parameters
    ----------
    phi : Field
        Scalar multiplier
    j : int
        Block index >= -1
    psi : Field
        Scalar potential

    Returns
    -------
    Field
        Vector field, products dealiased
    """
    check_same_grid(phi, psi)
    if not (phi.is_scalar and psi.is_scalar):
        raise ComponentMismatchError('Commutator needs scalar phi and psi')
    grad_psi = gradient(psi)
    return dealiased_product(phi, dyadic_block(grad_psi, j)) - dyadic_block(dealiased_product(phi, grad_psi), j)


def commutator_decomposition(phi: Field, j: int, psi: Field) -> Tuple[Field, Field, Field, Field, Field]:
    """Split the commutator into five terms

    With phi_t = (Id - Delta_-1) phi and g = grad psi:

    - R1 = [T_phi_t, Delta_j] g
    - R2 = T'_{Delta_j g} phi_t
    - R3 = -Delta_j T_g phi_t
    - R4 = -Delta_j R(phi_t, g)
    - R5 = [Delta_-1 phi, Delta_j] g

    Returns
    -------
    Tuple[Field, Field, Field, Field, Field]
        R1, ..., R5, summing to commutator(phi, j, psi)
    """
    check_same_grid(phi, psi)
    if not (phi.is_scalar and psi.is_scalar):
        raise ComponentMismatchError('Commutator needs scalar phi and psi')
    phi_low = dyadic_block(phi, -1)
    phi_high = phi - phi_low
    g = gradient(psi)
    g_j = dyadic_block(g, j)

    r1 = paraproduct(phi_high, g_j) - dyadic_block(paraproduct(phi_high, g), j)
    r2 = tilde_paraproduct(g_j, phi_high)
    r3 = -dyadic_block(paraproduct(g, phi_high), j)
    r4 = -dyadic_block(remainder(phi_high, g), j)
    r5 = dealiased_product(phi_low, g_j) - dyadic_block(dealiased_product(phi_low, g), j)
    return r1, r2, r3, r4, r5


def commutator_block_norms(phi: Field, psi: Field, p: float, with_gradient: Optional[bool] = False) -> Array:
    """|[phi, Delta_j] grad psi|_{L^p} for j = -1, ..., j_max

    With with_gradient, the norm of grad([phi, Delta_j] grad psi) instead.
    """
    grid = check_same_grid(phi, psi)
    g = gradient(psi)
    product = dealiased_product(phi, g)
    phi_d = dealias(phi).samples
    g_blocks = block_decomposition(dealias(g))
    prod_coeffs = product.coeffs
    norms = np.zeros(grid.n_blocks)
    for jj in range(grid.n_blocks):
        first = truncate_samples(grid, phi_d * g_blocks[jj])
        second = Field(grid, coeffs=prod_coeffs * grid.block_multipliers[jj])
        comm = first - second
        if with_gradient:
            comm = gradient(comm)
        norms[jj] = grid_lp(comm.magnitude(), p)
    return norms


#%% Young splitting
def young_split(a: float, b: float, theta: float, epsilon: float) -> float:
    """Upper bound of a*b from the weighted Young inequality

    Parameters
    ----------
    a, b : float
        Nonnegative numbers
    theta : float
        Weight in (0, 1)
    epsilon : float
        Positive splitting parameter

    Returns
    -------
    float
        theta eps^{-(1-theta)/theta} a^{1/theta} + (1-theta) eps b^{1/(1-theta)}

    Raises
    ------
    DomainViolation
        Arguments outside their ranges
    """
    if a < 0 or b < 0:
        raise DomainViolation('a and b must be nonnegative, got {}, {}'.format(a, b))
    if not 0 < theta < 1:
        raise DomainViolation('theta must lie in (0, 1), got {}'.format(theta))
    if not epsilon > 0:
        raise DomainViolation('epsilon must be positive, got {}'.format(epsilon))
    return theta * epsilon**(-(1 - theta) / theta) * a**(1 / theta) + (1 - theta) * epsilon * b**(1 / (1 - theta))


#%% Inequality probes
inequality_ids = ['prod_para', 'prod_remainder', 'prod_timedep', 'comm_basic',
                  'comm_tilde_41', 'comm_tilde_42_deriv', 'prod_lemma_42']
"""list: Identifiers of the measured inequalities"""

input_channels = {'prod_para': ('u', 'v'),
                  'prod_remainder': ('u', 'v'),
                  'prod_timedep': ('u', 'v'),
                  'comm_basic': ('phi', 'psi'),
                  'comm_tilde_41': ('phi', 'psi'),
                  'comm_tilde_42_deriv': ('phi', 'psi'),
                  'prod_lemma_42': ('f', 'g')}
"""dict: Keys are the inequality ids, values are the names of their two inputs"""


@dataclass
class InequalityReport:
    """Both sides of one measured inequality"""
    inequality_id: str
    lhs: float
    rhs_terms: Dict[str, float]
    ratio: float
    parameters: Dict[str, float] = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else np.inf


def _as_trajectory(inputs: Union[Dict[str, Field], Trajectory], names: Tuple[str, str]) -> Trajectory:
    if isinstance(inputs, Trajectory):
        for name in names:
            inputs.channel(name)
        return inputs
    fields = {name: inputs[name] for name in names}
    grid = check_same_grid(*fields.values())
    return Trajectory.constant(grid, 1.0, **fields)


def _as_fields(inputs: Union[Dict[str, Field], Trajectory], names: Tuple[str, str]) -> Tuple[Field, Field]:
    if isinstance(inputs, Trajectory):
        raise ValueError('This inequality is stated at a fixed time, pass Fields')
    return inputs[names[0]], inputs[names[1]]


def _besov(params: dict, d: int, s_key: str = 's', r_key: str = 'r', shift: float = 0.0) -> BesovParams:
    return BesovParams(params[s_key] + shift, params['p'], params.get(r_key, params.get('r', 1)), d)


def _series(traj: Trajectory, name: str, func) -> Array:
    return np.array([func(f) for f in traj.channel(name)])


def _check_index_relation(target: float, weight: float, first: float, second: float, label: str):
    if abs(target - (weight * first + (1 - weight) * second)) > 1e-12:
        raise HypothesisViolation('{} must equal the weighted combination of its two indices'.format(label))


def _check_weights(params: dict):
    for key in ('theta', 'eta'):
        if not 0 < params[key] <= 1:
            raise HypothesisViolation('{} in (0, 1]'.format(key))
    if not params['eps'] > 0:
        raise HypothesisViolation('eps > 0')


def _probe_prod_para(inputs, params, d):
    u, v = _as_fields(inputs, input_channels['prod_para'])
    space = _besov(params, d)
    lhs = besov_norm(paraproduct(u, v), space)
    terms = {'u_Linf*v_B': lebesgue_norm(u, np.inf) * besov_norm(v, space)}
    return lhs, terms


def _probe_prod_remainder(inputs, params, d):
    u, v = _as_fields(inputs, input_channels['prod_remainder'])
    s1, s2, p = params['s1'], params['s2'], params['p']
    r1, r2 = params.get('r1', 1), params.get('r2', 1)
    r = params.get('r', 1)
    if not s1 + s2 + d * min(0.0, 1.0 - 2.0 / p) > 0:
        raise HypothesisViolation('s1 + s2 + d min(0, 1 - 2/p) > 0')
    if 1.0 / r > min(1.0, 1.0 / r1 + 1.0 / r2) + 1e-14:
        raise HypothesisViolation('1/r <= min(1, 1/r1 + 1/r2)')
    lhs = besov_norm(remainder(u, v), BesovParams(s1 + s2 - d / p, p, r, d))
    terms = {'u_B*v_B': besov_norm(u, BesovParams(s1, p, r1, d)) * besov_norm(v, BesovParams(s2, p, r2, d))}
    return lhs, terms


def _probe_prod_timedep(inputs, params, d):
    traj = _as_trajectory(inputs, input_channels['prod_timedep'])
    if not params['s'] > 0:
        raise HypothesisViolation('s > 0')
    q = params.get('q', 1)
    q1, q2 = params.get('q1', np.inf), params.get('q2', q)
    q3, q4 = params.get('q3', q), params.get('q4', np.inf)
    if abs(1 / q - (1 / q1 + 1 / q2)) > 1e-12 or abs(1 / q - (1 / q3 + 1 / q4)) > 1e-12:
        raise HypothesisViolation('1/q = 1/q1 + 1/q2 = 1/q3 + 1/q4')
    space = _besov(params, d)
    product = Trajectory(traj.grid)
    for t, u, v in zip(traj.times, traj.channel('u'), traj.channel('v')):
        product.append(t, uv=dealiased_product(u, v))
    lhs = chemin_lerner_norm(product, 'uv', q, space)
    u_inf = time_lq(_series(traj, 'u', lambda f: lebesgue_norm(f, np.inf)), traj.times, q1)
    v_inf = time_lq(_series(traj, 'v', lambda f: lebesgue_norm(f, np.inf)), traj.times, q4)
    terms = {'u_Linf*v_B': u_inf * chemin_lerner_norm(traj, 'v', q2, space),
             'u_B*v_Linf': chemin_lerner_norm(traj, 'u', q3, space) * v_inf}
    return lhs, terms


def _commutator_lhs(traj: Trajectory, params: dict, d: int, with_gradient: bool, time_first: bool) -> float:
    p, s, r = params['p'], params['s'], params.get('r', 1)
    norms = np.stack([commutator_block_norms(phi, psi, p, with_gradient)
                      for phi, psi in zip(traj.channel('phi'), traj.channel('psi'))])
    weights = block_weights(traj.grid, s)
    if time_first:
        # time integral per block, then l^r
        return lr_sum(trapezoid(norms, traj.times, axis=0) * weights, r)
    return float(trapezoid([lr_sum(n * weights, r) for n in norms], traj.times))


def _gradient_channels(traj: Trajectory) -> Trajectory:
    grads = Trajectory(traj.grid)
    for t, phi, psi in zip(traj.times, traj.channel('phi'), traj.channel('psi')):
        grads.append(t, phi=phi, psi=psi, grad_phi=gradient(phi), grad_psi=gradient(psi))
    return grads


def _probe_comm_basic(inputs, params, d):
    traj = _gradient_channels(_as_trajectory(inputs, input_channels['comm_basic']))
    s, p, r = params['s'], params['p'], params.get('r', 1)
    p_dual = np.inf if p == 1 else (1.0 if np.isinf(p) else p / (p - 1))
    if not s > -d * min(1.0 / p, 1.0 / p_dual):
        raise HypothesisViolation('s > -d min(1/p, 1/p\')')
    if np.isclose(s, 1 + d / p) and r != 1:
        raise HypothesisViolation('r = 1 if s = 1 + d/p')
    lhs = _commutator_lhs(traj, params, d, False, False)
    critical = BesovParams(d / p, p, 1, d)
    lower = BesovParams(s - 1, p, r, d)
    grad_phi = besov_history(traj, 'grad_phi', critical) + besov_history(traj, 'grad_phi', lower)
    grad_psi = besov_history(traj, 'grad_psi', lower)
    terms = {'grad_phi_B*grad_psi_B': float(trapezoid(grad_phi * grad_psi, traj.times))}
    return lhs, terms


def _probe_comm_tilde_41(inputs, params, d):
    traj = _gradient_channels(_as_trajectory(inputs, input_channels['comm_tilde_41']))
    s, p, r = params['s'], params['p'], params.get('r', 1)
    if not s > 0:
        raise HypothesisViolation('s > 0')
    lhs = _commutator_lhs(traj, params, d, False, False)
    space = BesovParams(s, p, r, d)
    lower = BesovParams(s - 1, p, r, d)
    linf = lambda f: lebesgue_norm(f, np.inf)
    first = _series(traj, 'grad_phi', linf) * besov_history(traj, 'psi', space)
    second = besov_history(traj, 'grad_phi', lower) * _series(traj, 'grad_psi', linf)
    terms = {'grad_phi_Linf*psi_B': float(trapezoid(first, traj.times)),
             'grad_phi_B*grad_psi_Linf': float(trapezoid(second, traj.times))}
    return lhs, terms


def _split_terms(traj, params, d, a_name, b_name, c_name, e_name, shift):
    """Four Young-split terms shared by the two interpolated estimates"""
    theta, eta, eps = params['theta'], params['eta'], params['eps']
    p, r = params['p'], params.get('r', 1)
    linf = lambda f: lebesgue_norm(f, np.inf)
    B = lambda s: BesovParams(s, p, r, d)
    t1 = theta * eps**(-(1 - theta) / theta) * trapezoid(
        _series(traj, a_name, linf)**(1 / theta) * besov_history(traj, b_name, B(params['s1'])), traj.times)
    t2 = eta * eps**(-(1 - eta) / eta) * trapezoid(
        _series(traj, c_name, linf)**(1 / eta) * besov_history(traj, e_name, B(params['sigma1'] + shift)), traj.times)
    t3 = (1 - theta) * eps * chemin_lerner_norm(traj, b_name, 1, B(params['s2']))
    t4 = (1 - eta) * eps * chemin_lerner_norm(traj, e_name, 1, B(params['sigma2'] + shift))
    return {'theta_term': float(t1), 'eta_term': float(t2), 'theta_eps_term': float(t3), 'eta_eps_term': float(t4)}


def _probe_comm_tilde_42_deriv(inputs, params, d):
    traj = _gradient_channels(_as_trajectory(inputs, input_channels['comm_tilde_42_deriv']))
    s = params['s']
    if not s > 0:
        raise HypothesisViolation('s > 0')
    _check_weights(params)
    _check_index_relation(s + 1, params['theta'], params['s1'], params['s2'], 's + 1')
    _check_index_relation(s + 1, params['eta'], params['sigma1'], params['sigma2'], 's + 1')
    lhs = _commutator_lhs(traj, params, d, True, True)
    terms = _split_terms(traj, params, d, 'grad_phi', 'psi', 'grad_psi', 'grad_phi', -1.0)
    return lhs, terms


def _probe_prod_lemma_42(inputs, params, d):
    traj = _as_trajectory(inputs, input_channels['prod_lemma_42'])
    s = params['s']
    if not s > 0:
        raise HypothesisViolation('s > 0')
    _check_weights(params)
    _check_index_relation(s, params['theta'], params['s1'], params['s2'], 's')
    _check_index_relation(s, params['eta'], params['sigma1'], params['sigma2'], 's')
    product = Trajectory(traj.grid)
    for t, f, g in zip(traj.times, traj.channel('f'), traj.channel('g')):
        product.append(t, fg=dealiased_product(f, g))
    lhs = chemin_lerner_norm(product, 'fg', 1, _besov(params, d))
    terms = _split_terms(traj, params, d, 'f', 'g', 'g', 'f', 0.0)
    return lhs, terms


_probes = {'prod_para': _probe_prod_para,
           'prod_remainder': _probe_prod_remainder,
           'prod_timedep': _probe_prod_timedep,
           'comm_basic': _probe_comm_basic,
           'comm_tilde_41': _probe_comm_tilde_41,
           'comm_tilde_42_deriv': _probe_comm_tilde_42_deriv,
           'prod_lemma_42': _probe_prod_lemma_42}


def inequality_probe(
    inequality_id: str,
    inputs: Union[Dict[str, Field], Trajectory],
    parameters: Dict[str, float],
) -> InequalityReport:
    """Measure both sides of a product or commutator estimate

    Parameters
    ----------
    inequality_id : str
        One of inequality_ids
    inputs : Union[Dict[str, Field], Trajectory]
        The two inputs named as in input_channels; Fields given for a
        time-integrated estimate are held constant on [0, 1]
    parameters : Dict[str, float]
        Indices used by the estimate: p, r and s, s1, s2, sigma1, sigma2,
        r1, r2, theta, eta, eps, q, q1, ..., q4 as applicable

    Returns
    -------
    InequalityReport
        Measured lhs, named rhs terms (constants set to 1) and their ratio

    Raises
    ------
    HypothesisViolation
        Parameters outside the range of the estimate
    ValueError
        Unknown inequality id
    """
    if inequality_id not in _probes:
        raise ValueError('inequality_id must be one of {}, got {}'.format(inequality_ids, inequality_id))
    names = input_channels[inequality_id]
    if isinstance(inputs, Trajectory):
        d = inputs.grid.d
    else:
        d = check_same_grid(*[inputs[n] for n in names]).d
    lhs, terms = _probes[inequality_id](inputs, dict(parameters), d)
    report = InequalityReport(inequality_id, float(lhs), terms, 0.0, dict(parameters))
    report.ratio = _ratio(report.lhs, report.rhs)
    logger.debug('%s: lhs %.6g, rhs %.6g, ratio %.6g', inequality_id, report.lhs, report.rhs, report.ratio)
    return report
