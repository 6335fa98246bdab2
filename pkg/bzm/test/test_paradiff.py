"""
Test the Bony decomposition, commutators and inequality probes
"""
import numpy as np
import pytest

from bzm.spectral import make_grid, dealiased_product, dyadic_block
from bzm.besov import lebesgue_norm
from bzm.paradiff import paraproduct, tilde_paraproduct, remainder, commutator, \
    commutator_decomposition, commutator_block_norms, young_split, inequality_probe, inequality_ids, \
    input_channels
from bzm.doe import random_field, random_fields, young_design
from bzm.experiment import default_probe_parameters
from bzm.errors import HypothesisViolation, DomainViolation

grid = make_grid(2, 32)
us, vs = random_fields([grid], 4, k_max=8, seed=11)[0], random_fields([grid], 4, k_max=8, seed=12)[0]
phi = random_field(grid, k_max=6, seed=13)
psi = random_field(grid, k_max=6, seed=14)


def test_bony_decomposition_is_exact():
    for u, v in zip(us, vs):
        product = dealiased_product(u, v)
        split = paraproduct(u, v) + paraproduct(v, u) + remainder(u, v)
        assert lebesgue_norm(split - product, 2) <= 1e-12 * lebesgue_norm(product, 2)


def test_bony_decomposition_on_fine_grids():
    grids = [make_grid(2, 64), make_grid(2, 128)]
    first = random_fields(grids, 3, k_max=20, seed=21)
    second = random_fields(grids, 3, k_max=20, seed=22)
    for a_list, b_list in zip(first, second):
        for u, v in zip(a_list, b_list):
            product = dealiased_product(u, v)
            split = paraproduct(u, v) + paraproduct(v, u) + remainder(u, v)
            assert lebesgue_norm(split - product, 2) <= 1e-12 * lebesgue_norm(product, 2)


def test_paraproduct_localization():
    fine = make_grid(2, 64)
    u = random_field(fine, k_max=20, seed=23)
    v = random_field(fine, k_max=20, seed=24)
    for j in (1, 2):
        # S_j u Delta_{j+1} Delta_j v is the widest term, inside |k| <= 4 2^j
        piece = paraproduct(u, dyadic_block(v, j))
        coeffs = fine.forward(piece.samples)
        assert np.max(np.abs(coeffs[:, fine.k_norm > 4 * 2**j])) < 1e-13
        for other in range(j + 3, fine.j_max + 1):
            assert np.max(np.abs(dyadic_block(piece, other).samples)) < 1e-13


def test_commutator_is_bilinear():
    a, b = 0.7, -1.3
    eta = random_field(grid, k_max=6, seed=25)
    for j in (0, 2, 3):
        combined = commutator(a * phi + b * eta, j, psi)
        separate = a * commutator(phi, j, psi) + b * commutator(eta, j, psi)
        assert np.allclose(combined.samples, separate.samples, atol=1e-12)
        combined = commutator(phi, j, a * psi + b * eta)
        separate = a * commutator(phi, j, psi) + b * commutator(phi, j, eta)
        assert np.allclose(combined.samples, separate.samples, atol=1e-12)


def test_tilde_paraproduct():
    u, v = us[0], vs[0]
    direct = paraproduct(u, v) + remainder(v, u)
    assert np.allclose(tilde_paraproduct(u, v).samples, direct.samples, atol=1e-13)


def test_paraproduct_broadcasts_scalar():
    w = random_field(grid, k_max=6, components=2, seed=15)
    assert paraproduct(us[0], w).n_components == 2


def test_commutator_decomposition_sums_up():
    for j in (-1, 0, 2, 4):
        total = commutator(phi, j, psi)
        parts = commutator_decomposition(phi, j, psi)
        assert np.allclose(sum(parts).samples, total.samples, atol=1e-12)


def test_commutator_block_norms():
    norms = commutator_block_norms(phi, psi, 2)
    assert norms.shape == (grid.n_blocks,)
    for j in (0, 3):
        assert norms[j + 1] == pytest.approx(lebesgue_norm(commutator(phi, j, psi), 2), rel=1e-10, abs=1e-14)


def test_young_split_bounds_product():
    design = young_design(64, seed=0)
    for a, b, theta, eps in design:
        assert a * b <= young_split(a, b, theta, eps) * (1 + 1e-12) + 1e-300
    with pytest.raises(DomainViolation):
        young_split(1.0, 1.0, 1.0, 1.0)


def test_all_probes_run():
    for inequality_id in inequality_ids:
        names = ('u', 'v') if inequality_id.startswith('prod_') else ('phi', 'psi')
        if inequality_id == 'prod_lemma_42':
            names = ('f', 'g')
        report = inequality_probe(inequality_id, {names[0]: phi, names[1]: psi},
                                  default_probe_parameters[inequality_id])
        assert report.lhs >= 0
        assert report.rhs > 0
        assert np.isfinite(report.ratio)


def test_prod_para_ratio():
    ratios = [inequality_probe('prod_para', {'u': u, 'v': v}, {'s': 1, 'p': 2, 'r': 1}).ratio
              for u, v in zip(us, vs)]
    assert 0 < max(ratios) < 10


def test_probe_hypotheses():
    with pytest.raises(HypothesisViolation):
        inequality_probe('prod_remainder', {'u': phi, 'v': psi}, {'s1': -1, 's2': 0.5, 'p': 2, 'r': 1})
    params = dict(default_probe_parameters['comm_tilde_42_deriv'], s2=3.0)
    with pytest.raises(HypothesisViolation, match='weighted combination'):
        inequality_probe('comm_tilde_42_deriv', {'phi': phi, 'psi': psi}, params)
    with pytest.raises(ValueError):
        inequality_probe('unknown', {'u': phi, 'v': psi}, {})


def test_inequality_ratios_stable_under_refinement():
    # band below N/3 on both grids, so refinement adds no retained modes
    grids = [make_grid(2, 32), make_grid(2, 64)]
    first = random_fields(grids, 3, k_max=4, seed=31)
    second = random_fields(grids, 3, k_max=4, seed=32)
    for inequality_id in inequality_ids:
        names = input_channels[inequality_id]
        maxima = []
        for a_list, b_list in zip(first, second):
            ratios = [inequality_probe(inequality_id, {names[0]: a, names[1]: b},
                                       default_probe_parameters[inequality_id]).ratio
                      for a, b in zip(a_list, b_list)]
            maxima.append(max(ratios))
        assert maxima[0] > 0
        assert maxima[1] < 2 * maxima[0], inequality_id
