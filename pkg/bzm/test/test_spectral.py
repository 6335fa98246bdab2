"""
Test grids, dyadic blocks and spectral operators
"""
import numpy as np
import pytest

from bzm.spectral import Grid, Field, make_grid, dyadic_block, block_decomposition, low_pass, \
    partial_sums, gradient, divergence, laplacian, leray_project, leray_complement, dealias, \
    dealiased_product, advect, bernstein_probe, default_cutoff
from bzm.doe import cos_mode, taylor_green, random_field, block_localized
from bzm.utils import np_to_tensor, tensor_to_np
from bzm.errors import InvalidDimensionError, InvalidResolutionError, GridMismatchError, \
    ComponentMismatchError

grid = make_grid(2, 32)
f = random_field(grid, k_max=8, seed=1)
v = random_field(grid, k_max=6, components=2, seed=2)


def test_grid_validation():
    with pytest.raises(InvalidDimensionError):
        Grid(1, 32)
    with pytest.raises(InvalidResolutionError):
        Grid(2, 12)
    with pytest.raises(InvalidResolutionError):
        Grid(2, 4)


def test_transforms_through_tensors():
    coeffs = grid.forward(f.samples)
    assert coeffs.dtype == np.complex128
    assert np.allclose(grid.inverse(coeffs), f.samples, atol=1e-14)
    x = np_to_tensor(coeffs)
    back = tensor_to_np(x)
    assert back.dtype == np.complex128 and np.array_equal(back, coeffs)
    assert tensor_to_np(np_to_tensor([1, 2])).dtype == np.float64


def test_partition_of_unity():
    cutoff = default_cutoff()
    assert cutoff.partition_error(np.unique(grid.k_norm), grid.j_max) < 1e-12
    assert cutoff.chi(0.75) == 1.0
    assert cutoff.chi(4.0 / 3.0) == 0.0
    radii = np.linspace(0, 2, 401)
    assert np.all(np.diff(cutoff.chi(radii)) <= 1e-14)


def test_blocks_sum_to_field():
    blocks = block_decomposition(f)
    assert blocks.shape == (grid.n_blocks, 1) + grid.shape
    assert np.allclose(np.sum(blocks, axis=0), f.samples, atol=1e-12)


def test_low_pass_is_sum_of_lower_blocks():
    sums = partial_sums(f)
    for j in range(1, grid.j_max + 1):
        assert np.allclose(low_pass(f, j).samples, sums[j + 1], atol=1e-12)
    assert np.all(low_pass(f, 0).samples == 0)


def test_single_mode_block():
    # |k| = 3 2^{j-1} lies in block j alone
    for j in range(1, 4):
        g = cos_mode(grid, [3 * 2**(j - 1), 0])
        assert np.allclose(dyadic_block(g, j).samples, g.samples, atol=1e-12)
        assert np.allclose(dyadic_block(g, j + 1).samples, 0, atol=1e-12)
    with pytest.raises(ValueError):
        dyadic_block(f, -2)


def test_derivatives():
    g = Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(2 * y))
    grad = gradient(g)
    assert grad.n_components == 2
    assert np.allclose(grad.samples[0], np.cos(grid.x[0]) * np.cos(2 * grid.x[1]), atol=1e-12)
    assert np.allclose(grad.samples[1], -2 * np.sin(grid.x[0]) * np.sin(2 * grid.x[1]), atol=1e-12)
    assert np.allclose(laplacian(g).samples, -5 * g.samples, atol=1e-11)
    assert np.allclose(divergence(grad).samples, laplacian(g).samples, atol=1e-11)
    with pytest.raises(ComponentMismatchError):
        divergence(Field.stack([g, g, g]))


def test_leray_projection():
    tg = taylor_green(grid, 0.3)
    assert np.allclose(leray_project(tg).samples, tg.samples, atol=1e-13)
    w = leray_project(v)
    assert np.max(np.abs(divergence(w).samples)) < 1e-12
    assert np.allclose((w + leray_complement(v)).samples, v.samples, atol=1e-13)
    with pytest.raises(ComponentMismatchError):
        leray_project(f)


def test_leray_is_a_projection():
    w = leray_project(v)
    assert np.max(np.abs(leray_project(w).samples - w.samples)) < 1e-12
    g = random_field(grid, k_max=8, seed=4)
    assert np.max(np.abs(leray_project(gradient(g)).samples)) < 1e-12


def test_blocks_almost_orthogonal():
    fields = [f, cos_mode(grid, [5, 3]), random_field(grid, k_max=15, seed=5)]
    for j in range(-1, grid.j_max + 1):
        for block in block_localized(fields, j):
            for other in range(-1, grid.j_max + 1):
                if abs(other - j) >= 2:
                    assert np.max(np.abs(dyadic_block(block, other).samples)) < 1e-13


def test_dealiased_product():
    c = cos_mode(grid, [1, 0])
    product = dealiased_product(c, c)
    assert np.allclose(product.samples, 0.5 + 0.5 * np.cos(2 * grid.x[0]), atol=1e-13)
    high = cos_mode(grid, [12, 0])
    assert np.allclose(dealias(high).samples, 0, atol=1e-13)


def test_advect_constant_is_zero():
    tg = taylor_green(grid)
    assert np.allclose(advect(tg, Field.constant(grid, 2.0)).samples, 0, atol=1e-12)
    with pytest.raises(ComponentMismatchError):
        advect(f, f)


def test_grid_mismatch():
    other = random_field(make_grid(2, 16), k_max=4, seed=1)
    with pytest.raises(GridMismatchError):
        f + other


def test_bernstein_probe():
    g = cos_mode(grid, [6, 0])
    report = bernstein_probe(g, 2, 1, 2, 2)
    # |grad cos(6x)|_2 = 6 |cos(6x)|_2
    assert report.ratio == pytest.approx(6.0 / 4.0, rel=1e-10)
    assert not report.degenerate
    empty = bernstein_probe(Field.constant(grid, 1.0), 2, 1, 2, np.inf)
    assert empty.degenerate and empty.ratio is None
    with pytest.raises(ValueError):
        bernstein_probe(g, 2, 1, 4, 2)
