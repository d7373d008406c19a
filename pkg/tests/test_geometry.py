import math

import numpy as np
import pytest

from targetmd import (DomainError, bregman, entropy_geometry,
                      euclidean_geometry, simplex, weighted_quadratic_geometry,
                      whole_space)
from targetmd.errors import ConfigurationError
from targetmd.geometry import INTERIOR_FLOOR

from reference_impls import brute_force_simplex_projection_2d

SEED = 20240811


def all_geometries():
    return [
        euclidean_geometry(whole_space(2)),
        euclidean_geometry(simplex(2)),
        entropy_geometry(2),
        entropy_geometry(3),
        weighted_quadratic_geometry([2.0, 4.0]),
    ]


# --- constructor examples -------------------------------------------------

def test_euclidean_whole_space_identity():
    g = euclidean_geometry(whole_space(2))
    assert np.allclose(g.grad_h_conj(np.array([3.0, -1.0])), [3.0, -1.0])


def test_euclidean_simplex_symmetry():
    g = euclidean_geometry(simplex(2))
    assert np.allclose(g.grad_h_conj(np.array([0.6, 0.6])), [0.5, 0.5])


def test_euclidean_simplex_threshold_case():
    # brute-force grid oracle pins the expected projection
    v = np.array([1.2, -0.2])
    g = euclidean_geometry(simplex(2))
    expected = brute_force_simplex_projection_2d(v)
    assert np.allclose(expected, [1.0, 0.0], atol=1e-3)
    assert np.allclose(g.grad_h_conj(v), [1.0, 0.0], atol=1e-12)


def test_entropy_softmax_examples():
    g = entropy_geometry(2)
    assert np.allclose(g.grad_h_conj(np.zeros(2)), [0.5, 0.5])
    assert np.allclose(g.grad_h_conj(np.array([math.log(2.0), 0.0])),
                       [2.0 / 3.0, 1.0 / 3.0])
    assert np.allclose(g.grad_h(np.array([0.5, 0.5])),
                       [1.0 - math.log(2.0)] * 2)


def test_entropy_rejects_boundary_and_small_dim():
    g = entropy_geometry(2)
    with pytest.raises(DomainError):
        g.grad_h(np.array([1.0 - 1e-14, 1e-14]))
    with pytest.raises(ConfigurationError):
        entropy_geometry(1)


def test_entropy_floor_is_documented_value():
    assert INTERIOR_FLOOR == 1e-12


def test_weighted_quadratic_examples():
    g = weighted_quadratic_geometry([1.0, 1.0])
    assert np.allclose(g.grad_h_conj(np.array([2.0, 3.0])), [2.0, 3.0])
    g = weighted_quadratic_geometry([2.0, 4.0])
    assert np.allclose(g.grad_h_conj(np.array([2.0, 4.0])), [1.0, 1.0])
    x = np.array([1.0, 1.0])
    assert np.allclose(g.grad_h_conj(g.grad_h(x)), x)
    assert g.strong_convexity_modulus == 2.0
    with pytest.raises(ConfigurationError):
        weighted_quadratic_geometry([1.0, 0.0])


# --- Bregman divergence ---------------------------------------------------

def test_bregman_euclidean_half_square():
    g = euclidean_geometry(whole_space(2))
    assert bregman(g, np.array([1.0, 0.0]), np.array([0.0, 0.0])) == pytest.approx(0.5)


def test_bregman_zero_at_equal_points():
    g = entropy_geometry(2)
    x = np.array([0.5, 0.5])
    assert abs(bregman(g, x, x)) <= 1e-12


def test_bregman_entropy_matches_high_precision_value():
    # oracle: evaluate the defining sum with mpmath at 50 digits
    import mpmath
    mpmath.mp.dps = 50
    x_hp = [mpmath.mpf("0.75"), mpmath.mpf("0.25")]
    y_hp = [mpmath.mpf("0.5"), mpmath.mpf("0.5")]
    hx = sum(v * mpmath.log(v) for v in x_hp)
    hy = sum(v * mpmath.log(v) for v in y_hp)
    inner = sum((mpmath.log(v) + 1) * (a - v) for v, a in zip(y_hp, x_hp))
    oracle = float(hx - hy - inner)
    assert oracle == pytest.approx(0.130812, abs=1e-6)
    g = entropy_geometry(2)
    value = bregman(g, np.array([0.75, 0.25]), np.array([0.5, 0.5]))
    assert value == pytest.approx(oracle, abs=1e-12)


def test_bregman_rejects_interior_violations():
    g = entropy_geometry(2)
    with pytest.raises(DomainError):
        bregman(g, np.array([0.5, 0.5]), np.array([1.0, 0.0]))


# --- sampled invariants ---------------------------------------------------

def _interior_samples(geometry, rng, n):
    return geometry.domain.sample_interior(rng, n)


@pytest.mark.parametrize("geometry", all_geometries(),
                         ids=lambda g: f"{g.name}-{g.domain_tag}-{g.dim}")
def test_round_trip_identity(geometry):
    rng = np.random.default_rng(SEED)
    for x in _interior_samples(geometry, rng, 1000):
        back = geometry.grad_h_conj(geometry.grad_h(x))
        assert np.linalg.norm(back - x) <= 1e-10


@pytest.mark.parametrize("geometry", all_geometries(),
                         ids=lambda g: f"{g.name}-{g.domain_tag}-{g.dim}")
def test_bregman_nonnegative_and_diagonal_zero(geometry):
    rng = np.random.default_rng(SEED + 1)
    xs = _interior_samples(geometry, rng, 300)
    ys = _interior_samples(geometry, rng, 300)
    for x, y in zip(xs, ys):
        assert bregman(geometry, x, y) >= -1e-12
    for x in xs[:100]:
        assert bregman(geometry, x, x) <= 1e-12


def test_softmax_normalization_and_positivity():
    g = entropy_geometry(3)
    rng = np.random.default_rng(SEED + 2)
    for z in rng.normal(scale=20.0, size=(1000, 3)):
        x = g.grad_h_conj(z)
        assert abs(x.sum() - 1.0) <= 1e-12
        assert np.all(x > 0.0)


def test_conjugate_matches_grid_argmax_entropy():
    # grad_h_conj(z) should maximize <z, x> - h(x); check on a simplex grid
    g = entropy_geometry(2)
    grid = np.arange(1e-3, 1.0, 1e-3)
    pts = np.stack([grid, 1.0 - grid], axis=1)
    h_vals = np.array([g.eval_h(p) for p in pts])
    rng = np.random.default_rng(SEED + 3)
    for z in rng.normal(size=(25, 2)):
        best = pts[np.argmax(pts @ z - h_vals)]
        assert np.linalg.norm(g.grad_h_conj(z) - best) <= 1.5e-3


def test_conjugate_matches_grid_argmax_euclidean_box():
    from targetmd import box
    g = euclidean_geometry(box([0.0, 0.0], [1.0, 1.0]))
    grid = np.arange(0.0, 1.0 + 5e-4, 1e-3)
    xs, ys = np.meshgrid(grid, grid)
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    h_vals = 0.5 * np.sum(pts ** 2, axis=1)
    rng = np.random.default_rng(SEED + 4)
    for z in rng.normal(scale=1.5, size=(10, 2)):
        best = pts[np.argmax(pts @ z - h_vals)]
        assert np.linalg.norm(g.grad_h_conj(z) - best) <= 1.5e-3


def test_mirror_map_image_is_feasible():
    rng = np.random.default_rng(SEED + 5)
    for geometry in all_geometries():
        for z in rng.normal(scale=5.0, size=(200, geometry.dim)):
            assert geometry.domain.contains(geometry.grad_h_conj(z), tol=1e-9)
