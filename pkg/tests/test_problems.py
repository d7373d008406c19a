import numpy as np
import pytest

from targetmd import (VIProblem, box, check_monotonicity, estimate_lipschitz,
                      library_problem, natural_residual, project_simplex,
                      whole_space)
from targetmd.errors import ConfigurationError, DomainError

SEED = 77


# --- simplex projection ---------------------------------------------------

def test_project_simplex_examples():
    assert np.allclose(project_simplex(np.array([1.0, 0.0])), [1.0, 0.0])
    assert np.allclose(project_simplex(np.array([0.6, 0.6])), [0.5, 0.5])
    assert np.allclose(project_simplex(np.array([1.2, -0.2])), [1.0, 0.0])


def test_project_simplex_rejects_nan():
    with pytest.raises(DomainError):
        project_simplex(np.array([np.nan, 0.0]))


def test_project_simplex_feasible_idempotent_nonexpansive():
    rng = np.random.default_rng(SEED)
    vs = rng.normal(scale=2.0, size=(1000, 4))
    ws = rng.normal(scale=2.0, size=(1000, 4))
    for v, w in zip(vs, ws):
        p = project_simplex(v)
        assert abs(p.sum() - 1.0) <= 1e-9 and np.all(p >= 0.0)
        assert np.linalg.norm(project_simplex(p) - p) <= 1e-12
        assert (np.linalg.norm(project_simplex(v) - project_simplex(w))
                <= np.linalg.norm(v - w) + 1e-12)


def test_project_preserves_feasible_points():
    rng = np.random.default_rng(SEED + 1)
    for problem_name in ("rps_game", "constrained_quadratic"):
        s = library_problem(problem_name).feasible_set
        for x in s.sample(rng, 50):
            assert np.linalg.norm(s.project(x) - x) <= 1e-12


def test_projection_idempotent_on_every_set_kind():
    rng = np.random.default_rng(SEED + 4)
    sets = [whole_space(3), library_problem("rps_game").feasible_set,
            box([-1.0, 0.0], [1.0, 2.0])]
    for s in sets:
        for v in rng.normal(scale=3.0, size=(1000, s.dim)):
            p = s.project(v)
            assert s.contains(p)
            assert np.linalg.norm(s.project(p) - p) <= 1e-12


# --- natural residual -----------------------------------------------------

def test_natural_residual_examples():
    skew = library_problem("skew_bilinear")
    assert natural_residual(skew, np.zeros(2)) == 0.0
    # vertex solution: constant costs on the simplex
    vertex = library_problem("vertex_cost_simplex", costs=(1.0, 2.0))
    assert natural_residual(vertex, np.array([1.0, 0.0])) <= 1e-12
    # whole-space evaluation away from the solution: F(1,0) = (0,-1)
    assert natural_residual(skew, np.array([1.0, 0.0])) == pytest.approx(1.0)


# --- library problems -----------------------------------------------------

def test_library_examples():
    rps = library_problem("rps_game")
    assert np.allclose(rps.F(np.full(3, 1.0 / 3.0)), 0.0)
    skew = library_problem("skew_bilinear")
    assert np.allclose(skew.F(np.array([1.0, 0.0])), [0.0, -1.0])
    vertex = library_problem("vertex_cost_simplex", costs=(1.0, 2.0))
    assert np.allclose(vertex.known_solution, [1.0, 0.0])


def test_library_rejects_unknown():
    with pytest.raises(ConfigurationError):
        library_problem("nope")
    with pytest.raises(ConfigurationError):
        library_problem("rps_game", dim=4)
    with pytest.raises(ConfigurationError):
        library_problem("vertex_cost_simplex", costs=(1.0, 1.0))


@pytest.mark.parametrize("name,params", [
    ("skew_bilinear", {}),
    ("skew_bilinear", {"dim": 4}),
    ("linear_monotone", {}),
    ("rps_game", {}),
    ("constrained_quadratic", {}),
    ("vertex_cost_simplex", {"costs": (1.0, 2.0)}),
    ("scalar_shift", {"a": 2.0}),
])
def test_known_solutions_satisfy_the_inequality(name, params):
    problem = library_problem(name, **params)
    star = problem.known_solution
    assert natural_residual(problem, star) <= 1e-8
    rng = np.random.default_rng(SEED + 2)
    f_star = problem.F(star)
    for u in problem.feasible_set.sample(rng, 1000):
        assert float(np.dot(f_star, u - star)) >= -1e-9


def _plain_dot(a, b):
    # sequential IEEE products/sums; BLAS FMA kernels would leave an exact
    # fused-multiply residual and spoil the cancellation being tested
    return sum(float(ai) * float(bi) for ai, bi in zip(a, b))


def test_skew_operators_annihilate_differences():
    # structural property of skew-symmetric linear maps
    skew = library_problem("skew_bilinear")
    rng = np.random.default_rng(SEED + 3)
    for x, y in zip(rng.normal(size=(100, 2)), rng.normal(size=(100, 2))):
        inner = _plain_dot(skew.F(x) - skew.F(y), x - y)
        assert inner == 0.0
    big = library_problem("skew_bilinear", dim=5)
    for x, y in zip(rng.normal(size=(100, 5)), rng.normal(size=(100, 5))):
        inner = _plain_dot(big.F(x) - big.F(y), x - y)
        assert abs(inner) <= 1e-12  # summation-order residue only


# --- monotonicity checks --------------------------------------------------

def test_check_monotonicity_skew_is_monotone_not_strong():
    report = check_monotonicity(library_problem("skew_bilinear"), 200, 0)
    assert abs(report.min_ratio) <= 1e-9
    assert "consistent with monotone" in report.classification


def test_check_monotonicity_strong_case():
    report = check_monotonicity(library_problem("scalar_shift"), 200, 0)
    assert report.min_ratio >= 1.0 - 1e-9
    assert "strongly" in report.classification


def test_check_monotonicity_refutes_anti_monotone():
    problem = VIProblem(feasible_set=box([-1.0], [1.0]),
                        F=lambda x: -np.asarray(x, dtype=float))
    report = check_monotonicity(problem, 200, 0)
    assert "not monotone" in report.classification
    assert report.witness is not None
    assert report.min_ratio < -1e-9


def test_check_monotonicity_needs_samples():
    with pytest.raises(ConfigurationError):
        check_monotonicity(library_problem("scalar_shift"), 1, 0)


# --- Lipschitz estimation -------------------------------------------------

def test_lipschitz_hint_passthrough():
    problem = library_problem("skew_bilinear")
    assert estimate_lipschitz(problem) == pytest.approx(1.0)


def test_lipschitz_power_iteration_matches_spectral_norm():
    problem = library_problem("linear_monotone", dim=4)
    problem.lipschitz_hint = None
    m, _ = problem.linear_terms
    assert estimate_lipschitz(problem) == pytest.approx(np.linalg.norm(m, 2), rel=1e-6)


def test_lipschitz_sampled_fallback_overestimates():
    problem = VIProblem(feasible_set=whole_space(1),
                        F=lambda x: 3.0 * np.asarray(x, dtype=float))
    est = estimate_lipschitz(problem, n_samples=64, rng_seed=0)
    assert 3.0 <= est <= 6.0 + 1e-9  # 2x safety factor on the sampled bound
