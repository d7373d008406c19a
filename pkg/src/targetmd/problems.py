"""Variational inequality problems, feasible sets, and the built-in library
of small monotone test instances.

A problem couples a cost operator F with a closed convex feasible set X;
solving it means finding x* in X with <F(x*), u - x*> >= 0 for every
feasible u.  The library instances below are deliberately tiny, with known
solutions and analytically known constants, so solver behavior can be
checked against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError

Vector = np.ndarray

WHOLE_SPACE = "whole_space"
SIMPLEX = "simplex"
BOX = "box"


def project_simplex(v: Vector) -> Vector:
    """Euclidean projection onto the probability simplex.

    Sorted-threshold method: sort descending, find the largest support
    size whose renormalizing shift keeps every surviving entry positive,
    then clip at that shift.  Output is nonnegative and sums to one.
    """
    v = np.asarray(v, dtype=float)
    if np.any(np.isnan(v)):
        raise DomainError("simplex projection rejects NaN input")
    u = np.sort(v)[::-1]
    shifted = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    support = np.nonzero(u - shifted / ks > 0.0)[0]
    k = int(support[-1]) + 1
    theta = shifted[k - 1] / k
    return np.maximum(v - theta, 0.0)


@dataclass(eq=False)
class FeasibleSet:
    """A closed convex set with projection, membership, and sampling."""

    dim: int
    kind: str
    lower: Optional[Vector] = None
    upper: Optional[Vector] = None

    def project(self, v: Vector) -> Vector:
        v = np.asarray(v, dtype=float)
        if self.kind == WHOLE_SPACE:
            if np.any(np.isnan(v)):
                raise DomainError("cannot project NaN")
            return v.copy()
        if self.kind == SIMPLEX:
            return project_simplex(v)
        if self.kind == BOX:
            if np.any(np.isnan(v)):
                raise DomainError("cannot project NaN")
            return np.clip(v, self.lower, self.upper)
        raise ValueError(f"unknown set kind {self.kind!r}")

    def contains(self, v: Vector, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            return False
        if self.kind == WHOLE_SPACE:
            return True
        if self.kind == SIMPLEX:
            return bool(np.all(v >= -tol) and abs(float(v.sum()) - 1.0) <= tol)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def center(self) -> Vector:
        """Analytic center used as the default initial point."""
        if self.kind == WHOLE_SPACE:
            return np.zeros(self.dim)
        if self.kind == SIMPLEX:
            return np.full(self.dim, 1.0 / self.dim)
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng: np.random.Generator, n: int, scale: float = 1.5) -> Vector:
        """Draw n feasible points; rows of the returned array."""
        if self.kind == WHOLE_SPACE:
            return scale * rng.standard_normal((n, self.dim))
        if self.kind == SIMPLEX:
            return rng.dirichlet(np.ones(self.dim), size=n)
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def sample_interior(self, rng: np.random.Generator, n: int,
                        margin: float = 1e-3) -> Vector:
        """Like sample, but bounded away from the boundary by mixing each
        draw toward the analytic center."""
        pts = self.sample(rng, n)
        if self.kind == WHOLE_SPACE:
            return pts
        return (1.0 - margin) * pts + margin * self.center()


def whole_space(dim: int) -> FeasibleSet:
    return FeasibleSet(dim=dim, kind=WHOLE_SPACE)


def simplex(dim: int) -> FeasibleSet:
    return FeasibleSet(dim=dim, kind=SIMPLEX)


def box(lower, upper) -> FeasibleSet:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or np.any(lower >= upper):
        raise ConfigurationError("box bounds must satisfy lower < upper entrywise")
    return FeasibleSet(dim=lower.size, kind=BOX, lower=lower, upper=upper)


@dataclass(eq=False)
class VIProblem:
    """A variational inequality instance.

    monotonicity_tag is descriptive only; sampled checks can refute it but
    never certify it.  linear_terms holds (M, q) when F(x) = M x + q, which
    lets constants be computed exactly instead of estimated.
    """

    feasible_set: FeasibleSet
    F: Callable[[Vector], Vector]
    name: str = "custom"
    lipschitz_hint: Optional[float] = None
    monotonicity_tag: str = "unknown"
    strong_modulus: Optional[float] = None
    known_solution: Optional[Vector] = None
    linear_terms: Optional[tuple] = None


def natural_residual(problem: VIProblem, x: Vector) -> float:
    """|| x - P(x - F(x)) ||; zero exactly at solutions."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - problem.feasible_set.project(x - problem.F(x))))


# ---------------------------------------------------------------------------
# Library problems
# ---------------------------------------------------------------------------

_RPS_MATRIX = np.array([[0.0, 1.0, -1.0],
                        [-1.0, 0.0, 1.0],
                        [1.0, -1.0, 0.0]])


def _banded_skew(dim: int) -> Vector:
    m = np.zeros((dim, dim))
    for i in range(dim - 1):
        m[i, i + 1] = 1.0
        m[i + 1, i] = -1.0
    return m


def _linear(m: Vector, q: Vector) -> Callable[[Vector], Vector]:
    def F(x):
        return m @ np.asarray(x, dtype=float) + q
    return F


def _make_skew_bilinear(dim: int = 2) -> VIProblem:
    dim = int(dim)
    if dim < 2:
        raise ConfigurationError("skew_bilinear needs dim >= 2")
    m = np.array([[0.0, 1.0], [-1.0, 0.0]]) if dim == 2 else _banded_skew(dim)
    q = np.zeros(dim)
    return VIProblem(
        feasible_set=whole_space(dim),
        F=_linear(m, q),
        name="skew_bilinear",
        lipschitz_hint=float(np.linalg.norm(m, 2)),
        monotonicity_tag="monotone",
        known_solution=np.zeros(dim),
        linear_terms=(m, q),
    )


def _make_linear_monotone(dim: int = 2) -> VIProblem:
    dim = int(dim)
    m = np.eye(dim) + (_banded_skew(dim) if dim > 2
                       else np.array([[0.0, 1.0], [-1.0, 0.0]]))
    q = 0.5 * np.array([(-1.0) ** i for i in range(dim)])
    solution = np.linalg.solve(m, -q)
    return VIProblem(
        feasible_set=whole_space(dim),
        F=_linear(m, q),
        name="linear_monotone",
        lipschitz_hint=float(np.linalg.norm(m, 2)),
        monotonicity_tag="strongly_monotone",
        strong_modulus=1.0,  # symmetric part is the identity
        known_solution=solution,
        linear_terms=(m, q),
    )


def _make_rps_game() -> VIProblem:
    m = _RPS_MATRIX.copy()
    return VIProblem(
        feasible_set=simplex(3),
        F=_linear(m, np.zeros(3)),
        name="rps_game",
        lipschitz_hint=float(np.linalg.norm(m, 2)),
        monotonicity_tag="monotone",
        known_solution=np.full(3, 1.0 / 3.0),
        linear_terms=(m, np.zeros(3)),
    )


def _make_constrained_quadratic(dim: int = 2) -> VIProblem:
    dim = int(dim)
    q_diag = np.arange(2.0, dim + 2.0)
    center = np.linspace(0.25, 0.75, dim)
    m = np.diag(q_diag)
    q = -m @ center
    return VIProblem(
        feasible_set=box(np.zeros(dim), np.ones(dim)),
        F=_linear(m, q),
        name="constrained_quadratic",
        lipschitz_hint=float(q_diag.max()),
        monotonicity_tag="strongly_monotone",
        strong_modulus=float(q_diag.min()),
        known_solution=center,  # interior of the box by construction
        linear_terms=(m, q),
    )


def _make_vertex_cost_simplex(costs=(1.0, 2.0)) -> VIProblem:
    c = np.asarray(costs, dtype=float)
    if c.size < 2 or len(set(c.tolist())) != c.size:
        raise ConfigurationError("vertex_cost_simplex needs >= 2 distinct costs")
    dim = c.size
    solution = np.zeros(dim)
    solution[int(np.argmin(c))] = 1.0
    return VIProblem(
        feasible_set=simplex(dim),
        F=lambda x: c.copy(),
        name="vertex_cost_simplex",
        lipschitz_hint=0.0,
        monotonicity_tag="monotone",
        known_solution=solution,
        linear_terms=(np.zeros((dim, dim)), c),
    )


def _make_scalar_shift(a: float = 2.0) -> VIProblem:
    a = float(a)
    return VIProblem(
        feasible_set=whole_space(1),
        F=lambda x: np.asarray(x, dtype=float) - a,
        name="scalar_shift",
        lipschitz_hint=1.0,
        monotonicity_tag="strongly_monotone",
        strong_modulus=1.0,
        known_solution=np.array([a]),
        linear_terms=(np.eye(1), np.array([-a])),
    )


LIBRARY = {
    "skew_bilinear": (_make_skew_bilinear, ("dim",),
                      "F = M x with skew-symmetric M; merely monotone, solution 0"),
    "linear_monotone": (_make_linear_monotone, ("dim",),
                        "F = M x + q with positive-definite symmetric part"),
    "rps_game": (_make_rps_game, (),
                 "cyclic three-strategy game on the simplex; uniform solution"),
    "constrained_quadratic": (_make_constrained_quadratic, ("dim",),
                              "strongly monotone diagonal quadratic on the unit box"),
    "vertex_cost_simplex": (_make_vertex_cost_simplex, ("costs",),
                            "constant costs on the simplex; vertex solution"),
    "scalar_shift": (_make_scalar_shift, ("a",),
                     "F(x) = x - a on the line; solution a"),
}


def library_problem(name: str, **params) -> VIProblem:
    """Construct a named library problem; unknown names or params error."""
    if name not in LIBRARY:
        raise ConfigurationError(
            f"unknown problem {name!r}; available: {', '.join(sorted(LIBRARY))}")
    builder, allowed, _ = LIBRARY[name]
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"problem {name!r} does not accept parameter(s) {sorted(unknown)}")
    return builder(**params)


# ---------------------------------------------------------------------------
# Sampled checks and constant estimation
# ---------------------------------------------------------------------------

@dataclass
class MonotonicityReport:
    min_inner: float
    min_ratio: float
    classification: str
    witness: Optional[tuple] = None
    n_samples: int = 0
    rng_seed: int = 0


def check_monotonicity(problem: VIProblem, n_samples: int = 200,
                       rng_seed: int = 0) -> MonotonicityReport:
    """Sampled monotonicity spot-check; refutes but never certifies.

    Reports the minimum of <F(x) - F(y), x - y> over sampled feasible
    pairs, and of that quantity divided by ||x - y||^2.
    """
    if n_samples < 2:
        raise ConfigurationError("need at least 2 samples")
    rng = np.random.default_rng(rng_seed)
    xs = problem.feasible_set.sample(rng, n_samples)
    ys = problem.feasible_set.sample(rng, n_samples)
    min_inner = np.inf
    min_ratio = np.inf
    witness = None
    for x, y in zip(xs, ys):
        d = x - y
        nn = float(np.dot(d, d))
        if nn < 1e-16:
            continue
        inner = float(np.dot(problem.F(x) - problem.F(y), d))
        min_inner = min(min_inner, inner)
        ratio = inner / nn
        if ratio < min_ratio:
            min_ratio = ratio
            witness = (x.copy(), y.copy())
    tol = 1e-9
    if min_ratio < -tol:
        label = f"not monotone (witness ratio {min_ratio:.3e})"
    elif min_ratio <= tol:
        label = "consistent with monotone (no strong-monotonicity margin)"
        witness = None
    else:
        label = f"consistent with strongly monotone (modulus estimate {min_ratio:.6g})"
        witness = None
    return MonotonicityReport(min_inner=min_inner, min_ratio=min_ratio,
                              classification=label, witness=witness,
                              n_samples=n_samples, rng_seed=rng_seed)


def estimate_lipschitz(problem: VIProblem, n_samples: int = 64,
                       rng_seed: int = 0) -> float:
    """Lipschitz constant for F: the user hint when present, the spectral
    norm of M (50 power iterations) for linear operators, else a sampled
    difference-quotient bound with a 2x safety factor."""
    if problem.lipschitz_hint is not None:
        return float(problem.lipschitz_hint)
    if problem.linear_terms is not None:
        m, _ = problem.linear_terms
        gram = m.T @ m
        v = np.ones(m.shape[0]) / np.sqrt(m.shape[0])
        for _ in range(50):
            w = gram @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0
            v = w / nw
        return float(np.sqrt(v @ gram @ v))
    rng = np.random.default_rng(rng_seed)
    xs = problem.feasible_set.sample(rng, n_samples)
    ys = problem.feasible_set.sample(rng, n_samples)
    best = 0.0
    for x, y in zip(xs, ys):
        d = float(np.linalg.norm(x - y))
        if d < 1e-12:
            continue
        best = max(best, float(np.linalg.norm(problem.F(x) - problem.F(y))) / d)
    return 2.0 * best
