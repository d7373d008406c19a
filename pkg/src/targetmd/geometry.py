"""Mirror maps, their conjugates, and Bregman divergences.

A geometry bundles a strictly convex potential h with its gradient and the
gradient of the convex conjugate (the mirror map).  The mirror map carries
arbitrary dual vectors into the domain, so iterates pulled back through it
are feasible by construction.  Each built-in geometry stores its strong
convexity modulus analytically rather than estimating it, since step-size
rules and descent diagnostics consume it directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .problems import SIMPLEX, WHOLE_SPACE, FeasibleSet, simplex, whole_space

Vector = np.ndarray

# grad_h of the entropy geometry rejects coordinates below this floor;
# clamping instead would silently distort dual states near the boundary.
INTERIOR_FLOOR = 1e-12


def softmax(z: Vector) -> Vector:
    """Normalized exponential with max-subtraction for overflow safety."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z - np.max(z))
    return e / e.sum()


@dataclass(eq=False)
class MirrorGeometry:
    """Primal-dual geometry bundle.

    conj_jacobian, when available, maps a primal point x to the Jacobian
    of grad_h_conj evaluated at the dual image of x; it is used to convert
    dual-space rates into primal vector fields.  quadratic_weights marks
    members of the pure quadratic family (h = 0.5 * sum w_i x_i^2 on the
    whole space), for which ensemble synthesis has a closed form.
    """

    dim: int
    domain_tag: str
    eval_h: Callable[[Vector], float]
    grad_h: Callable[[Vector], Vector]
    grad_h_conj: Callable[[Vector], Vector]
    strong_convexity_modulus: float
    domain: FeasibleSet
    name: str = "custom"
    conj_jacobian: Optional[Callable[[Vector], Vector]] = None
    quadratic_weights: Optional[Vector] = None


def euclidean_geometry(feasible_set: FeasibleSet) -> MirrorGeometry:
    """Half squared norm restricted to a set.

    grad_h is the identity on the set and the mirror map is the Euclidean
    projection, so dual vectors land back in the set.
    """

    def eval_h(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.dot(x, x))

    def grad_h(x):
        return np.asarray(x, dtype=float).copy()

    jacobian = None
    weights = None
    if feasible_set.kind == WHOLE_SPACE:
        # Projection is the identity; the conjugate is globally smooth.
        dim = feasible_set.dim

        def jacobian(x):
            return np.eye(dim)

        weights = np.ones(feasible_set.dim)

    return MirrorGeometry(
        dim=feasible_set.dim,
        domain_tag=feasible_set.kind,
        eval_h=eval_h,
        grad_h=grad_h,
        grad_h_conj=feasible_set.project,
        strong_convexity_modulus=1.0,
        domain=feasible_set,
        name="euclidean",
        conj_jacobian=jacobian,
        quadratic_weights=weights,
    )


def entropy_geometry(dim: int) -> MirrorGeometry:
    """Negative entropy on the probability simplex; the mirror map is
    softmax, whose image lies in the interior of the simplex.

    grad_h rejects inputs with any coordinate below INTERIOR_FLOOR rather
    than clamping; iterates produced via grad_h_conj are automatically
    interior, so the rejection only bites on user-supplied points.  The
    modulus is 1 in the Euclidean norm because the Hessian diag(1/x)
    dominates the identity whenever all coordinates are at most 1.
    """
    dim = int(dim)
    if dim < 2:
        raise ConfigurationError("entropy geometry needs dim >= 2")
    domain = simplex(dim)

    def eval_h(x):
        x = np.asarray(x, dtype=float)
        if np.any(x < -INTERIOR_FLOOR):
            raise DomainError("negative coordinate outside the simplex")
        x = np.maximum(x, 0.0)
        safe = np.where(x > 0.0, x, 1.0)
        return float(np.sum(x * np.log(safe)))

    def grad_h(x):
        x = np.asarray(x, dtype=float)
        if x.size != dim:
            raise DomainError(f"expected dimension {dim}, got {x.size}")
        if np.min(x) < INTERIOR_FLOOR:
            raise DomainError(
                f"entropy gradient needs every coordinate >= {INTERIOR_FLOOR:g}; "
                f"got min {np.min(x):.3e}")
        return np.log(x) + 1.0

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return np.diag(x) - np.outer(x, x)

    return MirrorGeometry(
        dim=dim,
        domain_tag=SIMPLEX,
        eval_h=eval_h,
        grad_h=grad_h,
        grad_h_conj=softmax,
        strong_convexity_modulus=1.0,
        domain=domain,
        name="entropy",
        conj_jacobian=jacobian,
    )


def weighted_quadratic_geometry(weights) -> MirrorGeometry:
    """h = 0.5 * sum w_i x_i^2 on the whole space, w_i > 0.

    Mostly useful for building geometrically diverse ensembles; the mirror
    map is entrywise division by the weights.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("weights must be strictly positive and finite")
    domain = whole_space(w.size)
    inv_w = 1.0 / w

    def eval_h(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.sum(w * x * x))

    def grad_h(x):
        return w * np.asarray(x, dtype=float)

    def grad_h_conj(z):
        return np.asarray(z, dtype=float) * inv_w

    def jacobian(x):
        return np.diag(inv_w)

    return MirrorGeometry(
        dim=w.size,
        domain_tag=WHOLE_SPACE,
        eval_h=eval_h,
        grad_h=grad_h,
        grad_h_conj=grad_h_conj,
        strong_convexity_modulus=float(w.min()),
        domain=domain,
        name="weighted_quadratic",
        conj_jacobian=jacobian,
        quadratic_weights=w.copy(),
    )


def bregman(geometry: MirrorGeometry, x: Vector, y: Vector) -> float:
    """h(x) - h(y) - <grad_h(y), x - y>.

    Nonnegative by convexity, zero iff x = y for strictly convex h.  The
    second argument must lie where grad_h is defined (the interior, for
    the entropy geometry).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if geometry.domain.kind != WHOLE_SPACE and not geometry.domain.contains(y, tol=1e-9):
        raise DomainError("second Bregman argument lies outside the domain")
    gy = geometry.grad_h(y)
    return float(geometry.eval_h(x) - geometry.eval_h(y) - np.dot(gy, x - y))
