"""The double phase gradient operator, its energy, and consistency checks.

The operator is applied matrix-free element by element; a sparse matrix is
assembled only for the linear (p = 2, mu = 0) part, which serves as the
preconditioner metric elsewhere.  Element accumulation runs in a fixed order,
so identical inputs give bitwise-identical outputs.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretization import (FemFunction, default_rule, element_gradients,
                             is_dirichlet_conforming, sample_field)
from .errors import InputError
from .orlicz import gauge_from_parts


class Problem:
    """Mesh, exponents, weight field, and quadrature bundled together.

    The weight is sampled once at the quadrature points (never interpolated)
    and its per-element integrals are cached.
    """

    def __init__(self, mesh, exps, mu, quad=None):
        quad = quad or default_rule(mesh.dimension)
        eq = mesh.quadrature(quad)
        mu_qp = np.array(sample_field(mu, eq.points))
        if np.any(mu_qp < 0.0):
            raise InputError("mu must be nonnegative at quadrature points")
        mu_int = (eq.weights * mu_qp).sum(axis=1)
        mu_qp.flags.writeable = False
        mu_int.flags.writeable = False
        self.mesh = mesh
        self.exps = exps
        self.mu = mu
        self.eq = eq
        self.mu_at_qp = mu_qp
        self.mu_element_integrals = mu_int
        self.interior = mesh.interior_indices


@dataclass(frozen=True)
class DualVector:
    """Pairings of a functional with the interior nodal basis functions."""

    values: np.ndarray
    interior_indices: np.ndarray

    def pair(self, v):
        """Duality pairing with a P1 function (its interior coefficients)."""
        return float(self.values @ v.nodal_values[self.interior_indices])

    def euclidean_norm(self):
        return float(np.linalg.norm(self.values))

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _flux(problem, grads):
    """Pointwise flux per element, with the weight already integrated.

    Returns (measure |g|^{p-1} + mu_int |g|^{q-1}) g / |g|, extended by zero
    where the gradient vanishes (valid for every p, q > 1).
    """
    p, q = problem.exps.p, problem.exps.q
    norms = np.linalg.norm(grads, axis=1)
    strength = (problem.mesh.element_measures * norms ** (p - 1.0)
                + problem.mu_element_integrals * norms ** (q - 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(norms[:, None] > 0.0, grads / norms[:, None], 0.0)
    return strength[:, None] * unit


def apply_operator(problem, u):
    """Dual vector of the double phase operator at u.

    Entry i is the quadrature value of the flux paired with the gradient of
    the i-th interior basis function.
    """
    if not is_dirichlet_conforming(u):
        raise InputError("u must vanish on the boundary")
    mesh = problem.mesh
    flux = _flux(problem, element_gradients(u))
    contrib = np.einsum("ei,eki->ek", flux, mesh.basis_gradients)
    dual = np.zeros(mesh.num_vertices)
    for k in range(mesh.elements.shape[1]):
        np.add.at(dual, mesh.elements[:, k], contrib[:, k])
    return DualVector(dual[problem.interior], problem.interior)


def energy(problem, u):
    """Weighted gradient energy (1/p) |grad u|^p + (mu/q) |grad u|^q integrated."""
    p, q = problem.exps.p, problem.exps.q
    norms = np.linalg.norm(element_gradients(u), axis=1)
    return float(np.sum(problem.mesh.element_measures * norms ** p) / p
                 + np.sum(problem.mu_element_integrals * norms ** q) / q)


def gradient_check(problem, u, v, h):
    """Relative gap between a central difference of the energy and the
    operator pairing; small values confirm the operator is the derivative."""
    if h <= 0.0:
        raise InputError("step h must be positive")
    mesh = problem.mesh
    plus = FemFunction(mesh, u.nodal_values + h * v.nodal_values)
    minus = FemFunction(mesh, u.nodal_values - h * v.nodal_values)
    fd = (energy(problem, plus) - energy(problem, minus)) / (2.0 * h)
    exact = apply_operator(problem, u).pair(v)
    return abs(fd - exact) / max(abs(fd), abs(exact), 1e-12)


def monotonicity_gap(problem, u, v):
    """Gradient-space pairing of the flux difference with grad(u) - grad(v).

    Each element contributes a nonnegative amount, so the sum stays above
    -1e-12 times the problem scale in floating point.  For boundary-vanishing
    u and v this equals the duality pairing of the operator difference with
    u - v.
    """
    gu = element_gradients(u)
    gv = element_gradients(v)
    return float(np.sum((_flux(problem, gu) - _flux(problem, gv)) * (gu - gv)))


def gradient_lp_norm(problem, u, r):
    """(integral |grad u|^r)^(1/r) with the problem quadrature."""
    norms = np.linalg.norm(element_gradients(u), axis=1)
    return float(np.sum(problem.mesh.element_measures * norms ** r)) ** (1.0 / r)


def gradient_seminorm_q_mu(problem, u):
    """(integral mu |grad u|^q)^(1/q)."""
    q = problem.exps.q
    norms = np.linalg.norm(element_gradients(u), axis=1)
    return float(np.sum(problem.mu_element_integrals * norms ** q)) ** (1.0 / q)


def gradient_luxemburg_norm(problem, u):
    """Gauge norm of |grad u| under the same modular; 0 for constant u."""
    p, q = problem.exps.p, problem.exps.q
    norms = np.linalg.norm(element_gradients(u), axis=1)
    part_p = float(np.sum(problem.mesh.element_measures * norms ** p))
    part_q = float(np.sum(problem.mu_element_integrals * norms ** q))
    if part_p + part_q == 0.0:
        return 0.0
    return gauge_from_parts(part_p, part_q, p, q)


def assemble_linear_stiffness(mesh, weights=None, interior_only=True):
    """Sparse P1 stiffness matrix of the linear Laplacian, optionally with a
    positive per-element coefficient.

    Serves as the preconditioner metric for descent iterations (with weights
    from the current gradient field it is the lagged-diffusivity
    linearization); the nonlinear operator itself is never assembled.
    """
    grads = mesh.basis_gradients
    scale = mesh.element_measures if weights is None \
        else mesh.element_measures * weights
    local = np.einsum("eki,eli->ekl", grads, grads) * scale[:, None, None]
    rows = np.broadcast_to(mesh.elements[:, :, None], local.shape).reshape(-1)
    cols = np.broadcast_to(mesh.elements[:, None, :], local.shape).reshape(-1)
    mat = sp.coo_matrix((local.reshape(-1), (rows, cols)),
                        shape=(mesh.num_vertices, mesh.num_vertices)).tocsr()
    if interior_only:
        idx = mesh.interior_indices
        mat = mat[idx][:, idx].tocsr()
    return mat


def descent_metric_weights(gradient_norms, p, q=None, mu_ratio=None,
                           floor_rel=1e-8, cap_rel=1e8):
    """Per-element coefficients of the lagged-diffusivity metric.

    |g|^{p-2} plus, when a weight ratio is given, mu_ratio |g|^{q-2}; the
    gradient norms are clipped relative to their largest value so the metric
    stays uniformly positive definite.
    """
    top = float(np.max(gradient_norms)) if gradient_norms.size else 0.0
    if top == 0.0:
        return np.ones_like(gradient_norms)
    gn = np.clip(gradient_norms, floor_rel * top, cap_rel * top)
    weights = gn ** (p - 2.0)
    if q is not None and mu_ratio is not None:
        weights = weights + mu_ratio * gn ** (q - 2.0)
    return weights
