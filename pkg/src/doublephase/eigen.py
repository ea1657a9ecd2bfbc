"""First Dirichlet eigenpair of the r-Laplacian by Rayleigh quotient descent.

The quotient |grad u|_r^r / |u|_r^r is minimized over boundary-vanishing P1
functions.  Iterates stay L^r-normalized; steps follow the quotient gradient
preconditioned by the inverse linear stiffness matrix, with Armijo
backtracking so the quotient never increases.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .discretization import (FemFunction, basis_load, default_rule,
                             is_dirichlet_conforming)
from .errors import ConvergenceError, InputError, PositivityError
from .operator import assemble_linear_stiffness, descent_metric_weights

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class EigenPair:
    """First eigenvalue with its L^r-normalized positive eigenfunction."""

    lambda_1: float
    eigenfunction: FemFunction
    r: float
    iterations: int
    residual_norm: float
    quotient_history: np.ndarray


def _quotient_parts(mesh, eq, vals, r):
    """(integral |grad u|^r, integral |u|^r) for nodal values vals."""
    grads = np.einsum("eki,ek->ei", mesh.basis_gradients, vals[mesh.elements])
    gn = np.linalg.norm(grads, axis=1)
    num = float(np.sum(mesh.element_measures * gn ** r))
    uq = eq.function_values(vals)
    den = float(np.sum(eq.weights * np.abs(uq) ** r))
    return num, den


def rayleigh_quotient(mesh, u, r, quad=None):
    """|grad u|_r^r / |u|_r^r; invariant under scaling of u."""
    if not is_dirichlet_conforming(u):
        raise InputError("u must vanish on the boundary")
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    num, den = _quotient_parts(mesh, eq, u.nodal_values, r)
    if den == 0.0:
        raise InputError("u must be nonzero")
    return num / den


def normalize_lr(mesh, u, r, quad=None):
    """Scale u so its L^r norm equals one."""
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    uq = eq.function_values(u.nodal_values)
    den = float(np.sum(eq.weights * np.abs(uq) ** r))
    if den == 0.0:
        raise InputError("u must be nonzero")
    return FemFunction(mesh, u.nodal_values / den ** (1.0 / r))


def positive_bump(mesh):
    """Interpolant of the product of half-period sine bumps, zero on the
    boundary; a strictly positive starting guess."""
    verts = mesh.vertices
    vals = np.ones(mesh.num_vertices)
    for axis in range(mesh.dimension):
        lo = verts[:, axis].min()
        hi = verts[:, axis].max()
        vals *= np.sin(np.pi * (verts[:, axis] - lo) / (hi - lo))
    vals[mesh.boundary_mask] = 0.0
    return FemFunction(mesh, vals)


def _eigen_residual(mesh, eq, vals, r, quotient, interior):
    """Dual residual of the eigen-equation and the quotient gradient.

    The gradient of the quotient at an L^r-normalized iterate is r times the
    residual vector, so both come from one evaluation.
    """
    grads = np.einsum("eki,ek->ei", mesh.basis_gradients, vals[mesh.elements])
    gn = np.linalg.norm(grads, axis=1)
    strength = mesh.element_measures * gn ** (r - 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(gn[:, None] > 0.0, grads / gn[:, None], 0.0)
    flux = strength[:, None] * unit
    contrib = np.einsum("ei,eki->ek", flux, mesh.basis_gradients)
    stiff = np.zeros(mesh.num_vertices)
    for k in range(mesh.elements.shape[1]):
        np.add.at(stiff, mesh.elements[:, k], contrib[:, k])
    uq = eq.function_values(vals)
    mass = basis_load(mesh, eq, np.abs(uq) ** (r - 1.0) * np.sign(uq))
    return stiff[interior] - quotient * mass[interior]


def solve_first_eigenpair(mesh, r, tol=1e-8, max_iter=2000, quad=None):
    """Minimize the Rayleigh quotient to the first Dirichlet eigenpair.

    Parameters
    ----------
    mesh : Mesh
    r : exponent of the r-Laplacian, r > 1.
    tol : relative quotient decrease threshold; the dual residual of the
        eigen-equation must also drop below 10 * tol before the solve stops.
    max_iter : accepted-step budget; exceeding it raises ConvergenceError
        with the best iterate attached.

    Returns an EigenPair whose eigenfunction is L^r-normalized, positive at
    every interior vertex, and has positive mean.
    """
    if r <= 1.0:
        raise InputError("exponent r must exceed 1")
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    interior = mesh.interior_indices
    if interior.size == 0:
        raise InputError("mesh has no interior vertices")
    static_metric = r == 2.0
    lu = splu(assemble_linear_stiffness(mesh).tocsc())

    vals = positive_bump(mesh).nodal_values.copy()
    num, den = _quotient_parts(mesh, eq, vals, r)
    vals = vals / den ** (1.0 / r)

    history = []
    prev_quotient = np.inf
    iterations = 0
    while True:
        num, den = _quotient_parts(mesh, eq, vals, r)
        quotient = num / den
        history.append(quotient)
        residual = _eigen_residual(mesh, eq, vals, r, quotient, interior) / den
        res_norm = float(np.linalg.norm(residual))
        rel_drop = (prev_quotient - quotient) / quotient
        if rel_drop <= tol and res_norm <= 10.0 * tol:
            break
        if not static_metric:
            grads = np.einsum("eki,ek->ei", mesh.basis_gradients,
                              vals[mesh.elements])
            weights = descent_metric_weights(np.linalg.norm(grads, axis=1), r)
            lu = splu(assemble_linear_stiffness(mesh, weights).tocsc())
        if iterations >= max_iter:
            best = _finish(mesh, eq, vals, r, quotient, res_norm, iterations,
                           history, check_positive=False)
            raise ConvergenceError("eigen iteration budget exhausted",
                                   best=best, iterations=iterations,
                                   residual=res_norm)
        grad = r * residual
        direction = -lu.solve(grad)
        slope = float(grad @ direction)
        if slope >= 0.0:
            if res_norm <= 10.0 * tol:
                break
            raise ConvergenceError("eigen descent direction degenerated",
                                   iterations=iterations, residual=res_norm)
        step = 1.0
        accepted = None
        for _ in range(_MAX_BACKTRACKS):
            trial = vals.copy()
            trial[interior] += step * direction
            t_num, t_den = _quotient_parts(mesh, eq, trial, r)
            if t_den > 0.0:
                t_quot = t_num / t_den
                if t_quot <= quotient + _ARMIJO * step * slope:
                    accepted = (trial, t_den)
                    break
            step *= 0.5
        if accepted is None:
            if res_norm <= 10.0 * tol:
                break
            raise ConvergenceError("eigen line search stalled",
                                   iterations=iterations, residual=res_norm)
        trial, t_den = accepted
        vals = trial / t_den ** (1.0 / r)
        prev_quotient = quotient
        iterations += 1
    return _finish(mesh, eq, vals, r, quotient, res_norm, iterations, history)


def _finish(mesh, eq, vals, r, quotient, res_norm, iterations, history,
            check_positive=True):
    interior = mesh.interior_indices
    if vals[interior].mean() < 0.0:
        vals = -vals
    if check_positive and not np.all(vals[interior] > 0.0):
        raise PositivityError("eigenfunction lost positivity at an interior vertex")
    uq = eq.function_values(vals)
    den = float(np.sum(eq.weights * np.abs(uq) ** r))
    vals = vals / den ** (1.0 / r)
    return EigenPair(quotient, FemFunction(mesh, vals), r, iterations,
                     res_norm, np.asarray(history))


def min_inward_slope(u):
    """Smallest inward difference quotient over boundary vertices.

    For the first eigenfunction this is positive (the outward normal slope is
    negative); a one-sided, report-only diagnostic.
    """
    mesh = u.mesh
    edges = mesh.edges
    vals = u.nodal_values
    lengths = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]],
                             axis=1)
    best = {}
    for (a, b), length in zip(edges, lengths):
        for bv, other in ((a, b), (b, a)):
            if mesh.boundary_mask[bv] and not mesh.boundary_mask[other]:
                slope = (vals[other] - vals[bv]) / length
                best[bv] = max(best.get(bv, -np.inf), slope)
    if not best:
        raise InputError("mesh has no boundary-interior edges")
    return float(min(best.values()))
