"""A posteriori checks: weak residuals, growth-bound sampling, and the
truncated-test identity used for boundedness diagnostics.

Pure diagnostics; safe for concurrent use.
"""

from dataclasses import dataclass

import numpy as np

from .discretization import basis_load, element_gradients, sample_field
from .errors import InputError, VerificationError
from .operator import apply_operator


@dataclass(frozen=True)
class ResidualReport:
    """Dual-norm sizes of a weak residual over the interior basis."""

    max_abs: float
    euclidean: float


def weak_residual(problem, u, rhs):
    """Residual of the weak equation against every interior basis function.

    Parameters
    ----------
    problem : Problem
    u : FemFunction vanishing on the boundary.
    rhs : callable (x, s) -> value of the reaction side at point x where the
        function takes the value s; broadcasting over flat arrays.

    Returns a ResidualReport with both the max-abs and Euclidean dual norms.
    """
    dual = apply_operator(problem, u)
    eq = problem.eq
    uq = eq.function_values(u.nodal_values)
    values = np.asarray(rhs(eq.points_flat, uq.reshape(-1)), dtype=float)
    values = np.broadcast_to(values, uq.reshape(-1).shape).reshape(uq.shape)
    load = basis_load(problem.mesh, eq, values)
    residual = dual.values - load[problem.interior]
    if residual.size == 0:
        return ResidualReport(0.0, 0.0)
    return ResidualReport(float(np.max(np.abs(residual))),
                          float(np.linalg.norm(residual)))


@dataclass(frozen=True)
class GrowthConstants:
    """Constants of the mixed growth bound
    c1 |xi|^{p (r-1)/r} + c2 |s|^{r-1} + c3."""

    c1: float
    c2: float
    c3: float
    r: float

    def __post_init__(self):
        if self.c1 < 0.0 or self.c2 < 0.0 or self.c3 < 0.0:
            raise InputError("growth constants must be nonnegative")
        if self.r <= 1.0:
            raise InputError("growth exponent r must exceed 1")

    def in_admissible_range(self, exps):
        """True when q < r <= critical exponent."""
        return exps.q < self.r <= exps.critical_exponent


@dataclass(frozen=True)
class GrowthReport:
    """Sampled comparison of |g| against the growth bound."""

    holds: bool
    max_ratio: float
    fitted_constant: float
    samples: int


def _default_directions(dim):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    angles = np.arange(8) * (np.pi / 4.0)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def check_growth_bound(g, constants, p, x_samples, s_values=None,
                       xi_values=None, slack=1e-9):
    """Sample |g(x, s, xi)| against the growth bound on a product grid.

    Also fits the smallest single constant c with
    |g| <= c (|xi|^{p(r-1)/r} + |s|^{r-1} + 1) over the samples.  Report
    only: sampling cannot certify the bound.
    """
    x = np.asarray(x_samples, dtype=float)
    x = x.reshape(-1, x.shape[-1])
    dim = x.shape[1]
    if s_values is None:
        mags = np.logspace(-2, 4, 13)
        s_values = np.concatenate([-mags[::-1], [0.0], mags])
    s = np.asarray(s_values, dtype=float)
    if xi_values is None:
        dirs = _default_directions(dim)
        mags = np.logspace(-2, 4, 7)
        xi_values = (dirs[:, None, :] * mags[None, :, None]).reshape(-1, dim)
        xi_values = np.vstack([np.zeros((1, dim)), xi_values])
    xi = np.asarray(xi_values, dtype=float).reshape(-1, dim)

    xb = x[:, None, None, :]
    sb = s[None, :, None]
    xib = xi[None, None, :, :]
    with np.errstate(over="ignore", invalid="ignore"):
        gv = np.abs(np.asarray(g(xb, sb, xib), dtype=float))
    gv = np.broadcast_to(gv, (x.shape[0], s.size, xi.shape[0]))
    xi_norm = np.linalg.norm(xi, axis=1)[None, None, :]
    base1 = xi_norm ** (p * (constants.r - 1.0) / constants.r)
    base2 = np.abs(sb) ** (constants.r - 1.0)
    bound = constants.c1 * base1 + constants.c2 * base2 + constants.c3
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0.0, gv / bound, np.where(gv > 0.0, np.inf, 0.0))
        fitted = gv / (base1 + base2 + 1.0)
    max_ratio = float(np.max(ratio))
    return GrowthReport(holds=bool(max_ratio <= 1.0 + slack),
                        max_ratio=max_ratio,
                        fitted_constant=float(np.max(fitted)),
                        samples=int(gv.size))


@dataclass(frozen=True)
class MoserReport:
    """Pieces of the truncated-test identity and its defect."""

    h: float
    kappa: float
    lhs_terms: tuple
    rhs: float
    gap: float


def _cut_interval(coords, values, h, ref):
    """Quadrature for a segment element cut by the level u = h.

    Returns (points, weights, inside) where inside marks the sub-piece on
    which u <= h.
    """
    (a,), (b,) = coords
    ua, ub = values
    t = (h - ua) / (ub - ua)
    split = a + t * (b - a)
    pts, wts, inside = [], [], []
    for lo, hi, below in ((a, split, ua <= h), (split, b, ua > h)):
        pts.append(lo + ref.points[:, 0, None] * (hi - lo))
        wts.append(ref.weights * (hi - lo))
        inside.append(np.full(len(ref.weights), below))
    return np.vstack(pts), np.concatenate(wts), np.concatenate(inside)


def _cut_triangle(coords, values, h, ref):
    """Quadrature for a triangle element cut by the level u = h.

    The level line of the affine u crosses two edges; each side is split
    into sub-triangles carrying the mapped reference rule.
    """
    below = values <= h
    lone = int(np.flatnonzero(below)[0]) if below.sum() == 1 else \
        int(np.flatnonzero(~below)[0])
    others = [k for k in range(3) if k != lone]
    cross = []
    for k in others:
        t = (h - values[lone]) / (values[k] - values[lone])
        cross.append(coords[lone] + t * (coords[k] - coords[lone]))
    p1, p2 = cross
    lone_tris = [(coords[lone], p1, p2)]
    other_tris = [(p1, coords[others[0]], coords[others[1]]),
                  (p1, coords[others[1]], p2)]
    pts, wts, inside = [], [], []
    for tris, is_lone in ((lone_tris, True), (other_tris, False)):
        flag = below[lone] if is_lone else not below[lone]
        for q0, q1, q2 in tris:
            e1 = np.asarray(q1) - np.asarray(q0)
            e2 = np.asarray(q2) - np.asarray(q0)
            det = abs(e1[0] * e2[1] - e1[1] * e2[0])
            pts.append(q0[None, :]
                       + ref.points[:, 0, None] * e1[None, :]
                       + ref.points[:, 1, None] * e2[None, :])
            wts.append(ref.weights * det)
            inside.append(np.full(len(ref.weights), flag))
    return np.vstack(pts), np.concatenate(wts), np.concatenate(inside)


def _moser_samples(problem, u, h):
    """Pointwise samples for the truncated-test integrals.

    Elements cut by the level u = h are split exactly along the affine level
    set, so every integrand piece seen by the rule is smooth; the truncation
    itself stays pointwise.  Returns flat arrays (points, weights, u values,
    gradient rows, mu values, inside mask).
    """
    mesh = problem.mesh
    eq = problem.eq
    vals = u.nodal_values
    grads = element_gradients(u)
    vert_vals = vals[mesh.elements]
    cut = (vert_vals.min(axis=1) < h) & (vert_vals.max(axis=1) > h)

    keep = ~cut
    points = [eq.points[keep].reshape(-1, mesh.dimension)]
    weights = [eq.weights[keep].reshape(-1)]
    uvals = [eq.function_values(vals)[keep].reshape(-1)]
    xi = [np.repeat(grads[keep], eq.num_points, axis=0)]
    mu = [problem.mu_at_qp[keep].reshape(-1)]
    inside = [np.repeat(vert_vals[keep].max(axis=1) <= h, eq.num_points)]

    splitter = _cut_interval if mesh.dimension == 1 else _cut_triangle
    for e in np.flatnonzero(cut):
        coords = mesh.vertices[mesh.elements[e]]
        pts, wts, flags = splitter(coords, vert_vals[e], h, eq.rule)
        points.append(pts)
        weights.append(wts)
        uvals.append(vals[mesh.elements[e, 0]]
                     + (pts - coords[0]) @ grads[e])
        xi.append(np.broadcast_to(grads[e], (len(wts), mesh.dimension)))
        mu.append(sample_field(problem.mu, pts))
        inside.append(flags)
    return (np.vstack(points), np.concatenate(weights), np.concatenate(uvals),
            np.vstack(xi), np.concatenate(mu), np.concatenate(inside))


def moser_identity_check(problem, u, g, h, kappa):
    """Evaluate the identity obtained by testing with u * min(u, h)^{kappa p}.

    The truncation min(u, h) is applied pointwise at quadrature points
    (never interpolated nodally); elements crossed by the level u = h are
    split exactly along it so the rule only sees smooth pieces, and the gap
    measures pure discretization error.  The two weighted terms are asserted
    nonnegative; for a discrete weak solution with reaction g the gap
    shrinks under refinement.

    Parameters
    ----------
    u : nonnegative FemFunction (nodal values >= -1e-10).
    g : callable (x, s, xi) -> reaction value; xi is the gradient of u.
    h : truncation level > 0.
    kappa : exponent > 0.
    """
    if h <= 0.0 or kappa <= 0.0:
        raise InputError("h and kappa must be positive")
    vals = u.nodal_values
    if vals.size and float(vals.min()) < -1e-10:
        raise InputError("u must be nonnegative (within 1e-10) at the vertices")
    p, q = problem.exps.p, problem.exps.q
    kp = kappa * p

    points, w, uq, xi, mu, inside = _moser_samples(problem, u, h)
    uq = np.clip(uq, 0.0, None)
    uh = np.minimum(uq, h)
    pow_uh = uh ** kp
    pow_inside = np.where(inside, uq ** kp, 0.0)
    gn = np.linalg.norm(xi, axis=1)
    gp = gn ** p
    gq = gn ** q

    term1 = float(np.sum(w * gp * pow_uh))
    term2 = kp * float(np.sum(w * gp * pow_inside))
    term3 = float(np.sum(w * mu * gq * pow_uh))
    term4 = kp * float(np.sum(w * mu * gq * pow_inside))
    if term3 < -1e-12 or term4 < -1e-12:
        raise VerificationError("weighted identity terms must be nonnegative")

    gv = np.asarray(g(points, uq, xi), dtype=float)
    gv = np.broadcast_to(gv, uq.shape)
    rhs = float(np.sum(w * gv * uq * pow_uh))

    gap = abs(term1 + term2 + term3 + term4 - rhs)
    return MoserReport(h=float(h), kappa=float(kappa),
                       lhs_terms=(term1, term2, term3, term4),
                       rhs=rhs, gap=gap)


@dataclass(frozen=True)
class SupReport:
    sup: float
    within_bar: object  # bool, or None when no bound was supplied


def sup_norm_report(u, u_bar=None):
    """Largest nodal magnitude, optionally compared against a constant bound."""
    sup = float(np.max(np.abs(u.nodal_values))) if u.nodal_values.size else 0.0
    within = None
    if u_bar is not None:
        within = bool(sup <= u_bar + 1e-6 * u_bar)
    return SupReport(sup, within)
