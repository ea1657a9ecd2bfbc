"""Modular, gauge (Luxemburg) norm, and weighted seminorm for the integrand
t^p + mu(x) t^q, plus the structural hypothesis checks.

All functions are pure and safe for concurrent use.
"""

import math
from dataclasses import dataclass

import numpy as np

from .discretization import default_rule, sample_field
from .errors import InputError


@dataclass(frozen=True)
class Exponents:
    """Growth exponents 1 < p < q with the ambient dimension N used by the
    hypothesis checks."""

    p: float
    q: float
    N: int

    def __post_init__(self):
        if not (1.0 < self.p < self.q):
            raise InputError("exponents must satisfy 1 < p < q")
        if self.N < 1:
            raise InputError("dimension N must be at least 1")

    @property
    def critical_exponent(self):
        """Sobolev exponent N p / (N - p); infinity when p >= N."""
        if self.p < self.N:
            return self.N * self.p / (self.N - self.p)
        return math.inf


@dataclass(frozen=True)
class HypothesisReport:
    """Sampled structural checks: exponent ordering, dimension gap, the
    Poincare-type ratio bound, weight sign, and a Lipschitz estimate."""

    p_lt_q: bool
    q_lt_N: bool
    ratio_ok: bool
    mu_nonnegative: bool
    mu_lipschitz: float
    critical_exponent: float

    @property
    def satisfied(self):
        return self.p_lt_q and self.q_lt_N and self.ratio_ok and self.mu_nonnegative


def _modulus_parts(u, mu, exps, quad=None):
    """Quadrature values of (integral |u|^p, integral mu |u|^q)."""
    mesh = u.mesh
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    uq = np.abs(eq.function_values(u.nodal_values))
    muq = sample_field(mu, eq.points)
    if np.any(muq < 0.0):
        raise InputError("mu must be nonnegative at quadrature points")
    part_p = float(np.sum(eq.weights * uq ** exps.p))
    part_q = float(np.sum(eq.weights * muq * uq ** exps.q))
    return part_p, part_q


def modulus(u, mu, exps, quad=None):
    """Integral of |u|^p + mu(x) |u|^q over the mesh."""
    part_p, part_q = _modulus_parts(u, mu, exps, quad)
    return part_p + part_q


def gauge_from_parts(part_p, part_q, p, q, rel_tol=1e-12, max_iter=200):
    """Unique t > 0 with part_p / t^p + part_q / t^q = 1.

    Brackets by doubling or halving from t = 1, then bisects; the map is
    continuous and strictly decreasing in t.
    """
    if part_p < 0.0 or part_q < 0.0 or part_p + part_q == 0.0:
        raise InputError("parts must be nonnegative and not both zero")

    def rho(t):
        # numpy scalars: overflow and division by an underflowed power give
        # inf instead of raising, which the bisection handles naturally
        with np.errstate(over="ignore", divide="ignore"):
            t = np.float64(t)
            total = np.float64(0.0)
            for part, exponent in ((part_p, p), (part_q, q)):
                if part > 0.0:
                    total = total + part / t ** exponent
            return float(total)

    lo = hi = 1.0
    if rho(1.0) > 1.0:
        while rho(hi) > 1.0:
            lo = hi
            hi *= 2.0
    else:
        while rho(lo) <= 1.0:
            hi = lo
            lo *= 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return 0.5 * (lo + hi)


def luxemburg_norm(u, mu, exps, quad=None):
    """Gauge of the modular unit ball: the t with modulus(u / t) = 1.

    Returns 0 for the zero function.
    """
    part_p, part_q = _modulus_parts(u, mu, exps, quad)
    if part_p + part_q == 0.0:
        return 0.0
    return gauge_from_parts(part_p, part_q, exps.p, exps.q)


def seminorm_q_mu(u, mu, q, quad=None):
    """Weighted seminorm (integral mu |u|^q)^(1/q)."""
    mesh = u.mesh
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    uq = np.abs(eq.function_values(u.nodal_values))
    muq = sample_field(mu, eq.points)
    if np.any(muq < 0.0):
        raise InputError("mu must be nonnegative at quadrature points")
    return float(np.sum(eq.weights * muq * uq ** q)) ** (1.0 / q)


@dataclass(frozen=True)
class SandwichReport:
    lhs: float
    mid: float
    rhs: float
    holds: bool


def check_sandwich(u, mu, exps, quad=None, slack=1e-10):
    """Evaluate min{t^p, t^q} <= modulus(u) <= max{t^p, t^q} at t = gauge.

    All three quantities use the same quadrature; holds allows a relative
    slack for rounding.
    """
    part_p, part_q = _modulus_parts(u, mu, exps, quad)
    mid = part_p + part_q
    if mid == 0.0:
        return SandwichReport(0.0, 0.0, 0.0, True)
    t = gauge_from_parts(part_p, part_q, exps.p, exps.q)
    tp, tq = t ** exps.p, t ** exps.q
    lhs, rhs = min(tp, tq), max(tp, tq)
    tol = slack * max(lhs, mid, rhs)
    return SandwichReport(lhs, mid, rhs, lhs <= mid + tol and mid <= rhs + tol)


def check_hypotheses(exps, mu, mesh, quad=None):
    """Report-only structural checks for a given weight field and mesh.

    The Lipschitz constant of mu is estimated by the largest difference
    quotient over mesh edges; this is a sample, not a proof.
    """
    eq = mesh.quadrature(quad or default_rule(mesh.dimension))
    mu_vertices = sample_field(mu, mesh.vertices)
    mu_qp = sample_field(mu, eq.points)
    nonneg = bool(np.min(mu_vertices) >= 0.0 and np.min(mu_qp) >= 0.0)
    edges = mesh.edges
    diffs = np.abs(mu_vertices[edges[:, 1]] - mu_vertices[edges[:, 0]])
    lengths = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    lipschitz = float(np.max(diffs / lengths)) if len(edges) else 0.0
    return HypothesisReport(
        p_lt_q=exps.p < exps.q,
        q_lt_N=exps.q < exps.N,
        ratio_ok=exps.q / exps.p < 1.0 + 1.0 / exps.N,
        mu_nonnegative=nonneg,
        mu_lipschitz=lipschitz,
        critical_exponent=exps.critical_exponent,
    )
