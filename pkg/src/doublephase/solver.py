"""Truncated reaction functionals and the two constant-sign solution pipeline.

The nonnegative branch builds a bounded reaction from an upper constant, the
truncated functional becomes coercive, and a preconditioned descent finds a
negative-energy minimizer that is verified a posteriori (sign, bound,
residual of the untruncated problem).  The nonpositive branch mirrors the
whole pipeline, so for odd reactions the two solutions are exact negatives of
each other.
"""

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import splu
from scipy.special import hyp2f1

from .discretization import (FemFunction, basis_load, element_gradients,
                             is_dirichlet_conforming)
from .eigen import solve_first_eigenpair
from .errors import (ConvergenceError, GateError, InputError, SeedError,
                     SuperlinearityError, VerificationError)
from .operator import (DualVector, apply_operator, assemble_linear_stiffness,
                       descent_metric_weights, energy)
from .orlicz import HypothesisReport, check_hypotheses
from .verify import weak_residual

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class Nonlinearity:
    """Reaction term f(x, s) together with its primitive F(x, s) in s.

    Both callables broadcast: x has shape (..., dim) and s broadcasts against
    x's leading shape.  F(x, 0) = 0 and dF/ds = f.
    """

    f: Callable
    F: Callable
    tag: str = "custom"

    def mirrored(self):
        """Reflected reaction s -> -f(x, -s); its primitive is F(x, -s)."""
        f0, F0 = self.f, self.F

        def f(x, s):
            return -np.asarray(f0(x, -np.asarray(s, dtype=float)), dtype=float)

        def F(x, s):
            return F0(x, -np.asarray(s, dtype=float))

        return Nonlinearity(f, F, self.tag + ":mirrored")

    def consistency_error(self, x, s, h=1e-6):
        """Max abs gap between f and a central difference of F (test aid)."""
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        fd = (np.asarray(self.F(x, s + h), dtype=float)
              - np.asarray(self.F(x, s - h), dtype=float)) / (2.0 * h)
        return float(np.max(np.abs(fd - np.asarray(self.f(x, s), dtype=float))))


def _as_field(a):
    """Coefficient as a spatial field; plain numbers become constants."""
    if callable(a):
        return a
    value = float(a)
    return lambda x: value


def power_reaction(r, coeff=1.0):
    """f(s) = coeff |s|^{r-2} s with primitive coeff |s|^r / r."""
    if r <= 1.0:
        raise InputError("power exponent r must exceed 1")
    coeff = float(coeff)

    def f(x, s):
        s = np.asarray(s, dtype=float)
        return coeff * np.abs(s) ** (r - 1.0) * np.sign(s)

    def F(x, s):
        s = np.asarray(s, dtype=float)
        return coeff * np.abs(s) ** r / r

    return Nonlinearity(f, F, f"power(r={r:g},coeff={coeff:g})")


def reaction_f1(a, r):
    """f(x, s) = a(x) |s|^{r-2} s."""
    if r <= 1.0:
        raise InputError("exponent r must exceed 1")
    af = _as_field(a)

    def f(x, s):
        s = np.asarray(s, dtype=float)
        return af(x) * np.abs(s) ** (r - 1.0) * np.sign(s)

    def F(x, s):
        s = np.asarray(s, dtype=float)
        return af(x) * np.abs(s) ** r / r

    return Nonlinearity(f, F, f"f1(r={r:g})")


def reaction_f2(a, q):
    """f(x, s) = a(x) |s|^{q-2} s log(1 + |s|).

    The primitive integrates t^{q-1} log(1 + t) exactly through the Gauss
    hypergeometric function, no quadrature involved.
    """
    if q <= 1.0:
        raise InputError("exponent q must exceed 1")
    af = _as_field(a)

    def f(x, s):
        s = np.asarray(s, dtype=float)
        return af(x) * np.abs(s) ** (q - 1.0) * np.sign(s) * np.log1p(np.abs(s))

    def F(x, s):
        s = np.asarray(s, dtype=float)
        m = np.abs(s)
        tail = m ** (q + 1.0) / (q + 1.0) * hyp2f1(1.0, q + 1.0, q + 2.0, -m)
        return af(x) * (m ** q * np.log1p(m) - tail) / q

    return Nonlinearity(f, F, f"f2(q={q:g})")


def reaction_f3(p, q):
    """Piecewise reaction: exponential tails glued to an oscillatory core on
    [-1, 1].  The primitive is integrated numerically (panels split at the
    joints)."""
    if not 1.0 < p < q:
        raise InputError("exponents must satisfy 1 < p < q")

    def f(x, s):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        xn = np.linalg.norm(x, axis=-1)
        with np.errstate(over="ignore"):
            left = -np.abs(s) ** (q - 1.0) * np.exp(-s - 1.0)
            mid = 0.5 * np.abs(s) ** p * ((s - 1.0) * np.cos(s + 1.0) + s + 1.0)
            right = (1.0 + (s - 1.0) * xn) * np.abs(s) ** (q - 1.0) * np.exp(s - 1.0)
        return np.select([s < -1.0, s <= 1.0], [left, mid], default=right)

    return Nonlinearity(f, primitive_from_f(f, breakpoints=(-1.0, 1.0)),
                        f"f3(p={p:g},q={q:g})")


def primitive_from_f(f, breakpoints=(), rel_tol=1e-10, order=16, max_doublings=6):
    """Primitive F(x, s) = integral of f(x, .) from 0 to s by panel quadrature.

    Gauss panels split at the supplied breakpoints; the panel count doubles
    until the result is stable to rel_tol.  The returned callable takes x of
    shape (m, dim) (or a single row) and s of shape (m,) or a scalar.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    cuts = np.array(sorted(breakpoints), dtype=float)

    def F(x, s):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        sf = np.atleast_1d(s).astype(float).reshape(-1)
        xa = np.asarray(x, dtype=float)
        xa = xa.reshape(-1, xa.shape[-1]) if xa.ndim > 0 else xa.reshape(1, 1)
        if xa.shape[0] not in (1, sf.size):
            raise InputError("x rows must match s samples (or be a single row)")
        lo = np.minimum(sf, 0.0)
        hi = np.maximum(sf, 0.0)
        bounds = [lo] + [np.clip(c, lo, hi) for c in cuts] + [hi]

        def panels(count):
            total = np.zeros(sf.size)
            for a, b in zip(bounds[:-1], bounds[1:]):
                width = b - a
                for i in range(count):
                    aa = a + width * (i / count)
                    half = width / (2.0 * count)
                    midpt = aa + half
                    t = midpt[:, None] + half[:, None] * nodes[None, :]
                    fv = np.asarray(f(xa[:, None, :], t), dtype=float)
                    fv = np.broadcast_to(fv, t.shape)
                    total += (half[:, None] * weights[None, :] * fv).sum(axis=1)
            return total

        result = panels(1)
        count = 1
        for _ in range(max_doublings):
            count *= 2
            refined = panels(count)
            done = np.max(np.abs(refined - result)) <= rel_tol * (
                1.0 + np.max(np.abs(refined)))
            result = refined
            if done:
                break
        result = np.where(sf >= 0.0, result, -result)
        return float(result[0]) if scalar else result.reshape(s.shape)

    return F


@dataclass(frozen=True)
class TruncationData:
    """Constant bound with the parameter and exponent that produced it.

    bound is positive for the nonnegative branch and negative for the
    mirrored one.
    """

    bound: float
    lam: float
    p: float

    def validate(self, f, x_samples):
        """Check the branch inequality at every sample; raise on violation."""
        x = np.asarray(x_samples, dtype=float)
        x = x.reshape(-1, x.shape[-1])
        b = self.bound
        fv = np.asarray(f(x, np.full(x.shape[0], b)), dtype=float)
        if b > 0.0:
            margin = self.lam * b ** (self.p - 1.0) - fv
            ok = np.all(margin <= 0.0)
        elif b < 0.0:
            margin = -self.lam * abs(b) ** (self.p - 1.0) - fv
            ok = np.all(margin >= 0.0)
        else:
            raise InputError("bound must be nonzero")
        if not ok:
            raise InputError("bound violates the branch inequality at a sample")


def find_upper_constant(f, lam, p, x_samples, cap=2.0 ** 40):
    """Smallest power of two s with lam s^{p-1} <= f(x, s) at every sample.

    Raises SuperlinearityError when no admissible value exists below cap.
    """
    if lam <= 0.0:
        raise InputError("lambda must be positive")
    if cap <= 1.0:
        raise InputError("cap must exceed 1")
    x = np.asarray(x_samples, dtype=float)
    x = x.reshape(-1, x.shape[-1])
    s = 1.0
    while s <= cap:
        margin = lam * s ** (p - 1.0) - np.asarray(f(x, s), dtype=float)
        if np.all(margin <= 0.0):
            return s
        s *= 2.0
    raise SuperlinearityError(
        f"no admissible constant up to cap={cap:g}; the reaction does not "
        "dominate the power term at the sampled points")


def positive_truncation(f, lam, u_bar, p):
    """Bounded reaction: zero below 0, lam s^{p-1} - f(x, s) on [0, u_bar],
    frozen at its u_bar value above."""
    if u_bar <= 0.0:
        raise InputError("u_bar must be positive")

    def h(x, s):
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, 0.0, u_bar)
        core = lam * sc ** (p - 1.0) - np.asarray(f(x, sc), dtype=float)
        return np.where(s < 0.0, 0.0, core)

    return h


def positive_truncation_primitive(f, F, lam, u_bar, p):
    """Primitive of the truncated reaction: zero below 0,
    lam s^p / p - F(x, s) on [0, u_bar], affine continuation above."""
    if u_bar <= 0.0:
        raise InputError("u_bar must be positive")

    def H(x, s):
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, 0.0, u_bar)
        core = lam * sc ** p / p - np.asarray(F(x, sc), dtype=float)
        slope = lam * u_bar ** (p - 1.0) - np.asarray(f(x, sc), dtype=float)
        out = core + np.where(s > u_bar, slope * (s - u_bar), 0.0)
        return np.where(s <= 0.0, 0.0, out)

    return H


def truncated_functional(problem, primitive, u):
    """Gradient energy minus the integral of the truncated primitive at u."""
    eq = problem.eq
    uq = eq.function_values(u.nodal_values)
    hv = np.asarray(primitive(eq.points_flat, uq.reshape(-1)), dtype=float)
    hv = np.broadcast_to(hv, uq.reshape(-1).shape).reshape(uq.shape)
    return energy(problem, u) - float(np.sum(eq.weights * hv))


def original_rhs(f, lam, p):
    """Reaction side lam |s|^{p-2} s - f(x, s) of the untruncated problem."""
    fn = f.f if isinstance(f, Nonlinearity) else f

    def rhs(x, s):
        s = np.asarray(s, dtype=float)
        return (lam * np.abs(s) ** (p - 1.0) * np.sign(s)
                - np.asarray(fn(x, s), dtype=float))

    return rhs


@dataclass(frozen=True)
class ReactionReport:
    """Sampled reaction hypotheses: boundedness on a bounded set, growth of
    f(x, s) s / |s|^q at large |s|, and decay of f / (|s|^{p-2} s) near 0.

    Report only; limits cannot be certified by sampling.
    """

    bounded_max: float
    bounded_ok: bool
    superlinear_ratios: np.ndarray
    superlinear_ok: bool
    origin_ratios: np.ndarray
    origin_ok: bool

    @property
    def ok(self):
        return self.bounded_ok and self.superlinear_ok and self.origin_ok


def check_reaction_hypotheses(f, p, q, x_samples, s_bound=8.0,
                              superlinear_s=(1e1, 1e2, 1e3, 1e4),
                              origin_s=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                              threshold=1.0):
    """Sample the three reaction hypotheses on given spatial points.

    superlinear: the worst-case (over x) ratio f(x, s) s / |s|^q must be
    nondecreasing in |s| for both signs and exceed the threshold at the
    largest sample.  origin: the worst-case |f / (|s|^{p-2} s)| must decrease
    toward zero as |s| shrinks.
    """
    x = np.asarray(x_samples, dtype=float)
    x = x.reshape(-1, x.shape[-1])

    with np.errstate(over="ignore", invalid="ignore"):
        grid = np.linspace(-s_bound, s_bound, 41)
        vals = np.asarray(f(x[:, None, :], grid[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (x.shape[0], grid.size))
        bounded_max = float(np.max(np.abs(vals)))
        bounded_ok = bool(np.isfinite(bounded_max))

        sup_rows = []
        for sign in (1.0, -1.0):
            row = []
            for mag in superlinear_s:
                s = sign * mag
                fv = np.asarray(f(x, np.full(x.shape[0], s)), dtype=float)
                fv = np.broadcast_to(fv, (x.shape[0],))
                row.append(float(np.min(fv * s / mag ** q)))
            sup_rows.append(row)
        superlinear_ratios = np.asarray(sup_rows)
        lower = superlinear_ratios[:, :-1]
        # slack capped so infinite ratios stay comparable (inf - inf is nan)
        slack = 1e-9 * np.minimum(np.abs(lower), 1e300) + 1e-30
        increasing = np.all(superlinear_ratios[:, 1:] >= lower - slack)
        tall = np.all(superlinear_ratios[:, -1] > threshold)
        superlinear_ok = bool(increasing and tall
                              and not np.any(np.isnan(superlinear_ratios)))

        origin_rows = []
        for sign in (1.0, -1.0):
            row = []
            for mag in origin_s:
                s = sign * mag
                fv = np.asarray(f(x, np.full(x.shape[0], s)), dtype=float)
                fv = np.broadcast_to(fv, (x.shape[0],))
                denom = mag ** (p - 1.0) * np.sign(s)
                row.append(float(np.max(np.abs(fv / denom))))
            origin_rows.append(row)
        origin_ratios = np.asarray(origin_rows)
        decreasing = np.all(np.diff(origin_ratios, axis=1)
                            <= 1e-9 * np.abs(origin_ratios[:, :-1]) + 1e-30)
        vanishing = np.all(origin_ratios[:, -1] <= 0.5 * origin_ratios[:, 0] + 1e-30)
        origin_ok = bool(decreasing and vanishing
                         and not np.any(np.isnan(origin_ratios)))

    return ReactionReport(bounded_max, bounded_ok, superlinear_ratios,
                          superlinear_ok, origin_ratios, origin_ok)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a truncated-functional minimization with diagnostics."""

    solution: FemFunction
    phi_value: float
    residual_dual_norm: float
    iterations: int
    min_value: float
    max_value: float
    initial_residual: float
    u_bar: Optional[float] = None
    lam: Optional[float] = None
    lambda_1p: Optional[float] = None
    original_residual: Optional[float] = None
    branch: str = "+"
    hypothesis: Optional[HypothesisReport] = None
    reaction: Optional[ReactionReport] = None

    def summary(self):
        """Flat key/value pairs in a fixed order, used by the file writers."""
        items = [
            ("branch", self.branch),
            ("lambda", self.lam),
            ("lambda_1p", self.lambda_1p),
            ("u_bar", self.u_bar),
            ("phi_value", self.phi_value),
            ("residual_dual_norm", self.residual_dual_norm),
            ("original_residual", self.original_residual),
            ("initial_residual", self.initial_residual),
            ("iterations", self.iterations),
            ("min_value", self.min_value),
            ("max_value", self.max_value),
        ]
        if self.hypothesis is not None:
            hyp = self.hypothesis
            items += [
                ("hyp_p_lt_q", hyp.p_lt_q),
                ("hyp_q_lt_N", hyp.q_lt_N),
                ("hyp_ratio_ok", hyp.ratio_ok),
                ("hyp_mu_nonnegative", hyp.mu_nonnegative),
                ("hyp_mu_lipschitz", hyp.mu_lipschitz),
                ("hyp_critical_exponent", hyp.critical_exponent),
            ]
        if self.reaction is not None:
            items += [
                ("reaction_bounded_ok", self.reaction.bounded_ok),
                ("reaction_superlinear_ok", self.reaction.superlinear_ok),
                ("reaction_origin_ok", self.reaction.origin_ok),
            ]
        return items


def minimize_functional(problem, fun, grad, u0, tol=1e-8, max_iter=50000):
    """Descend fun from u0 until the dual residual meets its relative target.

    Steps follow the residual preconditioned by the inverse linear stiffness
    matrix with Armijo backtracking on fun, so every accepted step strictly
    decreases it.  Stops when the Euclidean dual norm of grad(u) drops to
    tol * (1 + initial norm).  Deterministic given its inputs.
    """
    if not is_dirichlet_conforming(u0):
        raise InputError("u0 must vanish on the boundary")
    mesh = problem.mesh
    interior = problem.interior
    p, q = problem.exps.p, problem.exps.q
    mu_ratio = problem.mu_element_integrals / mesh.element_measures
    static_metric = p == 2.0 and not np.any(mu_ratio)
    lu = splu(assemble_linear_stiffness(mesh).tocsc())

    vals = u0.nodal_values.copy()
    u = FemFunction(mesh, vals)
    fval = float(fun(u))
    rvec = grad(u)
    res_norm = rvec.euclidean_norm()
    initial = res_norm
    target = tol * (1.0 + initial)
    iterations = 0

    def report(u, fval, res_norm, iterations):
        return SolveReport(solution=u, phi_value=fval,
                           residual_dual_norm=res_norm, iterations=iterations,
                           min_value=float(u.nodal_values.min()),
                           max_value=float(u.nodal_values.max()),
                           initial_residual=initial)

    while res_norm > target:
        if iterations >= max_iter:
            raise ConvergenceError("descent budget exhausted",
                                   best=report(u, fval, res_norm, iterations),
                                   iterations=iterations, residual=res_norm)
        if not static_metric:
            norms = np.linalg.norm(element_gradients(u), axis=1)
            weights = descent_metric_weights(norms, p, q, mu_ratio)
            lu = splu(assemble_linear_stiffness(mesh, weights).tocsc())
        direction = -lu.solve(rvec.values)
        slope = float(rvec.values @ direction)
        if slope >= 0.0:
            direction = -rvec.values
            slope = -res_norm * res_norm
        step = 1.0
        accepted = None
        fresh_residual = None
        noise = 8.0 * np.finfo(float).eps * max(1.0, abs(fval))
        for _ in range(_MAX_BACKTRACKS):
            trial_vals = vals.copy()
            trial_vals[interior] += step * direction
            trial = FemFunction(mesh, trial_vals)
            trial_f = float(fun(trial))
            if np.isfinite(trial_f):
                threshold = fval + _ARMIJO * step * slope
                if threshold <= fval - noise and trial_f <= threshold:
                    accepted = (trial, trial_vals, trial_f)
                    break
                if trial_f <= fval + noise:
                    # The certified decrease is below the evaluation noise of
                    # fun near the minimum; require residual progress instead.
                    trial_r = grad(trial)
                    trial_norm = trial_r.euclidean_norm()
                    if trial_norm < res_norm:
                        accepted = (trial, trial_vals, trial_f)
                        fresh_residual = (trial_r, trial_norm)
                        break
            step *= 0.5
        if accepted is None:
            raise ConvergenceError("line search stalled",
                                   best=report(u, fval, res_norm, iterations),
                                   iterations=iterations, residual=res_norm)
        u, vals, fval = accepted
        iterations += 1
        if fresh_residual is None:
            rvec = grad(u)
            res_norm = rvec.euclidean_norm()
        else:
            rvec, res_norm = fresh_residual
    return report(u, fval, res_norm, iterations)


def solve_positive(problem, f, lam, tol=1e-8, *, eigen_tol=1e-8,
                   eigen_max_iter=2000, max_iter=50000, bound_tol_rel=1e-6,
                   cap=2.0 ** 40, seed_levels=21, eigenpair=None):
    """Nonnegative solution of the parametric double phase problem.

    Pipeline: first eigenpair (gate lam > lambda_1), upper constant by
    doubling, truncated functional, seed scan along the scaled eigenfunction,
    descent, then a posteriori verification of sign, bound, negativity of the
    functional, and the residual of the untruncated problem.

    Raises GateError, SuperlinearityError, SeedError, ConvergenceError, or
    VerificationError when the corresponding stage fails.
    """
    exps = problem.exps
    p, q = exps.p, exps.q
    mesh = problem.mesh
    ep = eigenpair
    if ep is None:
        ep = solve_first_eigenpair(mesh, p, tol=eigen_tol,
                                   max_iter=eigen_max_iter, quad=problem.eq.rule)
    if not lam > ep.lambda_1:
        raise GateError(f"lambda={lam:.6g} does not exceed the first "
                        f"eigenvalue {ep.lambda_1:.6g}")
    xs = problem.eq.points_flat
    u_bar = find_upper_constant(f.f, lam, p, xs, cap=cap)
    TruncationData(bound=u_bar, lam=lam, p=p).validate(f.f, xs)
    h_fun = positive_truncation(f.f, lam, u_bar, p)
    big_h = positive_truncation_primitive(f.f, f.F, lam, u_bar, p)

    def fun(u):
        return truncated_functional(problem, big_h, u)

    def grad(u):
        dual = apply_operator(problem, u)
        uq = problem.eq.function_values(u.nodal_values)
        hv = np.asarray(h_fun(xs, uq.reshape(-1)), dtype=float)
        hv = np.broadcast_to(hv, uq.reshape(-1).shape).reshape(uq.shape)
        load = basis_load(mesh, problem.eq, hv)
        return DualVector(dual.values - load[problem.interior], problem.interior)

    base = ep.eigenfunction.nodal_values
    best_level, best_value = None, 0.0
    for level in range(seed_levels):
        candidate = FemFunction(mesh, base * 2.0 ** (-level))
        value = fun(candidate)
        if value < best_value:
            best_level, best_value = level, value
    if best_level is None:
        raise SeedError("the truncated functional is nonnegative along the "
                        "whole seed scan; no nontrivial minimizer certified")
    seed = FemFunction(mesh, base * 2.0 ** (-best_level))

    rep = minimize_functional(problem, fun, grad, seed, tol=tol, max_iter=max_iter)
    bound_tol = bound_tol_rel * u_bar
    if rep.min_value < -bound_tol:
        raise VerificationError(f"minimizer dips to {rep.min_value:.3e}, below "
                                f"the sign tolerance {-bound_tol:.3e}")
    if rep.max_value > u_bar + bound_tol:
        raise VerificationError(f"minimizer reaches {rep.max_value:.6g}, above "
                                f"the bound {u_bar:.6g} plus tolerance")
    if not rep.phi_value < 0.0:
        raise VerificationError("minimizer is not energetically nontrivial")
    residual = weak_residual(problem, rep.solution, original_rhs(f, lam, p))
    target = tol * (1.0 + rep.initial_residual)
    if residual.euclidean > target:
        raise VerificationError(f"untruncated residual {residual.euclidean:.3e} "
                                f"exceeds the target {target:.3e}")

    hypothesis = check_hypotheses(exps, problem.mu, mesh, quad=problem.eq.rule)
    reaction = check_reaction_hypotheses(f.f, p, q, xs)
    if not reaction.ok:
        warnings.warn("sampled reaction hypotheses failed "
                      f"(bounded={reaction.bounded_ok}, "
                      f"superlinear={reaction.superlinear_ok}, "
                      f"origin={reaction.origin_ok})", stacklevel=2)
    return dataclasses.replace(rep, u_bar=u_bar, lam=float(lam),
                               lambda_1p=ep.lambda_1,
                               original_residual=residual.euclidean,
                               branch="+", hypothesis=hypothesis,
                               reaction=reaction)


def solve_negative(problem, f, lam, tol=1e-8, **options):
    """Nonpositive solution by mirroring the nonnegative pipeline.

    Runs solve_positive on the reflected reaction and negates the result, so
    for odd reactions the two branches agree up to sign exactly.  The
    reported bound constant is negative.
    """
    rep = solve_positive(problem, f.mirrored(), lam, tol=tol, **options)
    solution = FemFunction(problem.mesh, -rep.solution.nodal_values)
    return dataclasses.replace(rep, solution=solution,
                               min_value=-rep.max_value,
                               max_value=-rep.min_value,
                               u_bar=-rep.u_bar, branch="-")
