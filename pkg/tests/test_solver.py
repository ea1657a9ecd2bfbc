import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doublephase import (DualVector, Exponents, FemFunction, GateError,
                         Problem, SeedError, SuperlinearityError,
                         TruncationData, apply_operator, build_mesh,
                         check_reaction_hypotheses, find_upper_constant,
                         gradient_seminorm_q_mu, interpolate,
                         minimize_functional, original_rhs,
                         positive_truncation, positive_truncation_primitive,
                         power_reaction, primitive_from_f, reaction_f1,
                         reaction_f2, reaction_f3, solve_first_eigenpair,
                         solve_negative, solve_positive, truncated_functional)
from doublephase.discretization import basis_load

from oracles import dense_load, dense_stiffness

ZERO = lambda x: 0.0
X_SAMPLES = np.linspace(0.05, 0.95, 9)[:, None]
LAMBDA = 2.0 * np.pi ** 2


@pytest.fixture(scope="module")
def cubic_setup():
    mesh = build_mesh((0.0, 1.0), 32)
    problem = Problem(mesh, Exponents(2.0, 3.0, 1), ZERO)
    return problem, power_reaction(4.0)


# ---------------------------------------------------------------- reactions

def test_power_reaction_values():
    f = power_reaction(4.0)
    assert f.f(None, 2.0) == pytest.approx(8.0)
    assert f.f(None, -2.0) == pytest.approx(-8.0)
    assert f.F(None, 2.0) == pytest.approx(4.0)
    assert f.consistency_error(np.zeros((5, 1)), np.linspace(-2, 2, 5)) < 1e-8


def test_f1_with_spatial_coefficient():
    f = reaction_f1(lambda x: 1.0 + x[..., 0], 3.0)
    x = np.array([[0.5]])
    assert f.f(x, 2.0) == pytest.approx(1.5 * 4.0 * 2.0 / 2.0)  # a |s|^{r-2} s
    assert f.consistency_error(np.tile(x, (7, 1)), np.linspace(-3, 3, 7)) < 1e-7


def test_f2_closed_form_primitive():
    f = reaction_f2(1.3, 2.7)
    x = np.zeros((9, 1))
    s = np.array([-4.0, -1.5, -0.3, -0.01, 0.0, 0.01, 0.3, 1.5, 4.0])
    assert f.consistency_error(x, s) < 1e-8
    assert np.all(np.asarray(f.F(x, s)) >= 0.0)
    assert float(np.asarray(f.F(x, np.zeros(9)))[0]) == 0.0


def test_f3_numeric_primitive():
    f = reaction_f3(1.5, 2.5)
    x = np.array([[0.2], [0.6], [0.9], [0.4], [0.1], [0.8], [0.5]])
    s = np.array([-2.5, -1.0, -0.4, 0.0, 0.7, 1.0, 2.2])
    assert f.consistency_error(x, s) < 1e-6
    assert np.max(np.abs(np.asarray(f.F(x, np.zeros(7))))) == 0.0


def test_mirrored_reaction_identity():
    f = reaction_f1(1.0, 3.2)
    m = f.mirrored()
    s = np.linspace(-2, 2, 11)
    x = np.zeros((11, 1))
    # f1 is odd, so the mirror reproduces it exactly
    assert np.array_equal(np.asarray(m.f(x, s)), np.asarray(f.f(x, s)))
    assert np.allclose(np.asarray(m.F(x, s)), np.asarray(f.F(x, s)))


def test_primitive_from_f_matches_closed_form():
    base = power_reaction(3.5)
    numeric = primitive_from_f(base.f)
    x = np.zeros((6, 1))
    s = np.array([-2.0, -0.5, 0.0, 0.3, 1.0, 2.5])
    assert np.allclose(numeric(x, s), np.asarray(base.F(x, s)), atol=1e-11)
    assert numeric(np.zeros((1, 1)), 1.5) == pytest.approx(1.5 ** 3.5 / 3.5, rel=1e-12)


# ------------------------------------------------------- truncation machinery

def test_find_upper_constant_cubic():
    # lam s <= s^3 first holds at s >= sqrt(10); doubling finds 4
    f = power_reaction(4.0)
    assert find_upper_constant(f.f, 10.0, 2.0, X_SAMPLES) == 4.0


def test_find_upper_constant_boundary_equality():
    f = power_reaction(5.0, coeff=2.0)  # f(s) = 2 |s|^3 s
    assert find_upper_constant(f.f, 2.0, 2.0, X_SAMPLES) == 1.0


def test_find_upper_constant_superlinearity_error():
    linear = power_reaction(2.0)  # f(s) = s
    with pytest.raises(SuperlinearityError):
        find_upper_constant(linear.f, 2.0, 2.0, X_SAMPLES, cap=2.0 ** 40)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.5, max_value=50.0),
       st.floats(min_value=3.1, max_value=5.0))
def test_find_upper_constant_property(lam, r):
    f = power_reaction(r)
    u_bar = find_upper_constant(f.f, lam, 2.0, X_SAMPLES)
    margin = lam * u_bar - float(np.max(f.f(X_SAMPLES, u_bar)))
    assert margin <= 0.0
    if u_bar > 1.0:
        half = u_bar / 2.0
        assert lam * half - float(np.max(f.f(X_SAMPLES, half))) > 0.0


def test_truncation_data_validation():
    f = power_reaction(4.0)
    TruncationData(bound=4.0, lam=10.0, p=2.0).validate(f.f, X_SAMPLES)
    TruncationData(bound=-4.0, lam=10.0, p=2.0).validate(f.f, X_SAMPLES)
    with pytest.raises(Exception):
        TruncationData(bound=1.0, lam=10.0, p=2.0).validate(f.f, X_SAMPLES)


def test_truncation_branches():
    f = power_reaction(4.0)
    lam, u_bar, p = 10.0, 4.0, 2.0
    h = positive_truncation(f.f, lam, u_bar, p)
    x = np.zeros((1, 1))
    assert float(np.asarray(h(x, -1.0))) == 0.0
    mid = u_bar / 2.0
    assert float(np.asarray(h(x, mid))) == pytest.approx(lam * mid - mid ** 3)
    frozen = lam * u_bar - u_bar ** 3
    assert float(np.asarray(h(x, 2 * u_bar))) == pytest.approx(frozen)


def test_truncation_continuity_for_builtins():
    x = np.zeros((1, 1))
    for f in (power_reaction(4.0), reaction_f1(1.0, 3.5),
              reaction_f2(1.0, 3.0), reaction_f3(2.0, 3.0)):
        h = positive_truncation(f.f, 5.0, 2.0, 2.0)
        for s0 in (0.0, 2.0):
            left = float(np.asarray(h(x, s0 - 1e-9)))
            right = float(np.asarray(h(x, s0 + 1e-9)))
            assert abs(left - right) < 1e-7


def test_primitive_plus_worked_value():
    # f(s) = s^3, lam = 10, p = 2, s = 1: 10/2 - 1/4
    f = power_reaction(4.0)
    big_h = positive_truncation_primitive(f.f, f.F, 10.0, 4.0, 2.0)
    x = np.zeros((1, 1))
    assert float(np.asarray(big_h(x, 1.0))) == pytest.approx(4.75)
    assert float(np.asarray(big_h(x, -3.0))) == 0.0
    assert float(np.asarray(big_h(x, 0.0))) == 0.0


def test_primitive_plus_is_antiderivative():
    f = reaction_f2(1.0, 3.0)
    lam, u_bar, p = 7.0, 2.0, 2.1
    h = positive_truncation(f.f, lam, u_bar, p)
    big_h = positive_truncation_primitive(f.f, f.F, lam, u_bar, p)
    x = np.zeros((1, 1))
    rng = np.random.default_rng(3)
    for s in rng.uniform(-1.0, 2.0 * u_bar, size=20):
        if min(abs(s), abs(s - u_bar)) < 1e-4:
            continue  # kink points of the truncated reaction
        fd = (float(np.asarray(big_h(x, s + 1e-6)))
              - float(np.asarray(big_h(x, s - 1e-6)))) / 2e-6
        assert fd == pytest.approx(float(np.asarray(h(x, s))), abs=1e-6)


def test_primitive_plus_smooth_at_bound():
    f = power_reaction(4.0)
    big_h = positive_truncation_primitive(f.f, f.F, 10.0, 4.0, 2.0)
    x = np.zeros((1, 1))
    eps = 1e-7
    below = float(np.asarray(big_h(x, 4.0 - eps)))
    at = float(np.asarray(big_h(x, 4.0)))
    above = float(np.asarray(big_h(x, 4.0 + eps)))
    assert abs(at - below) < 1e-5
    assert abs(above - at) < 1e-5
    slope_below = (at - below) / eps
    slope_above = (above - at) / eps
    assert slope_below == pytest.approx(slope_above, abs=1e-4)


# ------------------------------------------------------------- functionals

def test_functional_vanishes_at_zero(cubic_setup):
    problem, f = cubic_setup
    big_h = positive_truncation_primitive(f.f, f.F, LAMBDA, 8.0, 2.0)
    zero = interpolate(problem.mesh, ZERO)
    assert truncated_functional(problem, big_h, zero) == 0.0


def test_functional_negative_for_small_scalings(cubic_setup):
    problem, f = cubic_setup
    ep = solve_first_eigenpair(problem.mesh, 2.0, tol=1e-9)
    u_bar = find_upper_constant(f.f, LAMBDA, 2.0, problem.eq.points_flat)
    big_h = positive_truncation_primitive(f.f, f.F, LAMBDA, u_bar, 2.0)
    small = FemFunction(problem.mesh, 0.25 * ep.eigenfunction.nodal_values)
    assert truncated_functional(problem, big_h, small) < 0.0


def test_functional_coercive_along_ray(cubic_setup):
    problem, f = cubic_setup
    ep = solve_first_eigenpair(problem.mesh, 2.0, tol=1e-9)
    u_bar = find_upper_constant(f.f, LAMBDA, 2.0, problem.eq.points_flat)
    big_h = positive_truncation_primitive(f.f, f.F, LAMBDA, u_bar, 2.0)
    values = []
    for t in (8.0, 16.0, 32.0, 64.0):
        u = FemFunction(problem.mesh, t * ep.eigenfunction.nodal_values)
        values.append(truncated_functional(problem, big_h, u))
    assert values[-1] > 0.0
    assert all(a < b for a, b in zip(values, values[1:]))


def test_seed_estimate_bound(cubic_setup):
    # with eps = (lam - lam1)/2 and t small enough that t u1 stays below
    # delta = sqrt(2 eps / (lam... the quartic primitive F(s) = s^4/4 obeys
    # F <= (eps/p) s^2 for |s| <= sqrt(2 eps), giving the negative upper bound
    problem, f = cubic_setup
    ep = solve_first_eigenpair(problem.mesh, 2.0, tol=1e-10)
    lam1 = ep.lambda_1
    eps = (LAMBDA - lam1) / 2.0
    delta = np.sqrt(2.0 * eps)
    sup = float(np.max(ep.eigenfunction.nodal_values))
    u_bar = find_upper_constant(f.f, LAMBDA, 2.0, problem.eq.points_flat)
    big_h = positive_truncation_primitive(f.f, f.F, LAMBDA, u_bar, 2.0)
    t = min(0.9 * delta / sup, 1.0)
    seminorm = gradient_seminorm_q_mu(problem, ep.eigenfunction)
    bound = (t ** 2.0 * (lam1 - LAMBDA + eps) / 2.0
             + t ** 3.0 * seminorm ** 3.0 / 3.0)
    assert bound < 0.0
    value = truncated_functional(
        problem, big_h, FemFunction(problem.mesh, t * ep.eigenfunction.nodal_values))
    assert value <= bound + 1e-12


# ------------------------------------------------------------- minimization

def test_minimize_quadratic_matches_linear_solve():
    mesh = build_mesh((0.0, 1.0), 24)
    problem = Problem(mesh, Exponents(2.0, 3.0, 1), ZERO)
    load_fn = lambda x: np.sin(2.0 * np.pi * x)

    def fun(u):
        uq = problem.eq.function_values(u.nodal_values)
        load = np.sum(problem.eq.weights * load_fn(problem.eq.points[..., 0]) * uq)
        return 0.5 * apply_operator(problem, u).pair(u) - float(load)

    def grad(u):
        uq = problem.eq.function_values(u.nodal_values)
        lv = basis_load(mesh, problem.eq, load_fn(problem.eq.points[..., 0]))
        return DualVector(apply_operator(problem, u).values - lv[problem.interior],
                          problem.interior)

    rep = minimize_functional(problem, fun, grad,
                              interpolate(mesh, ZERO), tol=1e-12)
    oracle = np.linalg.solve(dense_stiffness(mesh),
                             dense_load(mesh, load_fn, panels=400))
    got = rep.solution.nodal_values[mesh.interior_indices]
    assert np.allclose(got, oracle, atol=1e-8)
    assert rep.residual_dual_norm <= 1e-12 * (1.0 + rep.initial_residual)


def test_minimize_critical_start_stays(cubic_setup):
    problem, f = cubic_setup
    rep = solve_positive(problem, f, LAMBDA, tol=1e-12)
    big_h = positive_truncation_primitive(f.f, f.F, LAMBDA, rep.u_bar, 2.0)
    h_fun = positive_truncation(f.f, LAMBDA, rep.u_bar, 2.0)

    def fun(u):
        return truncated_functional(problem, big_h, u)

    def grad(u):
        uq = problem.eq.function_values(u.nodal_values)
        hv = np.asarray(h_fun(problem.eq.points_flat, uq.reshape(-1))).reshape(uq.shape)
        lv = basis_load(problem.mesh, problem.eq, hv)
        return DualVector(apply_operator(problem, u).values - lv[problem.interior],
                          problem.interior)

    again = minimize_functional(problem, fun, grad, rep.solution, tol=1e-10)
    assert again.iterations <= 1
    assert np.allclose(again.solution.nodal_values, rep.solution.nodal_values,
                       atol=1e-9)


# ------------------------------------------------------------ full pipeline

def test_solve_positive_cubic(cubic_setup):
    problem, f = cubic_setup
    rep = solve_positive(problem, f, LAMBDA, tol=1e-9)
    assert rep.u_bar == 8.0
    assert rep.phi_value < 0.0
    assert rep.min_value >= -1e-8
    assert rep.max_value <= np.sqrt(LAMBDA) + 1e-6
    assert rep.original_residual <= 1e-9 * (1.0 + rep.initial_residual)
    assert rep.branch == "+"
    assert rep.hypothesis is not None and rep.reaction is not None
    assert rep.reaction.ok


def test_solve_gate_error(cubic_setup):
    problem, f = cubic_setup
    ep = solve_first_eigenpair(problem.mesh, 2.0, tol=1e-9)
    with pytest.raises(GateError):
        solve_positive(problem, f, 0.5 * ep.lambda_1, eigenpair=ep)
    with pytest.raises(GateError):
        solve_positive(problem, f, ep.lambda_1, eigenpair=ep)


def test_solve_seed_error_when_functional_nonnegative(cubic_setup):
    # with an eigenpair reporting a huge lambda_1 the gate passes while the
    # actual lambda is too small for any negative seed value
    problem, f = cubic_setup
    ep = solve_first_eigenpair(problem.mesh, 2.0, tol=1e-9)
    import dataclasses
    fake = dataclasses.replace(ep, lambda_1=0.1 * ep.lambda_1)
    with pytest.raises(SeedError):
        solve_positive(problem, f, 0.5 * ep.lambda_1, eigenpair=fake)


def test_negative_branch_mirrors_odd_reaction(cubic_setup):
    problem, f = cubic_setup
    pos = solve_positive(problem, f, LAMBDA, tol=1e-9)
    neg = solve_negative(problem, f, LAMBDA, tol=1e-9)
    assert np.array_equal(neg.solution.nodal_values, -pos.solution.nodal_values)
    assert neg.u_bar == -pos.u_bar
    assert neg.branch == "-"
    assert neg.max_value <= 1e-8
    assert neg.phi_value == pos.phi_value


def test_negative_bound_cubic_example():
    # mirrored doubling search: f(s) = s^3, p = 2, lam = 10 gives -4
    problem = Problem(build_mesh((0.0, 1.0), 16), Exponents(2.0, 3.0, 1), ZERO)
    neg = solve_negative(problem, power_reaction(4.0), 10.0, tol=1e-8)
    assert neg.u_bar == -4.0


def test_solution_symmetry_diagnostic(cubic_setup):
    problem, f = cubic_setup
    rep = solve_positive(problem, f, LAMBDA, tol=1e-10)
    vals = rep.solution.nodal_values
    assert np.allclose(vals, vals[::-1], atol=1e-9)


def test_solve_2d_double_phase():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 10)
    problem = Problem(mesh, Exponents(1.2, 1.4, 2), lambda x: x[..., 0])
    f = reaction_f1(1.0, 1.5)
    ep = solve_first_eigenpair(mesh, 1.2, tol=1e-6, max_iter=4000)
    lam = 2.0 * ep.lambda_1
    rep = solve_positive(problem, f, lam, tol=1e-5, eigenpair=ep)
    assert rep.phi_value < 0.0
    assert rep.min_value >= -1e-6 * rep.u_bar
    assert rep.max_value <= rep.u_bar * (1.0 + 1e-6)
    assert rep.original_residual <= 1e-5 * (1.0 + rep.initial_residual)
    assert rep.hypothesis.satisfied


# --------------------------------------------------------- reaction checks

def test_reaction_hypotheses_builtins_pass():
    for f, p, q in ((reaction_f1(1.0, 3.5), 2.0, 3.0),
                    (reaction_f2(1.0, 3.0), 2.0, 3.0),
                    (reaction_f3(1.2, 1.4), 1.2, 1.4),
                    (power_reaction(4.0), 2.0, 3.0)):
        rep = check_reaction_hypotheses(f.f, p, q, X_SAMPLES)
        assert rep.ok, (f.tag, rep)


def test_reaction_hypotheses_origin_failure():
    # f = |s|^{p-2} s has ratio identically one near the origin
    f = power_reaction(2.0)
    rep = check_reaction_hypotheses(f.f, 2.0, 3.0, X_SAMPLES)
    assert not rep.origin_ok
    assert np.allclose(rep.origin_ratios, 1.0)


def test_reaction_hypotheses_superlinear_failure():
    rep = check_reaction_hypotheses(lambda x, s: np.asarray(s, dtype=float),
                                    2.0, 3.0, X_SAMPLES)
    assert not rep.superlinear_ok


def test_original_rhs_matches_truncation_inside_band():
    f = power_reaction(4.0)
    lam, u_bar, p = 10.0, 4.0, 2.0
    rhs = original_rhs(f, lam, p)
    h = positive_truncation(f.f, lam, u_bar, p)
    x = np.zeros((5, 1))
    s = np.linspace(0.0, u_bar, 5)
    assert np.allclose(np.asarray(rhs(x, s)), np.asarray(h(x, s)), atol=1e-14)
