import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doublephase import (Exponents, FemFunction, InputError, build_mesh,
                         check_hypotheses, check_sandwich, interpolate,
                         luxemburg_norm, modulus, seminorm_q_mu)

from oracles import plastic_root

ONE = lambda x: 1.0
ZERO = lambda x: 0.0


@pytest.fixture(scope="module")
def unit_interval():
    return build_mesh((0.0, 1.0), 16)


def test_exponents_validation():
    with pytest.raises(InputError):
        Exponents(2.0, 2.0, 1)
    with pytest.raises(InputError):
        Exponents(1.0, 2.0, 1)
    with pytest.raises(InputError):
        Exponents(1.5, 2.0, 0)


def test_modulus_worked_values(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    one = interpolate(unit_interval, ONE)
    assert modulus(one, ONE, exps) == pytest.approx(2.0, rel=1e-12)
    zero = interpolate(unit_interval, ZERO)
    assert modulus(zero, ONE, exps) == 0.0
    two = interpolate(unit_interval, lambda x: 2.0)
    assert modulus(two, ZERO, exps) == pytest.approx(4.0, rel=1e-12)


def test_modulus_rejects_negative_weight(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    u = interpolate(unit_interval, ONE)
    with pytest.raises(InputError):
        modulus(u, lambda x: -1.0, exps)


def test_luxemburg_zero_function(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    assert luxemburg_norm(interpolate(unit_interval, ZERO), ONE, exps) == 0.0


def test_luxemburg_worked_instance(unit_interval):
    # u = 1, mu = 1, p = 2, q = 3: the gauge solves 1/t^2 + 1/t^3 = 1,
    # i.e. t^3 = t + 1.
    exps = Exponents(2.0, 3.0, 1)
    t = luxemburg_norm(interpolate(unit_interval, ONE), ONE, exps)
    assert t == pytest.approx(plastic_root(), abs=1e-10)


def test_luxemburg_reduces_to_lp_norm(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    one = interpolate(unit_interval, ONE)
    assert luxemburg_norm(one, ZERO, exps) == pytest.approx(1.0, rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-40.0, max_value=40.0))
def test_luxemburg_homogeneity(c):
    mesh = build_mesh((0.0, 1.0), 8)
    exps = Exponents(1.7, 2.4, 1)
    rng = np.random.default_rng(3)
    values = rng.standard_normal(mesh.num_vertices)
    u = FemFunction(mesh, values)
    cu = FemFunction(mesh, c * values)
    base = luxemburg_norm(u, ONE, exps)
    assert luxemburg_norm(cu, ONE, exps) == pytest.approx(abs(c) * base, rel=1e-9, abs=1e-12)


def test_unit_ball_property(unit_interval):
    exps = Exponents(2.0, 3.5, 1)
    rng = np.random.default_rng(11)
    for _ in range(25):
        u = FemFunction(unit_interval, rng.standard_normal(unit_interval.num_vertices))
        t = luxemburg_norm(u, ONE, exps)
        scaled = FemFunction(unit_interval, u.nodal_values / t)
        assert modulus(scaled, ONE, exps) == pytest.approx(1.0, abs=1e-8)


def test_triangle_inequality(unit_interval):
    exps = Exponents(1.4, 2.2, 1)
    mu = lambda x: 0.5 + 0.5 * x[..., 0]
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = FemFunction(unit_interval, rng.standard_normal(unit_interval.num_vertices))
        b = FemFunction(unit_interval, rng.standard_normal(unit_interval.num_vertices))
        s = FemFunction(unit_interval, a.nodal_values + b.nodal_values)
        lhs = luxemburg_norm(s, mu, exps)
        rhs = luxemburg_norm(a, mu, exps) + luxemburg_norm(b, mu, exps)
        assert lhs <= rhs * (1.0 + 1e-9)


def test_seminorm_worked_values(unit_interval):
    one = interpolate(unit_interval, ONE)
    two = interpolate(unit_interval, lambda x: 2.0)
    assert seminorm_q_mu(one, ZERO, 3.0) == 0.0
    assert seminorm_q_mu(one, ONE, 3.0) == pytest.approx(1.0, rel=1e-12)
    assert seminorm_q_mu(two, ONE, 3.0) == pytest.approx(2.0, rel=1e-12)


def test_seminorm_homogeneity_and_bound(unit_interval):
    mu = lambda x: 0.3 + x[..., 0]
    sup_mu = 1.3
    rng = np.random.default_rng(17)
    for _ in range(30):
        vals = rng.standard_normal(unit_interval.num_vertices)
        u = FemFunction(unit_interval, vals)
        cu = FemFunction(unit_interval, -2.5 * vals)
        assert seminorm_q_mu(cu, mu, 3.0) == pytest.approx(
            2.5 * seminorm_q_mu(u, mu, 3.0), rel=1e-12)
        plain_lq = seminorm_q_mu(u, ONE, 3.0)
        assert seminorm_q_mu(u, mu, 3.0) <= plain_lq * sup_mu ** (1 / 3.0) + 1e-12


def test_sandwich_zero_function(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    rep = check_sandwich(interpolate(unit_interval, ZERO), ONE, exps)
    assert rep.holds and rep.lhs == rep.mid == rep.rhs == 0.0


def test_sandwich_at_unit_norm(unit_interval):
    exps = Exponents(2.0, 3.0, 1)
    rng = np.random.default_rng(23)
    vals = rng.standard_normal(unit_interval.num_vertices)
    u = FemFunction(unit_interval, vals)
    t = luxemburg_norm(u, ONE, exps)
    scaled = FemFunction(unit_interval, vals / t)
    rep = check_sandwich(scaled, ONE, exps)
    assert rep.holds
    assert rep.lhs == pytest.approx(1.0, abs=1e-9)
    assert rep.mid == pytest.approx(1.0, abs=1e-9)
    assert rep.rhs == pytest.approx(1.0, abs=1e-9)


def test_sandwich_random_instances(unit_interval):
    rng = np.random.default_rng(29)
    mu = lambda x: 0.1 + x[..., 0] ** 2
    for _ in range(200):
        p = rng.uniform(1.1, 2.5)
        q = rng.uniform(p + 0.1, 4.0)
        exps = Exponents(p, q, 1)
        u = FemFunction(unit_interval, 10.0 ** rng.uniform(-2, 2)
                        * rng.standard_normal(unit_interval.num_vertices))
        rep = check_sandwich(u, mu, exps)
        assert rep.holds
        assert rep.mid == pytest.approx(modulus(u, mu, exps), rel=1e-14)


def test_hypotheses_pass_case():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 4)
    rep = check_hypotheses(Exponents(1.2, 1.4, 2), lambda x: x[..., 0], mesh)
    assert rep.p_lt_q and rep.q_lt_N and rep.ratio_ok and rep.mu_nonnegative
    assert rep.satisfied
    assert rep.mu_lipschitz == pytest.approx(1.0, rel=1e-10)


def test_hypotheses_fail_case():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 4)
    rep = check_hypotheses(Exponents(2.0, 3.0, 2), ONE, mesh)
    assert not rep.q_lt_N and not rep.ratio_ok
    assert not rep.satisfied
    assert rep.mu_lipschitz == 0.0


def test_critical_exponent_value():
    assert Exponents(2.0, 2.5, 3).critical_exponent == pytest.approx(6.0)
    assert Exponents(2.0, 3.0, 2).critical_exponent == np.inf
    mesh = build_mesh((0.0, 1.0), 4)
    rep = check_hypotheses(Exponents(2.0, 2.5, 3), ONE, mesh)
    assert rep.critical_exponent == pytest.approx(6.0)
