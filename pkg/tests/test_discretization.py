import numpy as np
import pytest

from doublephase import (FemFunction, InputError, build_mesh, default_rule,
                         element_gradient, element_gradients, integrate,
                         interpolate, interval_rule, is_dirichlet_conforming,
                         read_function_csv, triangle_rule, write_function_csv)


def test_interval_mesh_basic():
    mesh = build_mesh((0.0, 1.0), 4)
    assert mesh.num_vertices == 5
    assert mesh.num_elements == 4
    assert np.flatnonzero(mesh.boundary_mask).tolist() == [0, 4]
    assert mesh.vertices[mesh.boundary_mask, 0].tolist() == [0.0, 1.0]


def test_rectangle_mesh_basic():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 2)
    assert mesh.num_vertices == 9
    assert mesh.num_elements == 8
    assert mesh.boundary_mask.sum() == 8


def test_bad_resolution_rejected():
    with pytest.raises(InputError):
        build_mesh((0.0, 1.0), 0)
    with pytest.raises(InputError):
        build_mesh((0.0, 1.0), 2.5)


def test_degenerate_domain_rejected():
    with pytest.raises(InputError):
        build_mesh((1.0, 1.0), 4)
    with pytest.raises(InputError):
        build_mesh(((0.0, 1.0), (2.0, 1.0)), 4)


@pytest.mark.parametrize("domain,res,measure", [
    ((0.0, 1.0), 7, 1.0),
    ((-2.0, 3.0), 13, 5.0),
    (((0.0, 2.0), (0.0, 0.5)), 5, 1.0),
])
def test_measures_sum_to_domain(domain, res, measure):
    mesh = build_mesh(domain, res)
    assert mesh.total_measure == pytest.approx(measure, rel=1e-12)
    assert np.all(mesh.element_measures > 0)


def test_interpolate_constant_and_linear():
    mesh = build_mesh((0.0, 1.0), 2)
    assert np.all(interpolate(mesh, lambda x: 1.0).nodal_values == 1.0)
    u = interpolate(mesh, lambda x: x[:, 0])
    assert u.nodal_values.tolist() == [0.0, 0.5, 1.0]
    s = interpolate(mesh, lambda x: np.sin(np.pi * x[:, 0]))
    assert s.nodal_values[0] == 0.0


def test_element_gradient_linear_field():
    mesh = build_mesh((0.0, 1.0), 8)
    u = interpolate(mesh, lambda x: x[:, 0])
    for e in range(mesh.num_elements):
        assert element_gradient(u, e) == pytest.approx([1.0])
    c = interpolate(mesh, lambda x: 3.5)
    assert np.all(element_gradients(c) == 0.0)


def test_element_gradient_affine_2d():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 3)
    u = interpolate(mesh, lambda x: x[:, 0] + 2.0 * x[:, 1])
    grads = element_gradients(u)
    assert np.allclose(grads, [1.0, 2.0], atol=1e-13)
    assert element_gradient(u, 0) == pytest.approx([1.0, 2.0])


def test_integrate_basics():
    mesh = build_mesh((0.0, 1.0), 4)
    rule = default_rule(1)
    assert integrate(mesh, rule, lambda x, e: 1.0) == pytest.approx(1.0, rel=1e-12)
    assert integrate(mesh, rule, lambda x, e: x[:, 0]) == pytest.approx(0.5, rel=1e-12)
    mesh2 = build_mesh(((0.0, 1.0), (0.0, 1.0)), 3)
    assert integrate(mesh2, default_rule(2), lambda x, e: 1.0) == pytest.approx(1.0, rel=1e-12)


def test_integrate_linear_in_integrand():
    mesh = build_mesh((0.0, 1.0), 5)
    rule = default_rule(1)

    def f(x, e):
        return np.cos(x[:, 0])

    def g(x, e):
        return x[:, 0] ** 2

    lhs = integrate(mesh, rule, lambda x, e: 2.0 * f(x, e) + 3.0 * g(x, e))
    rhs = 2.0 * integrate(mesh, rule, f) + 3.0 * integrate(mesh, rule, g)
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_refinement_accuracy_smooth_field():
    exact = np.e - 1.0
    for n in (4, 8, 16):
        mesh = build_mesh((0.0, 1.0), n)
        value = integrate(mesh, default_rule(1), lambda x, e: np.exp(x[:, 0]))
        assert abs(value - exact) <= (1.0 / n) ** 2


def test_quadrature_rule_invariants():
    for rule, ref_measure in ((interval_rule(), 1.0), (triangle_rule(), 0.5)):
        assert rule.weights.sum() == pytest.approx(ref_measure, abs=1e-13)
        assert np.all(rule.weights > 0)
        assert rule.degree >= 2


def test_interval_rule_monomial_exactness():
    rule = interval_rule()
    for k in range(rule.degree + 1):
        value = float(np.sum(rule.weights * rule.points[:, 0] ** k))
        assert value == pytest.approx(1.0 / (k + 1), rel=1e-13)


def test_triangle_rule_monomial_exactness():
    import math
    rule = triangle_rule()
    for i in range(rule.degree + 1):
        for j in range(rule.degree + 1 - i):
            value = float(np.sum(rule.weights
                                 * rule.points[:, 0] ** i
                                 * rule.points[:, 1] ** j))
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert value == pytest.approx(exact, rel=1e-12)


def test_dirichlet_conforming_check():
    mesh = build_mesh((0.0, 1.0), 8)
    u = interpolate(mesh, lambda x: np.sin(np.pi * x[:, 0]))
    assert is_dirichlet_conforming(u)
    v = interpolate(mesh, lambda x: 1.0)
    assert not is_dirichlet_conforming(v)


def test_immutability():
    mesh = build_mesh((0.0, 1.0), 4)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 7.0
    u = interpolate(mesh, lambda x: 1.0)
    with pytest.raises(ValueError):
        u.nodal_values[0] = 2.0


def test_csv_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(7)
    for mesh in (build_mesh((0.0, 1.0), 11), build_mesh(((0.0, 1.0), (0.0, 2.0)), 3)):
        u = FemFunction(mesh, rng.standard_normal(mesh.num_vertices))
        path = tmp_path / f"fun{mesh.dimension}.csv"
        write_function_csv(u, path)
        back = read_function_csv(mesh, path)
        assert np.array_equal(back.nodal_values, u.nodal_values)


def test_csv_mesh_mismatch_rejected(tmp_path):
    mesh = build_mesh((0.0, 1.0), 4)
    other = build_mesh((0.0, 2.0), 4)
    u = interpolate(mesh, lambda x: x[:, 0])
    path = tmp_path / "fun.csv"
    write_function_csv(u, path)
    with pytest.raises(InputError):
        read_function_csv(other, path)
