import numpy as np
import pytest

from hallmhd.errors import NonPositiveJacobian
from hallmhd.mesh import (
    BoxDomain,
    MappingSpec,
    _apply_map,
    build_mesh,
    gauss_rule,
    geometry_all,
    jacobian_data,
    tensor_points,
)

UNIT = BoxDomain(lo=(0, 0, 0), hi=(1, 1, 1))
CRAZY = MappingSpec(kind="crazy", c=0.1)


# ----------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------

def test_gauss_rule_one_point():
    rule = gauss_rule(1)
    assert np.allclose(rule.points, [0.0])
    assert np.allclose(rule.weights, [2.0])


def test_gauss_rule_two_points():
    rule = gauss_rule(2)
    assert np.allclose(np.sort(rule.points), [-1 / np.sqrt(3), 1 / np.sqrt(3)])
    assert np.allclose(rule.weights, [1.0, 1.0])


def test_gauss_rule_five_points_integrates_x8():
    rule = gauss_rule(5)
    value = np.sum(rule.weights * rule.points**8)
    assert abs(value - 2.0 / 9.0) < 1e-14


def test_gauss_rule_exactness_through_degree_2n_minus_1():
    for n in range(1, 9):
        rule = gauss_rule(n)
        for deg in range(2 * n):
            value = np.sum(rule.weights * rule.points**deg)
            exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
            assert abs(value - exact) <= 1e-13 * max(1.0, abs(exact))


def test_tensor_points_x_fastest():
    pts, w = tensor_points(gauss_rule(2), gauss_rule(2), gauss_rule(2))
    assert pts.shape == (8, 3)
    # first two points differ only in x
    assert pts[0, 1] == pts[1, 1] and pts[0, 2] == pts[1, 2]
    assert pts[0, 0] != pts[1, 0]
    assert abs(w.sum() - 8.0) < 1e-14


# ----------------------------------------------------------------------
# mesh construction
# ----------------------------------------------------------------------

def test_single_affine_element():
    mesh = build_mesh(1, UNIT)
    assert mesh.n_elements == 1
    geo = jacobian_data(mesh, 0, gauss_rule(3))
    # chart [-1,1]^3 onto the unit cube: J = I/2, det = 1/8
    assert np.allclose(geo.det, 0.125)
    assert np.allclose(geo.jac, np.eye(3) / 2)


def test_affine_k2_determinant_constant():
    mesh = build_mesh(2, UNIT)
    geo = geometry_all(mesh, gauss_rule(4))
    assert np.allclose(geo.det, (1.0 / 4.0) ** 3)


def test_crazy_c0_matches_affine():
    affine = build_mesh(3, UNIT)
    crazy0 = build_mesh(3, UNIT, MappingSpec(kind="crazy", c=0.0))
    assert np.allclose(affine.vertices, crazy0.vertices)


def test_crazy_vertex_displacement_k3():
    mesh = build_mesh(3, UNIT, CRAZY)
    expected = 1.0 / 3.0 + 0.05 * np.sin(2 * np.pi / 3.0) ** 3
    # (1/3, 1/3, 1/3) is corner 0 of element (1,1,1)
    elem = 1 + 3 * 1 + 9 * 1
    assert np.allclose(mesh.vertices[elem, 0], expected, atol=1e-14)


def test_crazy_jacobian_matches_finite_differences():
    mesh = build_mesh(3, UNIT, CRAZY)
    rng = np.random.default_rng(3)
    rule = gauss_rule(2)
    for elem in (0, 7, 13, 26):
        geo = jacobian_data(mesh, elem, rule)
        xi, _ = tensor_points(rule, rule, rule)
        e = mesh.elements[elem]
        h = 1e-6
        for q in range(xi.shape[0]):
            fd = np.zeros((3, 3))
            for a in range(3):
                step = np.zeros(3)
                step[a] = h
                rp = (e + (xi[q] + step + 1) / 2) / mesh.K
                rm = (e + (xi[q] - step + 1) / 2) / mesh.K
                fd[:, a] = (_apply_map(mesh, rp[None]) - _apply_map(mesh, rm[None]))[
                    0
                ] / (2 * h)
            assert np.max(np.abs(geo.jac[q] - fd)) < 1e-8
    del rng


def test_boundary_faces_stay_on_boundary():
    box = BoxDomain(lo=(0, 0, 0), hi=(2 * np.pi, 2 * np.pi, 2 * np.pi))
    mesh = build_mesh(4, box, CRAZY)
    rng = np.random.default_rng(11)
    for axis in range(3):
        for side, target in ((0.0, 0.0), (1.0, 2 * np.pi)):
            r = rng.uniform(0, 1, (50, 3))
            r[:, axis] = side
            x = _apply_map(mesh, r)
            assert np.max(np.abs(x[:, axis] - target)) < 1e-14


def test_fold_over_mapping_raises():
    with pytest.raises(NonPositiveJacobian) as info:
        build_mesh(3, UNIT, MappingSpec(kind="crazy", c=0.5))
    assert info.value.det <= 0.0


def test_geometry_all_matches_per_element():
    mesh = build_mesh(2, UNIT, CRAZY)
    rule = gauss_rule(3)
    stacked = geometry_all(mesh, rule)
    for elem in range(mesh.n_elements):
        single = jacobian_data(mesh, elem, rule)
        assert np.allclose(stacked.jac[elem], single.jac)
        assert np.allclose(stacked.det[elem], single.det)
        assert np.allclose(stacked.xyz[elem], single.xyz)


def test_quadrature_measures_crazy_volume():
    # the distortion is volume preserving: its offset integrates to zero
    box = BoxDomain(lo=(0, 0, 0), hi=(1, 2, 3))
    mesh = build_mesh(3, box, CRAZY)
    geo = geometry_all(mesh, gauss_rule(15))
    _, w = tensor_points(*3 * (gauss_rule(15),))
    volume = float(np.sum(geo.det * w[None, :]))
    assert abs(volume - 6.0) < 1e-10
