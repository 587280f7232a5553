import math

import numpy as np
import pytest

from tqg.mesh import build_periodic_mesh
from tqg.spaces import CgField, DgField, FemSpace, triangle_quadrature


def make_space(n, k=1):
    return FemSpace(build_periodic_mesh(n), k)


# ----------------------------------------------------------------- quadrature


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 7])
def test_triangle_quadrature_exact_for_monomials(degree):
    rule = triangle_quadrature(degree)
    assert np.all(rule.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = np.dot(rule.weights, rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            assert got == pytest.approx(exact, abs=1e-13), (a, b)


def test_quadrature_weights_sum_to_reference_area():
    for degree in (1, 3, 5, 7):
        assert triangle_quadrature(degree).weights.sum() == pytest.approx(0.5, abs=1e-14)


# ---------------------------------------------------------------- basis, dofs


@pytest.mark.parametrize("k", [1, 2, 3])
def test_basis_nodal_and_partition_of_unity(k):
    space = make_space(2, k)
    vals = space.basis.eval(space.basis.nodes)
    assert np.allclose(vals, np.eye(space.n_local), atol=1e-12)
    pts = np.array([[0.2, 0.3], [0.1, 0.05], [0.6, 0.35]])
    assert np.allclose(space.basis.eval(pts).sum(axis=1), 1.0, atol=1e-13)
    assert np.allclose(space.basis.eval_grad(pts).sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("n,k", [(4, 1), (4, 2), (3, 3)])
def test_dof_counts(n, k):
    space = make_space(n, k)
    assert space.num_cg_dofs == (n * k) ** 2
    assert space.num_dg_dofs == 2 * n * n * (k + 1) * (k + 2) // 2
    if k == 1:
        assert space.num_cg_dofs == n * n
        # for k=1 the CG dofs are the mesh vertices
        assert np.array_equal(space.cg_map, space.mesh.elements)


@pytest.mark.parametrize("n,k", [(3, 1), (3, 2), (2, 3)])
def test_cg_continuity_across_facets(n, k):
    rng = np.random.default_rng(5)
    space = make_space(n, k)
    f = CgField(space, rng.standard_normal(space.num_cg_dofs))
    loc = f.coeffs[space.cg_map]
    for fc in space.facet_classes.values():
        vm = loc[fc.elem_minus] @ fc.trace_minus.T
        vp = loc[fc.elem_plus] @ fc.trace_plus.T
        assert np.max(np.abs(vm - vp)) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cg_subset_of_dg(k):
    rng = np.random.default_rng(8)
    space = make_space(3, k)
    cg = CgField(space, rng.standard_normal(space.num_cg_dofs))
    dg = space.cg_to_dg(cg)
    assert np.max(np.abs(space.values_at_quad(dg) - space.values_at_quad(cg))) < 1e-13


# ----------------------------------------------------------------- projection


def test_project_constant():
    space = make_space(4)
    f = space.project_dg(lambda x, y: np.full_like(x, 1.0))
    assert space.integrate(f) == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(f.coeffs, 1.0, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_projection_idempotent_on_dg_fields(k):
    rng = np.random.default_rng(11)
    space = make_space(3, k)
    f = DgField(space, rng.standard_normal((space.num_elements, space.n_local)))
    again = space.project_dg(lambda x, y: space.eval_field(f, x, y))
    assert np.max(np.abs(again.coeffs - f.coeffs)) < 1e-12


@pytest.mark.parametrize("k", [1, 2])
def test_projection_convergence_order(k):
    errs = []
    ns = [8, 16, 32]
    for n in ns:
        space = make_space(n, k)
        f = space.project_dg(lambda x, y: np.sin(2 * np.pi * y) - 1.0)
        q = space.quad_points_phys
        exact = np.sin(2 * np.pi * q[..., 1]) - 1.0
        err = np.sqrt(
            np.einsum("q,eq->", space.wq, (space.values_at_quad(f) - exact) ** 2)
        )
        errs.append(err)
    rate = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert rate > k + 0.9


# -------------------------------------------------------------- interpolation


def test_interpolate_zero():
    space = make_space(4)
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    assert np.all(f.coeffs == 0.0)


def test_interpolate_rejects_nonperiodic():
    space = make_space(4)
    with pytest.raises(ValueError, match="periodic"):
        space.interpolate_cg(lambda x, y: x)
    with pytest.raises(ValueError, match="periodic"):
        space.interpolate_cg(lambda x, y: y * y)


def test_interpolation_nodal_and_midedge_errors():
    errs = []
    for n in (32, 64):
        space = make_space(n, 1)
        f = space.interpolate_cg(lambda x, y: np.cos(2 * np.pi * x))
        nodes = space.cg_node_coords()
        nodal = space.eval_field(f, nodes[:, 0], nodes[:, 1])
        assert np.max(np.abs(nodal - np.cos(2 * np.pi * nodes[:, 0]))) < 1e-12
        mid = (nodes + np.array([0.5 / n, 0.0])) % 1.0
        vals = space.eval_field(f, mid[:, 0], mid[:, 1])
        errs.append(np.max(np.abs(vals - np.cos(2 * np.pi * mid[:, 0]))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


# ------------------------------------------------------------------ integrals


def test_integrate_buoyancy_ic():
    space = make_space(32)
    b0 = space.project_dg(lambda x, y: np.sin(2 * np.pi * y) - 1.0)
    assert space.integrate(b0) == pytest.approx(-1.0, abs=5e-12)


def test_integrate_pv_ic():
    space = make_space(32)
    w0 = space.project_dg(
        lambda x, y: np.sin(8 * np.pi * x) * np.sin(8 * np.pi * y)
        + 0.4 * np.cos(6 * np.pi * x) * np.cos(6 * np.pi * y)
        + 0.3 * np.cos(10 * np.pi * x) * np.cos(4 * np.pi * y)
        + 0.02 * np.sin(2 * np.pi * y)
        + 0.02 * np.sin(2 * np.pi * x)
    )
    assert space.integrate(w0) == pytest.approx(0.0, abs=5e-12)


def test_inner_products():
    space = make_space(4)
    one = space.project_dg(lambda x, y: np.full_like(x, 1.0))
    c = space.project_dg(lambda x, y: np.full_like(x, 2.5))
    assert space.inner_l2(one, one) == pytest.approx(1.0, abs=1e-13)
    assert space.inner_h1(c, c) == pytest.approx(2.5**2, abs=1e-11)


def test_inner_product_positivity():
    rng = np.random.default_rng(2)
    space = make_space(3)
    f = DgField(space, rng.standard_normal((space.num_elements, space.n_local)))
    assert space.inner_l2(f, f) > 0
    zero = DgField.zeros(space)
    assert space.inner_l2(zero, zero) == 0.0


def test_mismatched_spaces_rejected():
    a = make_space(3)
    b = make_space(4)
    fa = DgField.zeros(a)
    fb = DgField.zeros(b)
    with pytest.raises(ValueError, match="different meshes"):
        a.inner_l2(fa, fb)


def test_norm_linf_gradient_of_sine():
    space = make_space(64)
    f = space.project_dg(lambda x, y: np.sin(2 * np.pi * y))
    assert space.norm_linf_gradient(f) == pytest.approx(2 * np.pi, rel=0.02)


def test_field_shape_validation():
    space = make_space(3)
    with pytest.raises(ValueError):
        CgField(space, np.zeros(7))
    with pytest.raises(ValueError):
        DgField(space, np.zeros((5, 3)))
