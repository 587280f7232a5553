import numpy as np
import pytest

from tqg.elliptic import (
    EllipticSolveError,
    SolverSettings,
    StreamSolver,
    assemble_helmholtz,
    pcg,
)
from tqg.mesh import build_periodic_mesh
from tqg.spaces import DgField, FemSpace

ALPHAS = [0.0, 1.0 / 256**2, 1.0 / 16**2, 1.0]


def make_space(n, k=1):
    return FemSpace(build_periodic_mesh(n), k)


def dense_helmholtz_oracle(mesh, alpha):
    """Dense P1 assembly from closed-form hat-function element matrices.

    Uses M_loc = (A/12) (1 + delta_ij) and grad(lambda_i) from the classic
    barycentric formula, independent of the package's quadrature tables.
    """
    nv = mesh.num_vertices
    A = np.zeros((nv, nv))
    area = mesh.element_area
    mass_loc = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    for e in range(mesh.num_elements):
        p = mesh.element_coords[e]
        grads = np.empty((3, 2))
        for i in range(3):
            p1, p2 = p[(i + 1) % 3], p[(i + 2) % 3]
            grads[i] = [(p1[1] - p2[1]) / (2 * area), (p2[0] - p1[0]) / (2 * area)]
        stiff_loc = area * grads @ grads.T
        idx = mesh.elements[e]
        for i in range(3):
            for j in range(3):
                A[idx[i], idx[j]] += alpha * stiff_loc[i, j] + mass_loc[i, j]
    return A


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(rtol=0.0)
    with pytest.raises(ValueError):
        SolverSettings(rtol=1.5)
    with pytest.raises(ValueError):
        SolverSettings(maxiter=0)
    with pytest.raises(ValueError):
        SolverSettings(preconditioner="ilu")


def test_rejects_negative_alpha():
    space = make_space(2)
    with pytest.raises(ValueError):
        assemble_helmholtz(space, -0.5)
    with pytest.raises(ValueError):
        StreamSolver(space, -1e-9)


def test_alpha_zero_is_mass_matrix():
    space = make_space(4)
    op = assemble_helmholtz(space, 0.0)
    # partition of unity integrates to the domain area
    assert op.matrix.sum() == pytest.approx(1.0, abs=1e-13)
    ones = np.ones(op.dim)
    m_one = op.matrix @ ones
    a_one = assemble_helmholtz(space, 1.0).matrix @ ones
    assert np.max(np.abs(a_one - m_one)) < 1e-13  # stiffness annihilates constants


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_assembly_matches_dense_oracle(alpha):
    mesh = build_periodic_mesh(2)
    space = FemSpace(mesh, 1)
    got = assemble_helmholtz(space, alpha).matrix.toarray()
    want = dense_helmholtz_oracle(mesh, alpha)
    assert np.max(np.abs(got - want)) < 1e-13


@pytest.mark.parametrize("alpha", ALPHAS)
def test_operator_symmetric_positive_definite(alpha):
    rng = np.random.default_rng(4)
    space = make_space(4)
    A = assemble_helmholtz(space, alpha).matrix
    dense = A.toarray()
    assert np.max(np.abs(dense - dense.T)) < 1e-14
    for _ in range(10):
        x = rng.standard_normal(A.shape[0])
        assert x @ (A @ x) > 0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_pcg_converges_for_all_alphas(alpha):
    rng = np.random.default_rng(9)
    space = make_space(8)
    A = assemble_helmholtz(space, alpha).matrix
    b = rng.standard_normal(A.shape[0])
    x, iters, res = pcg(A, b, None, 1.0 / A.diagonal(), 1e-10, 5000)
    assert res <= 1e-10
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_pcg_nonconvergence_reports_residual():
    rng = np.random.default_rng(10)
    space = make_space(8)
    A = assemble_helmholtz(space, 1.0).matrix
    b = rng.standard_normal(A.shape[0])
    with pytest.raises(EllipticSolveError) as err:
        pcg(A, b, None, None, 1e-12, maxiter=2)
    assert err.value.iterations == 2
    assert err.value.residual > 0


def test_constant_source_gives_constant_streams():
    space = make_space(8)
    c = 2.5
    solver = StreamSolver(space, 1.0 / 64**2, SolverSettings(rtol=1e-12))
    omega = space.project_dg(lambda x, y: np.full_like(x, c))
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    tilde, palpha = solver.solve(omega, f)
    assert np.max(np.abs(tilde.coeffs + c)) < 1e-10
    assert np.max(np.abs(palpha.coeffs + c)) < 1e-10


def test_alpha_zero_second_solve_is_identity():
    rng = np.random.default_rng(3)
    space = make_space(8)
    solver = StreamSolver(space, 0.0, SolverSettings(rtol=1e-13))
    omega = DgField(space, rng.standard_normal((space.num_elements, space.n_local)))
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    tilde, palpha = solver.solve(omega, f)
    assert np.max(np.abs(tilde.coeffs - palpha.coeffs)) < 1e-9


def test_mean_zero_compatibility():
    # testing the weak form against phi = 1 kills the gradient term, so
    # int(psi_tilde) = -int(omega - f) holds to solver tolerance
    rng = np.random.default_rng(6)
    space = make_space(8)
    solver = StreamSolver(space, 0.0, SolverSettings(rtol=1e-12))
    omega = DgField(space, 0.1 * rng.standard_normal((space.num_elements, space.n_local)))
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    tilde, _ = solver.solve(omega, f)
    from tqg.spaces import CgField

    assert space.integrate(CgField(space, tilde.coeffs)) == pytest.approx(
        -space.integrate(omega), abs=1e-11
    )


def manufactured_errors(alpha, ns, k=1):
    lam = 8 * np.pi**2
    errs_psi, errs_vel = [], []
    for n in ns:
        space = make_space(n, k)
        solver = StreamSolver(space, alpha, SolverSettings(rtol=1e-12))
        omega = space.project_dg(
            lambda x, y: -(lam + 1)
            * (1 + alpha * lam)
            * np.sin(2 * np.pi * x)
            * np.sin(2 * np.pi * y)
        )
        f = space.interpolate_cg(lambda x, y: 0.0 * x)
        tilde, palpha = solver.solve(omega, f)
        q = space.quad_points_phys
        sx, sy = np.sin(2 * np.pi * q[..., 0]), np.sin(2 * np.pi * q[..., 1])
        err = space.values_at_quad(palpha) - sx * sy
        errs_psi.append(np.sqrt(np.einsum("q,eq->", space.wq, err**2)))
        grad = space.grads_at_quad(palpha)
        cx, cy = np.cos(2 * np.pi * q[..., 0]), np.cos(2 * np.pi * q[..., 1])
        du = (-grad[..., 1] - (-2 * np.pi * sx * cy)) ** 2
        dv = (grad[..., 0] - 2 * np.pi * cx * sy) ** 2
        errs_vel.append(np.sqrt(np.einsum("q,eq->", space.wq, du + dv)))
        # psi_tilde approaches (1 + alpha lam) * s at second order
        err_t = space.values_at_quad(tilde) - (1 + alpha * lam) * sx * sy
        assert np.sqrt(np.einsum("q,eq->", space.wq, err_t**2)) < 7.0 / n**2
    return errs_psi, errs_vel


@pytest.mark.parametrize("alpha", [0.0, 1.0 / 64**2])
def test_manufactured_solution_rates(alpha):
    ns = [8, 16, 32]
    errs_psi, errs_vel = manufactured_errors(alpha, ns)
    rate_psi = -np.polyfit(np.log(ns), np.log(errs_psi), 1)[0]
    rate_vel = -np.polyfit(np.log(ns), np.log(errs_vel), 1)[0]
    assert rate_psi > 1.9  # order k + 1
    assert rate_vel > 0.9  # order k


def test_alpha_continuity_of_streams():
    # || psi_alpha - psi_0 ||_H1 <= C alpha for the manufactured family
    lam = 8 * np.pi**2
    space = make_space(16)
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    omega = space.project_dg(
        lambda x, y: -(lam + 1) * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    )
    base = StreamSolver(space, 0.0, SolverSettings(rtol=1e-13)).solve(omega, f)[1]
    alphas = [1e-3, 1e-4, 1e-5]  # alpha * lam << 1 keeps the response linear
    diffs = []
    for alpha in alphas:
        palpha = StreamSolver(space, alpha, SolverSettings(rtol=1e-13)).solve(omega, f)[1]
        from tqg.spaces import CgField

        d = CgField(space, palpha.coeffs - base.coeffs)
        diffs.append(space.norm_h1(d))
    slope = np.polyfit(np.log(alphas), np.log(diffs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_operator_cache_reused():
    space = make_space(4)
    op1 = assemble_helmholtz(space, 0.5)
    op2 = assemble_helmholtz(space, 0.5)
    assert op1 is op2
