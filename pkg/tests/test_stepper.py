import numpy as np
import pytest

from tqg.elliptic import SolverSettings, StreamSolver
from tqg.harness import SimConfig, initial_state
from tqg.mesh import build_periodic_mesh
from tqg.spaces import CgField, DgField, FemSpace
from tqg.stepper import (
    SSPRK3_WEIGHTS,
    SimState,
    StepSettings,
    cfl_number,
    ssprk3,
    ssprk3_step,
)
from tqg.transport import TransportOperator


def make_space(n, k=1):
    return FemSpace(build_periodic_mesh(n), k)


def test_step_settings_validation():
    with pytest.raises(ValueError):
        StepSettings(dt=0.0)
    assert StepSettings(dt=0.1, steps=5).steps == 5


def test_stage_weights_are_convex():
    for weights in SSPRK3_WEIGHTS:
        assert all(w >= 0 for w in weights)
        assert sum(weights) == pytest.approx(1.0, abs=1e-15)


def test_amplification_factor_matches_cubic():
    rng = np.random.default_rng(0)
    for _ in range(100):
        z = rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)
        z /= max(1.0, abs(z))
        lam, dt = z, 1.0
        (y1,) = ssprk3((np.array(1.0 + 0j),), lambda y: (lam * y[0],), dt)
        expected = 1 + z + z**2 / 2 + z**3 / 6
        assert abs(complex(y1) - expected) < 1e-14


def test_constant_state_is_fixed_point():
    space = make_space(8)
    solver = StreamSolver(space, 0.0, SolverSettings(rtol=1e-12))
    transport = TransportOperator(space)
    b = space.project_dg(lambda x, y: np.full_like(x, -1.0))
    omega = space.project_dg(lambda x, y: np.full_like(x, 0.5))
    h = space.interpolate_cg(lambda x, y: np.full_like(x, 0.25))
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    tilde, palpha = solver.solve(omega, f)
    state = SimState(b=b, omega=omega, psi_tilde=tilde, psi_alpha=palpha,
                     h=h, f=f, alpha=0.0, t=0.0)
    new = ssprk3_step(state, 0.01, transport, solver)
    assert np.max(np.abs(new.b.coeffs - b.coeffs)) < 1e-13
    assert np.max(np.abs(new.omega.coeffs - omega.coeffs)) < 1e-13
    assert new.t == pytest.approx(0.01)


def test_temporal_order_three_frozen_velocity():
    # fixed smooth velocity makes the semi-discrete system linear in b, so
    # Richardson refinement in dt isolates the third-order time error
    space = make_space(16)
    transport = TransportOperator(space)
    psi = space.interpolate_cg(
        lambda x, y: 0.05 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    )
    b0 = space.project_dg(lambda x, y: np.sin(2 * np.pi * y))

    def rhs(y):
        return (transport.rhs_buoyancy(DgField(space, y[0]), psi).coeffs,)

    def advance(dt, nsteps):
        y = (b0.coeffs,)
        for _ in range(nsteps):
            y = ssprk3(y, rhs, dt)
        return y[0]

    T = 0.5
    ref = advance(T / 512, 512)
    errs = []
    dts = [T / 16, T / 32, T / 64]
    for nsteps in (16, 32, 64):
        errs.append(np.max(np.abs(advance(T / nsteps, nsteps) - ref)))
    rate = np.polyfit(np.log(dts), np.log(errs), 1)[0]  # d log(err) / d log(dt)
    assert rate == pytest.approx(3.0, abs=0.25)


def test_linear_invariants_per_step():
    rng = np.random.default_rng(4)
    space = make_space(8)
    solver = StreamSolver(space, 1.0 / 64**2, SolverSettings(rtol=1e-12))
    transport = TransportOperator(space)
    cfg = SimConfig(n=8, alpha=1.0 / 64**2, bathymetry="0*x", preset="canonical")
    state = initial_state(cfg, space=space, solver=solver)
    mb, mw = space.integrate(state.b), space.integrate(state.omega)
    for _ in range(10):
        state = ssprk3_step(state, 0.002, transport, solver)
    assert space.integrate(state.b) == pytest.approx(mb, abs=1e-13)
    assert space.integrate(state.omega) == pytest.approx(mw, abs=1e-13)


def test_stream_function_consistent_after_step():
    space = make_space(8)
    solver = StreamSolver(space, 0.0, SolverSettings(rtol=1e-11))
    transport = TransportOperator(space)
    state = initial_state(SimConfig(n=8), space=space, solver=solver)
    state = ssprk3_step(state, 0.002, transport, solver)
    rhs = solver.mass.matrix @ state.f.coeffs - solver.moment_vector(state.omega)
    res = rhs - solver.op_one.matrix @ state.psi_tilde.coeffs
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(rhs)


def test_cfl_number():
    space = make_space(8)
    zero = CgField.zeros(space)
    f = space.interpolate_cg(lambda x, y: 0.0 * x)
    b = DgField.zeros(space)
    state = SimState(b=b, omega=b.copy(), psi_tilde=zero, psi_alpha=zero,
                     h=zero, f=f, alpha=0.0, t=0.0)
    assert cfl_number(state, 0.01) == 0.0
    psi = space.interpolate_cg(lambda x, y: np.sin(2 * np.pi * y))
    state2 = SimState(b=b, omega=b.copy(), psi_tilde=psi, psi_alpha=psi,
                      h=zero, f=f, alpha=0.0, t=0.0)
    c1 = cfl_number(state2, 0.01)
    assert c1 > 0
    assert cfl_number(state2, 0.02) == pytest.approx(2 * c1, rel=1e-12)
