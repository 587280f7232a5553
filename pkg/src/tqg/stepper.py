"""Three-stage strong-stability-preserving Runge-Kutta time integration.

Each stage is a forward-Euler step followed by a convex combination with
the start-of-step state; the stream function is re-solved from the stage
potential vorticity before every right-hand-side evaluation (warm-started
from the previous solve, so the first stage's re-solve is a no-op).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .elliptic import StreamSolver
from .spaces import CgField, DgField, FemSpace
from .transport import TransportOperator

#: convex-combination weights of (start state, Euler stage) per RK stage
SSPRK3_WEIGHTS = ((1.0,), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0))


@dataclass
class StepSettings:
    dt: float
    steps: int = 1
    cfl_report: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"time increment must be positive, got {self.dt}")


@dataclass
class SimState:
    """Prognostic fields plus static data at one time level."""

    b: DgField
    omega: DgField
    psi_tilde: CgField
    psi_alpha: CgField
    h: CgField
    f: CgField
    alpha: float
    t: float = 0.0

    @property
    def space(self) -> FemSpace:
        return self.b.space


def ssprk3(y, rhs, dt):
    """Generic SSPRK3 update of a tuple of arrays.

    `rhs(y)` returns time derivatives with the same structure as `y`.
    """
    y = tuple(np.asarray(c) + 0.0 for c in y)  # promote ints, keep complex
    k1 = rhs(y)
    y1 = tuple(c + dt * d for c, d in zip(y, k1))
    k2 = rhs(y1)
    y2 = tuple(0.75 * c + 0.25 * (c1 + dt * d) for c, c1, d in zip(y, y1, k2))
    k3 = rhs(y2)
    return tuple(
        c / 3.0 + (2.0 / 3.0) * (c2 + dt * d) for c, c2, d in zip(y, y2, k3)
    )


def ssprk3_step(state: SimState, dt: float, transport: TransportOperator,
                solver: StreamSolver) -> SimState:
    """Advance the coupled (b, omega) system by one SSPRK3 step."""
    sp_ = state.space
    warm = {"tilde": state.psi_tilde, "alpha": state.psi_alpha}

    def rhs(y):
        bc, wc = y
        omega = DgField(sp_, wc)
        tilde, palpha = solver.solve(omega, state.f, warm["tilde"], warm["alpha"])
        warm["tilde"], warm["alpha"] = tilde, palpha
        b = DgField(sp_, bc)
        db = transport.rhs_buoyancy(b, palpha)
        dw = transport.rhs_vorticity(omega, b, palpha, state.h)
        return db.coeffs, dw.coeffs

    bc, wc = ssprk3((state.b.coeffs, state.omega.coeffs), rhs, dt)
    omega = DgField(sp_, wc)
    tilde, palpha = solver.solve(omega, state.f, warm["tilde"], warm["alpha"])
    return replace(
        state,
        b=DgField(sp_, bc),
        omega=omega,
        psi_tilde=tilde,
        psi_alpha=palpha,
        t=state.t + dt,
    )


def max_speed(state: SimState) -> float:
    """max |u| over the volume quadrature points."""
    g = state.space.grads_at_quad(state.psi_alpha)
    return float(np.sqrt(np.max(np.sum(g * g, axis=-1))))


def cfl_number(state: SimState, dt: float) -> float:
    """Advisory CFL estimate dt * max|u| * n * (2k + 1)."""
    sp_ = state.space
    return dt * max_speed(state) * sp_.mesh.n * (2 * sp_.degree + 1)
