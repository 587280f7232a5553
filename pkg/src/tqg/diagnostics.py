"""Conserved quantities, error metrics and blow-up monitors.

Monitored quantities follow the model's conservation laws and blow-up
criteria: total energy, casimir functionals, the time integrals of
||grad b||_inf, ||grad u||_inf and ||grad b||_{H1} (finite-time blow-up
would force one of them to diverge), and relative errors of a run against
a reference run sharing mesh, degree and time grid.

The velocity gradient needs one interpretation step: u = perp-grad(psi) is
piecewise degree k-1, so its broken gradient vanishes identically at k=1.
The monitor therefore L2-projects each velocity component back into the CG
space (two mass solves) and differentiates the recovered field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .elliptic import StreamSolver, assemble_helmholtz, pcg
from .spaces import CgField, DgField, FemSpace
from .stepper import SimState

CSV_COLUMNS = [
    "time",
    "energy",
    "mass_b",
    "mass_omega",
    "grad_b_linf",
    "grad_u_linf",
    "grad_b_h1",
    "int_grad_b_linf",
    "int_grad_u_linf",
    "int_grad_b_h1",
    "e_b",
    "e_omega",
]


def energy(state: SimState) -> float:
    """Numerical total energy 1/2 <psi_alpha, psi_tilde>_{H1} - 1/2 <h, b>."""
    sp_ = state.space
    op = assemble_helmholtz(sp_, 1.0)  # the H1 inner-product matrix
    kinetic = 0.5 * float(state.psi_alpha.coeffs @ (op.matrix @ state.psi_tilde.coeffs))
    h_loc = state.h.coeffs[sp_.cg_map]
    potential = 0.5 * float(
        np.einsum("ei,ij,ej->", h_loc, sp_.mass_local, state.b.coeffs)
    )
    return kinetic - potential


def casimir(state: SimState, Psi, Phi) -> float:
    """Quadrature evaluation of int Psi(b) + omega * Phi(b)."""
    sp_ = state.space
    b_q = sp_.values_at_quad(state.b)
    w_q = sp_.values_at_quad(state.omega)
    vals = np.asarray(Psi(b_q), dtype=float) + w_q * np.asarray(Phi(b_q), dtype=float)
    return float(np.einsum("q,eq->", sp_.wq, np.broadcast_to(vals, b_q.shape)))


def mass(field_, space: FemSpace) -> float:
    return space.integrate(field_)


def grad_b_linf(state: SimState) -> float:
    return state.space.norm_linf_gradient(state.b)


def grad_b_h1(state: SimState) -> float:
    """Broken H1 norm of grad b: (||grad b||^2 + ||D2 b||^2)^(1/2)."""
    sp_ = state.space
    g = sp_.grads_at_quad(state.b)
    first = float(np.einsum("q,eqd,eqd->", sp_.wq, g, g))
    second = 0.0
    if sp_.degree > 1:
        for comp in range(2):
            gc = DgField(sp_, _project_component(sp_, g[..., comp]))
            gg = sp_.grads_at_quad(gc)
            second += float(np.einsum("q,eqd,eqd->", sp_.wq, gg, gg))
    return float(np.sqrt(max(first + second, 0.0)))


def _project_component(space: FemSpace, values_at_quad: np.ndarray) -> np.ndarray:
    rhs = (space.wq * values_at_quad) @ space.phi
    return rhs @ space.mass_local_inv.T


def recovered_velocity(state: SimState) -> tuple[CgField, CgField]:
    """L2 projection of u = perp-grad(psi_alpha) into the CG space."""
    sp_ = state.space
    g = sp_.grads_at_quad(state.psi_alpha)
    u = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    mass_op = assemble_helmholtz(sp_, 0.0)
    pre = 1.0 / mass_op.matrix.diagonal()
    out = []
    for comp in range(2):
        loc = (sp_.wq * u[..., comp]) @ sp_.phi
        rhs = np.bincount(
            sp_.cg_map.ravel(), weights=loc.ravel(), minlength=sp_.num_cg_dofs
        )
        x, _, _ = pcg(mass_op.matrix, rhs, None, pre, 1e-12, 2000)
        out.append(CgField(sp_, x))
    return out[0], out[1]


def grad_u_linf(state: SimState) -> float:
    """max Frobenius norm of the recovered velocity gradient."""
    sp_ = state.space
    ux, uy = recovered_velocity(state)
    gx = sp_.grads_at_quad(ux)
    gy = sp_.grads_at_quad(uy)
    frob = np.sum(gx * gx, axis=-1) + np.sum(gy * gy, axis=-1)
    return float(np.sqrt(np.max(frob)))


def relative_errors(state: SimState, reference: SimState) -> tuple[float, float]:
    """(e_b, e_omega): broken-H1 and L2 relative errors against a reference."""
    sp_ = state.space
    if reference.space.mesh.n != sp_.mesh.n or reference.space.degree != sp_.degree:
        raise ValueError("reference run lives on a different mesh or degree")
    if abs(reference.t - state.t) > 1e-9:
        raise ValueError(
            f"time stamps differ: {state.t} vs reference {reference.t}"
        )
    db = DgField(sp_, reference.b.coeffs - state.b.coeffs)
    dw = DgField(sp_, reference.omega.coeffs - state.omega.coeffs)
    e_b = sp_.norm_h1(db) / sp_.norm_h1(reference.b)
    e_w = sp_.norm_l2(dw) / sp_.norm_l2(reference.omega)
    return e_b, e_w


@dataclass
class DiagnosticsRecord:
    time: float
    energy: float
    mass_b: float
    mass_omega: float
    grad_b_linf: float
    grad_u_linf: float
    grad_b_h1: float
    int_grad_b_linf: float = 0.0
    int_grad_u_linf: float = 0.0
    int_grad_b_h1: float = 0.0
    e_b: float | None = None
    e_omega: float | None = None
    suspicion: tuple = ()


@dataclass
class BkmMonitors:
    """Trapezoidal accumulation of the three blow-up time integrals.

    Flags a "blow-up suspicion" (advisory, never a hard stop) when an
    instantaneous value exceeds `threshold` times its initial value.
    """

    threshold: float = 100.0
    _prev: tuple | None = None
    _initial: tuple | None = None
    integrals: list = field(default_factory=lambda: [0.0, 0.0, 0.0])

    def update(self, state: SimState, dt: float | None = None) -> DiagnosticsRecord:
        vals = (grad_b_linf(state), grad_u_linf(state), grad_b_h1(state))
        if self._prev is None:
            self._initial = vals
        else:
            if dt is None:
                raise ValueError("dt required after the first sample")
            for m in range(3):
                self.integrals[m] += 0.5 * dt * (self._prev[m] + vals[m])
        self._prev = vals
        flags = tuple(
            name
            for name, v, v0 in zip(
                ("grad_b_linf", "grad_u_linf", "grad_b_h1"), vals, self._initial
            )
            if v > self.threshold * v0
        )
        return DiagnosticsRecord(
            time=state.t,
            energy=energy(state),
            mass_b=mass(state.b, state.space),
            mass_omega=mass(state.omega, state.space),
            grad_b_linf=vals[0],
            grad_u_linf=vals[1],
            grad_b_h1=vals[2],
            int_grad_b_linf=self.integrals[0],
            int_grad_u_linf=self.integrals[1],
            int_grad_b_h1=self.integrals[2],
            suspicion=flags,
        )


class DiagnosticsWriter:
    """Streams DiagnosticsRecord rows to a CSV file."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_COLUMNS)
        self._last_time = None

    def write(self, rec: DiagnosticsRecord) -> None:
        if self._last_time is not None and rec.time <= self._last_time:
            raise ValueError("diagnostics records must have increasing time")
        self._last_time = rec.time
        row = [
            f"{rec.time:.12g}",
            *(f"{v:.17g}" for v in (
                rec.energy, rec.mass_b, rec.mass_omega,
                rec.grad_b_linf, rec.grad_u_linf, rec.grad_b_h1,
                rec.int_grad_b_linf, rec.int_grad_u_linf, rec.int_grad_b_h1,
            )),
            "" if rec.e_b is None else f"{rec.e_b:.17g}",
            "" if rec.e_omega is None else f"{rec.e_omega:.17g}",
        ]
        self._writer.writerow(row)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
