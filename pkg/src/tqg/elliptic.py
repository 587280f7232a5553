"""Assembly and solution of the nested Helmholtz problems.

The stream functions are recovered from the potential vorticity in two
stages, both posed with the symmetric positive definite bilinear form

    L_alpha(v, phi) = alpha <grad v, grad phi> + <v, phi>

over the CG space:

    L_1(psi_tilde, phi)     = -<omega - f, phi>
    L_alpha(psi_alpha, phi) = +<psi_tilde, phi>

For alpha = 0 the second system is a mass solve of the identity relation,
so psi_alpha = psi_tilde up to the solver tolerance.  Operators depend only
on (mesh, degree, alpha) and are assembled once and cached on the space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .spaces import CgField, DgField, FemSpace


@dataclass
class SolverSettings:
    """Iterative-solver knobs; tolerance is a relative residual."""

    rtol: float = 1e-10
    maxiter: int = 5000
    preconditioner: str = "jacobi"  # "jacobi" or "none"

    def __post_init__(self):
        if not 0.0 < self.rtol < 1.0:
            raise ValueError(f"relative tolerance must be in (0, 1), got {self.rtol}")
        if self.maxiter < 1:
            raise ValueError(f"max iterations must be >= 1, got {self.maxiter}")
        if self.preconditioner not in ("jacobi", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SparseOperator:
    """Assembled L_alpha matrix over the global CG basis."""

    matrix: sp.csr_matrix
    alpha: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class EllipticSolveError(RuntimeError):
    """Conjugate gradients failed to reach the requested residual."""

    def __init__(self, iterations: int, residual: float, rtol: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"PCG did not converge within {iterations} iterations: "
            f"relative residual {residual:.3e} > {rtol:.1e}"
        )


def assemble_helmholtz(space: FemSpace, alpha: float) -> SparseOperator:
    """Assemble L_alpha(phi_i, phi_j) over the CG basis (cached on the space)."""
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    cached = space._operator_cache.get(alpha)
    if cached is not None:
        return cached

    L = space.n_local
    local = np.empty((2, L, L))
    for t in (0, 1):
        stiff = np.einsum("q,qid,qjd->ij", space.wq, space.grad_phys[t], space.grad_phys[t])
        local[t] = alpha * stiff + space.mass_local

    E = space.num_elements
    rows = np.repeat(space.cg_map, L, axis=1).ravel()
    cols = np.tile(space.cg_map, (1, L)).ravel()
    vals = np.empty((E, L, L))
    vals[0::2] = local[0]
    vals[1::2] = local[1]
    mat = sp.coo_matrix(
        (vals.ravel(), (rows, cols)), shape=(space.num_cg_dofs, space.num_cg_dofs)
    ).tocsr()
    op = SparseOperator(matrix=mat, alpha=alpha)
    space._operator_cache[alpha] = op
    return op


def pcg(A: sp.csr_matrix, b: np.ndarray, x0=None, M_inv_diag=None,
        rtol: float = 1e-10, maxiter: int = 5000):
    """Preconditioned conjugate gradients for SPD systems.

    Terminates when ||b - A x|| <= rtol * ||b||.  Returns
    (x, iterations, relative_residual); raises EllipticSolveError on
    failure to converge.
    """
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    tol_abs = rtol * normb
    normr = np.linalg.norm(r)
    if normr <= tol_abs:
        return x, 0, normr / normb
    z = r * M_inv_diag if M_inv_diag is not None else r
    p = z.copy()
    gamma = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = gamma / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        normr = np.linalg.norm(r)
        if normr <= tol_abs:
            return x, it, normr / normb
        z = r * M_inv_diag if M_inv_diag is not None else r
        gamma_new = float(r @ z)
        p = z + (gamma_new / gamma) * p
        gamma = gamma_new
    raise EllipticSolveError(maxiter, normr / normb, rtol)


class StreamSolver:
    """Solves the nested Helmholtz pair for one (space, alpha)."""

    def __init__(self, space: FemSpace, alpha: float,
                 settings: SolverSettings | None = None):
        if alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {alpha}")
        self.space = space
        self.alpha = alpha
        self.settings = settings or SolverSettings()
        self.op_one = assemble_helmholtz(space, 1.0)
        self.op_alpha = assemble_helmholtz(space, alpha)
        self.mass = assemble_helmholtz(space, 0.0)
        if self.settings.preconditioner == "jacobi":
            self._pre_one = 1.0 / self.op_one.matrix.diagonal()
            self._pre_alpha = 1.0 / self.op_alpha.matrix.diagonal()
        else:
            self._pre_one = self._pre_alpha = None
        self.last_iterations = (0, 0)

    def moment_vector(self, omega: DgField) -> np.ndarray:
        """Global vector <omega, phi_i> over the CG basis."""
        sp_ = self.space
        local = omega.coeffs @ sp_.mass_local.T
        return np.bincount(
            sp_.cg_map.ravel(), weights=local.ravel(), minlength=sp_.num_cg_dofs
        )

    def solve(self, omega: DgField, f: CgField,
              warm_tilde: CgField | None = None,
              warm_alpha: CgField | None = None) -> tuple[CgField, CgField]:
        """Recover (psi_tilde, psi_alpha) from the current omega and f."""
        st = self.settings
        rhs1 = self.mass.matrix @ f.coeffs - self.moment_vector(omega)
        x0 = warm_tilde.coeffs if warm_tilde is not None else None
        tilde, it1, _ = pcg(self.op_one.matrix, rhs1, x0, self._pre_one,
                            st.rtol, st.maxiter)
        rhs2 = self.mass.matrix @ tilde
        x0 = warm_alpha.coeffs if warm_alpha is not None else None
        alpha_c, it2, _ = pcg(self.op_alpha.matrix, rhs2, x0, self._pre_alpha,
                              st.rtol, st.maxiter)
        self.last_iterations = (it1, it2)
        return CgField(self.space, tilde), CgField(self.space, alpha_c)
