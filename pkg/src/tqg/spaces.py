"""Continuous (CG) and discontinuous (DG) Lagrange spaces on the periodic mesh.

Both spaces use the same degree-k Lagrange nodes on the reference triangle
{(xi, eta): xi, eta >= 0, xi + eta <= 1}, so a CG field converts to a DG
field by a plain gather and the inclusion CG subset-of DG holds exactly.

On the uniform mesh every Lagrange node of every element lands on the
lattice of spacing 1/(n k); CG degrees of freedom are identified with those
lattice points (periodically, by integer index), which gives (n k)^2 global
CG unknowns and tolerance-free periodic identification.

Volume quadrature is a conical-product Gauss rule (positive weights),
exact to degree max(2k+1, 3k-2); facet quadrature is Gauss-Legendre,
exact to degree max(2k+1, 3k-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import FACET_CLASSES, FACET_REF_SEGMENTS, MeshTopology, gauss_legendre_01


@dataclass
class QuadratureRule:
    """Points/weights on the reference triangle, exact to `degree`."""

    points: np.ndarray  # (Q, 2)
    weights: np.ndarray  # (Q,), positive, summing to 1/2
    degree: int


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Conical-product Gauss rule on the reference triangle.

    Gauss-Legendre in xi times Gauss-Jacobi (weight 1 - eta) in eta,
    mapped by (xi, eta) -> (xi (1 - eta), eta); all weights positive.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    m = degree // 2 + 1
    xg, wg = gauss_legendre_01(m)
    xj, wj = roots_jacobi(m, 1.0, 0.0)  # weight (1 - x) on [-1, 1]
    eta = (xj + 1.0) / 2.0
    weta = wj / 4.0  # absorbs both the affine map and the (1 - eta) factor
    pts = np.empty((m * m, 2))
    wts = np.empty(m * m)
    for a in range(m):
        for b in range(m):
            pts[a * m + b] = (xg[a] * (1.0 - eta[b]), eta[b])
            wts[a * m + b] = wg[a] * weta[b]
    return QuadratureRule(points=pts, weights=wts, degree=2 * m - 1)


def lagrange_nodes(degree: int) -> np.ndarray:
    """Reference-triangle Lagrange nodes (a/k, b/k), a + b <= k."""
    return np.array(
        [(a / degree, b / degree) for b in range(degree + 1) for a in range(degree + 1 - b)]
        if degree > 0
        else [(1.0 / 3.0, 1.0 / 3.0)]
    )


class ReferenceBasis:
    """Nodal Lagrange basis of total degree k on the reference triangle."""

    def __init__(self, degree: int):
        if not 1 <= degree <= 3:
            raise ValueError(f"polynomial degree must be in 1..3, got {degree}")
        self.degree = degree
        self.nodes = lagrange_nodes(degree)
        self.exponents = [(a, b) for b in range(degree + 1) for a in range(degree + 1 - b)]
        self.size = len(self.exponents)
        vander = self._monomials(self.nodes)
        self._coef = np.linalg.inv(vander)  # monomial -> nodal basis coefficients

    def _monomials(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        cols = [pts[:, 0] ** a * pts[:, 1] ** b for a, b in self.exponents]
        return np.column_stack(cols)

    def _monomial_grads(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros((pts.shape[0], self.size, 2))
        for m, (a, b) in enumerate(self.exponents):
            if a > 0:
                out[:, m, 0] = a * pts[:, 0] ** (a - 1) * pts[:, 1] ** b
            if b > 0:
                out[:, m, 1] = b * pts[:, 0] ** a * pts[:, 1] ** (b - 1)
        return out

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (P, L)."""
        return self._monomials(pts) @ self._coef

    def eval_grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference-coordinate basis gradients, shape (P, L, 2)."""
        return np.einsum("pmd,ml->pld", self._monomial_grads(pts), self._coef)


@dataclass
class FacetClassTables:
    """Per-facet-class trace tables shared by all facets of the class."""

    name: str
    elem_minus: np.ndarray  # (Fc,)
    elem_plus: np.ndarray  # (Fc,)
    normal: np.ndarray  # (2,)
    weights: np.ndarray  # (Qf,) physical weights (include facet length)
    trace_minus: np.ndarray  # (Qf, L) basis values on the minus side
    trace_plus: np.ndarray  # (Qf, L)
    grad_minus: np.ndarray  # (Qf, L, 2) physical basis gradients, minus side
    grad_plus: np.ndarray  # (Qf, L, 2)
    un_minus: np.ndarray  # (Qf, L): perp-grad(phi) . n from the minus side
    un_plus: np.ndarray  # (Qf, L): perp-grad(phi) . n from the plus side
    points: np.ndarray  # (Fc, Qf, 2) physical quadrature points


class FemSpace:
    """Precomputed tables for degree-k CG/DG spaces on one mesh.

    Immutable after construction; all operations are pure functions of
    field coefficient arrays.
    """

    def __init__(self, mesh: MeshTopology, degree: int = 1):
        self.mesh = mesh
        self.degree = degree
        self.basis = ReferenceBasis(degree)
        n, k = mesh.n, degree
        L = self.basis.size
        self.n_local = L
        self.num_elements = mesh.num_elements
        self.num_dg_dofs = mesh.num_elements * L
        self.num_cg_dofs = (n * k) ** 2

        # affine maps: x = x0 + J xi with J constant per element type
        w = 1.0 / n
        self.jac = np.array([[[w, w], [0.0, w]], [[w, 0.0], [w, w]]])
        self.jac_inv = np.array([np.linalg.inv(J) for J in self.jac])
        self.det_jac = w * w

        rule = triangle_quadrature(max(2 * k + 1, 3 * k - 2))
        self.quad = rule
        self.qpoints = rule.points
        self.wq = rule.weights * self.det_jac  # (Q,) physical volume weights
        self.phi = self.basis.eval(rule.points)  # (Q, L)
        dphi = self.basis.eval_grad(rule.points)  # (Q, L, 2) reference
        # physical gradient components: grad_d = sum_r dphi_r * Jinv[r, d]
        self.grad_phys = np.stack(
            [np.einsum("qlr,rd->qld", dphi, self.jac_inv[t]) for t in (0, 1)]
        )  # (2, Q, L, 2)

        x0 = mesh.element_coords[:, 0]  # (E, 2)
        edges = mesh.element_coords[:, 1:] - x0[:, None, :]  # (E, 2, 2)
        self.quad_points_phys = x0[:, None, :] + np.einsum(
            "qr,erd->eqd", rule.points, edges
        )  # (E, Q, 2)

        self.mass_ref = np.einsum("q,qi,qj->ij", rule.weights, self.phi, self.phi)
        self.mass_local = self.mass_ref * self.det_jac
        self.mass_local_inv = np.linalg.inv(self.mass_local)

        # matmul-shaped copies of the basis tables for the hot assembly loops:
        # field values  (E, L) @ phi_t -> (E, Q)
        # field grads   (E, L) @ dmat[t] -> (E, Q*2), entry [e, 2 q + d]
        # scatter back  (E, Q*2) @ gmat[t] -> (E, L), with quadrature weights
        self.phi_t = np.ascontiguousarray(self.phi.T)
        self.dmat = [
            np.ascontiguousarray(self.grad_phys[t].transpose(1, 0, 2).reshape(L, -1))
            for t in (0, 1)
        ]
        self.gmat = [
            np.ascontiguousarray(self.grad_phys[t].transpose(0, 2, 1).reshape(-1, L))
            for t in (0, 1)
        ]

        self.cg_map = self._build_cg_map()  # (E, L) global CG dof per local node
        self._facet_classes = self._build_facet_tables()
        self._operator_cache: dict[float, object] = {}

    # ------------------------------------------------------------------ dofs

    def _build_cg_map(self) -> np.ndarray:
        n, k = self.mesh.n, self.degree
        nk = n * k
        ncell = n * n
        cells = np.arange(ncell)
        j, i = np.divmod(cells, n)
        cg = np.empty((self.num_elements, self.n_local), dtype=np.int64)
        for l, (a, b) in enumerate(
            [(a, b) for b in range(k + 1) for a in range(k + 1 - b)]
        ):
            # lattice indices of local node l, derived from the affine maps
            ax = (i * k + a + b) % nk
            ay = (j * k + b) % nk
            cg[0::2, l] = ay * nk + ax
            bx = (i * k + a) % nk
            by = (j * k + a + b) % nk
            cg[1::2, l] = by * nk + bx
        return cg

    def cg_node_coords(self) -> np.ndarray:
        """Canonical coordinates of the global CG dofs, shape (G, 2)."""
        nk = self.mesh.n * self.degree
        g = np.arange(self.num_cg_dofs)
        iy, ix = np.divmod(g, nk)
        return np.column_stack([ix / nk, iy / nk])

    # ----------------------------------------------------------------- facets

    def _build_facet_tables(self):
        k = self.degree
        nf = max(k + 1, (3 * k) // 2 + (3 * k) % 2)  # exact to >= max(2k+1, 3k-1)
        s, ws = gauss_legendre_01(nf)
        classes = {}
        for name, sl in self.mesh.class_slices.items():
            tmin, _, tplus, _ = FACET_CLASSES[name]
            (m0, m1), (p0, p1) = FACET_REF_SEGMENTS[name]
            xi_m = np.array(m0)[None, :] + s[:, None] * (np.array(m1) - np.array(m0))
            xi_p = np.array(p0)[None, :] + s[:, None] * (np.array(p1) - np.array(p0))
            em = self.mesh.facets.elem_minus[sl]
            ep = self.mesh.facets.elem_plus[sl]
            normal = self.mesh.facets.normals[sl][0]
            length = self.mesh.facets.lengths[sl][0]
            gm = np.einsum("qlr,rd->qld", self.basis.eval_grad(xi_m), self.jac_inv[tmin])
            gp = np.einsum("qlr,rd->qld", self.basis.eval_grad(xi_p), self.jac_inv[tplus])
            ends = self.mesh.facets.endpoints[sl]
            pts = ends[:, None, 0, :] + s[None, :, None] * (
                ends[:, 1, :] - ends[:, 0, :]
            )[:, None, :]
            classes[name] = FacetClassTables(
                name=name,
                elem_minus=em,
                elem_plus=ep,
                normal=normal,
                weights=ws * length,
                trace_minus=self.basis.eval(xi_m),
                trace_plus=self.basis.eval(xi_p),
                grad_minus=gm,
                grad_plus=gp,
                un_minus=gm[:, :, 0] * normal[1] - gm[:, :, 1] * normal[0],
                un_plus=gp[:, :, 0] * normal[1] - gp[:, :, 1] * normal[0],
                points=pts,
            )
        return classes

    @property
    def facet_classes(self):
        return self._facet_classes

    # ----------------------------------------------------------------- fields

    def local_coeffs(self, f) -> np.ndarray:
        """Element-local coefficient view (E, L) of a CG or DG field."""
        if isinstance(f, CgField):
            return f.coeffs[self.cg_map]
        return f.coeffs

    def values_at_quad(self, f) -> np.ndarray:
        return self.local_coeffs(f) @ self.phi_t  # (E, Q)

    def grads_at_quad(self, f) -> np.ndarray:
        loc = self.local_coeffs(f)
        out = np.empty((self.num_elements, self.wq.size, 2))
        for t in (0, 1):
            out[t::2] = (loc[t::2] @ self.dmat[t]).reshape(-1, self.wq.size, 2)
        return out

    def project_dg(self, func) -> "DgField":
        """Element-wise L2 projection of a callable f(x, y) into the DG space."""
        x = self.quad_points_phys
        vals = np.broadcast_to(func(x[..., 0], x[..., 1]), x.shape[:2])
        rhs = (self.wq * vals) @ self.phi
        return DgField(self, rhs @ self.mass_local_inv.T)

    def interpolate_cg(self, func, check_periodicity: bool = True) -> "CgField":
        """Nodal interpolation of f(x, y) at the global CG dof lattice.

        Rejects functions that disagree across the periodic seam, since
        those have no continuous periodic representative.
        """
        pts = self.cg_node_coords()
        vals = np.asarray(func(pts[:, 0], pts[:, 1]), dtype=float)
        vals = np.broadcast_to(vals, (self.num_cg_dofs,)).copy()
        if check_periodicity:
            nk = self.mesh.n * self.degree
            scale = max(1.0, float(np.max(np.abs(vals))))
            tol = 1e-9 * scale
            ys = np.arange(nk) / nk
            if np.max(np.abs(np.asarray(func(np.zeros(nk), ys)) - np.asarray(func(np.ones(nk), ys)))) > tol:
                raise ValueError("function is not periodic across the x = 0 seam")
            xs = np.arange(nk) / nk
            if np.max(np.abs(np.asarray(func(xs, np.zeros(nk))) - np.asarray(func(xs, np.ones(nk))))) > tol:
                raise ValueError("function is not periodic across the y = 0 seam")
        return CgField(self, vals)

    def cg_to_dg(self, f: "CgField") -> "DgField":
        return DgField(self, f.coeffs[self.cg_map].copy())

    # ------------------------------------------------------------- integrals

    def integrate(self, f) -> float:
        return float(np.einsum("q,eq->", self.wq, self.values_at_quad(f)))

    def inner_l2(self, a, b) -> float:
        _check_same_space(a, b)
        return float(
            np.einsum("q,eq,eq->", self.wq, self.values_at_quad(a), self.values_at_quad(b))
        )

    def inner_h1(self, a, b) -> float:
        """H1 inner product; broken (element-wise) when a, b are DG fields."""
        _check_same_space(a, b)
        ga, gb = self.grads_at_quad(a), self.grads_at_quad(b)
        grad_part = np.einsum("q,eqd,eqd->", self.wq, ga, gb)
        return self.inner_l2(a, b) + float(grad_part)

    def norm_l2(self, f) -> float:
        return np.sqrt(max(self.inner_l2(f, f), 0.0))

    def norm_h1(self, f) -> float:
        return np.sqrt(max(self.inner_h1(f, f), 0.0))

    def norm_linf_gradient(self, f) -> float:
        """max |grad f| over all volume quadrature points (cheap surrogate
        for the true polynomial extremum)."""
        g = self.grads_at_quad(f)
        return float(np.sqrt(np.max(np.sum(g * g, axis=-1))))

    # ------------------------------------------------------------ evaluation

    def locate(self, x, y):
        """Element index and reference coordinates of physical points."""
        x = np.asarray(x, dtype=float) % 1.0
        y = np.asarray(y, dtype=float) % 1.0
        n = self.mesh.n
        i = np.minimum((x * n).astype(np.int64), n - 1)
        j = np.minimum((y * n).astype(np.int64), n - 1)
        fx = x * n - i
        fy = y * n - j
        is_b = fy > fx
        elem = 2 * (j * n + i) + is_b
        # invert the affine map of each element type
        xi = np.where(is_b, fx, fx - fy)
        eta = np.where(is_b, fy - fx, fy)
        return elem, np.stack([xi, eta], axis=-1)

    def eval_field(self, f, x, y) -> np.ndarray:
        """Point evaluation (DG fields use the containing element's polynomial)."""
        elem, ref = self.locate(x, y)
        loc = self.local_coeffs(f)
        vals = self.basis.eval(ref.reshape(-1, 2))  # (P, L)
        return np.einsum("pl,pl->p", vals, loc[np.ravel(elem)]).reshape(np.shape(elem))


def _check_same_space(a, b) -> None:
    if a.space is not b.space and (
        a.space.mesh.n != b.space.mesh.n or a.space.degree != b.space.degree
    ):
        raise ValueError("fields live on different meshes or degrees")


class CgField:
    """Globally continuous field: one coefficient per periodic lattice dof."""

    def __init__(self, space: FemSpace, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.num_cg_dofs,):
            raise ValueError(
                f"expected {space.num_cg_dofs} CG coefficients, got {coeffs.shape}"
            )
        self.space = space
        self.coeffs = coeffs

    def copy(self) -> "CgField":
        return CgField(self.space, self.coeffs.copy())

    @classmethod
    def zeros(cls, space: FemSpace) -> "CgField":
        return cls(space, np.zeros(space.num_cg_dofs))


class DgField:
    """Element-wise polynomial field with no inter-element coupling."""

    def __init__(self, space: FemSpace, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.num_elements, space.n_local):
            raise ValueError(
                f"expected coefficients of shape "
                f"{(space.num_elements, space.n_local)}, got {coeffs.shape}"
            )
        self.space = space
        self.coeffs = coeffs

    def copy(self) -> "DgField":
        return DgField(self.space, self.coeffs.copy())

    @classmethod
    def zeros(cls, space: FemSpace) -> "DgField":
        return cls(space, np.zeros((space.num_elements, space.n_local)))
