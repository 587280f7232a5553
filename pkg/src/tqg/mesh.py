"""Uniform periodic triangulation of the unit square torus.

The domain is tiled by an n x n grid of squares, each split along the
lower-left -> upper-right diagonal into two right triangles:

    element A (lower right):  (i, j), (i+1, j), (i+1, j+1)
    element B (upper left):   (i, j), (i+1, j+1), (i, j+1)

All boundary entities are identified periodically.  Vertices are stored
once, as canonical representatives in [0, 1)^2, and identified by integer
lattice index rather than floating-point comparison; each element carries
its own (unwrapped) copy of the three corner coordinates so that elements
crossing the seam are proper triangles.

Local facet numbering of a triangle with vertices (v0, v1, v2) is
facet 0 = (v0, v1), facet 1 = (v1, v2), facet 2 = (v2, v0).  Every facet
of the torus mesh has exactly two incident elements; the stored unit
normal points from the "minus" to the "plus" element.  Facets come in
three congruence classes (diagonal, horizontal, vertical), stored as
contiguous blocks in cell-major order so that downstream assembly can
vectorise over each class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

_SQRT2 = np.sqrt(2.0)

#: facet class name -> (minus element parity, minus local facet,
#:                      plus element parity, plus local facet)
FACET_CLASSES = {
    "diagonal": (0, 2, 1, 0),
    "horizontal": (0, 0, 1, 1),
    "vertical": (1, 2, 0, 1),
}

#: reference-coordinate parametrisation xi(s), s in [0, 1], of a facet of
#: each class as seen from the minus and the plus element.  Both rows are
#: affine in s: xi(s) = p0 + s * (p1 - p0).
FACET_REF_SEGMENTS = {
    "diagonal": (((0.0, 1.0), (0.0, 0.0)), ((1.0, 0.0), (0.0, 0.0))),
    "horizontal": (((0.0, 0.0), (1.0, 0.0)), ((0.0, 1.0), (1.0, 0.0))),
    "vertical": (((0.0, 1.0), (0.0, 0.0)), ((0.0, 1.0), (1.0, 0.0))),
}


@dataclass
class FacetArrays:
    """Struct-of-arrays facet table; one entry per unique facet."""

    elem_minus: np.ndarray  # (F,) int
    loc_minus: np.ndarray  # (F,) int, local facet id within the minus element
    elem_plus: np.ndarray  # (F,) int
    loc_plus: np.ndarray  # (F,) int
    normals: np.ndarray  # (F, 2) unit, oriented minus -> plus
    lengths: np.ndarray  # (F,)
    endpoints: np.ndarray  # (F, 2, 2) facet segment in the minus element frame

    def __len__(self) -> int:
        return self.elem_minus.shape[0]


@dataclass
class MeshTopology:
    """Immutable periodic triangulation; safe for concurrent reads."""

    n: int
    vertices: np.ndarray  # (n^2, 2) canonical representatives in [0,1)^2
    elements: np.ndarray  # (2 n^2, 3) vertex indices, counter-clockwise
    element_coords: np.ndarray  # (2 n^2, 3, 2) unwrapped corner coordinates
    element_area: float
    facets: FacetArrays
    class_slices: dict = field(default_factory=dict)  # facet class -> slice

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def num_facets(self) -> int:
        return len(self.facets)

    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_facets + self.num_elements

    def vertex_index(self, i: int, j: int) -> int:
        """Canonical vertex id of lattice point (i, j), identified mod n."""
        return (j % self.n) * self.n + (i % self.n)

    def element_type(self, e) -> np.ndarray:
        """0 for lower-right (A) triangles, 1 for upper-left (B)."""
        return np.asarray(e) % 2

    def facet_quadrature(self, facet: int, order: int):
        """Gauss-Legendre rule on a facet, exact for 1D polynomials of
        degree <= order; weights sum to the facet length.

        Returns (points, weights) with points in the minus element frame.
        """
        if order < 1:
            raise ValueError(f"quadrature order must be >= 1, got {order}")
        if not 0 <= facet < self.num_facets:
            raise IndexError(f"facet index {facet} out of range")
        npts = (order + 2) // 2
        s, w = gauss_legendre_01(npts)
        p0, p1 = self.facets.endpoints[facet]
        pts = p0[None, :] + s[:, None] * (p1 - p0)[None, :]
        return pts, w * self.facets.lengths[facet]


def gauss_legendre_01(npts: int):
    """Gauss-Legendre nodes/weights on [0, 1] (exact to degree 2*npts - 1)."""
    x, w = roots_legendre(npts)
    return (x + 1.0) / 2.0, w / 2.0


def build_periodic_mesh(n: int) -> MeshTopology:
    """Build the n x n periodic triangulation of the unit square.

    Every cell is split along the same lower-left -> upper-right diagonal,
    giving 2 n^2 congruent right triangles of area 1 / (2 n^2).
    """
    if n < 1:
        raise ValueError(f"cells-per-side must be >= 1, got {n}")
    w = 1.0 / n

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    verts = np.column_stack([(ii.T.ravel()) * w, (jj.T.ravel()) * w])
    # verts[j*n + i] = (i/n, j/n)

    cells_j, cells_i = np.divmod(np.arange(n * n), n)  # cell c = j*n + i

    def vid(i, j):
        return (j % n) * n + (i % n)

    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    coords = np.empty((2 * n * n, 3, 2))
    i, j = cells_i, cells_j
    elements[0::2, 0] = vid(i, j)
    elements[0::2, 1] = vid(i + 1, j)
    elements[0::2, 2] = vid(i + 1, j + 1)
    elements[1::2, 0] = vid(i, j)
    elements[1::2, 1] = vid(i + 1, j + 1)
    elements[1::2, 2] = vid(i, j + 1)
    coords[0::2, 0] = np.column_stack([i, j]) * w
    coords[0::2, 1] = np.column_stack([i + 1, j]) * w
    coords[0::2, 2] = np.column_stack([i + 1, j + 1]) * w
    coords[1::2, 0] = np.column_stack([i, j]) * w
    coords[1::2, 1] = np.column_stack([i + 1, j + 1]) * w
    coords[1::2, 2] = np.column_stack([i, j + 1]) * w

    ncell = n * n
    elem_a = 2 * np.arange(ncell)  # A element of cell c
    elem_b = elem_a + 1

    em = []
    lm = []
    ep = []
    lp = []
    normals = []
    lengths = []
    endpoints = []
    slices = {}
    start = 0

    # diagonal facets: minus = A(i,j) facet 2, plus = B(i,j) facet 0
    em.append(elem_a)
    lm.append(np.full(ncell, 2))
    ep.append(elem_b)
    lp.append(np.full(ncell, 0))
    normals.append(np.tile([-1.0 / _SQRT2, 1.0 / _SQRT2], (ncell, 1)))
    lengths.append(np.full(ncell, _SQRT2 * w))
    endpoints.append(np.stack([coords[0::2, 2], coords[0::2, 0]], axis=1))
    slices["diagonal"] = slice(start, start + ncell)
    start += ncell

    # horizontal facets: minus = A(i,j) facet 0, plus = B(i,j-1) facet 1
    below = 2 * (((j - 1) % n) * n + i) + 1
    em.append(elem_a)
    lm.append(np.full(ncell, 0))
    ep.append(below)
    lp.append(np.full(ncell, 1))
    normals.append(np.tile([0.0, -1.0], (ncell, 1)))
    lengths.append(np.full(ncell, w))
    endpoints.append(np.stack([coords[0::2, 0], coords[0::2, 1]], axis=1))
    slices["horizontal"] = slice(start, start + ncell)
    start += ncell

    # vertical facets: minus = B(i,j) facet 2, plus = A(i-1,j) facet 1
    left = 2 * (j * n + (i - 1) % n)
    em.append(elem_b)
    lm.append(np.full(ncell, 2))
    ep.append(left)
    lp.append(np.full(ncell, 1))
    normals.append(np.tile([-1.0, 0.0], (ncell, 1)))
    lengths.append(np.full(ncell, w))
    endpoints.append(np.stack([coords[1::2, 2], coords[1::2, 0]], axis=1))
    slices["vertical"] = slice(start, start + ncell)

    facets = FacetArrays(
        elem_minus=np.concatenate(em),
        loc_minus=np.concatenate(lm),
        elem_plus=np.concatenate(ep),
        loc_plus=np.concatenate(lp),
        normals=np.concatenate(normals),
        lengths=np.concatenate(lengths),
        endpoints=np.concatenate(endpoints),
    )

    return MeshTopology(
        n=n,
        vertices=verts,
        elements=elements,
        element_coords=coords,
        element_area=0.5 * w * w,
        facets=facets,
        class_slices=slices,
    )
