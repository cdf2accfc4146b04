"""Quadratic Lagrange elements: dofs, reference basis, quadrature, interpolation.

Local dof numbering on the reference triangle with barycentrics
``lambda = (1 - x - y, x, y)``: dofs 0..2 are the vertex functions
``lambda_i (2 lambda_i - 1)`` and dofs 3..5 are the edge-midpoint bubbles
``4 lambda_j lambda_k`` on the edge opposite vertex ``i`` (so dof 3+k sits
on the edge opposite local vertex k, matching ``Mesh.tri_edges``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "DofMap",
    "P2Function",
    "QuadratureRule",
    "build_dofmap",
    "shape_values",
    "shape_gradients",
    "REFERENCE_HESSIANS",
    "eval_basis",
    "quadrature",
    "interpolate",
]

_DL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # barycentric gradients

# constant reference Hessians, one 2x2 block per local basis function
REFERENCE_HESSIANS = np.empty((6, 2, 2))
for _i in range(3):
    REFERENCE_HESSIANS[_i] = 4.0 * np.outer(_DL[_i], _DL[_i])
for _k, (_j, _l) in enumerate([(1, 2), (2, 0), (0, 1)]):
    REFERENCE_HESSIANS[3 + _k] = 4.0 * (
        np.outer(_DL[_j], _DL[_l]) + np.outer(_DL[_l], _DL[_j]))
REFERENCE_HESSIANS.setflags(write=False)


def shape_values(points):
    """P2 basis values at reference points, shape (npts, 6)."""
    points = np.atleast_2d(points)
    lam = np.column_stack([1.0 - points[:, 0] - points[:, 1],
                           points[:, 0], points[:, 1]])
    vals = np.empty((len(points), 6))
    vals[:, :3] = lam * (2.0 * lam - 1.0)
    vals[:, 3] = 4.0 * lam[:, 1] * lam[:, 2]
    vals[:, 4] = 4.0 * lam[:, 2] * lam[:, 0]
    vals[:, 5] = 4.0 * lam[:, 0] * lam[:, 1]
    return vals


def shape_gradients(points):
    """P2 basis gradients at reference points, shape (npts, 6, 2)."""
    points = np.atleast_2d(points)
    lam = np.column_stack([1.0 - points[:, 0] - points[:, 1],
                           points[:, 0], points[:, 1]])
    grads = np.empty((len(points), 6, 2))
    for i in range(3):
        grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * _DL[i]
    for k, (j, l) in enumerate([(1, 2), (2, 0), (0, 1)]):
        grads[:, 3 + k] = 4.0 * (lam[:, l, None] * _DL[j]
                                 + lam[:, j, None] * _DL[l])
    return grads


def eval_basis(local_index, point):
    """Value, gradient and (constant) Hessian of one reference basis function."""
    pt = np.asarray(point, dtype=float).reshape(1, 2)
    return (shape_values(pt)[0, local_index],
            shape_gradients(pt)[0, local_index],
            REFERENCE_HESSIANS[local_index].copy())


@dataclass(frozen=True)
class DofMap:
    """Global P2 dof layout: vertex dofs first, then edge-midpoint dofs."""

    ndof: int
    tri_dofs: np.ndarray      # (nt, 6) local-to-global
    dirichlet: np.ndarray     # (ndof,) bool mask of constrained dofs
    free: np.ndarray          # indices of unconstrained dofs
    dof_coords: np.ndarray    # (ndof, 2) nodal coordinates

    @property
    def nfree(self):
        return len(self.free)


def build_dofmap(mesh):
    nv = mesh.num_vertices
    ndof = nv + mesh.num_edges
    tri_dofs = np.empty((mesh.num_triangles, 6), dtype=int)
    tri_dofs[:, :3] = mesh.triangles
    tri_dofs[:, 3:] = nv + mesh.tri_edges
    dirichlet = np.zeros(ndof, dtype=bool)
    dirichlet[mesh.boundary_vertices] = True
    dirichlet[nv + mesh.boundary_edges] = True
    free = np.flatnonzero(~dirichlet)
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]]
                  + mesh.vertices[mesh.edges[:, 1]])
    coords = np.vstack([mesh.vertices, mids])
    return DofMap(ndof, tri_dofs, dirichlet, free, coords)


@dataclass
class P2Function:
    """Coefficient vector over a DofMap."""

    mesh: object
    dofmap: DofMap
    coeffs: np.ndarray

    def copy(self):
        return P2Function(self.mesh, self.dofmap, self.coeffs.copy())


def interpolate(mesh, dofmap, field, constrained=False):
    """Nodal interpolant of ``field(x, y)`` (vectorized callable)."""
    coords = dofmap.dof_coords
    coeffs = np.asarray(field(coords[:, 0], coords[:, 1]), dtype=float)
    coeffs = np.broadcast_to(coeffs, (dofmap.ndof,)).copy()
    if constrained:
        coeffs[dofmap.dirichlet] = 0.0
    return P2Function(mesh, dofmap, coeffs)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 2) for triangles, (n,) for edges, reference coords
    weights: np.ndarray
    degree: int


_TRIANGLE_DEGREES = (1, 2, 4, 6, 8)


def quadrature(kind, degree):
    """Quadrature on the reference triangle or the reference edge [0, 1].

    Triangle rules use the conical (Duffy) product of Gauss-Jacobi and
    Gauss-Legendre points, exact for total degree <= ``degree``.
    """
    if kind == "triangle":
        if degree not in _TRIANGLE_DEGREES:
            raise ValueError("unsupported triangle degree %r" % (degree,))
        n = (degree + 2) // 2
        xj, wj = roots_jacobi(n, 1.0, 0.0)
        r = 0.5 * (xj + 1.0)
        wr = 0.25 * wj          # integrates (1 - r) f(r) on [0, 1]
        xl, wl = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (xl + 1.0)
        ws = 0.5 * wl
        pts = np.column_stack([np.repeat(r, n),
                               np.tile(s, n) * np.repeat(1.0 - r, n)])
        wts = np.repeat(wr, n) * np.tile(ws, n)
        return QuadratureRule(pts, wts, degree)
    if kind == "edge":
        if not 1 <= degree <= 9:
            raise ValueError("unsupported edge degree %r" % (degree,))
        n = (degree + 2) // 2
        xl, wl = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(0.5 * (xl + 1.0), 0.5 * wl, degree)
    raise ValueError("kind must be 'triangle' or 'edge'")
