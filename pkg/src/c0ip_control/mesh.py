"""Conforming triangulations with newest-vertex bisection and Doerfler marking.

Triangles are stored counterclockwise as vertex triples ``(a, b, c)`` where
the refinement edge is always the edge ``(b, c)`` opposite the local vertex 0
(the "peak"). Bisection inserts the midpoint of the refinement edge and the
two children get the new vertex as their peak, which is the classical
newest-vertex rule.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Mesh",
    "MeshTopologyError",
    "make_unit_square",
    "make_lshape",
    "bisect",
    "dorfler_mark",
    "mesh_metrics",
]

_GEOM_TOL = 1e-9


class MeshTopologyError(RuntimeError):
    """Raised when refinement closure cannot terminate (broken topology)."""


def _classify_boundary(domain, midpoints):
    """Assign a boundary-segment id to each boundary edge midpoint."""
    x, y = midpoints[:, 0], midpoints[:, 1]
    seg = np.full(len(midpoints), -1, dtype=int)
    if domain == "square":
        lines = [
            (np.abs(y) < _GEOM_TOL),            # y = 0
            (np.abs(x - 1.0) < _GEOM_TOL),      # x = 1
            (np.abs(y - 1.0) < _GEOM_TOL),      # y = 1
            (np.abs(x) < _GEOM_TOL),            # x = 0
        ]
    elif domain == "lshape":
        lines = [
            (np.abs(y + 1.0) < _GEOM_TOL) & (x <= _GEOM_TOL),   # y = -1
            (np.abs(x) < _GEOM_TOL) & (y <= _GEOM_TOL),         # x = 0, y < 0
            (np.abs(y) < _GEOM_TOL) & (x >= -_GEOM_TOL),        # y = 0, x > 0
            (np.abs(x - 1.0) < _GEOM_TOL) & (y >= -_GEOM_TOL),  # x = 1
            (np.abs(y - 1.0) < _GEOM_TOL),                      # y = 1
            (np.abs(x + 1.0) < _GEOM_TOL),                      # x = -1
        ]
    else:
        seg[:] = 0
        return seg
    for sid, mask in enumerate(lines):
        seg[mask & (seg < 0)] = sid
    if np.any(seg < 0):
        raise MeshTopologyError("boundary edge not on any boundary segment")
    return seg


class Mesh:
    """Immutable conforming triangulation with edge topology.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise; refinement edge is the
        edge opposite local vertex 0.
    level : (nt,) int array, refinement generation per triangle.
    parent : (nt,) int array, ancestor triangle index in the mesh this one
        was refined from (-1 for an initial mesh).
    edges : (ne, 2) int array of sorted vertex pairs.
    edge_tris : (ne, 2) int array of adjacent triangles (-1 if boundary).
    tri_edges : (nt, 3) int array; entry k is the edge opposite local vertex k.
    boundary_segment : (ne,) int array; segment id for boundary edges,
        -1 for interior edges.
    """

    def __init__(self, vertices, triangles, level=None, parent=None,
                 domain="custom"):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=int)
        nt = len(triangles)
        self.vertices = vertices
        self.triangles = triangles
        self.level = (np.zeros(nt, dtype=int) if level is None
                      else np.asarray(level, dtype=int))
        self.parent = (np.full(nt, -1, dtype=int) if parent is None
                       else np.asarray(parent, dtype=int))
        self.domain = domain
        self._check_orientation()
        self._build_topology()
        for arr in (self.vertices, self.triangles, self.level, self.parent,
                    self.edges, self.edge_tris, self.tri_edges,
                    self.boundary_segment):
            arr.setflags(write=False)

    # -- construction helpers -------------------------------------------

    def _check_orientation(self):
        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("all triangles must be counterclockwise")

    def _build_topology(self):
        tris = self.triangles
        # edge opposite local vertex k: (v_{k+1}, v_{k+2})
        raw = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]],
                              tris[:, [0, 1]]])
        raw_sorted = np.sort(raw, axis=1)
        edges, inverse = np.unique(raw_sorted, axis=0, return_inverse=True)
        ne = len(edges)
        tri_edges = inverse.reshape(3, -1).T.copy()
        counts = np.bincount(inverse, minlength=ne)
        if np.any(counts > 2):
            raise MeshTopologyError("edge shared by more than two triangles")
        edge_tris = np.full((ne, 2), -1, dtype=int)
        tri_idx = np.tile(np.arange(len(tris)), 3)
        order = np.argsort(inverse, kind="stable")
        pos = np.zeros(ne, dtype=int)
        for e, t in zip(inverse[order], tri_idx[order]):
            edge_tris[e, pos[e]] = t
            pos[e] += 1
        self.edges = edges
        self.edge_tris = edge_tris
        self.tri_edges = tri_edges
        boundary = counts == 1
        mids = 0.5 * (self.vertices[edges[:, 0]] + self.vertices[edges[:, 1]])
        seg = np.full(ne, -1, dtype=int)
        if boundary.any():
            seg[boundary] = _classify_boundary(self.domain, mids[boundary])
        self.boundary_segment = seg

    # -- queries ----------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def interior_edges(self):
        return np.flatnonzero(self.boundary_segment < 0)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.boundary_segment >= 0)

    @property
    def boundary_vertices(self):
        return np.unique(self.edges[self.boundary_edges])

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def diameters(self):
        p = self.vertices[self.triangles]
        sides = np.stack([
            np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
        ], axis=1)
        return sides.max(axis=1)

    def min_angle(self):
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))


def _orient_refinement_edges(vertices, triangles):
    """Rotate each triple so the longest edge is opposite local vertex 0.

    Ties are broken by the smallest global index of the opposite vertex.
    Cyclic rotation preserves orientation.
    """
    triangles = np.asarray(triangles, dtype=int)
    p = vertices[triangles]
    lens = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
    ], axis=1)
    out = triangles.copy()
    for t in range(len(triangles)):
        lmax = lens[t].max()
        cand = np.flatnonzero(lens[t] >= lmax - _GEOM_TOL)
        k = cand[np.argmin(triangles[t, cand])]
        out[t] = np.roll(triangles[t], -k)
    return out


def make_unit_square(n, diagonal="ne"):
    """Uniform mesh of (0,1)^2: n x n cells, two triangles each.

    ``diagonal`` selects the splitting diagonal: "ne" connects the
    lower-left and upper-right cell corners, "nw" the other two. The
    refinement edge of every triangle is the diagonal (its longest edge).
    """
    if n < 1:
        raise ValueError("subdivision count must be >= 1")
    if diagonal not in ("ne", "nw"):
        raise ValueError("diagonal must be 'ne' or 'nw'")
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            p00, p10 = vid(i, j), vid(i + 1, j)
            p01, p11 = vid(i, j + 1), vid(i + 1, j + 1)
            if diagonal == "ne":
                tris.append((p10, p11, p00))
                tris.append((p01, p00, p11))
            else:
                tris.append((p00, p10, p01))
                tris.append((p11, p01, p10))
    triangles = _orient_refinement_edges(vertices, np.array(tris))
    return Mesh(vertices, triangles, domain="square")


def make_lshape(n, diagonal="ne"):
    """L-shaped domain (-1,1)^2 minus [0,1]x[-1,0], re-entrant corner at 0.

    Built from three unit squares, each meshed like ``make_unit_square(n)``.
    """
    if n < 1:
        raise ValueError("subdivision count must be >= 1")
    squares = [(-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0)]
    vert_index = {}
    vertices = []
    tris = []

    def vid(x, y):
        key = (round(x, 12), round(y, 12))
        if key not in vert_index:
            vert_index[key] = len(vertices)
            vertices.append((x, y))
        return vert_index[key]

    h = 1.0 / n
    for x0, y0 in squares:
        for i in range(n):
            for j in range(n):
                xa, ya = x0 + i * h, y0 + j * h
                p00 = vid(xa, ya)
                p10 = vid(xa + h, ya)
                p01 = vid(xa, ya + h)
                p11 = vid(xa + h, ya + h)
                if diagonal == "ne":
                    tris.append((p10, p11, p00))
                    tris.append((p01, p00, p11))
                else:
                    tris.append((p00, p10, p01))
                    tris.append((p11, p01, p10))
    vertices = np.array(vertices)
    triangles = _orient_refinement_edges(vertices, np.array(tris))
    return Mesh(vertices, triangles, domain="lshape")


def bisect(mesh, marked, closure_limit=None):
    """Newest-vertex bisection of the marked triangles with conforming closure.

    Every marked triangle is bisected at least once; neighbors are bisected
    recursively until the mesh is conforming. Returns a new mesh whose
    ``parent`` array points into ``mesh``.
    """
    marked = np.unique(np.asarray(list(marked), dtype=int))
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.num_triangles):
        raise ValueError("marked set contains invalid triangle indices")
    if marked.size == 0:
        return mesh
    if closure_limit is None:
        closure_limit = 2 * mesh.num_triangles

    verts = [tuple(v) for v in mesh.vertices]
    tris = {t: tuple(mesh.triangles[t]) for t in range(mesh.num_triangles)}
    level = {t: int(mesh.level[t]) for t in tris}
    root = {t: t for t in tris}
    next_id = mesh.num_triangles

    edge2tris = {}
    for t, (a, b, c) in tris.items():
        for e in ((a, b), (b, c), (c, a)):
            edge2tris.setdefault(frozenset(e), set()).add(t)
    midpoint = {}

    def get_midpoint(u, v):
        key = frozenset((u, v))
        if key not in midpoint:
            pu, pv = verts[u], verts[v]
            verts.append((0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1])))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    def split(t, m):
        nonlocal next_id
        a, b, c = tris.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            edge2tris[frozenset(e)].discard(t)
        for child in ((m, a, b), (m, c, a)):
            cid = next_id
            next_id += 1
            tris[cid] = child
            level[cid] = level[t] + 1
            root[cid] = root[t]
            for e in ((child[0], child[1]), (child[1], child[2]),
                      (child[2], child[0])):
                edge2tris.setdefault(frozenset(e), set()).add(cid)

    def refine(t0):
        stack = [t0]
        steps = 0
        while stack:
            steps += 1
            if steps > closure_limit:
                raise MeshTopologyError(
                    "refinement closure exceeded %d steps" % closure_limit)
            t = stack[-1]
            if t not in tris:
                stack.pop()
                continue
            a, b, c = tris[t]
            ekey = frozenset((b, c))
            others = edge2tris[ekey] - {t}
            nb = min(others) if others else None
            if nb is not None:
                na, nb_b, nb_c = tris[nb]
                if frozenset((nb_b, nb_c)) != ekey:
                    stack.append(nb)
                    continue
            m = get_midpoint(b, c)
            split(t, m)
            if nb is not None:
                split(nb, m)
            stack.pop()

    for t in marked:
        if t in tris:  # may already be split by closure
            refine(int(t))

    order = sorted(tris)
    new_tris = np.array([tris[t] for t in order], dtype=int)
    new_level = np.array([level[t] for t in order], dtype=int)
    new_parent = np.array([root[t] for t in order], dtype=int)
    return Mesh(np.array(verts), new_tris, new_level, new_parent,
                domain=mesh.domain)


def dorfler_mark(indicators, theta):
    """Minimal greedy Doerfler marking on squared indicator contributions.

    Sorts descending (ties by ascending index) and takes the smallest prefix
    whose sum reaches ``theta`` times the total.
    """
    indicators = np.asarray(indicators, dtype=float)
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if np.any(indicators < 0.0):
        raise ValueError("indicators must be nonnegative")
    total = indicators.sum()
    if total <= 0.0:
        raise ValueError("all indicators are zero")
    order = np.lexsort((np.arange(len(indicators)), -indicators))
    target = theta * total
    cumulative = np.cumsum(indicators[order])
    k = int(np.searchsorted(cumulative, target - 1e-12 * total)) + 1
    k = min(k, int(np.count_nonzero(indicators)))
    return np.sort(order[:k])


def mesh_metrics(mesh):
    """Return (max element diameter, global min angle, counts dict)."""
    counts = {
        "vertices": mesh.num_vertices,
        "edges": mesh.num_edges,
        "triangles": mesh.num_triangles,
    }
    return float(mesh.diameters().max()), mesh.min_angle(), counts
