"""Triangulated closed surfaces: construction, OFF file I/O, validation.

A mesh is a closed orientable triangulation of the scatterer boundary.
Triangle orientation is made globally consistent, with normals pointing
out of the obstacle into the surrounding exterior domain (signed enclosed
volume positive per connected component).  All derived quantities
(normals, areas, centroids, diameters) are precomputed and immutable
after construction; meshes are safe to share read-only across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEGENERATE_AREA_FACTOR = 1e-14


class MeshError(Exception):
    """Invalid surface mesh (parse failure, open surface, bad topology)."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed triangulated surface with obstacle-outward normals.

    Attributes
    ----------
    vertices : np.ndarray, shape (V, 3)
        Vertex coordinates.
    triangles : np.ndarray, shape (T, 3), int
        Vertex indices per triangle, consistently oriented so that the
        right-handed normal points out of the obstacle.
    normals : np.ndarray, shape (T, 3)
        Unit outward triangle normals.
    areas : np.ndarray, shape (T,)
    centroids : np.ndarray, shape (T, 3)
    diameters : np.ndarray, shape (T,)
        Longest edge per triangle.
    vertex_curvature : np.ndarray, shape (V,), optional
        Analytic mean curvature (average of principal curvatures) where
        known, e.g. 1/radius on the built-in sphere.  None otherwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray
    diameters: np.ndarray
    vertex_curvature: Optional[np.ndarray] = None
    _hash: str = field(default="", repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def meshwidth(self) -> float:
        """Maximal triangle diameter h."""
        return float(self.diameters.max())

    def content_hash(self) -> str:
        """Stable hex digest of the geometry (used as a cache key)."""
        return self._hash

    def with_curvature(self, curvature: Optional[np.ndarray]) -> "SurfaceMesh":
        """Copy of this mesh with per-vertex curvature replaced."""
        if curvature is not None:
            curvature = np.asarray(curvature, dtype=float)
            if curvature.shape != (self.num_vertices,):
                raise MeshError("curvature array must have one value per vertex")
        return build_mesh(self.vertices, self.triangles, curvature=curvature,
                          fix_orientation=False)


def _derived_quantities(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    twice_area = np.linalg.norm(cross, axis=1)
    areas = 0.5 * twice_area
    scale = np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))
    if np.any(areas <= DEGENERATE_AREA_FACTOR * scale**2):
        bad = int(np.argmin(areas))
        raise MeshError(f"degenerate triangle {bad} (area {areas[bad]:.3e})")
    normals = cross / twice_area[:, None]
    centroids = (p0 + p1 + p2) / 3.0
    edges = np.stack([
        np.linalg.norm(p1 - p0, axis=1),
        np.linalg.norm(p2 - p1, axis=1),
        np.linalg.norm(p0 - p2, axis=1),
    ])
    diameters = edges.max(axis=0)
    return normals, areas, centroids, diameters


def _edge_table(triangles):
    """Map sorted edge -> list of (triangle, local edge index)."""
    table: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for t, tri in enumerate(triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            table.setdefault((min(a, b), max(a, b)), []).append((t, k))
    return table


def _check_closed_manifold(triangles):
    table = _edge_table(triangles)
    for edge, users in table.items():
        if len(users) != 2:
            raise MeshError(
                f"edge {edge} shared by {len(users)} triangles; "
                "surface is not a closed 2-manifold")
    return table


def _orient_consistently(triangles):
    """Flip triangles (BFS over edge adjacency) until orientation is
    consistent, then flip whole components so enclosed volume is positive.

    Returns the corrected triangle array and the component label per
    triangle.  Raises MeshError on non-orientable input.
    """
    tris = triangles.copy()
    table = _check_closed_manifold(tris)
    nt = len(tris)
    neighbors: list[list[int]] = [[] for _ in range(nt)]
    for users in table.values():
        (ta, _), (tb, _) = users
        neighbors[ta].append(tb)
        neighbors[tb].append(ta)

    def directed_edges(tri):
        return {(int(tri[k]), int(tri[(k + 1) % 3])) for k in range(3)}

    visited = np.full(nt, -1, dtype=int)
    component = 0
    for seed in range(nt):
        if visited[seed] >= 0:
            continue
        visited[seed] = component
        stack = [seed]
        while stack:
            t = stack.pop()
            mine = directed_edges(tris[t])
            for nb in neighbors[t]:
                shared_ok = directed_edges(tris[nb])
                # Consistent orientation: shared edge traversed in opposite
                # directions by the two triangles.
                agrees = any((b, a) in shared_ok for (a, b) in mine)
                conflicts = any((a, b) in shared_ok for (a, b) in mine)
                if visited[nb] < 0:
                    if conflicts and not agrees:
                        tris[nb] = tris[nb, ::-1]
                    visited[nb] = component
                    stack.append(nb)
                else:
                    again = directed_edges(tris[nb])
                    if any((a, b) in again for (a, b) in mine):
                        raise MeshError("surface is not orientable")
        component += 1
    return tris, visited


def _signed_volume(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return np.einsum("ij,ij->i", p0, np.cross(p1, p2)).sum() / 6.0


def build_mesh(vertices, triangles, curvature=None, fix_orientation=True) -> SurfaceMesh:
    """Validate raw arrays and construct a SurfaceMesh.

    With fix_orientation=True the triangle windings are made consistent
    per connected component and flipped so each component encloses
    positive volume (normals point away from the obstacle).
    """
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float))
    triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be an (V, 3) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be a (T, 3) index array")
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
        raise MeshError("triangle index out of range")

    if fix_orientation:
        triangles, labels = _orient_consistently(triangles)
        for comp in range(labels.max() + 1):
            sel = labels == comp
            vol = _signed_volume(vertices, triangles[sel])
            if vol == 0.0:
                raise MeshError(f"component {comp} encloses zero volume")
            if vol < 0.0:
                triangles[sel] = triangles[sel][:, ::-1]
    else:
        _check_closed_manifold(triangles)

    normals, areas, centroids, diameters = _derived_quantities(vertices, triangles)
    digest = hashlib.sha256()
    digest.update(np.round(vertices, 12).tobytes())
    digest.update(triangles.tobytes())
    mesh = SurfaceMesh(vertices, triangles, normals, areas, centroids,
                       diameters, curvature, digest.hexdigest()[:16])
    for arr in (mesh.vertices, mesh.triangles, mesh.normals, mesh.areas,
                mesh.centroids, mesh.diameters):
        arr.setflags(write=False)
    return mesh


# ---------------------------------------------------------------------------
# Built-in sphere
# ---------------------------------------------------------------------------

_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=float)
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)

MAX_ICOSPHERE_SUBDIVISIONS = 7


def make_icosphere(subdivisions: int, radius: float = 1.0) -> SurfaceMesh:
    """Icosahedron subdivided `subdivisions` times, projected to a sphere.

    The resulting mesh has 20 * 4**subdivisions triangles and carries the
    analytic mean curvature 1/radius at every vertex.
    """
    if not 0 <= subdivisions <= MAX_ICOSPHERE_SUBDIVISIONS:
        raise ValueError(
            f"subdivisions must be in [0, {MAX_ICOSPHERE_SUBDIVISIONS}]")
    if radius <= 0:
        raise ValueError("radius must be positive")

    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = _ICO_FACES
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)

    vertices = radius * np.asarray(verts)
    curvature = np.full(len(vertices), 1.0 / radius)
    return build_mesh(vertices, faces, curvature=curvature)


# ---------------------------------------------------------------------------
# OFF file format
# ---------------------------------------------------------------------------

def load_mesh(path) -> SurfaceMesh:
    """Read an ASCII OFF file and return a validated, oriented mesh.

    The grammar is the plain OFF subset: a header line "OFF", a counts
    line "V F E", V vertex lines of three floats and F face lines of
    "3 i j k".  Comments start with '#'.  Faces with more than three
    vertices, non-manifold edges and non-orientable surfaces are
    rejected; disjoint closed components are allowed.
    """
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.readlines()

    tokens: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            tokens.append((lineno, body))
    if not tokens:
        raise MeshError(f"{path}: empty OFF file")

    lineno, header = tokens[0]
    if header != "OFF":
        raise MeshError(f"{path}:{lineno}: expected 'OFF' header, got {header!r}")
    if len(tokens) < 2:
        raise MeshError(f"{path}: missing counts line")
    lineno, counts = tokens[1]
    parts = counts.split()
    if len(parts) < 2:
        raise MeshError(f"{path}:{lineno}: malformed counts line {counts!r}")
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise MeshError(f"{path}:{lineno}: malformed counts line {counts!r}") from exc

    body = tokens[2:]
    if len(body) < nv + nf:
        raise MeshError(f"{path}: expected {nv} vertices and {nf} faces, "
                        f"found {len(body)} data lines")

    vertices = np.empty((nv, 3), dtype=float)
    for i in range(nv):
        lineno, line = body[i]
        parts = line.split()
        if len(parts) < 3:
            raise MeshError(f"{path}:{lineno}: bad vertex line {line!r}")
        try:
            vertices[i] = [float(x) for x in parts[:3]]
        except ValueError as exc:
            raise MeshError(f"{path}:{lineno}: bad vertex line {line!r}") from exc

    triangles = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        lineno, line = body[nv + i]
        parts = line.split()
        try:
            arity = int(parts[0])
        except (ValueError, IndexError) as exc:
            raise MeshError(f"{path}:{lineno}: bad face line {line!r}") from exc
        if arity != 3:
            raise MeshError(
                f"{path}:{lineno}: face with {arity} vertices; only triangles "
                "are supported")
        if len(parts) < 4:
            raise MeshError(f"{path}:{lineno}: bad face line {line!r}")
        triangles[i] = [int(x) for x in parts[1:4]]

    try:
        return build_mesh(vertices, triangles)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from exc


def save_mesh(path, mesh: SurfaceMesh) -> None:
    """Write a mesh as an ASCII OFF file."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for tri in mesh.triangles:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def enclosed_volume(mesh: SurfaceMesh) -> float:
    """Total volume enclosed by the (outward-oriented) surface."""
    return float(_signed_volume(mesh.vertices, mesh.triangles))


def points_inside(mesh: SurfaceMesh, points) -> np.ndarray:
    """Ray-crossing test: True for points strictly inside the obstacle.

    Casts a fixed, slightly irrational direction to avoid edge-grazing
    rays on axis-aligned meshes.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    direction = np.array([0.5773502691896258, 0.7071067811865476, 0.4142135623730951])
    direction /= np.linalg.norm(direction)

    p0 = mesh.vertices[mesh.triangles[:, 0]]
    e1 = mesh.vertices[mesh.triangles[:, 1]] - p0
    e2 = mesh.vertices[mesh.triangles[:, 2]] - p0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)

    inside = np.zeros(len(points), dtype=bool)
    for n, p in enumerate(points):
        tvec = p[None, :] - p0
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1)
        v = (qvec @ direction) * inv_det
        t = np.einsum("ij,ij->i", e2, qvec) * inv_det
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-12)
        inside[n] = (np.count_nonzero(hit) % 2) == 1
    return inside
