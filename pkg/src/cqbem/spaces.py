"""Boundary element spaces and surface FEM matrices.

Two trial spaces on a triangulated surface: piecewise constants (one dof
per triangle, used for Neumann-type densities) and continuous piecewise
linears (one dof per vertex, used for Dirichlet-type densities).  This
module assembles their mass, stiffness and duality matrices plus the
discrete mean-curvature machinery needed by the curvature-corrected
absorbing boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import SurfaceMesh


@dataclass(frozen=True)
class BoundarySpaces:
    """FEM matrices of the piecewise-constant / piecewise-linear pair.

    Attributes
    ----------
    mass_p1 : csr_matrix, (V, V)
        P1 x P1 mass matrix (exact per-triangle formula).
    stiffness_lb : csr_matrix, (V, V)
        Surface-Laplacian (cotangent) stiffness; positive semidefinite
        with the constants in its kernel.  Sign convention: the bilinear
        form equals the pairing of a function with minus its surface
        Laplacian.
    mass_p0p1 : csr_matrix, (T, V)
        Duality matrix J with J[t, a] = integral of the hat function of
        vertex a over triangle t (area/3 for the three own vertices).
    lumped_vertex_areas : np.ndarray, (V,)
        One third of the incident triangle areas per vertex.
    mesh : SurfaceMesh
    """

    mesh: SurfaceMesh
    mass_p1: sp.csr_matrix
    stiffness_lb: sp.csr_matrix
    mass_p0p1: sp.csr_matrix
    lumped_vertex_areas: np.ndarray

    @property
    def phi_dim(self) -> int:
        return self.mesh.num_triangles

    @property
    def psi_dim(self) -> int:
        return self.mesh.num_vertices

    @property
    def meshwidth(self) -> float:
        return self.mesh.meshwidth


def hat_gradients(mesh: SurfaceMesh) -> np.ndarray:
    """In-plane gradients of the three hat functions per triangle, (T, 3, 3).

    grad lambda_k = n x (opposite edge vector) / (2 area), with n the
    outward triangle normal.
    """
    v = mesh.vertices[mesh.triangles]          # (T, 3, 3)
    opp = np.stack([v[:, 2] - v[:, 1],
                    v[:, 0] - v[:, 2],
                    v[:, 1] - v[:, 0]], axis=1)
    grads = np.cross(mesh.normals[:, None, :], opp)
    return grads / (2.0 * mesh.areas)[:, None, None]


def hat_curls(mesh: SurfaceMesh) -> np.ndarray:
    """Surface curls (grad lambda x n) of the hat functions, (T, 3, 3).

    Constant per triangle; equals (opposite edge vector)/(2 area) for
    outward-oriented triangles.
    """
    v = mesh.vertices[mesh.triangles]
    opp = np.stack([v[:, 2] - v[:, 1],
                    v[:, 0] - v[:, 2],
                    v[:, 1] - v[:, 0]], axis=1)
    return opp / (2.0 * mesh.areas)[:, None, None]


def build_spaces(mesh: SurfaceMesh) -> BoundarySpaces:
    """Assemble all FEM matrices for a mesh."""
    tris = mesh.triangles
    areas = mesh.areas
    nv = mesh.num_vertices
    nt = mesh.num_triangles

    # P1 mass: area/12 * (2 on diagonal, 1 off) per triangle.
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(tris[:, a])
            cols.append(tris[:, b])
            vals.append(areas / 12.0 * (2.0 if a == b else 1.0))
    mass_p1 = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv, nv))

    # Stiffness: grad lambda_a . grad lambda_b * area.
    grads = hat_gradients(mesh)                # (T, 3, 3)
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(tris[:, a])
            cols.append(tris[:, b])
            vals.append(np.einsum("ij,ij->i", grads[:, a], grads[:, b]) * areas)
    stiffness = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv, nv))

    # P0-P1 duality: row t has area/3 at the triangle's vertices.
    trow = np.repeat(np.arange(nt), 3)
    mass_p0p1 = sp.csr_matrix(
        (np.repeat(areas / 3.0, 3), (trow, tris.ravel())), shape=(nt, nv))

    lumped = np.zeros(nv)
    np.add.at(lumped, tris.ravel(), np.repeat(areas / 3.0, 3))

    for m in (mass_p1, stiffness, mass_p0p1):
        m.sum_duplicates()
    return BoundarySpaces(mesh, mass_p1, stiffness, mass_p0p1, lumped)


def vertex_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Area-weighted average of incident triangle normals, unit length."""
    nrm = np.zeros((mesh.num_vertices, 3))
    w = (mesh.normals * mesh.areas[:, None])
    for a in range(3):
        np.add.at(nrm, mesh.triangles[:, a], w)
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    return nrm


def estimate_vertex_curvature(mesh: SurfaceMesh,
                              spaces: BoundarySpaces) -> np.ndarray:
    """Discrete per-vertex mean curvature H (average of principal curvatures).

    Uses the cotangent-Laplacian mean-curvature normal: applying the
    stiffness matrix to the coordinate functions approximates
    2 H A_vertex n; the magnitude is signed by the outward vertex normal,
    so a unit sphere gives H of +1.
    """
    lap_x = spaces.stiffness_lb @ mesh.vertices   # (V, 3)
    nrm = vertex_normals(mesh)
    return np.einsum("ij,ij->i", lap_x, nrm) / (2.0 * spaces.lumped_vertex_areas)


def curvature_weighted_mass(mesh: SurfaceMesh, spaces: BoundarySpaces,
                            curvature: np.ndarray) -> sp.csr_matrix:
    """P1 mass matrix weighted by the linear interpolant of H.

    Entry (a, b) is the integral of lambda_a lambda_b sum_k H_k lambda_k,
    evaluated exactly with the simplex monomial formulas.
    """
    tris = mesh.triangles
    areas = mesh.areas
    nv = mesh.num_vertices
    hv = curvature[tris]                        # (T, 3)

    # integral of lambda^alpha over T: 2A a!b!c!/(a+b+c+2)!
    # lambda_a lambda_b lambda_k patterns: (3,0,0)->A/10, (2,1,0)->A/30,
    # (1,1,1)->A/60.
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            acc = np.zeros(len(tris))
            for k in range(3):
                if a == b == k:
                    coeff = 1.0 / 10.0
                elif a == b or b == k or a == k:
                    coeff = 1.0 / 30.0
                else:
                    coeff = 1.0 / 60.0
                acc += coeff * hv[:, k]
            rows.append(tris[:, a])
            cols.append(tris[:, b])
            vals.append(acc * areas)
    out = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv, nv))
    out.sum_duplicates()
    return out
