"""Coupled boundary block system at one complex frequency.

The 2x2 block operator couples the Neumann-type density (piecewise
constant, tested with the same space) and the Dirichlet-type density
(continuous piecewise linear):

    [ s V          K - J/2     ]   [phi]   [rhs_0]
    [ -KT + J^T/2  W/s + F(s)  ] . [psi] = [rhs_1]

J is the rectangular duality mass matrix realizing the 1/2-identity
jump blocks on the discrete pairing, and F(s) the Galerkin transfer
matrix of the boundary condition.  For Re s above the positivity
abscissa the real part of the quadratic form is positive, so the system
is uniquely solvable; a dense LU with partial pivoting is computed
lazily on first solve and reused.

Every exterior solution of the Helmholtz equation with the scaled
Cauchy data (phi, psi) = (-dn u, s u) satisfies the F-free part of the
system with right-hand side (0, dual of -dn u); that identity is the
machine check pinning all kernel and jump signs (normals point out of
the obstacle everywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BemMatrixSet
from .mesh import SurfaceMesh, points_inside
from .spaces import BoundarySpaces

SOLVE_RESIDUAL_TOL = 1e-10
MAX_REFINEMENT_STEPS = 2


class SolveError(RuntimeError):
    """Frequency-domain solve failed (singular or hopelessly conditioned)."""


@dataclass(frozen=True)
class CauchyData:
    """Scaled boundary data: phi = -dn u (piecewise constant coefficients),
    psi = s * trace u (vertex coefficients)."""

    phi: np.ndarray
    psi: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.phi, self.psi])


@dataclass
class BlockSystem:
    """Assembled block matrix with a lazily computed LU factorization."""

    s: complex
    phi_dim: int
    psi_dim: int
    matrix: np.ndarray
    _lu: Optional[tuple] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.phi_dim + self.psi_dim

    def factorize(self):
        if self._lu is None:
            try:
                self._lu = sla.lu_factor(self.matrix)
            except (ValueError, sla.LinAlgError) as exc:
                raise SolveError(
                    f"LU factorization failed at s = {self.s}: {exc}") from exc
        return self._lu

    def solve(self, rhs: np.ndarray) -> CauchyData:
        """Solve A x = rhs with one step of iterative refinement if needed.

        Guarantees a residual below SOLVE_RESIDUAL_TOL relative to the
        right-hand side, else raises SolveError (numerically singular
        system, e.g. below the positivity abscissa).
        """
        rhs = np.asarray(rhs, dtype=np.complex128).reshape(self.dim)
        lu = self.factorize()
        x = sla.lu_solve(lu, rhs)
        if not np.all(np.isfinite(x)):
            raise SolveError(
                f"non-finite solution at s = {self.s}; system numerically "
                "singular")
        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm > 0.0:
            for _ in range(MAX_REFINEMENT_STEPS):
                res = rhs - self.matrix @ x
                if np.linalg.norm(res) <= SOLVE_RESIDUAL_TOL * rhs_norm:
                    break
                x = x + sla.lu_solve(lu, res)
            else:
                res = rhs - self.matrix @ x
                if np.linalg.norm(res) > SOLVE_RESIDUAL_TOL * rhs_norm:
                    raise SolveError(
                        f"residual {np.linalg.norm(res)/rhs_norm:.2e} after "
                        f"refinement at s = {self.s}; system numerically "
                        "singular (is Re s above the positivity abscissa?)")
        return CauchyData(x[:self.phi_dim], x[self.phi_dim:])


def build_b_imp(s: complex, spaces: BoundarySpaces,
                bem: BemMatrixSet) -> np.ndarray:
    """Dense matrix of the jump-shifted Calderon block operator."""
    s = complex(s)
    if bem.s != s:
        raise ValueError(f"boundary operators assembled at {bem.s}, not {s}")
    nphi, npsi = spaces.phi_dim, spaces.psi_dim
    J = spaces.mass_p0p1.toarray()
    A = np.empty((nphi + npsi, nphi + npsi), dtype=np.complex128)
    A[:nphi, :nphi] = s * bem.V
    A[:nphi, nphi:] = bem.K - 0.5 * J
    A[nphi:, :nphi] = -bem.KT + 0.5 * J.T
    A[nphi:, nphi:] = bem.W / s
    return A


def assemble_block_system(s: complex, spaces: BoundarySpaces,
                          bem: BemMatrixSet,
                          transfer: Optional[sp.spmatrix] = None) -> BlockSystem:
    """Full system: jump-shifted Calderon blocks plus the transfer matrix.

    transfer is the (psi_dim, psi_dim) Galerkin matrix of the boundary
    condition at the same s (omit for the pure exterior identity
    operator).
    """
    A = build_b_imp(s, spaces, bem)
    nphi = spaces.phi_dim
    if transfer is not None:
        if transfer.shape != (spaces.psi_dim, spaces.psi_dim):
            raise ValueError("transfer matrix has wrong dimensions")
        A[nphi:, nphi:] += transfer.toarray() if sp.issparse(transfer) else transfer
    return BlockSystem(complex(s), nphi, spaces.psi_dim, A)


# ---------------------------------------------------------------------------
# Cauchy-data identity check
# ---------------------------------------------------------------------------

def point_source_cauchy_data(s: complex, mesh: SurfaceMesh,
                             x0) -> tuple[CauchyData, np.ndarray]:
    """Interpolated Cauchy data of u(x) = exp(-s|x-x0|)/(4 pi |x-x0|).

    Returns the (phi, psi) coefficients and the raw centroid values of
    the outward normal derivative (needed for the identity right-hand
    side).
    """
    x0 = np.asarray(x0, dtype=float)

    def u(points):
        r = np.linalg.norm(points - x0, axis=-1)
        return np.exp(-s * r) / (4 * np.pi * r)

    def dn_u(points, normals):
        diff = points - x0
        r = np.linalg.norm(diff, axis=-1)
        radial = np.einsum("ij,ij->i", diff, normals) / r
        return (-s - 1.0 / r) * np.exp(-s * r) / (4 * np.pi * r) * radial

    dn_vals = dn_u(mesh.centroids, mesh.normals)
    phi = -dn_vals
    psi = s * u(mesh.vertices)
    return CauchyData(phi, psi), dn_vals


def dual_norm(spaces: BoundarySpaces, r_phi, r_psi) -> float:
    """Discrete dual norm via the mass-inverse pairing on each block."""
    areas = spaces.mesh.areas
    phi_part = np.vdot(r_phi, r_phi / areas).real
    m1 = spla.splu(spaces.mass_p1.tocsc().astype(np.complex128))
    sol = m1.solve(np.asarray(r_psi, dtype=np.complex128))
    psi_part = np.vdot(r_psi, sol).real
    return float(np.sqrt(max(phi_part, 0.0) + max(psi_part, 0.0)))


def primal_norm(spaces: BoundarySpaces, phi, psi) -> float:
    areas = spaces.mesh.areas
    phi_part = np.vdot(phi, areas * phi).real
    psi_part = np.vdot(psi, spaces.mass_p1 @ psi).real
    return float(np.sqrt(max(phi_part, 0.0) + max(psi_part, 0.0)))


def cauchy_identity_residual(s: complex, mesh: SurfaceMesh,
                             spaces: BoundarySpaces, bem: BemMatrixSet,
                             x0) -> float:
    """Relative identity defect of a point-source exterior solution.

    Builds the exact solution radiating from x0 (strictly inside the
    obstacle), interpolates its Cauchy data, applies the jump-shifted
    Calderon operator and measures the defect against (0, dual of phi)
    in the discrete dual norm, normalized by the data norm.  Decreasing
    values under refinement validate kernels, scalings and jump signs
    simultaneously.
    """
    if not points_inside(mesh, np.asarray(x0, float)[None, :])[0]:
        raise ValueError(f"point source {x0} is not inside the obstacle")
    data, dn_vals = point_source_cauchy_data(s, mesh, x0)
    A = build_b_imp(s, spaces, bem)
    out = A @ data.concat()
    nphi = spaces.phi_dim
    target = np.concatenate([
        np.zeros(nphi, dtype=np.complex128),
        spaces.mass_p0p1.T @ (-dn_vals),
    ])
    r = out - target
    return dual_norm(spaces, r[:nphi], r[nphi:]) / primal_norm(
        spaces, data.phi, data.psi)
