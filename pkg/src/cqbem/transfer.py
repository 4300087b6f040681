"""Laplace-domain transfer operators of the impedance-type boundary conditions.

Four boundary condition families are supported, each defined by a
frequency-dependent operator mapping Dirichlet-type to Neumann-type
boundary data:

* ``THIN_COATING`` (coating of width eps):    eps * (s - Lap_Gamma / s)
* ``ABSORBING_1`` (first-order absorbing):    s^(-1/2) / eps
* ``ABSORBING_2`` (curvature-corrected):      s^(-1/2) / eps - H / s
* ``ACOUSTIC`` (mass/damping/stiffness):      1 / (m s + alpha + k / s)

On the discrete level each operator is a Galerkin matrix over the
continuous piecewise-linear space, expressible as a sum of scalar
frequency factors times constant sparse matrices.  That structure is
exposed so convolution-quadrature right-hand sides can be evaluated one
scalar symbol at a time.

All evaluations require Re s > 0 and are pure functions of immutable
inputs, hence safe to call concurrently at distinct frequencies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import SurfaceMesh
from .spaces import BoundarySpaces, curvature_weighted_mass, estimate_vertex_curvature


class TransferKind(enum.Enum):
    THIN_COATING = "A"
    ABSORBING_1 = "B1"
    ABSORBING_2 = "B2"
    ACOUSTIC = "C"


class CurvatureMode(enum.Enum):
    ANALYTIC = "analytic"
    DISCRETE_ESTIMATE = "estimate"


class ConfigurationError(ValueError):
    """Boundary-condition parameters inconsistent with the mesh/spaces."""


@dataclass(frozen=True)
class TransferSpec:
    """Which boundary condition, with its physical parameters.

    eps is the coating width / absorption parameter for the first three
    kinds; m, alpha, k are the mass, damping and stiffness parameters of
    the acoustic condition.  curvature_mode selects analytic vs
    mesh-estimated mean curvature for ABSORBING_2.
    """

    kind: TransferKind
    eps: float = 0.1
    m: float = 1.0
    alpha: float = 1.0
    k: float = 1.0
    curvature_mode: CurvatureMode = CurvatureMode.ANALYTIC

    def __post_init__(self):
        if self.kind in (TransferKind.THIN_COATING, TransferKind.ABSORBING_1,
                         TransferKind.ABSORBING_2):
            if not 0.0 < self.eps <= 1.0:
                raise ConfigurationError("eps must lie in (0, 1]")
        if self.kind is TransferKind.ACOUSTIC:
            if self.m <= 0 or self.k <= 0 or self.alpha < 0:
                raise ConfigurationError(
                    "acoustic condition needs m > 0, k > 0, alpha >= 0")


def principal_sqrt(s: complex) -> complex:
    """Principal branch square root away from the cut (-inf, 0].

    The principal branch keeps Re sqrt(s) > 0 off the cut, which is what
    makes the half-order symbols positive-real in the right half-plane.
    """
    s = complex(s)
    if s == 0.0 or (s.real < 0.0 and s.imag == 0.0):
        raise ValueError(
            f"principal_sqrt is undefined on the branch cut, got s = {s}")
    return complex(np.sqrt(s))


def sigma0(spec: TransferSpec, hmax: float = 0.0) -> float:
    """Positivity abscissa of the transfer operator.

    Zero for all conditions except the curvature-corrected absorbing one,
    where positivity of the symbol holds for Re s >= 4 eps^2 Hmax^2 with
    Hmax the maximal mean curvature.
    """
    if spec.kind is TransferKind.ABSORBING_2:
        return max(0.0, 4.0 * spec.eps**2 * hmax**2)
    return 0.0


def resolve_curvature(spec: TransferSpec, mesh: SurfaceMesh,
                      spaces: BoundarySpaces) -> Optional[np.ndarray]:
    """Per-vertex mean curvature used by ABSORBING_2 (None otherwise)."""
    if spec.kind is not TransferKind.ABSORBING_2:
        return None
    if spec.curvature_mode is CurvatureMode.ANALYTIC:
        if mesh.vertex_curvature is None:
            raise ConfigurationError(
                "ABSORBING_2 with analytic curvature requires a mesh with "
                "vertex curvature data (use curvature_mode=DISCRETE_ESTIMATE)")
        return np.asarray(mesh.vertex_curvature, dtype=float)
    return estimate_vertex_curvature(mesh, spaces)


ScalarFactor = Callable[[complex], complex]


def transfer_terms(spec: TransferSpec, mesh: SurfaceMesh,
                   spaces: BoundarySpaces) -> list[tuple[ScalarFactor, sp.csr_matrix]]:
    """Structure of the Galerkin transfer matrix: F_h(s) = sum g_k(s) M_k.

    The matrices are constant (computed once, shared read-only); the
    scalar factors are analytic for Re s > sigma0.
    """
    eps = spec.eps
    if spec.kind is TransferKind.THIN_COATING:
        return [(lambda s: eps * s, spaces.mass_p1),
                (lambda s: eps / s, spaces.stiffness_lb)]
    if spec.kind is TransferKind.ABSORBING_1:
        return [(lambda s: 1.0 / (eps * principal_sqrt(s)), spaces.mass_p1)]
    if spec.kind is TransferKind.ABSORBING_2:
        curv = resolve_curvature(spec, mesh, spaces)
        mh = curvature_weighted_mass(mesh, spaces, curv)
        return [(lambda s: 1.0 / (eps * principal_sqrt(s)), spaces.mass_p1),
                (lambda s: -1.0 / s, mh)]
    m, alpha, k = spec.m, spec.alpha, spec.k
    return [(lambda s: 1.0 / (m * s + alpha + k / s), spaces.mass_p1)]


def transfer_matrix(spec: TransferSpec, s: complex, mesh: SurfaceMesh,
                    spaces: BoundarySpaces,
                    terms: Optional[list] = None) -> sp.csr_matrix:
    """Galerkin matrix of the transfer operator at one complex frequency.

    Returns a sparse (psi_dim, psi_dim) matrix; pass precomputed
    ``terms`` when evaluating at many frequencies.
    """
    if complex(s).real <= 0.0:
        raise ValueError(f"transfer operator requires Re s > 0, got {s}")
    if terms is None:
        terms = transfer_terms(spec, mesh, spaces)
    out = None
    for factor, matrix in terms:
        piece = complex(factor(s)) * matrix
        out = piece if out is None else out + piece
    return out.tocsr()


def constant_mode_factor(spec: TransferSpec, curvature: float = 1.0) -> ScalarFactor:
    """Scalar action of the transfer operator on constants.

    On a sphere, constants are eigenfunctions of every term: the surface
    Laplacian drops out of the coating condition, the curvature weight
    becomes the constant H, and the acoustic symbol is already scalar.
    """
    eps = spec.eps
    if spec.kind is TransferKind.THIN_COATING:
        return lambda s: eps * s
    if spec.kind is TransferKind.ABSORBING_1:
        return lambda s: 1.0 / (eps * principal_sqrt(s))
    if spec.kind is TransferKind.ABSORBING_2:
        return lambda s: 1.0 / (eps * principal_sqrt(s)) - curvature / s
    m, alpha, k = spec.m, spec.alpha, spec.k
    return lambda s: 1.0 / (m * s + alpha + k / s)
