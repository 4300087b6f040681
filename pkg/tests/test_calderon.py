import numpy as np
import pytest

from cqbem.assembly import assemble_boundary_ops
from cqbem.calderon import (
    SolveError,
    assemble_block_system,
    build_b_imp,
    cauchy_identity_residual,
)
from cqbem.mesh import make_icosphere
from cqbem.quadrature import QuadratureConfig
from cqbem.spaces import build_spaces
from cqbem.transfer import TransferKind, TransferSpec, transfer_matrix

QUAD = QuadratureConfig()


@pytest.fixture(scope="module")
def sphere_ops():
    out = {}
    for sub in (1, 2, 3):
        mesh = make_icosphere(sub)
        spaces = build_spaces(mesh)
        bem = assemble_boundary_ops(2.0 + 0j, mesh, spaces, QUAD)
        out[sub] = (mesh, spaces, bem)
    return out


def test_block_consistency_bit_for_bit(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    s = 2.0 + 0j
    spec = TransferSpec(TransferKind.ACOUSTIC)
    F = transfer_matrix(spec, s, mesh, spaces)
    sys = assemble_block_system(s, spaces, bem, F)
    nphi = spaces.phi_dim
    J = spaces.mass_p0p1.toarray()
    assert np.array_equal(sys.matrix[:nphi, :nphi], s * bem.V)
    assert np.array_equal(sys.matrix[:nphi, nphi:], bem.K - 0.5 * J)
    assert np.array_equal(sys.matrix[nphi:, :nphi], -bem.KT + 0.5 * J.T)
    assert np.allclose(sys.matrix[nphi:, nphi:], bem.W / s + F.toarray(),
                       rtol=0, atol=0)


def test_zero_transfer_gives_pure_imp_operator(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    sys = assemble_block_system(2.0 + 0j, spaces, bem)
    assert np.array_equal(sys.matrix, build_b_imp(2.0 + 0j, spaces, bem))


def test_real_frequency_real_transfer_real_matrix(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    F = transfer_matrix(TransferSpec(TransferKind.ACOUSTIC), 2.0 + 0j,
                        mesh, spaces)
    sys = assemble_block_system(2.0 + 0j, spaces, bem, F)
    assert np.max(np.abs(sys.matrix.imag)) <= 1e-12 * np.max(np.abs(sys.matrix.real))


def test_solve_zero_rhs(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    sys = assemble_block_system(2.0 + 0j, spaces, bem)
    out = sys.solve(np.zeros(sys.dim))
    assert np.all(out.phi == 0) and np.all(out.psi == 0)


def test_solve_manufactured(sphere_ops):
    mesh, spaces, bem = sphere_ops[2]
    F = transfer_matrix(TransferSpec(TransferKind.ABSORBING_2, eps=0.01),
                        2.0 + 0j, mesh, spaces)
    sys = assemble_block_system(2.0 + 0j, spaces, bem, F)
    rng = np.random.default_rng(12)
    x0 = rng.standard_normal(sys.dim) + 1j * rng.standard_normal(sys.dim)
    rhs = sys.matrix @ x0
    out = sys.solve(rhs)
    assert np.linalg.norm(out.concat() - x0) <= 1e-10 * np.linalg.norm(x0)


def test_wrong_frequency_rejected(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    with pytest.raises(ValueError, match="assembled at"):
        build_b_imp(3.0 + 0j, spaces, bem)


ALL_SPECS = [
    TransferSpec(TransferKind.THIN_COATING, eps=0.1),
    TransferSpec(TransferKind.ABSORBING_1, eps=0.1),
    TransferSpec(TransferKind.ABSORBING_2, eps=0.01),
    TransferSpec(TransferKind.ACOUSTIC),
]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=[s.kind.value for s in ALL_SPECS])
def test_discrete_coercivity_spot_check(sphere_ops, spec):
    mesh, spaces, bem = sphere_ops[1]
    s = 2.0 + 0j
    F = transfer_matrix(spec, s, mesh, spaces)
    sys = assemble_block_system(s, spaces, bem, F)
    rng = np.random.default_rng(31)
    worst = np.inf
    for _ in range(100):
        x = rng.standard_normal(sys.dim) + 1j * rng.standard_normal(sys.dim)
        val = np.real(np.vdot(x, sys.matrix @ x)) / np.vdot(x, x).real
        worst = min(worst, val)
    assert worst > 0.0


def test_inverse_bound_growth(sphere_ops):
    """Norm of the inverse grows no faster than about |s|^2."""
    mesh, spaces, _ = sphere_ops[1]
    spec = TransferSpec(TransferKind.ACOUSTIC)
    norms = []
    svals = [1.0, 2.0, 4.0, 8.0]
    for s in svals:
        bem = assemble_boundary_ops(complex(s), mesh, spaces, QUAD)
        F = transfer_matrix(spec, complex(s), mesh, spaces)
        sys = assemble_block_system(complex(s), spaces, bem, F)
        norms.append(1.0 / np.linalg.svd(sys.matrix, compute_uv=False)[-1])
    slopes = np.diff(np.log(norms)) / np.diff(np.log(svals))
    assert np.max(slopes) <= 2.3


def test_cauchy_identity_decreasing(sphere_ops):
    res = []
    for sub in (1, 2, 3):
        mesh, spaces, bem = sphere_ops[sub]
        res.append(cauchy_identity_residual(2.0 + 0j, mesh, spaces, bem,
                                            np.zeros(3)))
    assert res[2] < res[1] < res[0]
    assert res[2] < 5e-2


def test_cauchy_identity_off_center_source(sphere_ops):
    res = []
    for sub in (2, 3):
        mesh, spaces, bem = sphere_ops[sub]
        res.append(cauchy_identity_residual(2.0 + 0j, mesh, spaces, bem,
                                            np.array([0.3, -0.2, 0.1])))
    assert res[1] < res[0]


def test_cauchy_identity_large_frequency_small_residual():
    mesh = make_icosphere(2)
    spaces = build_spaces(mesh)
    bem = assemble_boundary_ops(20.0 + 0j, mesh, spaces, QUAD)
    data_scale = cauchy_identity_residual(20.0 + 0j, mesh, spaces, bem,
                                          np.zeros(3))
    assert data_scale < 0.2


def test_cauchy_identity_rejects_outside_source(sphere_ops):
    mesh, spaces, bem = sphere_ops[1]
    with pytest.raises(ValueError, match="inside"):
        cauchy_identity_residual(2.0 + 0j, mesh, spaces, bem,
                                 np.array([3.0, 0.0, 0.0]))


def test_solve_failure_far_below_abscissa():
    # tiny Re s with huge curvature-corrected transfer drives the system
    # toward singularity only in contrived settings; instead check the
    # plumbing: a deliberately singular matrix raises SolveError
    mesh = make_icosphere(1)
    spaces = build_spaces(mesh)
    bem = assemble_boundary_ops(1.0 + 0j, mesh, spaces, QUAD)
    sys = assemble_block_system(1.0 + 0j, spaces, bem)
    sys.matrix[:, :] = 0.0
    with pytest.raises(SolveError):
        sys.solve(np.ones(sys.dim))
