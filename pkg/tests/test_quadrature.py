import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from cqbem.mesh import make_icosphere
from cqbem.quadrature import (
    QuadratureConfig,
    classify_pairs,
    singular_rule,
    triangle_rule,
)


# -- triangle rules -----------------------------------------------------------

def bary_monomial_integral(a, b, c):
    """integral over the unit-area reference of lambda0^a lambda1^b lambda2^c
    (normalized so the constant integrates to 1)."""
    return 2.0 * math.factorial(a) * math.factorial(b) * math.factorial(c) \
        / math.factorial(a + b + c + 2)


DEGREE = {1: 1, 3: 2, 6: 4, 7: 5, 12: 6}


@pytest.mark.parametrize("npts", [1, 3, 6, 7, 12])
def test_triangle_rule_exactness(npts):
    bary, w = triangle_rule(npts)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    deg = DEGREE[npts]
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            c = deg - a - b
            exact = bary_monomial_integral(a, b, c)
            approx = np.sum(w * bary[:, 0]**a * bary[:, 1]**b * bary[:, 2]**c)
            assert approx == pytest.approx(exact, rel=5e-14, abs=1e-15)


def test_unsupported_rule_rejected():
    with pytest.raises(ValueError):
        triangle_rule(5)
    with pytest.raises(ValueError):
        QuadratureConfig(regular_order=5)


def test_near_order_doubles():
    assert QuadratureConfig(regular_order=1).near_order == 3
    assert QuadratureConfig(regular_order=3).near_order == 6
    assert QuadratureConfig(regular_order=6).near_order == 12


# -- singular rules: measure and smooth-kernel consistency --------------------

@pytest.mark.parametrize("kind", ["identical", "edge", "vertex"])
def test_singular_rule_weights_cover_reference_domain(kind):
    """For a constant kernel every class integrates to (1/2)^2."""
    *_, w = singular_rule(kind, 4)
    assert w.sum() == pytest.approx(0.25, rel=1e-13)


@pytest.mark.parametrize("kind", ["identical", "edge", "vertex"])
def test_singular_rule_points_in_domain(kind):
    xu, xv, yu, yv, _ = singular_rule(kind, 3)
    for u, v in ((xu, xv), (yu, yv)):
        assert np.all(u <= 1.0 + 1e-14) and np.all(v <= u + 1e-14)
        assert np.all(v >= -1e-14)


def test_singular_rule_smooth_kernel_matches_tensor_quadrature():
    """On a smooth kernel the regularizing maps must reproduce the plain
    tensor-product quadrature value over the two reference triangles."""
    def kernel(xu, xv, yu, yv):
        return np.cos(xu + 2 * yv) * np.exp(xv - yu)

    # plain tensor rule over {0<=v<=u<=1}^2 via collapsed square
    g, gw = np.polynomial.legendre.leggauss(24)
    g = 0.5 * (g + 1); gw = 0.5 * gw
    U, Q = np.meshgrid(g, g, indexing="ij")
    Wuv = (gw[:, None] * gw[None, :] * U).ravel()   # du dv, v = U*Q
    u = U.ravel(); v = (U * Q).ravel()
    exact = 0.0
    for i in range(len(u)):
        exact += Wuv[i] * np.sum(Wuv * kernel(u[i], v[i], u, v))

    for kind in ("identical", "edge", "vertex"):
        xu, xv, yu, yv, w = singular_rule(kind, 12)
        approx = np.sum(w * kernel(xu, xv, yu, yv))
        assert approx == pytest.approx(exact, rel=1e-10)


# -- analytic flat-triangle potential (oracle for the singular classes) -------

def triangle_laplace_potential(p, tri):
    """integral over the triangle of 1/(4 pi |p - y|) dA(y), closed form."""
    v1, v2, v3 = [np.asarray(v, float) for v in tri]
    n = np.cross(v2 - v1, v3 - v1)
    n = n / np.linalg.norm(n)
    p = np.asarray(p, float)
    h = (p - v1) @ n
    p0 = p - h * n
    total = 0.0
    for a, b in ((v1, v2), (v2, v3), (v3, v1)):
        seg = b - a
        shat = seg / np.linalg.norm(seg)
        mhat = np.cross(shat, n)
        t0 = (a - p0) @ mhat
        splus = (b - p0) @ shat
        sminus = (a - p0) @ shat
        rplus = np.linalg.norm(p - b)
        rminus = np.linalg.norm(p - a)
        r0sq = t0 * t0 + h * h
        if rplus + splus > 0 and rminus + sminus > 0:
            total += t0 * np.log((rplus + splus) / (rminus + sminus))
        total -= abs(h) * (
            np.arctan2(t0 * splus, r0sq + abs(h) * rplus)
            - np.arctan2(t0 * sminus, r0sq + abs(h) * rminus))
    return total / (4 * np.pi)


def test_triangle_potential_against_dblquad():
    tri = [np.array([0.0, 0.0, 0.0]), np.array([1.1, 0.0, 0.0]),
           np.array([0.3, 0.9, 0.0])]

    def check(p):
        p = np.asarray(p)

        def integrand(t, u):
            # y = v1 + u*(v2-v1) + t*u*(v3-v2), jacobian 2A*u
            y = tri[0] + u * (tri[1] - tri[0]) + t * u * (tri[2] - tri[1])
            return u / (4 * np.pi * np.linalg.norm(p - y))

        twice_area = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        ref, err = dblquad(integrand, 0, 1, 0, 1, epsabs=1e-12, epsrel=1e-12)
        # dblquad itself is only good to ~1e-8 here (kinked inner integrand)
        assert triangle_laplace_potential(p, tri) == pytest.approx(
            twice_area * ref, rel=1e-7)

    check([0.4, 0.3, 0.7])      # off the plane
    check([2.0, 2.0, 0.0])      # in the plane, outside
    check([0.45, 0.31, 0.0])    # inside the triangle


def pair_integral_oracle(tri_x, tri_y, levels=4):
    """integral over tri_x of the analytic potential of tri_y, by uniform
    refinement of the outer triangle with a degree-5 rule."""
    bary, w = triangle_rule(7)
    tris = [tuple(np.asarray(v, float) for v in tri_x)]
    for _ in range(levels):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = nxt
    total = 0.0
    for a, b, c in tris:
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        pts = np.outer(bary[:, 0], a) + np.outer(bary[:, 1], b) \
            + np.outer(bary[:, 2], c)
        for q in range(len(w)):
            total += area * w[q] * triangle_laplace_potential(pts[q], tri_y)
    return total


def ss_pair_value(kind, tri_x, tri_y, q):
    xu, xv, yu, yv, w = singular_rule(kind, q)
    ax, bx, cx = tri_x
    ay, by, cy = tri_y
    X = ax + np.outer(xu, bx - ax) + np.outer(xv, cx - bx)
    Y = ay + np.outer(yu, by - ay) + np.outer(yv, cy - by)
    r = np.linalg.norm(X - Y, axis=1)
    jx = np.linalg.norm(np.cross(bx - ax, cx - bx))
    jy = np.linalg.norm(np.cross(by - ay, cy - by))
    return jx * jy * np.sum(w / (4 * np.pi * r))


def test_singular_identical_against_analytic_oracle():
    tri = [np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.1, 0.0]),
           np.array([0.2, 0.8, 0.3])]
    oracle = pair_integral_oracle(tri, tri, levels=4)
    converged = ss_pair_value("identical", tri, tri, 10)
    assert converged == pytest.approx(oracle, rel=2e-4)
    err4 = abs(ss_pair_value("identical", tri, tri, 4) - converged)
    err3 = abs(ss_pair_value("identical", tri, tri, 3) - converged)
    assert err4 < 5e-5 * abs(converged)
    assert err4 < 0.2 * err3  # geometric decay in the rule order


def test_singular_edge_against_analytic_oracle():
    # shared edge (0,0,0)-(1,0,0), one triangle tilted out of plane
    shared_a = np.array([0.0, 0.0, 0.0])
    shared_b = np.array([1.0, 0.0, 0.0])
    tri_x = [shared_a, shared_b, np.array([0.4, 0.9, 0.0])]
    tri_y = [shared_a, shared_b, np.array([0.6, -0.5, 0.6])]
    oracle = pair_integral_oracle(tri_x, tri_y, levels=4)
    converged = ss_pair_value("edge", tri_x, tri_y, 10)
    assert converged == pytest.approx(oracle, rel=2e-4)
    assert ss_pair_value("edge", tri_x, tri_y, 4) == pytest.approx(
        converged, rel=5e-6)


def test_singular_vertex_against_analytic_oracle():
    shared = np.array([0.0, 0.0, 0.0])
    tri_x = [shared, np.array([1.0, 0.0, 0.0]), np.array([0.3, 0.8, 0.0])]
    tri_y = [shared, np.array([-0.9, -0.2, 0.1]), np.array([-0.2, -0.7, -0.4])]
    oracle = pair_integral_oracle(tri_x, tri_y, levels=3)
    converged = ss_pair_value("vertex", tri_x, tri_y, 10)
    assert converged == pytest.approx(oracle, rel=2e-4)
    assert ss_pair_value("vertex", tri_x, tri_y, 4) == pytest.approx(
        converged, rel=5e-6)


# -- pair classification -------------------------------------------------------

def test_classification_partitions_all_pairs():
    mesh = make_icosphere(1)
    cls = classify_pairs(mesh, 1.5)
    nt = mesh.num_triangles
    assert cls.pair_class.shape == (nt, nt)
    assert np.array_equal(cls.pair_class, cls.pair_class.T)
    assert np.all(np.diag(cls.pair_class) == 2)
    n_class2 = int(np.count_nonzero(cls.pair_class == 2))
    # diagonal + both orientations of every adjacent pair
    assert n_class2 == nt + 2 * (len(cls.edge_pairs) + len(cls.vertex_pairs))
    # every triangle has exactly 3 edge neighbours
    counts = np.zeros(nt, int)
    for ta, tb in cls.edge_pairs:
        counts[ta] += 1
        counts[tb] += 1
    assert np.all(counts == 3)


def test_classification_edge_permutations_align():
    mesh = make_icosphere(1)
    cls = classify_pairs(mesh, 1.5)
    tris = mesh.triangles
    for p in range(len(cls.edge_pairs)):
        ta, tb = cls.edge_pairs[p]
        pa, pb = cls.edge_perm_x[p], cls.edge_perm_y[p]
        # first two slots are the shared edge, identically ordered
        assert tris[ta][pa[0]] == tris[tb][pb[0]]
        assert tris[ta][pa[1]] == tris[tb][pb[1]]
        assert tris[ta][pa[2]] != tris[tb][pb[2]]


def test_classification_vertex_permutations_align():
    mesh = make_icosphere(1)
    cls = classify_pairs(mesh, 1.5)
    tris = mesh.triangles
    assert len(cls.vertex_pairs) > 0
    for p in range(len(cls.vertex_pairs)):
        ta, tb = cls.vertex_pairs[p]
        pa, pb = cls.vertex_perm_x[p], cls.vertex_perm_y[p]
        assert tris[ta][pa[0]] == tris[tb][pb[0]]
        shared = set(tris[ta]) & set(tris[tb])
        assert len(shared) == 1
