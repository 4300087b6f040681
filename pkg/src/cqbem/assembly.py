"""Galerkin assembly of the Helmholtz boundary operators and potentials.

All four boundary operators at a complex frequency s (Re s > 0) are
assembled in one sweep over unordered triangle pairs, sharing the kernel
evaluations between the pair and its mirror:

    V : weakly singular  exp(-s r)/(4 pi r),   P0 x P0
    K : double layer     d/dn_y of the kernel, P0 test x P1 trial
    KT: adjoint layer    d/dn_x of the kernel, P1 test x P0 trial
    W : hypersingular in integration-by-parts form, P1 x P1:
        <W psi, eta> = int int G [curl eta(x).curl psi(y)
                                  + s^2 (n_x.n_y) eta(x) psi(y)]

The integration-by-parts form involves only the weakly singular kernel
and equals the classical hypersingular operator on closed surfaces.
Touching pairs use the regularizing 4-cube rules of
:mod:`cqbem.quadrature`; separated pairs use symmetric triangle rules,
upgraded for nearly touching pairs.  Normals point out of the obstacle
everywhere.

The per-frequency work is a pure function of (mesh, quadrature, s), so
distinct frequencies can be assembled concurrently; the numba kernels
below are single-threaded with deterministic accumulation order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .mesh import SurfaceMesh
from .quadrature import (
    PairClassification,
    QuadratureConfig,
    classify_pairs,
    singular_rule,
    triangle_rule,
)
from .spaces import BoundarySpaces, hat_curls

CACHE_ENV_VAR = "CQBEM_CACHE_DIR"


@dataclass(frozen=True)
class BemMatrixSet:
    """Dense Galerkin matrices of the four boundary operators at one s."""

    s: complex
    V: np.ndarray    # (T, T)
    K: np.ndarray    # (T, nv)
    KT: np.ndarray   # (nv, T)
    W: np.ndarray    # (nv, nv)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True, fastmath=True)
def _kernel_separated(pts_a, w_a, lam_a, pts_b, w_b, lam_b, normals, areas,
                      gidx, curls, pair_class, s, V, K, KT, W):
    nt = normals.shape[0]
    s2 = s * s
    inv4pi = 0.07957747154594767
    sre = s.real
    sim = s.imag
    for i in range(nt):
        ni0 = normals[i, 0]
        ni1 = normals[i, 1]
        ni2 = normals[i, 2]
        for j in range(i + 1, nt):
            cls = pair_class[i, j]
            if cls > 1:
                continue
            if cls == 0:
                px = pts_a[i]
                py = pts_a[j]
                wx = w_a
                lx = lam_a
            else:
                px = pts_b[i]
                py = pts_b[j]
                wx = w_b
                lx = lam_b
            nqx = px.shape[0]
            nqy = py.shape[0]
            nj0 = normals[j, 0]
            nj1 = normals[j, 1]
            nj2 = normals[j, 2]
            nn = ni0 * nj0 + ni1 * nj1 + ni2 * nj2

            vv = 0.0j
            kk0 = 0.0j; kk1 = 0.0j; kk2 = 0.0j
            m0 = 0.0j; m1 = 0.0j; m2 = 0.0j
            g00 = 0.0j; g01 = 0.0j; g02 = 0.0j
            g10 = 0.0j; g11 = 0.0j; g12 = 0.0j
            g20 = 0.0j; g21 = 0.0j; g22 = 0.0j

            for a in range(nqx):
                xa0 = px[a, 0]; xa1 = px[a, 1]; xa2 = px[a, 2]
                wa = wx[a]
                la0 = lx[a, 0]; la1 = lx[a, 1]; la2 = lx[a, 2]
                for b in range(nqy):
                    dx = xa0 - py[b, 0]
                    dy = xa1 - py[b, 1]
                    dz = xa2 - py[b, 2]
                    r2 = dx * dx + dy * dy + dz * dz
                    r = np.sqrt(r2)
                    er = np.exp(-sre * r) * inv4pi / r
                    G = complex(er * np.cos(sim * r), -er * np.sin(sim * r))
                    w = wa * wx[b]
                    wG = w * G
                    H = wG * (1.0 + s * r) / r2
                    dny = dx * nj0 + dy * nj1 + dz * nj2
                    dnx = dx * ni0 + dy * ni1 + dz * ni2
                    hy = H * dny
                    hx = -H * dnx
                    lb0 = lx[b, 0]; lb1 = lx[b, 1]; lb2 = lx[b, 2]
                    vv += wG
                    kk0 += hy * lb0; kk1 += hy * lb1; kk2 += hy * lb2
                    m0 += hx * la0; m1 += hx * la1; m2 += hx * la2
                    t0 = wG * la0; t1 = wG * la1; t2 = wG * la2
                    g00 += t0 * lb0; g01 += t0 * lb1; g02 += t0 * lb2
                    g10 += t1 * lb0; g11 += t1 * lb1; g12 += t1 * lb2
                    g20 += t2 * lb0; g21 += t2 * lb1; g22 += t2 * lb2

            scale = areas[i] * areas[j]
            V[i, j] += scale * vv
            V[j, i] += scale * vv
            gj0 = gidx[j, 0]; gj1 = gidx[j, 1]; gj2 = gidx[j, 2]
            gi0 = gidx[i, 0]; gi1 = gidx[i, 1]; gi2 = gidx[i, 2]
            K[i, gj0] += scale * kk0
            K[i, gj1] += scale * kk1
            K[i, gj2] += scale * kk2
            KT[gj0, i] += scale * kk0
            KT[gj1, i] += scale * kk1
            KT[gj2, i] += scale * kk2
            K[j, gi0] += scale * m0
            K[j, gi1] += scale * m1
            K[j, gi2] += scale * m2
            KT[gi0, j] += scale * m0
            KT[gi1, j] += scale * m1
            KT[gi2, j] += scale * m2

            snn = s2 * nn
            for c in range(3):
                cx0 = curls[i, c, 0]; cx1 = curls[i, c, 1]; cx2 = curls[i, c, 2]
                if c == 0:
                    gm0 = g00; gm1 = g01; gm2 = g02
                elif c == 1:
                    gm0 = g10; gm1 = g11; gm2 = g12
                else:
                    gm0 = g20; gm1 = g21; gm2 = g22
                row = gidx[i, c]
                for d in range(3):
                    cc = (cx0 * curls[j, d, 0] + cx1 * curls[j, d, 1]
                          + cx2 * curls[j, d, 2])
                    if d == 0:
                        gm = gm0
                    elif d == 1:
                        gm = gm1
                    else:
                        gm = gm2
                    val = scale * (cc * vv + snn * gm)
                    col = gidx[j, d]
                    W[row, col] += val
                    W[col, row] += val


@njit(cache=True, fastmath=True)
def _kernel_touching(tv, normals, areas, gidx, curls, pairs, permx, permy,
                     xu, xv, yu, yv, wq, s, identical, V, K, KT, W):
    npairs = pairs.shape[0]
    nq = xu.shape[0]
    s2 = s * s
    inv4pi = 0.07957747154594767
    sre = s.real
    sim = s.imag
    for p in range(npairs):
        i = pairs[p, 0]
        j = pairs[p, 1]
        # permuted corners: P1, P2, P3 on each side
        ax = tv[i, permx[p, 0]]
        bx = tv[i, permx[p, 1]]
        cx = tv[i, permx[p, 2]]
        ay = tv[j, permy[p, 0]]
        by = tv[j, permy[p, 1]]
        cy = tv[j, permy[p, 2]]
        ni0 = normals[i, 0]; ni1 = normals[i, 1]; ni2 = normals[i, 2]
        nj0 = normals[j, 0]; nj1 = normals[j, 1]; nj2 = normals[j, 2]
        nn = ni0 * nj0 + ni1 * nj1 + ni2 * nj2

        vv = 0.0j
        kk0 = 0.0j; kk1 = 0.0j; kk2 = 0.0j
        m0 = 0.0j; m1 = 0.0j; m2 = 0.0j
        g00 = 0.0j; g01 = 0.0j; g02 = 0.0j
        g10 = 0.0j; g11 = 0.0j; g12 = 0.0j
        g20 = 0.0j; g21 = 0.0j; g22 = 0.0j

        for q in range(nq):
            u = xu[q]; v = xv[q]
            x0 = ax[0] + u * (bx[0] - ax[0]) + v * (cx[0] - bx[0])
            x1 = ax[1] + u * (bx[1] - ax[1]) + v * (cx[1] - bx[1])
            x2 = ax[2] + u * (bx[2] - ax[2]) + v * (cx[2] - bx[2])
            la0 = 1.0 - u; la1 = u - v; la2 = v
            up = yu[q]; vp = yv[q]
            y0 = ay[0] + up * (by[0] - ay[0]) + vp * (cy[0] - by[0])
            y1 = ay[1] + up * (by[1] - ay[1]) + vp * (cy[1] - by[1])
            y2 = ay[2] + up * (by[2] - ay[2]) + vp * (cy[2] - by[2])
            lb0 = 1.0 - up; lb1 = up - vp; lb2 = vp

            dx = x0 - y0; dy = x1 - y1; dz = x2 - y2
            r2 = dx * dx + dy * dy + dz * dz
            r = np.sqrt(r2)
            er = np.exp(-sre * r) * inv4pi / r
            G = complex(er * np.cos(sim * r), -er * np.sin(sim * r))
            w = wq[q]
            wG = w * G
            H = wG * (1.0 + s * r) / r2
            dny = dx * nj0 + dy * nj1 + dz * nj2
            dnx = dx * ni0 + dy * ni1 + dz * ni2
            hy = H * dny
            hx = -H * dnx
            vv += wG
            kk0 += hy * lb0; kk1 += hy * lb1; kk2 += hy * lb2
            m0 += hx * la0; m1 += hx * la1; m2 += hx * la2
            t0 = wG * la0; t1 = wG * la1; t2 = wG * la2
            g00 += t0 * lb0; g01 += t0 * lb1; g02 += t0 * lb2
            g10 += t1 * lb0; g11 += t1 * lb1; g12 += t1 * lb2
            g20 += t2 * lb0; g21 += t2 * lb1; g22 += t2 * lb2

        scale = 4.0 * areas[i] * areas[j]
        V[i, j] += scale * vv
        if identical == 0:
            V[j, i] += scale * vv
        snn = s2 * nn
        # d/dn_y kernel tested on T_i, trial hats on T_j; for distinct
        # panels the same numbers fill the mirrored adjoint block
        for d in range(3):
            col = gidx[j, permy[p, d]]
            if d == 0:
                kv = kk0
            elif d == 1:
                kv = kk1
            else:
                kv = kk2
            K[i, col] += scale * kv
            if identical == 0:
                KT[col, i] += scale * kv
        # d/dn_x kernel: adjoint tested with hats on T_i against T_j
        # (for the identical pair this is the own-panel adjoint block)
        for c in range(3):
            col = gidx[i, permx[p, c]]
            if c == 0:
                mv = m0
            elif c == 1:
                mv = m1
            else:
                mv = m2
            if identical == 0:
                K[j, col] += scale * mv
            KT[col, i if identical == 1 else j] += scale * mv
        for c in range(3):
            lc = permx[p, c]
            row = gidx[i, lc]
            cx0 = curls[i, lc, 0]; cx1 = curls[i, lc, 1]; cx2 = curls[i, lc, 2]
            if c == 0:
                gm0 = g00; gm1 = g01; gm2 = g02
            elif c == 1:
                gm0 = g10; gm1 = g11; gm2 = g12
            else:
                gm0 = g20; gm1 = g21; gm2 = g22
            for d in range(3):
                ld = permy[p, d]
                col = gidx[j, ld]
                cc = (cx0 * curls[j, ld, 0] + cx1 * curls[j, ld, 1]
                      + cx2 * curls[j, ld, 2])
                if d == 0:
                    gm = gm0
                elif d == 1:
                    gm = gm1
                else:
                    gm = gm2
                val = scale * (cc * vv + snn * gm)
                W[row, col] += val
                if identical == 0:
                    W[col, row] += val


@njit(cache=True, fastmath=True)
def _kernel_potentials(points, pts_a, w_a, lam_a, pts_b, w_b, lam_b,
                       centroids, diameters, normals, areas, gidx,
                       near_factor, s, phi, psiv, outS, outD):
    npts = points.shape[0]
    nt = normals.shape[0]
    sre = s.real
    sim = s.imag
    inv4pi = 0.07957747154594767
    for p in range(npts):
        x0 = points[p, 0]; x1 = points[p, 1]; x2 = points[p, 2]
        accS = 0.0j
        accD = 0.0j
        for t in range(nt):
            d0 = x0 - centroids[t, 0]
            d1 = x1 - centroids[t, 1]
            d2 = x2 - centroids[t, 2]
            cdist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if cdist < near_factor * diameters[t]:
                py = pts_b[t]
                wy = w_b
                ly = lam_b
            else:
                py = pts_a[t]
                wy = w_a
                ly = lam_a
            nq = py.shape[0]
            n0 = normals[t, 0]; n1 = normals[t, 1]; n2 = normals[t, 2]
            g0 = gidx[t, 0]; g1 = gidx[t, 1]; g2 = gidx[t, 2]
            p0 = psiv[g0]; p1 = psiv[g1]; p2 = psiv[g2]
            phit = phi[t]
            sloc = 0.0j
            dloc = 0.0j
            for b in range(nq):
                dx = x0 - py[b, 0]
                dy = x1 - py[b, 1]
                dz = x2 - py[b, 2]
                r2 = dx * dx + dy * dy + dz * dz
                r = np.sqrt(r2)
                er = np.exp(-sre * r) * inv4pi / r
                G = complex(er * np.cos(sim * r), -er * np.sin(sim * r))
                w = wy[b]
                wG = w * G
                sloc += wG * phit
                dny = dx * n0 + dy * n1 + dz * n2
                psival = ly[b, 0] * p0 + ly[b, 1] * p1 + ly[b, 2] * p2
                dloc += wG * (1.0 + s * r) / r2 * dny * psival
            accS += areas[t] * sloc
            accD += areas[t] * dloc
        outS[p] = accS
        outD[p] = accD


# ---------------------------------------------------------------------------
# assembly plan (per mesh + quadrature config, reused across frequencies)
# ---------------------------------------------------------------------------

@dataclass
class AssemblyPlan:
    mesh: SurfaceMesh
    quad: QuadratureConfig
    tv: np.ndarray
    gidx: np.ndarray
    curls: np.ndarray
    pts_far: np.ndarray
    w_far: np.ndarray
    lam_far: np.ndarray
    pts_near: np.ndarray
    w_near: np.ndarray
    lam_near: np.ndarray
    pairs: PairClassification
    rule_identical: tuple
    rule_edge: tuple
    rule_vertex: tuple
    diag_pairs: np.ndarray
    diag_perm: np.ndarray


_PLAN_CACHE: dict = {}
_PLAN_CACHE_LIMIT = 8


def build_plan(mesh: SurfaceMesh, quad: QuadratureConfig) -> AssemblyPlan:
    key = (mesh.content_hash(), quad.key())
    cached = _PLAN_CACHE.get(key)
    if cached is not None:
        return cached

    tv = np.ascontiguousarray(mesh.vertices[mesh.triangles])
    gidx = np.ascontiguousarray(mesh.triangles)
    curls = np.ascontiguousarray(hat_curls(mesh))

    bary_f, w_f = triangle_rule(quad.regular_order)
    bary_n, w_n = triangle_rule(quad.near_order)
    pts_far = np.einsum("qk,tkd->tqd", bary_f, tv)
    pts_near = np.einsum("qk,tkd->tqd", bary_n, tv)

    pairs = classify_pairs(mesh, quad.near_threshold)
    q = quad.singular_order
    nt = mesh.num_triangles
    plan = AssemblyPlan(
        mesh=mesh, quad=quad, tv=tv, gidx=gidx, curls=curls,
        pts_far=np.ascontiguousarray(pts_far), w_far=w_f,
        lam_far=np.ascontiguousarray(bary_f),
        pts_near=np.ascontiguousarray(pts_near), w_near=w_n,
        lam_near=np.ascontiguousarray(bary_n),
        pairs=pairs,
        rule_identical=tuple(np.ascontiguousarray(a) for a in singular_rule("identical", q)),
        rule_edge=tuple(np.ascontiguousarray(a) for a in singular_rule("edge", q)),
        rule_vertex=tuple(np.ascontiguousarray(a) for a in singular_rule("vertex", q)),
        diag_pairs=np.stack([np.arange(nt, dtype=np.int32)] * 2, axis=1),
        diag_perm=np.tile(np.arange(3, dtype=np.int32), (nt, 1)),
    )
    if len(_PLAN_CACHE) >= _PLAN_CACHE_LIMIT:
        _PLAN_CACHE.pop(next(iter(_PLAN_CACHE)))
    _PLAN_CACHE[key] = plan
    return plan


def _cache_path(cache_dir, mesh, quad, s):
    name = (f"bem_{mesh.content_hash()}_q{quad.regular_order}-"
            f"{quad.singular_order}-{quad.near_threshold:g}_"
            f"s{s.real:.16e}_{s.imag:.16e}.npz")
    return os.path.join(cache_dir, name)


def assemble_boundary_ops(s: complex, mesh: SurfaceMesh,
                          spaces: BoundarySpaces,
                          quad: QuadratureConfig = QuadratureConfig(),
                          cache_dir: Optional[str] = None) -> BemMatrixSet:
    """Galerkin matrices of V, K, KT, W at the complex frequency s.

    Frequencies must satisfy Re s > 0 (the kernel decays).  When a cache
    directory is given (argument or CQBEM_CACHE_DIR), assembled sets are
    stored on disk keyed by mesh geometry, quadrature config and s, so
    reruns with a different boundary condition reuse them.
    """
    s = complex(s)
    if s.real <= 0.0:
        raise ValueError(f"assembly requires Re s > 0, got s = {s}")

    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR) or None
    if cache_dir:
        path = _cache_path(cache_dir, mesh, quad, s)
        if os.path.exists(path):
            data = np.load(path)
            return BemMatrixSet(s, data["V"], data["K"], data["KT"], data["W"])

    plan = build_plan(mesh, quad)
    nt = mesh.num_triangles
    nv = mesh.num_vertices
    V = np.zeros((nt, nt), dtype=np.complex128)
    K = np.zeros((nt, nv), dtype=np.complex128)
    KT = np.zeros((nv, nt), dtype=np.complex128)
    W = np.zeros((nv, nv), dtype=np.complex128)

    normals = mesh.normals
    areas = mesh.areas
    _kernel_separated(plan.pts_far, plan.w_far, plan.lam_far,
                      plan.pts_near, plan.w_near, plan.lam_near,
                      normals, areas, plan.gidx, plan.curls,
                      plan.pairs.pair_class, s, V, K, KT, W)
    xu, xv, yu, yv, wq = plan.rule_identical
    _kernel_touching(plan.tv, normals, areas, plan.gidx, plan.curls,
                     plan.diag_pairs, plan.diag_perm, plan.diag_perm,
                     xu, xv, yu, yv, wq, s, 1, V, K, KT, W)
    if len(plan.pairs.edge_pairs):
        xu, xv, yu, yv, wq = plan.rule_edge
        _kernel_touching(plan.tv, normals, areas, plan.gidx, plan.curls,
                         plan.pairs.edge_pairs, plan.pairs.edge_perm_x,
                         plan.pairs.edge_perm_y, xu, xv, yu, yv, wq, s, 0,
                         V, K, KT, W)
    if len(plan.pairs.vertex_pairs):
        xu, xv, yu, yv, wq = plan.rule_vertex
        _kernel_touching(plan.tv, normals, areas, plan.gidx, plan.curls,
                         plan.pairs.vertex_pairs, plan.pairs.vertex_perm_x,
                         plan.pairs.vertex_perm_y, xu, xv, yu, yv, wq, s, 0,
                         V, K, KT, W)

    out = BemMatrixSet(s, V, K, KT, W)
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        path = _cache_path(cache_dir, mesh, quad, s)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            np.savez(fh, V=V, K=K, KT=KT, W=W)
        os.replace(tmp, path)
    return out


# ---------------------------------------------------------------------------
# potential evaluation
# ---------------------------------------------------------------------------

def near_surface_mask(mesh: SurfaceMesh, points,
                      quad: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """True for points within near_threshold local diameters of the surface."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(points[:, None, :] - mesh.centroids[None, :, :], axis=2)
    return np.any(d < quad.near_threshold * mesh.diameters[None, :], axis=1)


def _eval_layers(s, mesh, quad, phi, psi, points):
    s = complex(s)
    if s.real <= 0.0:
        raise ValueError(f"potential evaluation requires Re s > 0, got {s}")
    plan = build_plan(mesh, quad)
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    outS = np.empty(len(points), dtype=np.complex128)
    outD = np.empty(len(points), dtype=np.complex128)
    phi = np.ascontiguousarray(np.asarray(phi, dtype=np.complex128))
    psi = np.ascontiguousarray(np.asarray(psi, dtype=np.complex128))
    _kernel_potentials(points, plan.pts_far, plan.w_far, plan.lam_far,
                       plan.pts_near, plan.w_near, plan.lam_near,
                       mesh.centroids, mesh.diameters, mesh.normals,
                       mesh.areas, plan.gidx, quad.near_threshold, s,
                       phi, psi, outS, outD)
    return outS, outD


def eval_single_layer(s: complex, phi_coeffs, points, mesh: SurfaceMesh,
                      quad: QuadratureConfig = QuadratureConfig()):
    """Single layer potential of a piecewise-constant density at points.

    Returns (values, near_mask); near_mask flags points closer to the
    surface than near_threshold local diameters, where plain quadrature
    degrades (accuracy warning, not a failure).
    """
    phi = np.asarray(phi_coeffs, dtype=np.complex128)
    zero = np.zeros(mesh.num_vertices, dtype=np.complex128)
    vals, _ = _eval_layers(s, mesh, quad, phi, zero, points)
    return vals, near_surface_mask(mesh, points, quad)


def eval_double_layer(s: complex, psi_coeffs, points, mesh: SurfaceMesh,
                      quad: QuadratureConfig = QuadratureConfig()):
    """Double layer potential of a continuous piecewise-linear density."""
    psi = np.asarray(psi_coeffs, dtype=np.complex128)
    zero = np.zeros(mesh.num_triangles, dtype=np.complex128)
    _, vals = _eval_layers(s, mesh, quad, zero, psi, points)
    return vals, near_surface_mask(mesh, points, quad)


def eval_representation(s: complex, phi_coeffs, psi_coeffs, points,
                        mesh: SurfaceMesh,
                        quad: QuadratureConfig = QuadratureConfig()):
    """S(s) phi + D(s) s^{-1} psi in one sweep (shared kernel evaluations)."""
    phi = np.asarray(phi_coeffs, dtype=np.complex128)
    psi = np.asarray(psi_coeffs, dtype=np.complex128)
    sing, doub = _eval_layers(s, mesh, quad, phi, psi, points)
    return sing + doub / complex(s), near_surface_mask(mesh, points, quad)
