"""Quadrature rules for Galerkin boundary element assembly.

Regular triangle-pair integrals use symmetric positive-weight rules on
each triangle (tensorized across the pair).  Pairs that touch (identical
panels, shared edge, shared vertex) are integrated with
relative-coordinate regularizing transformations: the four-dimensional
integral over the pair is split into subdomains, each mapped from the
unit 4-cube so that the 1/r singularity cancels against the Jacobian and
a tensor Gauss rule converges rapidly.

Reference-triangle convention: a triangle with (possibly permuted)
vertices P1, P2, P3 is parametrized over {0 <= v <= u <= 1} by

    x(u, v) = P1 + u (P2 - P1) + v (P3 - P2),

with barycentric values (1-u, u-v, v) and area Jacobian 2*area.  For
shared-edge pairs both parametrizations must traverse the common edge
from the same first vertex; for shared-vertex pairs the common vertex
must be P1 of both.  Pair classification below produces exactly these
permutations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .mesh import SurfaceMesh

# Symmetric positive-weight triangle rules, keyed by point count.
# Orbits given as (barycentric weight pattern, quadrature weight).
_TRI_RULES: Dict[int, list] = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    3: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    6: [((0.816847572980459, 0.091576213509771, 0.091576213509771),
         0.109951743655322),
        ((0.108103018168070, 0.445948490915965, 0.445948490915965),
         0.223381589678011)],
    7: [((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456),
         0.125939180544827),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115),
         0.132394152788506)],
    12: [((0.873821971016996, 0.063089014491502, 0.063089014491502),
          0.050844906370207),
         ((0.501426509658179, 0.249286745170910, 0.249286745170910),
          0.116786275726379),
         ((0.636502499121399, 0.310352451033785, 0.053145049844816),
          0.082851075618374)],
}

SUPPORTED_TRIANGLE_RULES = tuple(sorted(_TRI_RULES))


def triangle_rule(points: int):
    """Barycentric nodes (n, 3) and weights (n,) (weights sum to 1)."""
    if points not in _TRI_RULES:
        raise ValueError(
            f"no symmetric positive triangle rule with {points} points; "
            f"available: {SUPPORTED_TRIANGLE_RULES}")
    bary, weights = [], []
    for pattern, w in _TRI_RULES[points]:
        seen = set()
        a, b, c = pattern
        for perm in ((a, b, c), (b, c, a), (c, a, b),
                     (a, c, b), (c, b, a), (b, a, c)):
            if perm not in seen:
                seen.add(perm)
                bary.append(perm)
                weights.append(w)
    bary = np.array(bary)
    weights = np.array(weights)
    if len(bary) != points:
        raise AssertionError("orbit expansion produced wrong point count")
    return bary, weights


def _doubled_rule(points: int) -> int:
    for candidate in SUPPORTED_TRIANGLE_RULES:
        if candidate >= 2 * points:
            return candidate
    return SUPPORTED_TRIANGLE_RULES[-1]


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature orders for Galerkin assembly and potential evaluation.

    regular_order: points of the per-triangle symmetric rule used on
    well-separated pairs (3 by default, i.e. 3 x 3 = 9 point pairs).
    singular_order: Gauss points per axis of the regularizing 4-cube
    rules on touching pairs.  near_threshold: separation/diameter ratio
    below which non-touching pairs are upgraded to the doubled rule.
    """

    regular_order: int = 3
    singular_order: int = 4
    near_threshold: float = 1.5

    def __post_init__(self):
        if self.regular_order not in _TRI_RULES:
            raise ValueError(
                f"regular_order must be one of {SUPPORTED_TRIANGLE_RULES}")
        if self.singular_order < 1:
            raise ValueError("singular_order must be >= 1")
        if self.near_threshold < 0:
            raise ValueError("near_threshold must be nonnegative")

    @property
    def near_order(self) -> int:
        return _doubled_rule(self.regular_order)

    def key(self) -> tuple:
        return (self.regular_order, self.singular_order, self.near_threshold)


# ---------------------------------------------------------------------------
# Regularizing transformations for touching pairs
# ---------------------------------------------------------------------------

def _gauss01(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor4(q: int):
    g, w = _gauss01(q)
    e1, e2, e3, xi = np.meshgrid(g, g, g, g, indexing="ij")
    w4 = (w[:, None, None, None] * w[None, :, None, None]
          * w[None, None, :, None] * w[None, None, None, :])
    return (e1.ravel(), e2.ravel(), e3.ravel(), xi.ravel(), w4.ravel())


def singular_rule(kind: str, q: int):
    """Point pairs and weights integrating over both reference triangles.

    Returns (xu, xv, yu, yv, w): parameters of the x-point and y-point in
    the {0 <= v <= u <= 1} domain, with weights absorbing the subdomain
    Jacobians.  For a constant kernel the weights of every kind sum to
    1/4, the squared area of the reference domain.

    kind: 'identical' | 'edge' | 'vertex'.
    """
    e1, e2, e3, xi, w = _tensor4(q)
    pieces = []
    if kind == "identical":
        jac = xi**3 * e1**2 * e2
        terms = [
            ((xi, xi * (1 - e1 + e1 * e2)),
             (xi * (1 - e1 * e2 * e3), xi * (1 - e1))),
            ((xi * (1 - e1 * e2 * e3), xi * (1 - e1)),
             (xi, xi * (1 - e1 + e1 * e2))),
            ((xi, xi * e1 * (1 - e2 + e2 * e3)),
             (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
            ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)),
             (xi, xi * e1 * (1 - e2 + e2 * e3))),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)),
             (xi, xi * e1 * (1 - e2))),
            ((xi, xi * e1 * (1 - e2)),
             (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3))),
        ]
        pieces = [(x, y, jac) for x, y in terms]
    elif kind == "edge":
        jac1 = xi**3 * e1**2
        jac2 = xi**3 * e1**2 * e2
        pieces = [
            ((xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), jac1),
            ((xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), jac2),
            ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3), jac2),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1), jac2),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2), jac2),
        ]
    elif kind == "vertex":
        jac = xi**3 * e2
        pieces = [
            ((xi, xi * e1), (xi * e2, xi * e2 * e3), jac),
            ((xi * e2, xi * e2 * e3), (xi, xi * e1), jac),
        ]
    else:
        raise ValueError(f"unknown singular rule kind {kind!r}")

    xu = np.concatenate([p[0][0] for p in pieces])
    xv = np.concatenate([p[0][1] for p in pieces])
    yu = np.concatenate([p[1][0] for p in pieces])
    yv = np.concatenate([p[1][1] for p in pieces])
    wq = np.concatenate([w * p[2] for p in pieces])
    return xu, xv, yu, yv, wq


# ---------------------------------------------------------------------------
# Pair classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairClassification:
    """Unordered triangle pairs grouped by adjacency.

    edge_pairs/vertex_pairs: (n, 2) int32 triangle indices; the matching
    perm arrays give, per pair and side, the local vertex order that puts
    the shared edge (same direction both sides) or shared vertex first.
    pair_class: (T, T) uint8 with 0 = separated, 1 = near (upgraded
    rule), 2 = touching (handled by the singular rules).
    """

    edge_pairs: np.ndarray
    edge_perm_x: np.ndarray
    edge_perm_y: np.ndarray
    vertex_pairs: np.ndarray
    vertex_perm_x: np.ndarray
    vertex_perm_y: np.ndarray
    pair_class: np.ndarray


def classify_pairs(mesh: SurfaceMesh, near_threshold: float) -> PairClassification:
    nt = mesh.num_triangles
    tris = mesh.triangles

    vertex_to_tris: dict[int, list[int]] = {}
    for t in range(nt):
        for g in tris[t]:
            vertex_to_tris.setdefault(int(g), []).append(t)

    adjacent: dict[tuple[int, int], set] = {}
    for g, owners in vertex_to_tris.items():
        for a_i in range(len(owners)):
            for b_i in range(a_i + 1, len(owners)):
                ta, tb = owners[a_i], owners[b_i]
                key = (min(ta, tb), max(ta, tb))
                adjacent.setdefault(key, set()).add(g)

    def perm_first(tri, first):
        k = int(np.where(tri == first)[0][0])
        return [k, (k + 1) % 3, (k + 2) % 3]

    edge_pairs, eperm_x, eperm_y = [], [], []
    vert_pairs, vperm_x, vperm_y = [], [], []
    for (ta, tb), shared in adjacent.items():
        if len(shared) == 2:
            ga, gb = sorted(shared)
            # slots: [ga, gb, other] on both sides, same edge direction
            ka = perm_first(tris[ta], ga)
            if tris[ta][ka[1]] != gb:
                ka = [ka[0], ka[2], ka[1]]
            kb = perm_first(tris[tb], ga)
            if tris[tb][kb[1]] != gb:
                kb = [kb[0], kb[2], kb[1]]
            edge_pairs.append((ta, tb))
            eperm_x.append(ka)
            eperm_y.append(kb)
        elif len(shared) == 1:
            g = next(iter(shared))
            vert_pairs.append((ta, tb))
            vperm_x.append(perm_first(tris[ta], g))
            vperm_y.append(perm_first(tris[tb], g))
        else:
            raise ValueError(
                f"triangles {ta}, {tb} share {len(shared)} vertices")

    pair_class = np.zeros((nt, nt), dtype=np.uint8)
    c = mesh.centroids
    d = mesh.diameters
    dist = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    separation = dist - 0.5 * (d[:, None] + d[None, :])
    near = separation < near_threshold * np.maximum(d[:, None], d[None, :])
    pair_class[near] = 1
    for ta, tb in list(adjacent):
        pair_class[ta, tb] = 2
        pair_class[tb, ta] = 2
    np.fill_diagonal(pair_class, 2)

    def as_i32(x, width):
        return (np.asarray(x, dtype=np.int32).reshape(-1, width)
                if len(x) else np.zeros((0, width), dtype=np.int32))

    return PairClassification(
        edge_pairs=as_i32(edge_pairs, 2),
        edge_perm_x=as_i32(eperm_x, 3),
        edge_perm_y=as_i32(eperm_y, 3),
        vertex_pairs=as_i32(vert_pairs, 2),
        vertex_perm_x=as_i32(vperm_x, 3),
        vertex_perm_y=as_i32(vperm_y, 3),
        pair_class=pair_class,
    )
