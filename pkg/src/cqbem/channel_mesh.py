"""Bundled watertight test geometry: a box with a rectangular channel.

The halfpipe-style scatterer is a box of the given length/width/height
with a rectangular channel cut into its top along the full length.  The
surface is extracted from an axis-aligned voxelization, which guarantees
a closed 2-manifold triangulation at any resolution; the mesh loader
fixes the global orientation.

Dimensions default to length 1, width 0.5, height 0.5, channel width
0.25 and channel depth 0.375, centered so the solid occupies
x in [-1/2, 1/2], y in [-1/4, 1/4], z in [0, 1/2].
"""

from __future__ import annotations

import numpy as np

from .mesh import SurfaceMesh, build_mesh


def build_channel_mesh(pitch: float = 1.0 / 16.0, length: float = 1.0,
                       width: float = 0.5, height: float = 0.5,
                       channel_width: float = 0.25,
                       channel_depth: float = 0.375) -> SurfaceMesh:
    """Voxel-extracted triangulated surface of the channel solid."""
    nx = max(1, round(length / pitch))
    ny = max(1, round(width / pitch))
    nz = max(1, round(height / pitch))
    hx, hy, hz = length / nx, width / ny, height / nz

    solid = np.ones((nx, ny, nz), dtype=bool)
    y0 = (width - channel_width) / 2.0
    y1 = (width + channel_width) / 2.0
    z0 = height - channel_depth
    yc = (np.arange(ny) + 0.5) * hy
    zc = (np.arange(nz) + 0.5) * hz
    in_channel = (yc[:, None] > y0) & (yc[:, None] < y1) & (zc[None, :] > z0)
    solid[:, in_channel] = False

    padded = np.zeros((nx + 2, ny + 2, nz + 2), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = solid

    verts: dict[tuple, int] = {}
    tris: list[list[int]] = []

    def vid(i, j, k):
        key = (i, j, k)
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    def emit(quad, flip):
        a, b, c, d = (vid(*p) for p in quad)
        if flip:
            tris.append([a, c, b])
            tris.append([a, d, c])
        else:
            tris.append([a, b, c])
            tris.append([a, c, d])

    for i in range(nx + 1):
        for j in range(ny):
            for k in range(nz):
                left = padded[i, j + 1, k + 1]
                right = padded[i + 1, j + 1, k + 1]
                if left != right:
                    emit([(i, j, k), (i, j + 1, k), (i, j + 1, k + 1),
                          (i, j, k + 1)], flip=right)
    for j in range(ny + 1):
        for i in range(nx):
            for k in range(nz):
                below = padded[i + 1, j, k + 1]
                above = padded[i + 1, j + 1, k + 1]
                if below != above:
                    emit([(i, j, k), (i, j, k + 1), (i + 1, j, k + 1),
                          (i + 1, j, k)], flip=above)
    for k in range(nz + 1):
        for i in range(nx):
            for j in range(ny):
                back = padded[i + 1, j + 1, k]
                front = padded[i + 1, j + 1, k + 1]
                if back != front:
                    emit([(i, j, k), (i + 1, j, k), (i + 1, j + 1, k),
                          (i, j + 1, k)], flip=front)

    coords = np.empty((len(verts), 3))
    for (i, j, k), idx in verts.items():
        coords[idx] = (i * hx - length / 2.0, j * hy - width / 2.0, k * hz)
    return build_mesh(coords, np.asarray(tris, dtype=np.int64))


def write_channel_off(path, **kwargs) -> SurfaceMesh:
    """Generate the channel mesh and write it as an OFF file."""
    from .mesh import save_mesh

    mesh = build_channel_mesh(**kwargs)
    save_mesh(path, mesh)
    return mesh
