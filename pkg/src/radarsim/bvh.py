"""Axis-aligned BVH over mesh triangles with numba traversal kernels.

Median-split construction over triangle centroids (widest axis, falling back
to an index split when centroids coincide) keeps the tree depth bounded by
ceil(log2 T) + O(1); traversal uses a fixed 64-entry stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_LEAF_SIZE = 4
_STACK_DEPTH = 64


@dataclass(frozen=True)
class Bvh:
    """Flattened BVH nodes plus triangle data packed in traversal order."""

    node_min: np.ndarray  # (N, 3) float64
    node_max: np.ndarray  # (N, 3)
    node_left: np.ndarray  # (N,) int32, child index or -1 for leaves
    node_right: np.ndarray  # (N,) int32
    node_first: np.ndarray  # (N,) int32, first triangle slot of a leaf
    node_count: np.ndarray  # (N,) int32, triangles in a leaf, 0 for inner
    tri_v0: np.ndarray  # (T, 3) float64, per-slot first vertex
    tri_e1: np.ndarray  # (T, 3) edge vertex1 - vertex0
    tri_e2: np.ndarray  # (T, 3) edge vertex2 - vertex0
    tri_normal: np.ndarray  # (T, 3) unit facet normal (winding order)
    tri_id: np.ndarray  # (T,) int32, original triangle index per slot

    def kernel_args(self):
        """Arrays in the order the numba kernels expect them."""
        return (
            self.node_min,
            self.node_max,
            self.node_left,
            self.node_right,
            self.node_first,
            self.node_count,
            self.tri_v0,
            self.tri_e1,
            self.tri_e2,
        )


def build_bvh(vertices: np.ndarray, triangles: np.ndarray, normals: np.ndarray) -> Bvh:
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    tri_lo = np.minimum(np.minimum(v0, v1), v2)
    tri_hi = np.maximum(np.maximum(v0, v1), v2)
    centroids = (tri_lo + tri_hi) * 0.5

    order = np.arange(len(triangles), dtype=np.int32)
    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_first: list[int] = []
    node_count: list[int] = []

    def new_node(lo, hi) -> int:
        node_min.append(lo)
        node_max.append(hi)
        node_left.append(-1)
        node_right.append(-1)
        node_first.append(0)
        node_count.append(0)
        return len(node_min) - 1

    # iterative build: stack of (node_index, start, end) over `order`
    root_lo = tri_lo.min(axis=0)
    root_hi = tri_hi.max(axis=0)
    stack = [(new_node(root_lo, root_hi), 0, len(triangles))]
    while stack:
        node, start, end = stack.pop()
        if end - start <= _LEAF_SIZE:
            node_first[node] = start
            node_count[node] = end - start
            continue
        seg = order[start:end]
        cen = centroids[seg]
        extent = cen.max(axis=0) - cen.min(axis=0)
        axis = int(np.argmax(extent))
        mid = (end - start) // 2
        if extent[axis] <= 0.0:
            # coincident centroids: split by index to guarantee progress
            pass
        else:
            part = np.argpartition(cen[:, axis], mid)
            order[start:end] = seg[part]
        lseg = order[start : start + mid]
        rseg = order[start + mid : end]
        left = new_node(tri_lo[lseg].min(axis=0), tri_hi[lseg].max(axis=0))
        right = new_node(tri_lo[rseg].min(axis=0), tri_hi[rseg].max(axis=0))
        node_left[node] = left
        node_right[node] = right
        stack.append((right, start + mid, end))
        stack.append((left, start, start + mid))

    perm = order
    bvh = Bvh(
        node_min=np.ascontiguousarray(node_min, dtype=np.float64),
        node_max=np.ascontiguousarray(node_max, dtype=np.float64),
        node_left=np.asarray(node_left, dtype=np.int32),
        node_right=np.asarray(node_right, dtype=np.int32),
        node_first=np.asarray(node_first, dtype=np.int32),
        node_count=np.asarray(node_count, dtype=np.int32),
        tri_v0=np.ascontiguousarray(v0[perm]),
        tri_e1=np.ascontiguousarray(v1[perm] - v0[perm]),
        tri_e2=np.ascontiguousarray(v2[perm] - v0[perm]),
        tri_normal=np.ascontiguousarray(normals[perm]),
        tri_id=perm.astype(np.int32),
    )
    return bvh


@numba.njit(cache=True, inline="always", error_model="numpy")
def _slab_hit(lo, hi, ox, oy, oz, ix, iy, iz, t_max):
    """Ray/AABB slab test; inverse direction components may be +-inf."""
    t1 = (lo[0] - ox) * ix
    t2 = (hi[0] - ox) * ix
    tmin = min(t1, t2)
    tmax = max(t1, t2)
    t1 = (lo[1] - oy) * iy
    t2 = (hi[1] - oy) * iy
    tmin = max(tmin, min(t1, t2))
    tmax = min(tmax, max(t1, t2))
    t1 = (lo[2] - oz) * iz
    t2 = (hi[2] - oz) * iz
    tmin = max(tmin, min(t1, t2))
    tmax = min(tmax, max(t1, t2))
    return tmax >= max(tmin, 0.0) and tmin <= t_max


@numba.njit(cache=True, inline="always", error_model="numpy")
def _tri_hit(v0, e1, e2, ox, oy, oz, dx, dy, dz):
    """Moller-Trumbore; returns hit distance t or -1.0 (two-sided)."""
    px = dy * e2[2] - dz * e2[1]
    py = dz * e2[0] - dx * e2[2]
    pz = dx * e2[1] - dy * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if abs(det) < 1e-14:
        return -1.0
    inv = 1.0 / det
    tx = ox - v0[0]
    ty = oy - v0[1]
    tz = oz - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0
    qx = ty * e1[2] - tz * e1[1]
    qy = tz * e1[0] - tx * e1[2]
    qz = tx * e1[1] - ty * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0
    return (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv


@numba.njit(cache=True, error_model="numpy")
def closest_hit(
    node_min, node_max, node_left, node_right, node_first, node_count,
    tri_v0, tri_e1, tri_e2,
    ox, oy, oz, dx, dy, dz, t_min,
):
    """Nearest intersection with t > t_min; returns (t, slot) or (inf, -1)."""
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    best_t = np.inf
    best_slot = -1
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_hit(node_min[node], node_max[node], ox, oy, oz, ix, iy, iz, best_t):
            continue
        count = node_count[node]
        if node_left[node] < 0:
            for s in range(node_first[node], node_first[node] + count):
                t = _tri_hit(tri_v0[s], tri_e1[s], tri_e2[s], ox, oy, oz, dx, dy, dz)
                if t > t_min and t < best_t:
                    best_t = t
                    best_slot = s
        else:
            stack[top] = node_left[node]
            stack[top + 1] = node_right[node]
            top += 2
    return best_t, best_slot


@numba.njit(cache=True, error_model="numpy")
def any_hit(
    node_min, node_max, node_left, node_right, node_first, node_count,
    tri_v0, tri_e1, tri_e2,
    ox, oy, oz, dx, dy, dz, t_min, t_max,
):
    """True when any triangle intersects the ray with t in (t_min, t_max)."""
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_hit(node_min[node], node_max[node], ox, oy, oz, ix, iy, iz, t_max):
            continue
        count = node_count[node]
        if node_left[node] < 0:
            for s in range(node_first[node], node_first[node] + count):
                t = _tri_hit(tri_v0[s], tri_e1[s], tri_e2[s], ox, oy, oz, dx, dy, dz)
                if t > t_min and t < t_max:
                    return True
        else:
            stack[top] = node_left[node]
            stack[top + 1] = node_right[node]
            top += 2
    return False
