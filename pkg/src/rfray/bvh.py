"""Bounding-volume hierarchy over all scene triangles and exact ray queries.

Triangles of every mesh are concatenated in ``object_id`` order, so the global
triangle index doubles as the ``(object_id, triangle_index)`` tie-break key.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .scene import Scene

LEAF_SIZE = 4
EDGE_EPS = 1e-9
TIE_EPS = 1e-9
DEFAULT_T_MIN = 1e-6
_BOX_PAD = 1e-9
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Hit:
    distance_m: float
    object_id: str
    triangle_index: int
    geometric_normal: np.ndarray
    barycentric: tuple[float, float]
    global_index: int


@dataclass(frozen=True, eq=False)
class Bvh:
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray  # -1 marks a leaf
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    area2: np.ndarray
    normals: np.ndarray
    tri_object: np.ndarray
    tri_local: np.ndarray
    plane_rep: np.ndarray
    object_ids: tuple[str, ...]

    @property
    def n_triangles(self) -> int:
        return len(self.v0)

    @property
    def n_nodes(self) -> int:
        return len(self.node_min)

    def kernel_args(self) -> tuple:
        return (self.node_min, self.node_max, self.node_left, self.node_right,
                self.node_start, self.node_count, self.tri_order,
                self.v0, self.e1, self.e2, self.area2)

    def leaf_triangles(self) -> list[np.ndarray]:
        return [self.tri_order[s:s + c] for s, c, l in
                zip(self.node_start, self.node_count, self.node_left) if l < 0]

    def triangle_vertices(self, g: int) -> np.ndarray:
        return np.stack([self.v0[g], self.v0[g] + self.e1[g], self.v0[g] + self.e2[g]])


def _plane_representatives(normals, v0, tri_object) -> np.ndarray:
    """Map each triangle to the lowest-index triangle of the same object lying in the same plane."""
    rep = np.arange(len(normals), dtype=np.int64)
    seen: dict[tuple, int] = {}
    for g in range(len(normals)):
        n = normals[g]
        nz = np.flatnonzero(np.abs(n) > 1e-9)
        if len(nz) and n[nz[0]] < 0:
            n = -n
        off = float(n @ v0[g])
        key = (int(tri_object[g]), *np.round(np.r_[n, off] * 1e6).astype(np.int64).tolist())
        rep[g] = seen.setdefault(key, g)
    return rep


def build_bvh(scene: Scene) -> Bvh:
    """Median split on the longest centroid axis; equal keys ordered by triangle index."""
    meshes = sorted(scene.meshes, key=lambda m: m.object_id)
    object_ids = tuple(m.object_id for m in meshes)
    parts_v = [m.vertices[m.triangles] for m in meshes if m.n_triangles]
    tris = np.concatenate(parts_v) if parts_v else np.zeros((0, 3, 3))
    tri_object = np.concatenate(
        [np.full(m.n_triangles, i, dtype=np.int64) for i, m in enumerate(meshes)]
    ) if meshes else np.zeros(0, dtype=np.int64)
    tri_local = np.concatenate(
        [np.arange(m.n_triangles, dtype=np.int64) for m in meshes]
    ) if meshes else np.zeros(0, dtype=np.int64)

    v0 = np.ascontiguousarray(tris[:, 0])
    e1 = np.ascontiguousarray(tris[:, 1] - tris[:, 0])
    e2 = np.ascontiguousarray(tris[:, 2] - tris[:, 0])
    cross = np.cross(e1, e2).reshape(-1, 3)
    area2 = np.linalg.norm(cross, axis=1)
    normals = cross / np.where(area2 > 0, area2, 1.0)[:, None]
    plane_rep = _plane_representatives(normals, v0, tri_object)

    tri_min = tris.min(axis=1) if len(tris) else np.zeros((0, 3))
    tri_max = tris.max(axis=1) if len(tris) else np.zeros((0, 3))
    centroids = tris.mean(axis=1) if len(tris) else np.zeros((0, 3))

    order = np.arange(len(tris), dtype=np.int64)
    node_min, node_max, left, right, start, count = [], [], [], [], [], []

    def new_node(lo, hi):
        idx = order[lo:hi]
        if len(idx):
            node_min.append(tri_min[idx].min(axis=0) - _BOX_PAD)
            node_max.append(tri_max[idx].max(axis=0) + _BOX_PAD)
        else:
            node_min.append(np.full(3, np.inf))
            node_max.append(np.full(3, -np.inf))
        left.append(-1)
        right.append(-1)
        start.append(lo)
        count.append(hi - lo)
        return len(node_min) - 1

    root = new_node(0, len(tris))
    stack = [(root, 0, len(tris))]
    while stack:
        node, lo, hi = stack.pop()
        if hi - lo <= LEAF_SIZE:
            continue
        idx = order[lo:hi]
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order[lo:hi] = idx[np.lexsort((idx, c[:, axis]))]
        mid = lo + (hi - lo) // 2
        l_node = new_node(lo, mid)
        r_node = new_node(mid, hi)
        left[node], right[node] = l_node, r_node
        count[node] = 0
        stack.append((r_node, mid, hi))
        stack.append((l_node, lo, mid))

    return Bvh(
        node_min=np.asarray(node_min, dtype=np.float64).reshape(-1, 3),
        node_max=np.asarray(node_max, dtype=np.float64).reshape(-1, 3),
        node_left=np.asarray(left, dtype=np.int64),
        node_right=np.asarray(right, dtype=np.int64),
        node_start=np.asarray(start, dtype=np.int64),
        node_count=np.asarray(count, dtype=np.int64),
        tri_order=order,
        v0=v0, e1=e1, e2=e2, area2=area2,
        normals=np.ascontiguousarray(normals),
        tri_object=tri_object, tri_local=tri_local, plane_rep=plane_rep,
        object_ids=object_ids,
    )


@numba.njit(cache=True)
def ray_triangle(v0, e1, e2, area2, g, ox, oy, oz, dx, dy, dz):
    """Barycentric ray/triangle test with an edge tolerance; returns (t, u, v), t = inf on miss."""
    ax, ay, az = e1[g, 0], e1[g, 1], e1[g, 2]
    bx, by, bz = e2[g, 0], e2[g, 1], e2[g, 2]
    px = dy * bz - dz * by
    py = dz * bx - dx * bz
    pz = dx * by - dy * bx
    det = ax * px + ay * py + az * pz
    if abs(det) <= _PARALLEL_EPS * area2[g]:
        return np.inf, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - v0[g, 0]
    sy = oy - v0[g, 1]
    sz = oz - v0[g, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -EDGE_EPS or u > 1.0 + EDGE_EPS:
        return np.inf, 0.0, 0.0
    qx = sy * az - sz * ay
    qy = sz * ax - sx * az
    qz = sx * ay - sy * ax
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -EDGE_EPS or u + v > 1.0 + EDGE_EPS:
        return np.inf, 0.0, 0.0
    t = (bx * qx + by * qy + bz * qz) * inv
    return t, u, v


@numba.njit(cache=True)
def _slab(o, d, lo, hi, tnear, tfar):
    if d == 0.0:
        if o < lo or o > hi:
            return 1.0, 0.0
        return tnear, tfar
    inv = 1.0 / d
    t0 = (lo - o) * inv
    t1 = (hi - o) * inv
    if t0 > t1:
        t0, t1 = t1, t0
    return max(tnear, t0), min(tfar, t1)


@numba.njit(cache=True)
def intersect_kernel(geo, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Closest hit with t in (t_min, t_max]. Returns (t, global_tri, u, v); tri = -1 on miss."""
    node_min, node_max, node_left, node_right, node_start, node_count, tri_order, v0, e1, e2, area2 = geo
    best_t = np.inf
    best_g = -1
    best_u = 0.0
    best_v = 0.0
    if node_count.shape[0] == 0 or (node_left[0] < 0 and node_count[0] == 0):
        return best_t, best_g, best_u, best_v
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        n = stack[sp]
        limit = min(best_t + TIE_EPS, t_max)
        tn, tf = _slab(ox, dx, node_min[n, 0], node_max[n, 0], -np.inf, np.inf)
        tn, tf = _slab(oy, dy, node_min[n, 1], node_max[n, 1], tn, tf)
        tn, tf = _slab(oz, dz, node_min[n, 2], node_max[n, 2], tn, tf)
        if tn > tf or tf < t_min or tn > limit:
            continue
        if node_left[n] < 0:
            for k in range(node_start[n], node_start[n] + node_count[n]):
                g = tri_order[k]
                t, u, v = ray_triangle(v0, e1, e2, area2, g, ox, oy, oz, dx, dy, dz)
                if t == np.inf or t <= t_min or t > t_max:
                    continue
                if t < best_t - TIE_EPS or (t <= best_t + TIE_EPS and (best_g < 0 or g < best_g)):
                    best_t, best_g, best_u, best_v = t, g, u, v
        else:
            stack[sp] = node_right[n]
            sp += 1
            stack[sp] = node_left[n]
            sp += 1
    return best_t, best_g, best_u, best_v


@numba.njit(cache=True, parallel=True)
def intersect_batch_kernel(geo, origins, dirs, t_min, t_max):
    n = origins.shape[0]
    ts = np.empty(n)
    gs = np.empty(n, dtype=np.int64)
    uv = np.empty((n, 2))
    for i in numba.prange(n):
        t, g, u, v = intersect_kernel(geo, origins[i, 0], origins[i, 1], origins[i, 2],
                                      dirs[i, 0], dirs[i, 1], dirs[i, 2], t_min, t_max[i])
        ts[i] = t
        gs[i] = g
        uv[i, 0] = u
        uv[i, 1] = v
    return ts, gs, uv


def _make_hit(bvh: Bvh, t: float, g: int, u: float, v: float, direction) -> Hit:
    n = bvh.normals[g]
    if float(n @ direction) > 0:
        n = -n
    u = min(max(u, 0.0), 1.0)
    v = min(max(v, 0.0), 1.0 - u)
    return Hit(float(t), bvh.object_ids[bvh.tri_object[g]], int(bvh.tri_local[g]),
               n.copy(), (u, v), int(g))


def intersect(bvh: Bvh, origin, direction, t_min: float = DEFAULT_T_MIN,
              t_max: float = np.inf) -> Hit | None:
    """Closest hit strictly beyond ``t_min`` (and not beyond ``t_max``), or None."""
    if t_min < 0:
        raise ValueError("t_min must be >= 0")
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    t, g, u, v = intersect_kernel(bvh.kernel_args(), o[0], o[1], o[2], d[0], d[1], d[2],
                                  float(t_min), float(t_max))
    if g < 0:
        return None
    return _make_hit(bvh, t, g, u, v, d)


def intersect_many(bvh: Bvh, origins, directions, t_min: float = DEFAULT_T_MIN, t_max=None):
    """Vectorised closest-hit query. Returns ``(distance, global_triangle, barycentric)``."""
    o = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    tm = np.full(len(o), np.inf) if t_max is None else np.broadcast_to(
        np.asarray(t_max, dtype=np.float64), (len(o),)).copy()
    return intersect_batch_kernel(bvh.kernel_args(), o, d, float(t_min), tm)
