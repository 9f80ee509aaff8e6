"""Shooting-and-bouncing-rays tracer with a blended diffuse/specular material.

Rays are launched from every TX element into the cone subtended by the mesh
bounding sphere, reflected at each surface hit by blending a diffuse sample
with the mirror direction, and recorded as propagation paths whenever the
reflected ray's continuation enters an RX perception sphere with a clear
line of sight.

Determinism: every random draw is a pure function of
(seed, tx_index, ray_index, bounce_index, draw_index), records are laid out
by a count/fill two-pass scheme and finally sorted by
(tx, rx, ray, bounce), so output is byte-stable for any thread count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import prange

from . import bvh as _bvh
from .rng import stream_uniform
from .scene import AntennaArray, Scene

T_MIN = 1e-6  # m, self-intersection guard along any ray segment
_DIFFUSE_EPS = 1e-6  # |n + r| below this resamples r (antipodal degeneracy)
_BLEND_EPS = 1e-9  # |alpha*t_d + (1-alpha)*t_s| below this resamples t_d


@dataclass(frozen=True)
class MaterialParams:
    """Reflection behavior: alpha=0 pure specular, alpha=1 pure diffuse."""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class TraceConfig:
    rays_per_tx: int
    rng_seed: int
    max_bounces: int = 3
    perception_radius: float = 0.002  # m
    amplitude_spreading: bool = False  # record 1/d^2 weighting for synthesis

    def __post_init__(self):
        if self.rays_per_tx < 1:
            raise ValueError("rays_per_tx must be >= 1")
        if self.max_bounces < 1:
            raise ValueError("max_bounces must be >= 1")
        if self.perception_radius <= 0.0:
            raise ValueError("perception_radius must be > 0")
        if not (-(2**63) <= int(self.rng_seed) < 2**64):
            raise ValueError("rng_seed must fit in 64 bits")


def default_perception_radius(array: AntennaArray) -> float:
    """Half the minimum RX pitch; avoids double-counting adjacent spheres."""
    pitch = array.min_rx_pitch()
    if np.isfinite(pitch):
        return 0.5 * pitch
    return 0.005


@dataclass(frozen=True)
class PropagationPath:
    """One captured TX -> (bounces) -> RX path."""

    tx_index: int
    rx_index: int
    hit_points: np.ndarray  # (bounce_count, 3) scatter points, in bounce order
    total_length: float  # m, |tx-p1| + sum |p_k+1 - p_k| + |rx-p_last|
    bounce_count: int
    ray_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.hit_points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "hit_points", pts)
        if self.bounce_count != len(pts) or self.bounce_count < 1:
            raise ValueError("bounce_count must equal len(hit_points) >= 1")
        if not (self.total_length > 0.0):
            raise ValueError("total_length must be positive")


@dataclass(frozen=True)
class PathSet:
    """All captured paths of one trace, sorted by (tx, rx, ray, bounce).

    Stored as structure-of-arrays; `path(i)` materializes a single
    PropagationPath view for inspection.
    """

    tx_index: np.ndarray  # (P,) int32
    rx_index: np.ndarray  # (P,) int32
    ray_index: np.ndarray  # (P,) int32
    bounce_count: np.ndarray  # (P,) int32
    total_length: np.ndarray  # (P,) float64
    hit_offsets: np.ndarray  # (P+1,) int64 into hit_points
    hit_points: np.ndarray  # (H, 3) float64
    n_tx: int
    n_rx: int
    config: TraceConfig
    material: MaterialParams
    _channel_key: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.tx_index.size:
            if int(self.tx_index.max()) >= self.n_tx or int(self.rx_index.max()) >= self.n_rx:
                raise ValueError("path channel index out of range for the array")
        key = self.tx_index.astype(np.int64) * self.n_rx + self.rx_index.astype(np.int64)
        object.__setattr__(self, "_channel_key", key)

    def __len__(self) -> int:
        return len(self.total_length)

    @property
    def n_paths(self) -> int:
        return len(self)

    @property
    def zero_paths(self) -> bool:
        """Metadata flag: the trace captured nothing (a valid outcome)."""
        return len(self) == 0

    def path(self, i: int) -> PropagationPath:
        lo, hi = self.hit_offsets[i], self.hit_offsets[i + 1]
        return PropagationPath(
            tx_index=int(self.tx_index[i]),
            rx_index=int(self.rx_index[i]),
            hit_points=self.hit_points[lo:hi].copy(),
            total_length=float(self.total_length[i]),
            bounce_count=int(self.bounce_count[i]),
            ray_index=int(self.ray_index[i]),
        )

    def __iter__(self):
        return (self.path(i) for i in range(len(self)))

    def channel_slice(self, tx: int, rx: int) -> slice:
        """Contiguous slice of records for channel (tx, rx)."""
        key = tx * self.n_rx + rx
        lo = int(np.searchsorted(self._channel_key, key, side="left"))
        hi = int(np.searchsorted(self._channel_key, key, side="right"))
        return slice(lo, hi)

    def channel_lengths(self, tx: int, rx: int) -> np.ndarray:
        return self.total_length[self.channel_slice(tx, rx)]

    def channel_counts(self) -> np.ndarray:
        """(n_tx, n_rx) int64 matrix of captured paths per channel."""
        counts = np.bincount(self._channel_key, minlength=self.n_tx * self.n_rx)
        return counts.reshape(self.n_tx, self.n_rx)

    def recomputed_lengths(self, array: AntennaArray) -> np.ndarray:
        """Re-derive every total_length from the stored hit chains."""
        out = np.empty(len(self), dtype=np.float64)
        for i in range(len(self)):
            lo, hi = self.hit_offsets[i], self.hit_offsets[i + 1]
            pts = self.hit_points[lo:hi]
            d = np.linalg.norm(pts[0] - array.tx_positions[self.tx_index[i]])
            d += np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
            d += np.linalg.norm(array.rx_positions[self.rx_index[i]] - pts[-1])
            out[i] = d
        return out


# ---------------------------------------------------------------------------
# Material model (reference API)
# ---------------------------------------------------------------------------

def _check_unit(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError(f"{name} must be unit length (|{name}| = {np.linalg.norm(v):.12f})")
    return v


def specular_direction(t_i: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror reflection t_i - 2 (t_i . n) n for a front-face incident ray."""
    t_i = _check_unit(t_i, "t_i")
    n = _check_unit(n, "n")
    d = float(t_i @ n)
    if d >= 0.0:
        raise ValueError("back-face or grazing incidence: t_i . n must be < 0")
    return t_i - 2.0 * d * n


def diffuse_direction(n: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Diffuse sample normalize(n + r), r uniform on the unit sphere.

    Resamples r whenever |n + r| falls below 1e-6 so the antipodal
    degeneracy can never produce a NaN.  The result lies in the front
    hemisphere and is cosine-weighted around n.
    """
    n = _check_unit(n, "n")
    while True:
        z = 2.0 * rng.random() - 1.0
        phi = 2.0 * np.pi * rng.random()
        s = np.sqrt(max(0.0, 1.0 - z * z))
        r = np.array([s * np.cos(phi), s * np.sin(phi), z])
        blend = n + r
        norm = np.linalg.norm(blend)
        if norm >= _DIFFUSE_EPS:
            return blend / norm


def mix_direction(material: MaterialParams | float, t_d: np.ndarray, t_s: np.ndarray) -> np.ndarray:
    """Blend alpha * t_d + (1 - alpha) * t_s, renormalized to unit length.

    The raw blend is not unit length, so the result is normalized; the
    alpha = 0 and alpha = 1 limits return t_s and t_d bit-for-bit.
    """
    alpha = material.alpha if isinstance(material, MaterialParams) else float(material)
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    t_d = _check_unit(t_d, "t_d")
    t_s = _check_unit(t_s, "t_s")
    if alpha == 0.0:
        return t_s
    if alpha == 1.0:
        return t_d
    blend = alpha * t_d + (1.0 - alpha) * t_s
    norm = np.linalg.norm(blend)
    if norm < _BLEND_EPS:
        raise ValueError("degenerate blend (t_d opposite t_s at alpha=0.5); resample t_d")
    return blend / norm


# ---------------------------------------------------------------------------
# Tracing kernel
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always", error_model="numpy")
def _sample_outgoing(alpha, dx, dy, dz, nx, ny, nz, seed, tx, ray, bounce):
    """Outgoing direction at a hit; n must already face the incoming ray."""
    sdot = dx * nx + dy * ny + dz * nz
    sx = dx - 2.0 * sdot * nx
    sy = dy - 2.0 * sdot * ny
    sz = dz - 2.0 * sdot * nz
    if alpha == 0.0:
        return sx, sy, sz
    k = numba.uint64(0)
    while True:
        u = stream_uniform(seed, tx, ray, bounce, k)
        v = stream_uniform(seed, tx, ray, bounce, k + numba.uint64(1))
        k += numba.uint64(2)
        z = 2.0 * u - 1.0
        s = np.sqrt(max(0.0, 1.0 - z * z))
        phi = 2.0 * np.pi * v
        rx_ = s * np.cos(phi)
        ry_ = s * np.sin(phi)
        rz_ = z
        tdx = nx + rx_
        tdy = ny + ry_
        tdz = nz + rz_
        norm = np.sqrt(tdx * tdx + tdy * tdy + tdz * tdz)
        if norm < _DIFFUSE_EPS:
            continue
        tdx /= norm
        tdy /= norm
        tdz /= norm
        if alpha == 1.0:
            return tdx, tdy, tdz
        bx = alpha * tdx + (1.0 - alpha) * sx
        by = alpha * tdy + (1.0 - alpha) * sy
        bz = alpha * tdz + (1.0 - alpha) * sz
        bnorm = np.sqrt(bx * bx + by * by + bz * bz)
        if bnorm < _BLEND_EPS:
            continue
        return bx / bnorm, by / bnorm, bz / bnorm


@numba.njit(cache=True, parallel=True, error_model="numpy")
def _trace_kernel(
    node_min, node_max, node_left, node_right, node_first, node_count,
    tri_v0, tri_e1, tri_e2, tri_normal,
    tx_pos, rx_pos,
    sphere_center, sphere_radius,
    alpha, seed, rays_per_tx, max_bounces, radius,
    write,
    rec_offsets, pts_offsets,
    rec_rx, rec_ray, rec_bounce, rec_len, rec_pts,
    out_counts, out_pts_counts,
):
    n_tx = tx_pos.shape[0]
    n_rx = rx_pos.shape[0]
    n_work = n_tx * rays_per_tx
    radius2 = radius * radius

    for w in prange(n_work):
        tx = w // rays_per_tx
        ray = w % rays_per_tx
        utx = numba.uint64(tx)
        uray = numba.uint64(ray)

        ox = tx_pos[tx, 0]
        oy = tx_pos[tx, 1]
        oz = tx_pos[tx, 2]

        # launch direction: uniform over the cone subtended by the bounding sphere
        wx = sphere_center[0] - ox
        wy = sphere_center[1] - oy
        wz = sphere_center[2] - oz
        dist_c = np.sqrt(wx * wx + wy * wy + wz * wz)
        u0 = stream_uniform(seed, utx, uray, numba.uint64(0), numba.uint64(0))
        u1 = stream_uniform(seed, utx, uray, numba.uint64(0), numba.uint64(1))
        if dist_c <= sphere_radius or dist_c == 0.0:
            cos_max = -1.0  # TX inside the bounding sphere: sample all directions
        else:
            sin_t = sphere_radius / dist_c
            cos_max = np.sqrt(1.0 - sin_t * sin_t)
        cos_th = 1.0 - u0 * (1.0 - cos_max)
        sin_th = np.sqrt(max(0.0, 1.0 - cos_th * cos_th))
        phi = 2.0 * np.pi * u1
        if dist_c == 0.0:
            wxn, wyn, wzn = 0.0, 0.0, 1.0
        else:
            wxn, wyn, wzn = wx / dist_c, wy / dist_c, wz / dist_c
        if abs(wxn) > 0.9:
            ax, ay, az = 0.0, 1.0, 0.0
        else:
            ax, ay, az = 1.0, 0.0, 0.0
        ux = wyn * az - wzn * ay
        uy = wzn * ax - wxn * az
        uz = wxn * ay - wyn * ax
        unorm = np.sqrt(ux * ux + uy * uy + uz * uz)
        ux /= unorm
        uy /= unorm
        uz /= unorm
        vx = wyn * uz - wzn * uy
        vy = wzn * ux - wxn * uz
        vz = wxn * uy - wyn * ux
        dx = sin_th * np.cos(phi) * ux + sin_th * np.sin(phi) * vx + cos_th * wxn
        dy = sin_th * np.cos(phi) * uy + sin_th * np.sin(phi) * vy + cos_th * wyn
        dz = sin_th * np.cos(phi) * uz + sin_th * np.sin(phi) * vz + cos_th * wzn

        chain = np.empty((max_bounces, 3), dtype=np.float64)
        n_rec = 0
        n_pts = 0
        wcur = rec_offsets[w]
        pcur = pts_offsets[w]

        t_hit, slot = _bvh.closest_hit(
            node_min, node_max, node_left, node_right, node_first, node_count,
            tri_v0, tri_e1, tri_e2, ox, oy, oz, dx, dy, dz, T_MIN,
        )
        path_len = 0.0
        bounce = 1
        while slot >= 0 and bounce <= max_bounces:
            px = ox + t_hit * dx
            py = oy + t_hit * dy
            pz = oz + t_hit * dz
            path_len += t_hit
            chain[bounce - 1, 0] = px
            chain[bounce - 1, 1] = py
            chain[bounce - 1, 2] = pz

            nx = tri_normal[slot, 0]
            ny = tri_normal[slot, 1]
            nz = tri_normal[slot, 2]
            if dx * nx + dy * ny + dz * nz > 0.0:
                nx, ny, nz = -nx, -ny, -nz  # facets reflect on both sides

            odx, ody, odz = _sample_outgoing(
                alpha, dx, dy, dz, nx, ny, nz, seed, utx, uray, numba.uint64(bounce)
            )

            t_next, slot_next = _bvh.closest_hit(
                node_min, node_max, node_left, node_right, node_first, node_count,
                tri_v0, tri_e1, tri_e2, px, py, pz, odx, ody, odz, T_MIN,
            )

            for r in range(n_rx):
                gx = rx_pos[r, 0] - px
                gy = rx_pos[r, 1] - py
                gz = rx_pos[r, 2] - pz
                proj = gx * odx + gy * ody + gz * odz
                if proj <= T_MIN:
                    continue
                g2 = gx * gx + gy * gy + gz * gz
                miss2 = g2 - proj * proj
                if miss2 > radius2:
                    continue
                entry = proj - np.sqrt(max(0.0, radius2 - miss2))
                if entry >= t_next:
                    continue  # the continuation bounces before reaching the sphere
                dist = np.sqrt(g2)
                if dist > T_MIN:
                    sx_ = gx / dist
                    sy_ = gy / dist
                    sz_ = gz / dist
                    if _bvh.any_hit(
                        node_min, node_max, node_left, node_right, node_first, node_count,
                        tri_v0, tri_e1, tri_e2,
                        px, py, pz, sx_, sy_, sz_, T_MIN, dist - 1e-9,
                    ):
                        continue  # line of sight to the RX is blocked
                if write:
                    rec_rx[wcur] = r
                    rec_ray[wcur] = ray
                    rec_bounce[wcur] = bounce
                    rec_len[wcur] = path_len + dist
                    for b in range(bounce):
                        rec_pts[pcur + b, 0] = chain[b, 0]
                        rec_pts[pcur + b, 1] = chain[b, 1]
                        rec_pts[pcur + b, 2] = chain[b, 2]
                    wcur += 1
                    pcur += bounce
                n_rec += 1
                n_pts += bounce

            ox, oy, oz = px, py, pz
            dx, dy, dz = odx, ody, odz
            t_hit, slot = t_next, slot_next
            bounce += 1

        if not write:
            out_counts[w] = n_rec
            out_pts_counts[w] = n_pts


def trace_paths(scene: Scene, config: TraceConfig) -> PathSet:
    """Trace the scene and collect every captured propagation path.

    Bit-reproducible for a fixed config regardless of the numba thread
    count.  Zero captured paths is a valid outcome and is flagged on the
    returned PathSet rather than raised.
    """
    mesh = scene.mesh
    array = scene.array
    aperture = array.aperture()
    if aperture > 0.0 and config.perception_radius > 0.1 * aperture:
        warnings.warn(
            f"perception_radius {config.perception_radius:.4g} m exceeds 10% of the "
            f"array aperture {aperture:.4g} m; adjacent channels may double-count",
            stacklevel=2,
        )

    tree = _bvh.build_bvh(mesh.vertices, mesh.triangles, mesh.normals)
    center, radius = mesh.bounding_sphere()
    seed = np.uint64(int(config.rng_seed) & 0xFFFFFFFFFFFFFFFF)

    n_work = array.n_tx * config.rays_per_tx
    counts = np.zeros(n_work, dtype=np.int64)
    pts_counts = np.zeros(n_work, dtype=np.int64)
    zero_offsets = np.zeros(n_work + 1, dtype=np.int64)
    empty_i32 = np.empty(0, dtype=np.int32)
    empty_f64 = np.empty(0, dtype=np.float64)
    empty_pts = np.empty((0, 3), dtype=np.float64)
    kernel_args = tree.kernel_args() + (
        tree.tri_normal,
        array.tx_positions,
        array.rx_positions,
        center,
        radius,
        float(scene.material.alpha),
        seed,
        config.rays_per_tx,
        config.max_bounces,
        float(config.perception_radius),
    )
    _trace_kernel(
        *kernel_args,
        False,
        zero_offsets, zero_offsets,
        empty_i32, empty_i32, empty_i32, empty_f64, empty_pts,
        counts, pts_counts,
    )

    rec_offsets = np.zeros(n_work + 1, dtype=np.int64)
    np.cumsum(counts, out=rec_offsets[1:])
    pts_offsets = np.zeros(n_work + 1, dtype=np.int64)
    np.cumsum(pts_counts, out=pts_offsets[1:])
    n_rec = int(rec_offsets[-1])
    n_pts = int(pts_offsets[-1])

    rec_rx = np.empty(n_rec, dtype=np.int32)
    rec_ray = np.empty(n_rec, dtype=np.int32)
    rec_bounce = np.empty(n_rec, dtype=np.int32)
    rec_len = np.empty(n_rec, dtype=np.float64)
    rec_pts = np.empty((n_pts, 3), dtype=np.float64)
    _trace_kernel(
        *kernel_args,
        True,
        rec_offsets, pts_offsets,
        rec_rx, rec_ray, rec_bounce, rec_len, rec_pts,
        counts, pts_counts,
    )

    # tx of each record follows from the work-item layout
    if n_rec:
        per_tx = np.add.reduceat(counts, np.arange(0, n_work, config.rays_per_tx))
        rec_tx = np.repeat(np.arange(array.n_tx, dtype=np.int32), per_tx)
    else:
        rec_tx = np.empty(0, dtype=np.int32)

    # canonical order: (tx, rx, ray, bounce); keys are unique per record
    perm = np.lexsort((rec_bounce, rec_ray, rec_rx, rec_tx))
    starts_unsorted = np.concatenate(([0], np.cumsum(rec_bounce, dtype=np.int64)))[:-1]
    rec_tx = rec_tx[perm]
    rec_rx = rec_rx[perm]
    rec_ray = rec_ray[perm]
    rec_len = rec_len[perm]
    rec_bounce = rec_bounce[perm]
    if n_rec:
        lengths = rec_bounce.astype(np.int64)
        hit_offsets = np.concatenate(([0], np.cumsum(lengths)))
        gather = np.repeat(starts_unsorted[perm], lengths) + (
            np.arange(n_pts, dtype=np.int64) - np.repeat(hit_offsets[:-1], lengths)
        )
        hit_points = rec_pts[gather]
    else:
        hit_points = np.empty((0, 3), dtype=np.float64)
        hit_offsets = np.zeros(1, dtype=np.int64)

    return PathSet(
        tx_index=rec_tx,
        rx_index=rec_rx,
        ray_index=rec_ray,
        bounce_count=rec_bounce,
        total_length=rec_len,
        hit_offsets=hit_offsets,
        hit_points=hit_points,
        n_tx=array.n_tx,
        n_rx=array.n_rx,
        config=config,
        material=scene.material,
    )


# ---------------------------------------------------------------------------
# Material statistics
# ---------------------------------------------------------------------------

@numba.njit(cache=True, parallel=True, error_model="numpy")
def _outgoing_samples_kernel(alpha, dxi, dyi, dzi, nx, ny, nz, seed, count, out):
    for i in prange(count):
        ox, oy, oz = _sample_outgoing(
            alpha, dxi, dyi, dzi, nx, ny, nz, seed, numba.uint64(0), numba.uint64(i), numba.uint64(1)
        )
        out[i, 0] = ox
        out[i, 1] = oy
        out[i, 2] = oz


def sample_outgoing_directions(
    alpha: float,
    incident: np.ndarray,
    normal: np.ndarray,
    count: int,
    seed: int,
) -> np.ndarray:
    """Draw `count` outgoing directions at a single flat-plate hit.

    Uses the same jitted sampling code the tracer runs per bounce, so the
    statistics measured here are the tracer's statistics.
    """
    incident = _check_unit(incident, "incident")
    normal = _check_unit(normal, "normal")
    if float(incident @ normal) >= 0.0:
        raise ValueError("incident must approach the front face (incident . normal < 0)")
    out = np.empty((count, 3), dtype=np.float64)
    _outgoing_samples_kernel(
        float(alpha),
        incident[0], incident[1], incident[2],
        normal[0], normal[1], normal[2],
        np.uint64(seed), count, out,
    )
    return out


def angular_spread(directions: np.ndarray) -> tuple[float, float]:
    """Std of the angle to the mean direction, with its standard error.

    The standard error uses the delta method on the sample moments of the
    angle, valid for the non-normal angle distributions the material model
    produces.
    """
    mean = directions.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ValueError("mean direction vanished; spread undefined")
    mean /= norm
    cosang = np.clip(directions @ mean, -1.0, 1.0)
    angles = np.arccos(cosang)
    n = len(angles)
    centered = angles - angles.mean()
    m2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    std = np.sqrt(m2)
    if std == 0.0:
        return 0.0, 0.0
    var_of_var = max(m4 - m2 * m2, 0.0) / n
    se = 0.5 * np.sqrt(var_of_var) / std
    return float(std), float(se)
