"""Shooting-and-bouncing-rays path extraction.

Rays leave the transmitter on a rotated Fibonacci lattice and bounce through the
scene (specular reflection plus optional single-pass slab transmission) until
they exceed ``max_depth`` interactions or their running received power falls
below ``min_power_dbm``. A ray that passes within the reception sphere
``rx_sphere_gamma * L * sqrt(4 pi / num_rays)`` of a receiver yields a candidate
interaction signature. Every distinct signature is then rebuilt exactly with
the image method and re-validated against the geometry, so the emitted path
lengths, angles and amplitudes carry no capture-radius bias.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy.spatial.transform import Rotation

from .bvh import DEFAULT_T_MIN, Bvh, intersect_kernel
from .constants import SPEED_OF_LIGHT
from .materials import (
    RadioMaterial,
    combine_polarizations,
    complex_permittivity,
    interface_coeffs,
    polarization_code,
    slab_coeffs,
)
from .scene import Receiver, Scene, Transmitter

REFLECTION = "reflection"
TRANSMISSION = "transmission"
_KIND_CODE = {REFLECTION: 0, TRANSMISSION: 1}
_KIND_NAME = (REFLECTION, TRANSMISSION)
_KIND_TAG = ("R", "T")
_GEOM_TOL = 1e-6
_BLOCK = 256


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceConfig:
    num_rays: int = 100_000
    max_depth: int = 6
    min_power_dbm: float = -130.0
    max_paths: int = 100
    rx_sphere_gamma: float = 1.0
    enable_transmission: bool = True
    seed: int = 0
    polarization: str = "average"
    coplanar_merge: bool = True

    def validate(self) -> "TraceConfig":
        if int(self.num_rays) < 1:
            raise TraceError("num_rays must be >= 1")
        if int(self.max_depth) < 0:
            raise TraceError("max_depth must be >= 0")
        if int(self.max_paths) < 1:
            raise TraceError("max_paths must be >= 1")
        if not self.rx_sphere_gamma > 0:
            raise TraceError("rx_sphere_gamma must be > 0")
        if not math.isfinite(self.min_power_dbm):
            raise TraceError("min_power_dbm must be finite")
        polarization_code(self.polarization)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Interaction:
    kind: str
    object_id: str
    triangle_index: int
    point: tuple[float, float, float]
    theta_i: float
    coefficient: complex


@dataclass(frozen=True)
class PathRecord:
    tx_id: str
    rx_id: str
    length_m: float
    delay_s: float
    amplitude: complex
    phase_rad: float
    aoa_azimuth_deg: float
    aoa_zenith_deg: float
    aod_azimuth_deg: float
    aod_zenith_deg: float
    interactions: tuple[Interaction, ...]
    is_los: bool
    signature: str
    power_dbm: float

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class PathSet:
    tx_id: str
    rx_id: str
    paths: tuple[PathRecord, ...]
    config: TraceConfig = field(default_factory=TraceConfig)
    frequency_hz: float = 0.0

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def powers(self) -> np.ndarray:
        return np.array([p.power for p in self.paths])

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay_s for p in self.paths])


# --- launch lattice ----------------------------------------------------------


def launch_directions(n: int, seed: int = 0) -> np.ndarray:
    """``n`` near-uniform unit vectors: a Fibonacci lattice under a seed-derived rotation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * (math.pi * (3.0 - math.sqrt(5.0)))
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    rot = Rotation.random(random_state=np.random.default_rng(seed))
    pts = rot.apply(pts)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


# --- compiled ray walk -------------------------------------------------------


@numba.njit(cache=True)
def _walk_ray(geo, normals, tri_eps, tri_thick, tri_key, ox, oy, oz, dx0, dy0, dz0,
              rx_pos, max_depth, k0, lam, alpha_sep, gamma, floor_lin, enable_tx, pol,
              t_min, write, pos, out_rx, out_len, out_sig,
              st_o, st_d, st_len, st_pow, st_depth, st_sig):
    n_rx = rx_pos.shape[0]
    st_o[0, 0], st_o[0, 1], st_o[0, 2] = ox, oy, oz
    st_d[0, 0], st_d[0, 1], st_d[0, 2] = dx0, dy0, dz0
    st_len[0] = 0.0
    st_pow[0] = 1.0
    st_depth[0] = 0
    sp = 1
    count = 0
    while sp > 0:
        sp -= 1
        px, py, pz = st_o[sp, 0], st_o[sp, 1], st_o[sp, 2]
        dx, dy, dz = st_d[sp, 0], st_d[sp, 1], st_d[sp, 2]
        length = st_len[sp]
        power = st_pow[sp]
        depth = st_depth[sp]
        # children reuse this slot first, so the signature prefix stays in place
        parent = sp
        t, g, _, _ = intersect_kernel(geo, px, py, pz, dx, dy, dz, t_min, np.inf)
        if depth >= 1:
            for r in range(n_rx):
                wx = rx_pos[r, 0] - px
                wy = rx_pos[r, 1] - py
                wz = rx_pos[r, 2] - pz
                s = wx * dx + wy * dy + wz * dz
                if s <= t_min or s >= t:
                    continue
                dist2 = wx * wx + wy * wy + wz * wz - s * s
                rad = gamma * (length + s) * alpha_sep
                if dist2 <= rad * rad:
                    if write:
                        out_rx[pos + count] = r
                        out_len[pos + count] = depth
                        for k in range(depth):
                            out_sig[pos + count, k] = st_sig[sp, k]
                    count += 1
        if g < 0 or depth >= max_depth:
            continue
        hx = px + t * dx
        hy = py + t * dy
        hz = pz + t * dz
        nx, ny, nz = normals[g, 0], normals[g, 1], normals[g, 2]
        dn = dx * nx + dy * ny + dz * nz
        cos_i = min(abs(dn), 1.0)
        l_hit = length + t
        spread = (lam / (4.0 * math.pi * l_hit)) ** 2
        key = tri_key[g]
        if enable_tx:
            tp, tq = slab_coeffs(complex(cos_i), 1.0 + 0j, tri_eps[g], k0, tri_thick[g])
            c = combine_polarizations(tp, tq, pol)
            p_t = power * abs(c) ** 2
            if p_t * spread >= floor_lin:
                st_o[sp, 0], st_o[sp, 1], st_o[sp, 2] = hx, hy, hz
                st_d[sp, 0], st_d[sp, 1], st_d[sp, 2] = dx, dy, dz
                st_len[sp] = l_hit
                st_pow[sp] = p_t
                st_depth[sp] = depth + 1
                st_sig[sp, depth] = 2 * key + 1
                sp += 1
        rp, rq, _, _, _ = interface_coeffs(complex(cos_i), 1.0 + 0j, tri_eps[g])
        c = combine_polarizations(rp, rq, pol)
        p_r = power * abs(c) ** 2
        if p_r * spread >= floor_lin:
            if sp != parent:
                for k in range(depth):
                    st_sig[sp, k] = st_sig[parent, k]
            st_o[sp, 0], st_o[sp, 1], st_o[sp, 2] = hx, hy, hz
            st_d[sp, 0] = dx - 2.0 * dn * nx
            st_d[sp, 1] = dy - 2.0 * dn * ny
            st_d[sp, 2] = dz - 2.0 * dn * nz
            st_len[sp] = l_hit
            st_pow[sp] = p_r
            st_depth[sp] = depth + 1
            st_sig[sp, depth] = 2 * key
            sp += 1
    return count


@numba.njit(cache=True, parallel=True)
def _walk_all(geo, normals, tri_eps, tri_thick, tri_key, origin, dirs, rx_pos, max_depth,
              k0, lam, alpha_sep, gamma, floor_lin, enable_tx, pol, t_min,
              write, offsets, out_rx, out_len, out_sig):
    n = dirs.shape[0]
    n_blocks = (n + _BLOCK - 1) // _BLOCK
    counts = np.zeros(n, dtype=np.int64)
    slots = max_depth + 2
    width = max(max_depth, 1)
    for b in numba.prange(n_blocks):
        st_o = np.empty((slots, 3))
        st_d = np.empty((slots, 3))
        st_len = np.empty(slots)
        st_pow = np.empty(slots)
        st_depth = np.empty(slots, dtype=np.int64)
        st_sig = np.empty((slots, width), dtype=np.int64)
        for i in range(b * _BLOCK, min(n, (b + 1) * _BLOCK)):
            pos = offsets[i] if write else 0
            counts[i] = _walk_ray(geo, normals, tri_eps, tri_thick, tri_key,
                                  origin[0], origin[1], origin[2],
                                  dirs[i, 0], dirs[i, 1], dirs[i, 2],
                                  rx_pos, max_depth, k0, lam, alpha_sep, gamma, floor_lin,
                                  enable_tx, pol, t_min, write, pos, out_rx, out_len, out_sig,
                                  st_o, st_d, st_len, st_pow, st_depth, st_sig)
    return counts


# --- exact path reconstruction -----------------------------------------------


@dataclass(frozen=True, eq=False)
class _Medium:
    """Per-triangle propagation data for one (scene, catalog, frequency, config)."""

    eps: np.ndarray
    thickness: np.ndarray
    key: np.ndarray


def _triangle_media(scene: Scene, bvh: Bvh, catalog: dict[str, RadioMaterial],
                    coplanar_merge: bool) -> _Medium:
    by_id = {m.object_id: m for m in scene.meshes}
    obj_eps, obj_thick = [], []
    for oid in bvh.object_ids:
        mesh = by_id[oid]
        mat = catalog[mesh.material_name]
        if not mat.in_range(scene.frequency_hz):
            warnings.warn(
                f"{scene.frequency_hz / 1e9:.4g} GHz outside validity range {mat.valid_ghz} GHz "
                f"of material {mat.name!r} (object {oid!r})", stacklevel=3)
        obj_eps.append(complex_permittivity(mat, scene.frequency_hz))
        obj_thick.append(mesh.thickness_m)
    obj_eps = np.asarray(obj_eps, dtype=np.complex128)
    obj_thick = np.asarray(obj_thick, dtype=np.float64)
    key = bvh.plane_rep if coplanar_merge else np.arange(bvh.n_triangles, dtype=np.int64)
    return _Medium(
        eps=np.ascontiguousarray(obj_eps[bvh.tri_object]) if len(obj_eps) else np.zeros(0, np.complex128),
        thickness=np.ascontiguousarray(obj_thick[bvh.tri_object]) if len(obj_thick) else np.zeros(0),
        key=np.ascontiguousarray(key, dtype=np.int64),
    )


def _angles(v: np.ndarray) -> tuple[float, float]:
    v = v / np.linalg.norm(v)
    return math.degrees(math.atan2(v[1], v[0])), math.degrees(math.acos(max(-1.0, min(1.0, v[2]))))


class _PathBuilder:
    def __init__(self, scene: Scene, bvh: Bvh, medium: _Medium, cfg: TraceConfig):
        self.scene = scene
        self.bvh = bvh
        self.geo = bvh.kernel_args()
        self.medium = medium
        self.cfg = cfg
        self.lam = scene.wavelength_m
        self.k0 = 2.0 * math.pi / self.lam
        self.pol = polarization_code(cfg.polarization)

    def _plane(self, g: int) -> tuple[np.ndarray, float]:
        n = self.bvh.normals[g]
        return n, float(n @ self.bvh.v0[g])

    def _coefficient(self, g: int, kind: int, cos_i: float) -> complex:
        eps = self.medium.eps[g]
        if kind == 0:
            rp, rq, *_ = interface_coeffs(complex(cos_i), 1.0 + 0j, eps)
            return complex(combine_polarizations(rp, rq, self.pol))
        tp, tq = slab_coeffs(complex(cos_i), 1.0 + 0j, eps, self.k0, self.medium.thickness[g])
        return complex(combine_polarizations(tp, tq, self.pol))

    def _interaction(self, g: int, kind: int, point, direction) -> Interaction:
        n = self.bvh.normals[g]
        cos_i = min(abs(float(direction @ n)), 1.0)
        return Interaction(
            kind=_KIND_NAME[kind],
            object_id=self.bvh.object_ids[self.bvh.tri_object[g]],
            triangle_index=int(self.bvh.tri_local[g]),
            point=tuple(float(x) for x in point),
            theta_i=math.acos(cos_i),
            coefficient=self._coefficient(g, kind, cos_i),
        )

    def signature_text(self, codes) -> str:
        parts = []
        for code in codes:
            g = code >> 1
            parts.append(f"{self.bvh.object_ids[self.bvh.tri_object[g]]}:{int(self.bvh.tri_local[g])}:"
                         f"{_KIND_TAG[code & 1]}")
        return "|".join(parts)

    def build(self, tx: Transmitter, rx: Receiver, codes: tuple[int, ...]) -> PathRecord | None:
        """Rebuild the path for ``codes`` exactly, or None if the geometry does not admit it."""
        tx_p = np.asarray(tx.position, dtype=np.float64)
        rx_p = np.asarray(rx.position, dtype=np.float64)
        refl = [i for i, c in enumerate(codes) if c & 1 == 0]
        images = [tx_p]
        for i in refl:
            n, off = self._plane(codes[i] >> 1)
            p = images[-1]
            images.append(p - 2.0 * (float(n @ p) - off) * n)
        anchors: list[np.ndarray] = []
        target = rx_p
        for j in range(len(refl) - 1, -1, -1):
            n, off = self._plane(codes[refl[j]] >> 1)
            img = images[j + 1]
            a = float(n @ target) - off
            b = float(n @ img) - off
            if a * b >= 0.0:
                return None
            target = target + (a / (a - b)) * (img - target)
            anchors.append(target)
        anchors.reverse()
        anchors.append(rx_p)

        key = self.medium.key
        interactions: list[Interaction] = []
        ci = 0
        cur = tx_p
        total = 0.0
        for ai, nxt in enumerate(anchors):
            seg = nxt - cur
            seg_len = float(np.linalg.norm(seg))
            if seg_len <= _GEOM_TOL:
                return None
            d = seg / seg_len
            last = ai == len(anchors) - 1
            o = cur
            remaining = seg_len
            while True:
                t_max = remaining - DEFAULT_T_MIN if last else remaining + _GEOM_TOL
                t, g, _, _ = intersect_kernel(self.geo, o[0], o[1], o[2], d[0], d[1], d[2],
                                              DEFAULT_T_MIN, t_max)
                if ci < len(codes):
                    expect_g, expect_kind = codes[ci] >> 1, codes[ci] & 1
                else:
                    expect_g, expect_kind = -1, -1
                if g < 0:
                    if last and ci == len(codes):
                        break
                    return None
                if ci >= len(codes) or key[g] != key[expect_g]:
                    return None
                at_anchor = abs(t - remaining) <= _GEOM_TOL + 1e-9 * seg_len
                if expect_kind == 1 and not at_anchor:
                    hit_p = o + t * d
                    interactions.append(self._interaction(g, 1, hit_p, d))
                    o = hit_p
                    remaining -= t
                    ci += 1
                    continue
                if expect_kind == 0 and at_anchor and not last:
                    interactions.append(self._interaction(g, 0, nxt, d))
                    ci += 1
                    break
                return None
            total += seg_len
            cur = nxt
        if ci != len(codes):
            return None

        coef = 1.0 + 0j
        for it in interactions:
            coef *= it.coefficient
        amp = (self.lam / (4.0 * math.pi * total)) * coef * np.exp(-2j * math.pi * total / self.lam)
        amp = complex(amp)
        p_lin = abs(amp) ** 2
        power_dbm = (tx.power_dbm + tx.gain_dbi + rx.gain_dbi + 10.0 * math.log10(p_lin)
                     if p_lin > 0 else -math.inf)
        first = np.asarray(interactions[0].point) if interactions else rx_p
        last_pt = np.asarray(interactions[-1].point) if interactions else tx_p
        aoa_az, aoa_zen = _angles(last_pt - rx_p)
        aod_az, aod_zen = _angles(first - tx_p)
        return PathRecord(
            tx_id=tx.id, rx_id=rx.id, length_m=total, delay_s=total / SPEED_OF_LIGHT,
            amplitude=amp, phase_rad=math.atan2(amp.imag, amp.real),
            aoa_azimuth_deg=aoa_az, aoa_zenith_deg=aoa_zen,
            aod_azimuth_deg=aod_az, aod_zenith_deg=aod_zen,
            interactions=tuple(interactions), is_los=not interactions,
            signature=self.signature_text(codes), power_dbm=power_dbm,
        )

    def direct_codes(self, tx: Transmitter, rx: Receiver) -> tuple[int, ...] | None:
        """Codes of the straight tx->rx segment: () when clear, transmissions when blocked."""
        a = np.asarray(tx.position, dtype=np.float64)
        b = np.asarray(rx.position, dtype=np.float64)
        seg = b - a
        remaining = float(np.linalg.norm(seg))
        d = seg / remaining
        codes = []
        o = a
        while True:
            t, g, _, _ = intersect_kernel(self.geo, o[0], o[1], o[2], d[0], d[1], d[2],
                                          DEFAULT_T_MIN, remaining - DEFAULT_T_MIN)
            if g < 0:
                return tuple(codes)
            if not self.cfg.enable_transmission or len(codes) >= self.cfg.max_depth:
                return None
            codes.append(2 * int(self.medium.key[g]) + 1)
            o = o + t * d
            remaining -= t


def los_check(scene: Scene, bvh: Bvh, a, b) -> bool:
    """True iff nothing intersects the open segment a-b (1e-6 m guard at both ends)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    seg = b - a
    dist = float(np.linalg.norm(seg))
    if dist == 0.0:
        raise ValueError("los_check needs distinct endpoints")
    d = seg / dist
    _, g, _, _ = intersect_kernel(bvh.kernel_args(), a[0], a[1], a[2], d[0], d[1], d[2],
                                  DEFAULT_T_MIN, dist - DEFAULT_T_MIN)
    return g < 0


def _finalize(paths: list[PathRecord], cfg: TraceConfig) -> tuple[PathRecord, ...]:
    kept = [p for p in paths if p.power_dbm >= cfg.min_power_dbm]
    kept.sort(key=lambda p: (-p.power, p.signature))
    return tuple(kept[: cfg.max_paths])


def trace_many(scene: Scene, bvh: Bvh, catalog: dict[str, RadioMaterial], tx: Transmitter,
               receivers, cfg: TraceConfig) -> list[PathSet]:
    """Trace one launch from ``tx`` and extract a PathSet for every receiver."""
    cfg.validate()
    receivers = list(receivers)
    for rx in receivers:
        if np.allclose(tx.position, rx.position, rtol=0, atol=1e-9):
            raise TraceError(f"transmitter {tx.id!r} and receiver {rx.id!r} share a position")
    medium = _triangle_media(scene, bvh, catalog, cfg.coplanar_merge)
    builder = _PathBuilder(scene, bvh, medium, cfg)
    candidates: list[set[tuple[int, ...]]] = [set() for _ in receivers]

    if receivers and bvh.n_triangles and cfg.max_depth > 0:
        rx_pos = np.ascontiguousarray([r.position for r in receivers], dtype=np.float64)
        dirs = launch_directions(int(cfg.num_rays), cfg.seed)
        origin = np.asarray(tx.position, dtype=np.float64)
        max_gain = max(r.gain_dbi for r in receivers)
        floor_lin = 10.0 ** ((cfg.min_power_dbm - tx.power_dbm - tx.gain_dbi - max_gain) / 10.0)
        alpha_sep = math.sqrt(4.0 * math.pi / cfg.num_rays)
        width = max(cfg.max_depth, 1)
        args = (bvh.kernel_args(), bvh.normals, medium.eps, medium.thickness, medium.key,
                origin, dirs, rx_pos, int(cfg.max_depth), builder.k0, builder.lam, alpha_sep,
                float(cfg.rx_sphere_gamma), floor_lin, bool(cfg.enable_transmission),
                builder.pol, DEFAULT_T_MIN)
        empty_i = np.zeros(0, dtype=np.int64)
        counts = _walk_all(*args, False, empty_i, empty_i, empty_i, np.zeros((0, width), np.int64))
        offsets = np.zeros(len(counts), dtype=np.int64)
        np.cumsum(counts[:-1], out=offsets[1:])
        total = int(counts.sum())
        out_rx = np.empty(total, dtype=np.int64)
        out_len = np.empty(total, dtype=np.int64)
        out_sig = np.full((total, width), -1, dtype=np.int64)
        _walk_all(*args, True, offsets, out_rx, out_len, out_sig)
        if total:
            rows = np.unique(np.column_stack([out_rx, out_len, out_sig]), axis=0)
            for row in rows:
                r, n = int(row[0]), int(row[1])
                candidates[r].add(tuple(int(c) for c in row[2:2 + n]))

    results = []
    for r, rx in enumerate(receivers):
        direct = builder.direct_codes(tx, rx)
        if direct is not None:
            candidates[r].add(direct)
        paths = []
        for codes in sorted(candidates[r]):
            rec = builder.build(tx, rx, codes)
            if rec is not None:
                paths.append(rec)
        results.append(PathSet(tx.id, rx.id, _finalize(paths, cfg), cfg, scene.frequency_hz))
    return results


def trace_paths(scene: Scene, bvh: Bvh, catalog: dict[str, RadioMaterial], tx: Transmitter,
                rx: Receiver, cfg: TraceConfig) -> PathSet:
    return trace_many(scene, bvh, catalog, tx, [rx], cfg)[0]
