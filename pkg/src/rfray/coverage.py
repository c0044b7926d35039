"""Grid coverage maps, thresholded coverage fraction and frequency sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bvh import Bvh, build_bvh
from .channel import LinkBudget, path_gain, sinr
from .materials import RadioMaterial, material_catalog
from .scene import Receiver, Scene, TriangleMesh
from .tracer import TraceConfig, trace_many

MIN_CELL_RAYS = 10_000
RSS_RAMP_DBM = (-100.0, -20.0)
SINR_RAMP_DB = (-10.0, 30.0)
# dark blue, blue, cyan, yellow, red
_RAMP_STOPS = np.array([[0, 0, 128], [0, 0, 255], [0, 255, 255], [255, 255, 0], [255, 0, 0]], dtype=float)
_INVALID_RGB = (255, 255, 255)
_PARITY_DIR = np.array([0.8191520442889918, 0.4226182617406994, 0.3875009467460087])


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Horizontal grid of ``nx`` x ``ny`` square cells; ``origin`` is the (x, y) corner of cell (0, 0)."""

    origin: tuple[float, float]
    cell_m: float
    nx: int
    ny: int
    plane_height_m: float = 1.5

    def __post_init__(self):
        if not self.cell_m > 0:
            raise CoverageError("cell_m must be > 0")
        if self.nx < 1 or self.ny < 1:
            raise CoverageError("grid needs at least one cell per axis")

    @classmethod
    def covering(cls, scene: Scene, cell_m: float, plane_height_m: float = 1.5) -> "GridSpec":
        """Largest grid of ``cell_m`` cells centred in the scene's horizontal footprint."""
        if scene.bounds is None:
            raise CoverageError("scene has no geometry to size a grid from")
        lo, hi = scene.bounds
        ext = hi[:2] - lo[:2]
        n = np.maximum(np.floor(ext / cell_m + 1e-9).astype(int), 1)
        origin = lo[:2] + (ext - n * cell_m) / 2.0
        return cls((float(origin[0]), float(origin[1])), float(cell_m), int(n[0]), int(n[1]), plane_height_m)

    def centers(self) -> np.ndarray:
        """(ny, nx, 3) cell centres."""
        xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.cell_m
        ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.cell_m
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy, np.full_like(gx, self.plane_height_m)], axis=-1)


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """Per-cell results; arrays are indexed ``[iy, ix]`` (``rss_dbm`` is ``[tx, iy, ix]``).

    Cells with no path carry -inf; invalid cells (inside solid geometry or on a
    transmitter) carry NaN and are excluded from coverage fractions.
    """

    spec: GridSpec
    frequency_hz: float
    tx_ids: tuple[str, ...]
    rss_dbm: np.ndarray
    total_rss_dbm: np.ndarray
    best_sinr_db: np.ndarray
    n_paths: np.ndarray
    valid: np.ndarray

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def ny(self) -> int:
        return self.spec.ny


@dataclass(frozen=True)
class CoverageResult:
    threshold_dbm: float
    covered_fraction: float
    frequency_hz: float
    grid: CoverageGrid | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"threshold_dbm": self.threshold_dbm, "covered_fraction": self.covered_fraction,
                "frequency_hz": self.frequency_hz}


def _ray_hits_mesh(mesh: TriangleMesh, origin: np.ndarray, d: np.ndarray) -> int:
    tri = mesh.vertices[mesh.triangles]
    v0, e1, e2 = tri[:, 0], tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-15
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origin - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
    return int(hit.sum())


def _inside_mesh(mesh: TriangleMesh, p: np.ndarray) -> bool:
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if np.any(p < lo) or np.any(p > hi):
        return False
    return _ray_hits_mesh(mesh, p, _PARITY_DIR) % 2 == 1


def solid_meshes(scene: Scene) -> list[TriangleMesh]:
    """Closed meshes that enclose no transmitter; a closed shell around a transmitter is a room."""
    tx = [np.asarray(t.position, dtype=float) for t in scene.transmitters]
    return [m for m in scene.meshes if m.is_closed() and not any(_inside_mesh(m, p) for p in tx)]


def inside_solid(scene: Scene, point, solids: list[TriangleMesh] | None = None) -> bool:
    """True if ``point`` lies inside a solid closed mesh (ray parity)."""
    p = np.asarray(point, dtype=float)
    return any(_inside_mesh(m, p) for m in (solids if solids is not None else solid_meshes(scene)))


def _db_sum(values_dbm: np.ndarray, axis: int = 0) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.sum(10.0 ** (values_dbm / 10.0), axis=axis))


def compute_map(scene: Scene, cfg: TraceConfig, spec: GridSpec,
                catalog: dict[str, RadioMaterial] | None = None, bvh: Bvh | None = None,
                budget: LinkBudget | None = None, rays_per_cell: int | None = None) -> CoverageGrid:
    """Trace every transmitter to every cell centre (isotropic 0 dBi receivers).

    One launch per transmitter serves all cells. Its ray count defaults to
    ``max(cfg.num_rays // 16, 10_000)`` unless ``rays_per_cell`` is given.
    """
    catalog = catalog if catalog is not None else material_catalog()
    budget = budget or LinkBudget()
    if not scene.transmitters:
        raise CoverageError("scene has no transmitters")
    centers = spec.centers()
    if scene.bounds is not None:
        lo, hi = scene.bounds
        pts = centers.reshape(-1, 3)
        if np.any(pts < lo - 1e-9) or np.any(pts > hi + 1e-9):
            raise CoverageError("grid extends outside the scene bounds")
    bvh = bvh if bvh is not None else build_bvh(scene)
    n_rays = rays_per_cell if rays_per_cell is not None else max(cfg.num_rays // 16, MIN_CELL_RAYS)
    cell_cfg = replace(cfg, num_rays=int(n_rays))

    ny, nx = spec.ny, spec.nx
    valid = np.ones((ny, nx), dtype=bool)
    tx_pos = np.array([t.position for t in scene.transmitters], dtype=float)
    solids = solid_meshes(scene)
    for iy in range(ny):
        for ix in range(nx):
            c = centers[iy, ix]
            if inside_solid(scene, c, solids) or np.any(np.all(np.abs(tx_pos - c) <= 1e-9, axis=1)):
                valid[iy, ix] = False
    cells = [(iy, ix) for iy in range(ny) for ix in range(nx) if valid[iy, ix]]
    receivers = [Receiver(f"cell_{iy}_{ix}", tuple(centers[iy, ix])) for iy, ix in cells]

    n_tx = len(scene.transmitters)
    rss = np.full((n_tx, ny, nx), np.nan)
    n_paths = np.zeros((ny, nx), dtype=np.int64)
    for k, tx in enumerate(scene.transmitters):
        sets = trace_many(scene, bvh, catalog, tx, receivers, cell_cfg) if receivers else []
        for (iy, ix), ps in zip(cells, sets):
            n_paths[iy, ix] += len(ps)
            rss[k, iy, ix] = tx.power_dbm + tx.gain_dbi + path_gain(ps) if len(ps) else -math.inf

    total = np.full((ny, nx), np.nan)
    best = np.full((ny, nx), np.nan)
    for iy, ix in cells:
        col = rss[:, iy, ix]
        total[iy, ix] = float(_db_sum(col))
        k = int(np.argmax(col))
        best[iy, ix] = sinr(float(col[k]), [float(v) for j, v in enumerate(col) if j != k], budget)
    return CoverageGrid(spec, scene.frequency_hz, tuple(t.id for t in scene.transmitters),
                        rss, total, best, n_paths, valid)


def coverage_fraction(grid: CoverageGrid, threshold_dbm: float) -> CoverageResult:
    """Fraction of valid cells whose total RSS reaches ``threshold_dbm``."""
    n_valid = int(grid.valid.sum())
    if n_valid == 0:
        raise CoverageError("grid has no valid cells")
    covered = int(np.sum(grid.valid & (np.nan_to_num(grid.total_rss_dbm, nan=-np.inf) >= threshold_dbm)))
    return CoverageResult(float(threshold_dbm), covered / n_valid, grid.frequency_hz, grid)


def frequency_sweep(scene: Scene, cfg: TraceConfig, spec: GridSpec, freqs_hz, threshold_dbm: float,
                    catalog: dict[str, RadioMaterial] | None = None, **kwargs) -> list[CoverageResult]:
    """Coverage at each frequency; materials are re-evaluated per frequency, geometry is shared."""
    bvh = kwargs.pop("bvh", None) or build_bvh(scene)
    out = []
    for f in freqs_hz:
        grid = compute_map(scene.with_frequency(float(f)), cfg, spec, catalog, bvh=bvh, **kwargs)
        out.append(coverage_fraction(grid, threshold_dbm))
    return out


# --- export ---------------------------------------------------------------------


def ramp_color(value: float, lo: float, hi: float) -> tuple[int, int, int]:
    if math.isnan(value):
        return _INVALID_RGB
    x = 0.0 if value == -math.inf else min(max((value - lo) / (hi - lo), 0.0), 1.0)
    pos = x * (len(_RAMP_STOPS) - 1)
    i = min(int(pos), len(_RAMP_STOPS) - 2)
    f = pos - i
    rgb = _RAMP_STOPS[i] * (1.0 - f) + _RAMP_STOPS[i + 1] * f
    return tuple(int(c) for c in np.rint(rgb))


def export_heatmap(grid: CoverageGrid, stem, mode: str = "total_rss") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (row ``iy`` = increasing y, 6 significant digits) and ``<stem>.ppm``.

    The binary PPM puts the largest y on the top row. Colours use a fixed ramp
    (dark blue, blue, cyan, yellow, red) over -100..-20 dBm for ``total_rss``
    and -10..30 dB for ``best_sinr``; invalid cells are white.
    """
    if mode == "total_rss":
        values, (lo, hi) = grid.total_rss_dbm, RSS_RAMP_DBM
    elif mode == "best_sinr":
        values, (lo, hi) = grid.best_sinr_db, SINR_RAMP_DB
    else:
        raise CoverageError(f"unknown heatmap mode {mode!r}")
    stem = Path(stem)
    # stems may contain dots (map_2.437GHz); append rather than replace a suffix
    csv_path = stem.parent / f"{stem.name}.csv"
    ppm_path = stem.parent / f"{stem.name}.ppm"
    with open(csv_path, "w", newline="") as fh:
        for row in values:
            fh.write(",".join(f"{v:.6g}" for v in row) + "\n")
    pixels = bytearray()
    for row in values[::-1]:
        for v in row:
            pixels.extend(ramp_color(float(v), lo, hi))
    with open(ppm_path, "wb") as fh:
        fh.write(f"P6\n{grid.nx} {grid.ny}\n255\n".encode("ascii"))
        fh.write(bytes(pixels))
    return csv_path, ppm_path
