"""Ray-budget, depth and material-perturbation sweeps for one link."""
from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .bvh import Bvh, build_bvh
from .channel import delay_stats, path_gain
from .materials import RadioMaterial, material_catalog, scale_material
from .scene import Scene
from .tracer import TraceConfig, trace_paths

METRICS = ("mean_delay", "rms_delay", "path_loss")
METRIC_UNITS = {"mean_delay": "ns", "rms_delay": "ns", "path_loss": "db"}


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    depths: tuple[int, ...]
    ray_budgets: tuple[int, ...]
    material_scales: tuple[float, ...] = (1.0,)
    link: tuple[str, str] | None = None
    metrics: tuple[str, ...] = METRICS

    def __post_init__(self):
        for name in ("depths", "ray_budgets", "material_scales", "metrics"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise SweepError(f"{name} must not be empty")
        if any(s <= 0 for s in self.material_scales):
            raise SweepError("material scales must be > 0")
        if any(d < 0 for d in self.depths) or any(n < 1 for n in self.ray_budgets):
            raise SweepError("depths must be >= 0 and ray budgets >= 1")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise SweepError(f"unknown metrics {sorted(unknown)}; choose from {METRICS}")

    @property
    def baseline_cell(self) -> tuple[int, int, float]:
        return max(self.depths), max(self.ray_budgets), 1.0


@dataclass(frozen=True)
class SweepRow:
    depth: int
    n_rays: int
    material_scale: float
    runtime_s: float
    values: dict
    abs_error: dict
    norm_error_pct: dict


def material_perturb(catalog: dict[str, RadioMaterial], scale: float) -> dict[str, RadioMaterial]:
    """New catalog with permittivity and conductivity of every material scaled (permittivity floored at 1)."""
    if not scale > 0:
        raise SweepError("scale must be > 0")
    return {name: scale_material(mat, scale) for name, mat in catalog.items()}


def _link_metrics(ps) -> dict:
    mean, rms = delay_stats(ps)
    return {"mean_delay": mean * 1e9, "rms_delay": rms * 1e9, "path_loss": -path_gain(ps)}


def run_sweep(scene: Scene, base_cfg: TraceConfig, spec: SweepSpec,
              catalog: dict[str, RadioMaterial] | None = None, bvh: Bvh | None = None) -> list[SweepRow]:
    """One row per (depth, rays, scale) in SweepSpec order, with errors against the maximum-complexity cell.

    Runtime covers the trace call only.
    """
    catalog = catalog if catalog is not None else material_catalog()
    bvh = bvh if bvh is not None else build_bvh(scene)
    if spec.link is None:
        if not scene.transmitters or not scene.receivers:
            raise SweepError("scene needs a transmitter and a receiver")
        tx, rx = scene.transmitters[0], scene.receivers[0]
    else:
        tx, rx = scene.transmitter(spec.link[0]), scene.receiver(spec.link[1])
    catalogs = {s: catalog if s == 1.0 else material_perturb(catalog, s) for s in spec.material_scales}

    def run(depth, n_rays, scale):
        cat = catalogs.get(scale) or material_perturb(catalog, scale)
        cfg = replace(base_cfg, max_depth=int(depth), num_rays=int(n_rays))
        t0 = time.perf_counter()
        ps = trace_paths(scene, bvh, cat, tx, rx, cfg)
        elapsed = time.perf_counter() - t0
        if len(ps) == 0:
            raise SweepError(f"no paths for link {tx.id}->{rx.id} at depth {depth}, {n_rays} rays")
        m = _link_metrics(ps)
        return elapsed, {k: m[k] for k in spec.metrics}

    cells = list(itertools.product(spec.depths, spec.ray_budgets, spec.material_scales))
    results = {cell: run(*cell) for cell in cells}
    base = spec.baseline_cell
    baseline = results[base][1] if base in results else run(*base)[1]
    rows = []
    for cell in cells:
        elapsed, values = results[cell]
        ae = {k: abs(values[k] - baseline[k]) for k in values}
        ne = {k: (100.0 * ae[k] / abs(baseline[k]) if baseline[k] != 0 else float("nan")) for k in values}
        rows.append(SweepRow(cell[0], cell[1], cell[2], elapsed, values, ae, ne))
    return rows


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    """Depth, rays, scale, runtime, then value / AE / NE columns per metric (6 significant digits)."""
    metrics = list(rows[0].values) if rows else []
    header = ["depth", "rays", "material_scale", "runtime_s"]
    for m in metrics:
        u = METRIC_UNITS[m]
        header += [f"{m}_{u}", f"{m}_ae_{u}", f"{m}_ne_pct"]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            line = [r.depth, r.n_rays, f"{r.material_scale:.6g}", f"{r.runtime_s:.6g}"]
            for m in metrics:
                line += [f"{r.values[m]:.6g}", f"{r.abs_error[m]:.6g}", f"{r.norm_error_pct[m]:.6g}"]
            w.writerow(line)
