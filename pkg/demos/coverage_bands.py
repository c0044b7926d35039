"""Coverage of the bundled office at 2.437, 5 and 6 GHz, with heatmaps.

    python demos/coverage_bands.py [out_dir]

Writes map_<f>.csv/.ppm per frequency; takes a few minutes on one core.
"""
import sys
from pathlib import Path

from rfray.bvh import build_bvh
from rfray.coverage import GridSpec, compute_map, coverage_fraction, export_heatmap
from rfray.materials import material_catalog
from rfray.scene import bundled_scene_path, load_scene
from rfray.tracer import TraceConfig

THRESHOLD_DBM = -47.0


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    catalog = material_catalog()
    scene = load_scene(bundled_scene_path("office"), catalog)
    bvh = build_bvh(scene)
    spec = GridSpec.covering(scene, 0.5)
    for f in (2.437e9, 5e9, 6e9):
        grid = compute_map(scene.with_frequency(f), TraceConfig(), spec, catalog, bvh=bvh)
        res = coverage_fraction(grid, THRESHOLD_DBM)
        csv_path, _ = export_heatmap(grid, out / f"map_{f / 1e9:g}GHz")
        print(f"{f / 1e9:6.3f} GHz  covered {100 * res.covered_fraction:5.1f} %  "
              f"RSS {grid.total_rss_dbm[grid.valid].min():.1f}..{grid.total_rss_dbm[grid.valid].max():.1f} dBm  "
              f"-> {csv_path}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "coverage_demo"))
