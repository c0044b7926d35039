"""Trace the bundled office and print per-link channel metrics.

    python demos/office_link.py [num_rays]
"""
import sys

from rfray.bvh import build_bvh
from rfray.channel import LinkBudget, channel_metrics
from rfray.materials import material_catalog
from rfray.scene import bundled_scene_path, load_scene
from rfray.tracer import TraceConfig, trace_many


def main(num_rays: int = 200_000) -> None:
    catalog = material_catalog()
    scene = load_scene(bundled_scene_path("office"), catalog)
    bvh = build_bvh(scene)
    cfg = TraceConfig(num_rays=num_rays)
    print(f"{scene.n_triangles} triangles, {len(scene.transmitters)} transmitters, {num_rays} rays")
    print(f"{'link':>10} {'paths':>5} {'PL dB':>8} {'mean ns':>8} {'rms ns':>7} {'K dB':>6} {'RSS dBm':>8}")
    for tx in scene.transmitters:
        for rx, ps in zip(scene.receivers, trace_many(scene, bvh, catalog, tx, scene.receivers, cfg)):
            m = channel_metrics(ps, LinkBudget(tx.power_dbm, tx.gain_dbi, rx.gain_dbi))
            print(f"{tx.id + '->' + rx.id:>10} {m.n_paths:5d} {m.path_loss_db:8.2f} {m.mean_delay_s * 1e9:8.2f} "
                  f"{m.rms_delay_s * 1e9:7.2f} {m.k_factor_db:6.2f} {m.rss_dbm:8.2f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200_000)
