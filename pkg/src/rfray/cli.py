"""``rfray`` command line: trace, validate, coverage, compare, calibrate, sweep, icp.

Exit codes: 0 success, 1 domain error (a JSON error object is printed to
stderr), 2 usage error. Heavy modules are imported after argument parsing so
that ``--threads`` can size the numba pool before numba loads.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

OUTPUT_KINDS = ("paths", "cir", "metrics", "heatmaps")
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("rfray")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    scene_path: str | None = None
    trace: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    output_dir: str = "rfray_out"
    outputs: list = field(default_factory=lambda: ["paths", "cir", "metrics"])
    frequency_hz: float | None = None
    heatmap_cell_m: float = 0.5
    heatmap_height_m: float = 1.5

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def validate(self) -> "RunConfig":
        if not self.scene_path:
            raise UsageError("no scene given (positional SCENE or scene_path in --config)")
        if not self.outputs:
            raise UsageError("at least one output kind must be selected")
        bad = set(self.outputs) - set(OUTPUT_KINDS)
        if bad:
            raise UsageError(f"unknown outputs {sorted(bad)}; choose from {OUTPUT_KINDS}")
        return self

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


# --- threads ------------------------------------------------------------------


def _thread_count(args) -> int | None:
    raw = getattr(args, "threads", None)
    if raw is None:
        raw = os.environ.get("RFRAY_THREADS")
    if raw in (None, ""):
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _configure_threads(n: int | None) -> int:
    if n is not None and "numba" not in sys.modules:
        os.environ["NUMBA_NUM_THREADS"] = str(n)
    import numba

    if n is not None:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


# --- helpers --------------------------------------------------------------------


def _catalog(args):
    from .materials import load_catalog, material_catalog

    return load_catalog(args.materials) if args.materials else material_catalog()


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str, name: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected a comma-separated list of integers, got {text!r}") from None


def _trace_overrides(args) -> dict:
    keys = {"num_rays": "num_rays", "max_depth": "max_depth", "seed": "seed", "max_paths": "max_paths",
            "min_power_dbm": "min_power_dbm", "polarization": "polarization",
            "rx_sphere_gamma": "rx_sphere_gamma"}
    out = {k: getattr(args, a) for a, k in keys.items() if getattr(args, a, None) is not None}
    if getattr(args, "no_transmission", False):
        out["enable_transmission"] = False
    return out


def _trace_config(overrides: dict):
    from .tracer import TraceConfig

    known = {f.name for f in fields(TraceConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise UsageError(f"unknown trace settings: {sorted(unknown)}")
    return TraceConfig(**overrides).validate()


def _load_scene(path, catalog, frequency_hz=None):
    from .scene import load_scene, validate_scene

    scene = load_scene(path, catalog)
    if frequency_hz is not None:
        scene = validate_scene(scene.with_frequency(float(frequency_hz)), catalog)
    return scene


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    from importlib.metadata import PackageNotFoundError, version

    from . import __version__
    from .materials import catalog_version

    out = {"rfray": __version__, "python": platform.python_version(), "materials": catalog_version()}
    for pkg in ("numpy", "scipy", "numba"):
        try:
            out[pkg] = version(pkg)
        except PackageNotFoundError:
            out[pkg] = None
    return out


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _freq_label(f_hz: float) -> str:
    return f"{f_hz / 1e9:g}GHz"


# --- subcommands ----------------------------------------------------------------


def cmd_trace(args) -> int:
    from .bvh import build_bvh
    from .channel import LinkBudget, build_cir, channel_metrics, rss, sinr
    from .reports import cir_document, dump_json, metrics_row, write_metrics_csv, write_paths_csv, write_paths_json
    from .tracer import trace_many

    cfg = RunConfig()
    if args.config:
        cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
    if args.scene:
        cfg.scene_path = args.scene
    if args.out:
        cfg.output_dir = args.out
    if args.outputs:
        cfg.outputs = [s.strip() for s in args.outputs.split(",") if s.strip()]
    if args.frequency_hz is not None:
        cfg.frequency_hz = args.frequency_hz
    cfg.trace = {**cfg.trace, **_trace_overrides(args)}
    for key in ("noise_temp_k", "bandwidth_hz"):
        if getattr(args, key) is not None:
            cfg.budget = {**cfg.budget, key: getattr(args, key)}
    cfg.validate()
    tcfg = _trace_config(cfg.trace)
    unknown_budget = set(cfg.budget) - {"noise_temp_k", "bandwidth_hz"}
    if unknown_budget:
        raise UsageError(f"unknown budget settings: {sorted(unknown_budget)}")

    timings = {}
    t0 = time.perf_counter()
    catalog = _catalog(args)
    scene = _load_scene(cfg.scene_path, catalog, cfg.frequency_hz)
    timings["load_s"] = time.perf_counter() - t0
    if not scene.transmitters or not scene.receivers:
        raise ValueError("scene needs at least one transmitter and one receiver")

    t0 = time.perf_counter()
    bvh = build_bvh(scene)
    timings["bvh_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sets = {tx.id: trace_many(scene, bvh, catalog, tx, scene.receivers, tcfg) for tx in scene.transmitters}
    timings["trace_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    noise = dict(cfg.budget)
    rows, cirs = [], []
    for j, rx in enumerate(scene.receivers):
        budgets = {tx.id: LinkBudget(tx.power_dbm, tx.gain_dbi, rx.gain_dbi, **noise) for tx in scene.transmitters}
        rx_rss = {tx.id: (rss(sets[tx.id][j], budgets[tx.id]) if len(sets[tx.id][j]) else float("-inf"))
                  for tx in scene.transmitters}
        for tx in scene.transmitters:
            ps = sets[tx.id][j]
            if not len(ps):
                log.warning("no paths for link %s -> %s", tx.id, rx.id)
                continue
            interferers = [v for k, v in rx_rss.items() if k != tx.id]
            m = channel_metrics(ps, budgets[tx.id], sinr(rx_rss[tx.id], interferers, budgets[tx.id]))
            rows.append(metrics_row(tx.id, rx.id, m))
            cirs.append(cir_document(tx.id, rx.id, build_cir(ps)))
    timings["metrics_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    pairs = [(tx.id, rx.id, sets[tx.id][j]) for j, rx in enumerate(scene.receivers) for tx in scene.transmitters]
    if "paths" in cfg.outputs:
        for tx_id, rx_id, ps in pairs:
            stem = f"paths_{_safe(tx_id)}_{_safe(rx_id)}"
            write_paths_csv([ps], out / f"{stem}.csv")
            write_paths_json([ps], out / f"{stem}.json")
            written += [f"{stem}.csv", f"{stem}.json"]
    if "cir" in cfg.outputs:
        for doc in cirs:
            name = f"cir_{_safe(doc['tx_id'])}_{_safe(doc['rx_id'])}.json"
            dump_json(doc, out / name)
            written.append(name)
    if "metrics" in cfg.outputs:
        write_metrics_csv(rows, out / "metrics.csv")
        dump_json(rows, out / "metrics.json")
        written += ["metrics.csv", "metrics.json"]
    if "heatmaps" in cfg.outputs:
        from .coverage import GridSpec, compute_map, export_heatmap

        spec = GridSpec.covering(scene, cfg.heatmap_cell_m, cfg.heatmap_height_m)
        grid = compute_map(scene, tcfg, spec, catalog, bvh=bvh, budget=LinkBudget(**noise))
        label = _freq_label(scene.frequency_hz)
        for mode, prefix in (("total_rss", "map"), ("best_sinr", "sinr")):
            paths = export_heatmap(grid, out / f"{prefix}_{label}", mode)
            written += [p.name for p in paths]
    timings["write_s"] = time.perf_counter() - t0

    manifest = {
        "command": "trace",
        "config": asdict(cfg),
        "config_sha256": hashlib.sha256(cfg.canonical_json().encode()).hexdigest(),
        "trace_config": tcfg.to_dict(),
        "scene_sha256": _sha256_file(cfg.scene_path),
        "materials": args.materials,
        "versions": _versions(),
        "threads": _configure_threads(None),
        "timings": timings,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "files": written,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(json.dumps({"output_dir": str(out), "files": len(written), "links": len(rows)}))
    return EXIT_OK


def cmd_validate(args) -> int:
    from .materials import complex_permittivity
    from .scene import load_scene

    catalog = _catalog(args)
    scene = load_scene(args.scene, catalog)
    f = scene.frequency_hz
    report = {
        "scene": args.scene,
        "frequency_hz": f,
        "objects": [
            {
                "object_id": m.object_id,
                "material": m.material_name,
                "triangles": m.n_triangles,
                "thickness_m": m.thickness_m,
                "relative_permittivity": complex_permittivity(catalog[m.material_name], f),
                "in_valid_range": catalog[m.material_name].in_range(f),
            }
            for m in scene.meshes
        ],
        "transmitters": [t.id for t in scene.transmitters],
        "receivers": [r.id for r in scene.receivers],
    }
    from .reports import jsonable

    print(json.dumps(jsonable(report), indent=1))
    return EXIT_OK


def cmd_coverage(args) -> int:
    from .coverage import GridSpec, compute_map, coverage_fraction, export_heatmap
    from .bvh import build_bvh
    from .reports import dump_json

    catalog = _catalog(args)
    scene = _load_scene(args.scene, catalog)
    tcfg = _trace_config(_trace_overrides(args))
    freqs = [f * 1e9 for f in _floats(args.freqs, "--freqs")] if args.freqs else [scene.frequency_hz]
    if not freqs:
        raise UsageError("--freqs is empty")
    spec = GridSpec.covering(scene, args.grid, args.height)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bvh = build_bvh(scene)
    results = []
    for f in freqs:
        sc = scene.with_frequency(f)
        grid = compute_map(sc, tcfg, spec, catalog, bvh=bvh, rays_per_cell=args.rays_per_cell)
        res = coverage_fraction(grid, args.threshold)
        label = _freq_label(f)
        export_heatmap(grid, out / f"map_{label}", "total_rss")
        export_heatmap(grid, out / f"sinr_{label}", "best_sinr")
        results.append({**res.to_dict(), "valid_cells": int(grid.valid.sum()), "map": f"map_{label}.csv"})
    doc = {"grid": asdict(spec), "threshold_dbm": args.threshold, "trace_config": tcfg.to_dict(),
           "results": results}
    dump_json(doc, out / "coverage.json")
    print(json.dumps([{"frequency_hz": r["frequency_hz"], "covered_fraction": r["covered_fraction"]}
                      for r in results]))
    return EXIT_OK


def cmd_compare(args) -> int:
    import csv

    from .reports import dump_json, fmt, read_metrics_csv
    from .stats import compare_links

    if args.improvement_metric != "path_loss":
        raise UsageError("only --improvement-metric path_loss is supported")
    prop = read_metrics_csv(args.proposed)
    ref = read_metrics_csv(args.reference)
    summary = compare_links(prop, ref, args.confidence)
    keys = sorted(set(prop) & set(ref))
    cols = ("mean_delay_ns", "rms_delay_ns", "path_loss_db", "sinr_db")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dump_json(summary, out / "comparison.json")
        with open(out / "aligned.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tx_id", "rx_id"] + [f"{c}_{side}" for c in cols for side in ("proposed", "reference")])
            for k in keys:
                w.writerow(list(k) + [fmt(d[k][c]) for c in cols for d in (prop, ref)])
    from .reports import jsonable

    print(json.dumps(jsonable(summary), indent=1))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    import csv

    from .reports import dump_json
    from .stats import calibrate_rssi

    measured, simulated = [], []
    with open(args.csv, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"point_id", "measured_dbm", "simulated_dbm"}
        if not need <= set(reader.fieldnames or ()):
            raise ValueError(f"{args.csv}: expected columns {sorted(need)}")
        for row in reader:
            measured.append(float(row["measured_dbm"]))
            simulated.append(float(row["simulated_dbm"]))
    res = asdict(calibrate_rssi(measured, simulated))
    if args.out:
        dump_json(res, args.out)
    print(json.dumps(res, indent=1))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sensitivity import SweepSpec, run_sweep, write_sweep_csv

    catalog = _catalog(args)
    scene = _load_scene(args.scene, catalog)
    link = None
    if args.link:
        if ":" not in args.link:
            raise UsageError("--link must look like TX:RX")
        link = tuple(args.link.split(":", 1))
    spec = SweepSpec(
        depths=tuple(_ints(args.depths, "--depths")),
        ray_budgets=tuple(_ints(args.rays, "--rays")),
        material_scales=tuple(_floats(args.material_scales, "--material-scales")),
        link=link,
    )
    rows = run_sweep(scene, _trace_config(_trace_overrides(args)), spec, catalog)
    write_sweep_csv(rows, args.out)
    print(Path(args.out).read_text(), end="")
    return EXIT_OK


def cmd_icp(args) -> int:
    from .registration import PointCloud, icp, load_cloud, save_cloud
    from .reports import dump_json

    src = load_cloud(args.source)
    tgt = load_cloud(args.target)
    rep = icp(src, tgt, max_iters=args.max_iters, tol=args.tol, trim=args.trim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(rep.to_dict(), out / "registration.json")
    suffix = Path(args.source).suffix.lower() or ".csv"
    save_cloud(PointCloud(rep.transform.apply(src.points), src.id), out / f"aligned_{src.id}{suffix}")
    print(json.dumps({k: v for k, v in rep.to_dict().items() if k != "energy_history"}, indent=1))
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def _trace_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tracing")
    g.add_argument("--num-rays", type=int)
    g.add_argument("--max-depth", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--max-paths", type=int)
    g.add_argument("--min-power-dbm", type=float)
    g.add_argument("--rx-sphere-gamma", type=float)
    g.add_argument("--polarization", choices=("average", "perp"))
    g.add_argument("--no-transmission", action="store_true", help="reflections only")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--materials", help="material catalog JSON replacing the built-in one")
    common.add_argument("--threads", help="worker threads (default: $RFRAY_THREADS or all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="rfray", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("trace", parents=[common], help="trace all Tx/Rx pairs of a scene")
    t.add_argument("scene", nargs="?")
    t.add_argument("--config", help="RunConfig JSON; flags override it")
    t.add_argument("--out", help="output directory")
    t.add_argument("--outputs", help=f"comma list from {','.join(OUTPUT_KINDS)}")
    t.add_argument("--frequency-hz", type=float)
    t.add_argument("--noise-temp-k", type=float)
    t.add_argument("--bandwidth-hz", type=float)
    _trace_flags(t)
    t.set_defaults(func=cmd_trace)

    v = sub.add_parser("validate", parents=[common], help="check a scene file")
    v.add_argument("scene")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("coverage", parents=[common], help="coverage maps and fractions")
    c.add_argument("scene")
    c.add_argument("--grid", type=float, default=0.5, help="cell size in m")
    c.add_argument("--height", type=float, default=1.5, help="evaluation plane height in m")
    c.add_argument("--threshold", type=float, default=-47.0, help="coverage threshold in dBm")
    c.add_argument("--freqs", help="comma list in GHz (default: scene frequency)")
    c.add_argument("--rays-per-cell", type=int)
    c.add_argument("--out", default="coverage_out")
    _trace_flags(c)
    c.set_defaults(func=cmd_coverage)

    m = sub.add_parser("compare", parents=[common], help="compare two metrics CSV reports")
    m.add_argument("proposed")
    m.add_argument("reference")
    m.add_argument("--improvement-metric", default="path_loss")
    m.add_argument("--confidence", type=float, default=0.95)
    m.add_argument("--out")
    m.set_defaults(func=cmd_compare)

    k = sub.add_parser("calibrate", parents=[common], help="remove the RSSI level offset")
    k.add_argument("csv", help="CSV with point_id,measured_dbm,simulated_dbm")
    k.add_argument("--out")
    k.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("sweep", parents=[common], help="ray budget / depth / material sweep")
    s.add_argument("scene")
    s.add_argument("--depths", default="6")
    s.add_argument("--rays", default="100000")
    s.add_argument("--material-scales", default="1.0")
    s.add_argument("--link", help="TX:RX (default: first of each)")
    s.add_argument("--out", default="sweep.csv")
    _trace_flags(s)
    s.set_defaults(func=cmd_sweep)

    i = sub.add_parser("icp", parents=[common], help="rigid registration of two point clouds")
    i.add_argument("source")
    i.add_argument("target")
    i.add_argument("--max-iters", type=int, default=50)
    i.add_argument("--tol", type=float, default=1e-8)
    i.add_argument("--trim", type=float, default=0.0)
    i.add_argument("--out", default="icp_out")
    i.set_defaults(func=cmd_icp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _configure_threads(_thread_count(args))
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}),
              file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
