"""Path, CIR and metrics file formats.

CSV numbers use 6 significant digits (``%.6g``); JSON keeps full precision and
writes non-finite values as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .channel import ChannelMetrics, Cir
from .tracer import PathSet

PATH_COLUMNS = ("tx_id", "rx_id", "length_m", "delay_ns", "power_dbm", "phase_deg", "aoa_az_deg",
                "aoa_zen_deg", "aod_az_deg", "aod_zen_deg", "n_interactions", "signature")
METRIC_COLUMNS = ("tx_id", "rx_id", "mean_delay_ns", "rms_delay_ns", "path_gain_db", "path_loss_db",
                  "sinr_db", "asa_deg", "zsa_deg", "k_factor_db", "rss_dbm", "n_paths")


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if x is None:
        return ""
    return f"{float(x):.6g}"


def jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, complex):
        return [jsonable(x.real), jsonable(x.imag)]
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return x


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), indent=1, sort_keys=False) + "\n")


def path_rows(ps: PathSet) -> list[list[str]]:
    rows = []
    for p in ps:
        rows.append([p.tx_id, p.rx_id, fmt(p.length_m), fmt(p.delay_s * 1e9), fmt(p.power_dbm),
                     fmt(math.degrees(p.phase_rad)), fmt(p.aoa_azimuth_deg), fmt(p.aoa_zenith_deg),
                     fmt(p.aod_azimuth_deg), fmt(p.aod_zenith_deg), str(len(p.interactions)), p.signature])
    return rows


def write_paths_csv(path_sets, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATH_COLUMNS)
        for ps in path_sets:
            w.writerows(path_rows(ps))


def paths_document(ps: PathSet) -> dict:
    return {
        "tx_id": ps.tx_id,
        "rx_id": ps.rx_id,
        "frequency_hz": ps.frequency_hz,
        "paths": [
            {
                "length_m": p.length_m,
                "delay_s": p.delay_s,
                "amplitude": p.amplitude,
                "phase_rad": p.phase_rad,
                "power_dbm": p.power_dbm,
                "aoa_azimuth_deg": p.aoa_azimuth_deg,
                "aoa_zenith_deg": p.aoa_zenith_deg,
                "aod_azimuth_deg": p.aod_azimuth_deg,
                "aod_zenith_deg": p.aod_zenith_deg,
                "is_los": p.is_los,
                "signature": p.signature,
                "interactions": [
                    {"kind": i.kind, "object_id": i.object_id, "triangle_index": i.triangle_index,
                     "point": list(i.point), "theta_i": i.theta_i, "coefficient": i.coefficient}
                    for i in p.interactions
                ],
            }
            for p in ps
        ],
    }


def write_paths_json(path_sets, path) -> None:
    dump_json([paths_document(ps) for ps in path_sets], path)


def cir_document(tx_id: str, rx_id: str, cir: Cir) -> dict:
    return {"tx_id": tx_id, "rx_id": rx_id,
            "taps": [{"delay_s": d, "amplitude": a} for d, a in cir.taps]}


def metrics_row(tx_id: str, rx_id: str, m: ChannelMetrics) -> dict:
    return {
        "tx_id": tx_id,
        "rx_id": rx_id,
        "mean_delay_ns": m.mean_delay_s * 1e9,
        "rms_delay_ns": m.rms_delay_s * 1e9,
        "path_gain_db": m.path_gain_db,
        "path_loss_db": m.path_loss_db,
        "sinr_db": m.sinr_db,
        "asa_deg": m.asa_deg,
        "zsa_deg": m.zsa_deg,
        "k_factor_db": m.k_factor_db,
        "rss_dbm": m.rss_dbm,
        "n_paths": m.n_paths,
    }


def write_metrics_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in METRIC_COLUMNS])


def read_metrics_csv(path) -> dict[tuple[str, str], dict]:
    """Metric rows keyed by (tx_id, rx_id); numeric columns parsed as float."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"tx_id", "rx_id"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (row["tx_id"], row["rx_id"])
            out[key] = {k: (float(v) if v not in ("", None) else math.nan)
                        for k, v in row.items() if k not in ("tx_id", "rx_id")}
    return out
