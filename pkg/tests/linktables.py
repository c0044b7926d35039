"""Reference per-link metrics for two simulators over two scenarios.

Rows: (link, mean_delay_ns, rms_delay_ns, path_gain_db, path_loss_db, sinr_db).
"""

OFFICE_PROPOSED = [
    ("tx-rx", 10.04, 5.75, -38.25, 38.25, 2.83),
    ("tx1-rx", 15.55, 6.75, -44.77, 44.77, -7.65),
    ("tx2-rx", 16.88, 7.74, -43.50, 43.50, -6.12),
]
OFFICE_REFERENCE = [
    ("tx-rx", 11.97, 9.56, -48.81, 48.81, 3.80),
    ("tx1-rx", 27.30, 8.17, -44.77, 44.77, -8.40),
    ("tx2-rx", 25.95, 9.52, -57.57, 57.57, -6.95),
]
CORRIDOR_PROPOSED = [
    ("tx-rx", 35.96, 21.28, -47.65, 47.65, -11.85),
    ("tx1-rx", 36.42, 20.27, -44.85, 44.85, -9.03),
    ("tx2-rx", 16.58, 10.65, -37.80, 37.80, 1.62),
    ("tx3-rx", 29.97, 17.67, -43.42, 43.42, -7.12),
    ("tx4-rx", 32.43, 21.72, -47.23, 47.23, -11.41),
]
CORRIDOR_REFERENCE = [
    ("tx-rx", 56.79, 26.06, -68.56, 68.56, -11.11),
    ("tx1-rx", 32.90, 28.67, -48.72, 48.72, -7.94),
    ("tx2-rx", 12.37, 18.11, -47.78, 47.78, 0.39),
    ("tx3-rx", 28.36, 27.18, -54.50, 54.50, -6.66),
    ("tx4-rx", 51.15, 26.74, -64.11, 64.11, -10.60),
]

# expected summary rows: mean-delay %, rms-delay %, path-loss %, dSINR mean, dSINR max
OFFICE_SUMMARY = (31.4, 25.3, 15.4, 0.85, 0.97)
CORRIDOR_SUMMARY = (24.7, 27.6, 21.2, 0.87, 1.23)
POOLED_SUMMARY = (27.2, 26.7, 19.0, 0.86, 1.23)
POOLED_IMPROVEMENT = (10.9, 5.3, 16.5, 0.0025)  # mean dB, CI low, CI high, p


def as_report(rows, prefix=""):
    return {
        (prefix + link.split("-")[0], "rx"): {
            "mean_delay_ns": md, "rms_delay_ns": rd, "path_gain_db": pg, "path_loss_db": pl, "sinr_db": s,
        }
        for link, md, rd, pg, pl, s in rows
    }


def pooled():
    prop = {**as_report(OFFICE_PROPOSED, "office-"), **as_report(CORRIDOR_PROPOSED, "corridor-")}
    ref = {**as_report(OFFICE_REFERENCE, "office-"), **as_report(CORRIDOR_REFERENCE, "corridor-")}
    return prop, ref
