"""Paired comparison statistics between two simulators, and RSSI level calibration.

The Student-t CDF, its quantiles and the p-values all come from one regularized
incomplete beta routine (Lentz continued fraction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class PairedSample:
    label: str
    proposed: float
    reference: float
    scale: str = "linear"  # or "dB"

    def __post_init__(self):
        if self.scale not in ("linear", "dB"):
            raise StatsError(f"scale must be 'linear' or 'dB', got {self.scale!r}")


@dataclass(frozen=True)
class ErrorSummary:
    errors: tuple[float, ...]
    mean: float
    max: float
    n: int


@dataclass(frozen=True)
class TTestResult:
    mean_diff: float
    std_diff: float
    n: int
    t_stat: float
    dof: int
    p_two_sided: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95


@dataclass(frozen=True)
class CalibrationResult:
    offset_db: float
    mae_raw: float
    rmse_raw: float
    mae_aligned: float
    rmse_aligned: float
    pearson_r: float
    n: int


# --- special functions -------------------------------------------------------


def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-16) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise StatsError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise StatsError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, dof: float) -> float:
    """P(T <= t) for Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise StatsError("dof must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * betainc_regularized(dof / 2.0, 0.5, dof / (dof + t * t))
    return 1.0 - tail if t > 0 else tail


def t_sf_two_sided(t: float, dof: float) -> float:
    """P(|T| >= |t|)."""
    if math.isinf(t):
        return 0.0
    return betainc_regularized(dof / 2.0, 0.5, dof / (dof + t * t))


def t_ppf(q: float, dof: float) -> float:
    """Quantile of Student's t by root-finding on :func:`t_cdf`."""
    if not 0.0 < q < 1.0:
        raise StatsError("q must lie in (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, dof)
    hi = 1.0
    while t_cdf(hi, dof) < q:
        hi *= 2.0
    return brentq(lambda x: t_cdf(x, dof) - q, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


# --- comparison metrics ----------------------------------------------------------


def _summary(errors: Sequence[float]) -> ErrorSummary:
    errs = tuple(float(e) for e in errors)
    if not errs:
        raise StatsError("no samples")
    return ErrorSummary(errs, sum(errs) / len(errs), max(errs), len(errs))


def rel_error(samples: Iterable[PairedSample]) -> ErrorSummary:
    """Per-pair |proposed - reference| / |reference| and its mean over pairs."""
    errs = []
    for s in samples:
        if s.reference == 0:
            raise StatsError(f"{s.label}: zero reference value, relative error undefined")
        errs.append(abs(s.proposed - s.reference) / abs(s.reference))
    return _summary(errs)


def abs_db_error(samples: Iterable[PairedSample]) -> ErrorSummary:
    return _summary([abs(s.proposed - s.reference) for s in samples])


def paired_t_test(differences: Sequence[float], confidence: float = 0.95) -> TTestResult:
    """Two-sided one-sample t test of paired differences against zero, with a t confidence interval."""
    x = np.asarray(differences, dtype=float)
    n = len(x)
    if n < 2:
        raise StatsError("paired t test needs at least two differences")
    if not 0.0 < confidence < 1.0:
        raise StatsError("confidence must lie in (0, 1)")
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    if s == 0.0:
        raise StatsError("differences have zero variance")
    se = s / math.sqrt(n)
    t = mean / se
    dof = n - 1
    crit = t_ppf(1.0 - (1.0 - confidence) / 2.0, dof)
    return TTestResult(mean, s, n, t, dof, t_sf_two_sided(t, dof),
                       mean - crit * se, mean + crit * se, confidence)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise StatsError("length mismatch")
    if len(x) < 2:
        raise StatsError("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("constant input, correlation undefined")
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


def calibrate_rssi(measured: Sequence[float], simulated: Sequence[float]) -> CalibrationResult:
    """Remove the constant level offset between simulated and measured RSSI.

    ``offset_db`` is the mean of (measured - simulated); aligned values are
    ``simulated + offset_db``. A simulator that over-predicts gets a negative offset.
    """
    m = np.asarray(measured, dtype=float)
    s = np.asarray(simulated, dtype=float)
    if len(m) != len(s):
        raise StatsError(f"length mismatch: {len(m)} measured vs {len(s)} simulated")
    if len(m) < 2:
        raise StatsError("need at least two points")
    offset = float(np.mean(m - s))
    raw = s - m
    aligned = (s + offset) - m
    return CalibrationResult(
        offset_db=offset,
        mae_raw=float(np.mean(np.abs(raw))),
        rmse_raw=float(np.sqrt(np.mean(raw ** 2))),
        mae_aligned=float(np.mean(np.abs(aligned))),
        rmse_aligned=float(np.sqrt(np.mean(aligned ** 2))),
        pearson_r=pearson_r(m, s),
        n=len(m),
    )


def path_gain_improvement(proposed_path_loss_db: Sequence[float],
                          reference_path_loss_db: Sequence[float]) -> list[float]:
    """Reference minus proposed path loss (positive: proposed link is stronger)."""
    if len(proposed_path_loss_db) != len(reference_path_loss_db):
        raise StatsError("length mismatch")
    return [r - p for p, r in zip(proposed_path_loss_db, reference_path_loss_db)]


def compare_links(proposed: dict, reference: dict, confidence: float = 0.95) -> dict:
    """Scenario-level accuracy summary over links present in both reports.

    Each argument maps a link key to a row with ``mean_delay_ns``, ``rms_delay_ns``,
    ``path_loss_db`` and ``sinr_db``. Relative errors use the magnitudes as given
    (path loss included), SINR uses the absolute dB deviation.
    """
    keys = sorted(set(proposed) & set(reference))
    if not keys:
        raise StatsError("no common links between the two reports")

    def pairs(col, scale="linear"):
        return [PairedSample(str(k), float(proposed[k][col]), float(reference[k][col]), scale) for k in keys]

    out = {
        "n_pairs": len(keys),
        "links": [list(k) if isinstance(k, tuple) else k for k in keys],
        "rel_error_pct": {
            "mean_delay": 100.0 * rel_error(pairs("mean_delay_ns")).mean,
            "rms_delay": 100.0 * rel_error(pairs("rms_delay_ns")).mean,
            "path_loss": 100.0 * rel_error(pairs("path_loss_db")).mean,
        },
    }
    sinr_pairs = [p for p in pairs("sinr_db", "dB") if math.isfinite(p.proposed) and math.isfinite(p.reference)]
    if sinr_pairs:
        e = abs_db_error(sinr_pairs)
        out["delta_sinr_db"] = {"mean": e.mean, "max": e.max}
    diffs = path_gain_improvement([float(proposed[k]["path_loss_db"]) for k in keys],
                                  [float(reference[k]["path_loss_db"]) for k in keys])
    imp = {"differences_db": diffs, "mean": float(np.mean(diffs))}
    if len(diffs) >= 2 and np.std(diffs) > 0:
        t = paired_t_test(diffs, confidence)
        imp.update(ci_low=t.ci_low, ci_high=t.ci_high, p_value=t.p_two_sided, t_stat=t.t_stat, dof=t.dof)
    out["path_gain_improvement_db"] = imp
    return out
