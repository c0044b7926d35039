"""Channel impulse response and per-link channel metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .constants import BOLTZMANN
from .tracer import PathSet

TAP_MERGE_S = 1e-12


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Cir:
    delays_s: np.ndarray
    amplitudes: np.ndarray

    def __len__(self) -> int:
        return len(self.delays_s)

    @property
    def taps(self) -> list[tuple[float, complex]]:
        return list(zip(self.delays_s.tolist(), self.amplitudes.tolist()))

    @property
    def powers(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 0.0
    tx_gain_dbi: float = 0.0
    rx_gain_dbi: float = 0.0
    noise_temp_k: float = 290.0
    bandwidth_hz: float = 20e6

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ChannelError("bandwidth_hz must be > 0")
        if not self.noise_temp_k > 0:
            raise ChannelError("noise_temp_k must be > 0")

    @property
    def noise_dbm(self) -> float:
        return 10.0 * math.log10(BOLTZMANN * self.noise_temp_k * self.bandwidth_hz * 1e3)


@dataclass(frozen=True)
class ChannelMetrics:
    path_gain_db: float
    rss_dbm: float
    mean_delay_s: float
    rms_delay_s: float
    asa_deg: float
    zsa_deg: float
    mean_azimuth_deg: float
    mean_zenith_deg: float
    k_factor_db: float
    n_paths: int
    sinr_db: float | None = None

    @property
    def path_loss_db(self) -> float:
        return -self.path_gain_db

    def to_dict(self) -> dict:
        return asdict(self)


def _arrays(ps):
    """(powers, delays, azimuths, zeniths) from a PathSet or any iterable of PathRecords."""
    paths = list(ps)
    if not paths:
        raise ChannelError("empty path set")
    p = np.array([abs(x.amplitude) ** 2 for x in paths])
    tau = np.array([x.delay_s for x in paths])
    az = np.array([x.aoa_azimuth_deg for x in paths])
    zen = np.array([x.aoa_zenith_deg for x in paths])
    return p, tau, az, zen


def db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def build_cir(ps: PathSet) -> Cir:
    """Delay-sorted taps; taps closer than 1 ps are merged by complex addition."""
    paths = list(ps)
    if not paths:
        raise ChannelError("empty path set")
    tau = np.array([x.delay_s for x in paths])
    amp = np.array([x.amplitude for x in paths], dtype=np.complex128)
    order = np.lexsort((np.arange(len(tau)), tau))
    delays, amps = [], []
    group_start = None
    for i in order:
        if group_start is not None and tau[i] - group_start <= TAP_MERGE_S:
            amps[-1] += amp[i]
            continue
        group_start = tau[i]
        delays.append(tau[i])
        amps.append(amp[i])
    return Cir(np.asarray(delays), np.asarray(amps, dtype=np.complex128))


def path_gain(ps) -> float:
    p, *_ = _arrays(ps)
    return db(float(p.sum()))


def rss(ps, budget: LinkBudget) -> float:
    return budget.tx_power_dbm + budget.tx_gain_dbi + budget.rx_gain_dbi + path_gain(ps)


def sinr(target_rss_dbm: float, interferer_rss_dbm=(), budget: LinkBudget | None = None) -> float:
    """SINR in dB from received powers in dBm, with thermal noise kTB."""
    budget = budget or LinkBudget()
    to_mw = lambda x: 10.0 ** (x / 10.0) if math.isfinite(x) else 0.0  # noqa: E731
    denom = sum(to_mw(p) for p in interferer_rss_dbm) + to_mw(budget.noise_dbm)
    return db(to_mw(target_rss_dbm) / denom) if to_mw(target_rss_dbm) > 0 else -math.inf


def delay_stats(ps) -> tuple[float, float]:
    p, tau, _, _ = _arrays(ps)
    w = p.sum()
    if w <= 0:
        raise ChannelError("path set carries no power")
    mean = float((p * tau).sum() / w)
    rms = math.sqrt(max(float((p * (tau - mean) ** 2).sum() / w), 0.0))
    return mean, rms


def wrap_deg(x):
    """Wrap angles to (-180, 180]."""
    y = np.mod(np.asarray(x, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(y == -180.0, 180.0, y)


def angular_spreads(ps) -> tuple[float, float, float, float]:
    """(ASA, ZSA, mean azimuth, mean zenith) in degrees.

    Azimuths are re-centred on the strongest path before taking the weighted
    standard deviation, which keeps the spread continuous across +-180 deg.
    """
    p, _, az, zen = _arrays(ps)
    w = p.sum()
    if w <= 0:
        raise ChannelError("path set carries no power")
    ref = az[int(np.argmax(p))]
    rel = wrap_deg(az - ref)
    mean_rel = float((p * rel).sum() / w)
    asa = math.sqrt(max(float((p * (rel - mean_rel) ** 2).sum() / w), 0.0))
    mean_zen = float((p * zen).sum() / w)
    zsa = math.sqrt(max(float((p * (zen - mean_zen) ** 2).sum() / w), 0.0))
    return asa, zsa, float(wrap_deg(ref + mean_rel)), mean_zen


def k_factor(ps) -> float:
    """Strongest-path power over the sum of the rest, in dB (+inf for a single path)."""
    p, *_ = _arrays(ps)
    k = int(np.argmax(p))
    rest = float(p.sum() - p[k])
    if rest <= 0:
        return math.inf
    return db(float(p[k]) / rest)


def channel_metrics(ps, budget: LinkBudget | None = None, sinr_db: float | None = None) -> ChannelMetrics:
    budget = budget or LinkBudget()
    mean, rms = delay_stats(ps)
    asa, zsa, maz, mzen = angular_spreads(ps)
    return ChannelMetrics(
        path_gain_db=path_gain(ps),
        rss_dbm=rss(ps, budget),
        mean_delay_s=mean,
        rms_delay_s=rms,
        asa_deg=asa,
        zsa_deg=zsa,
        mean_azimuth_deg=maz,
        mean_zenith_deg=mzen,
        k_factor_db=k_factor(ps),
        n_paths=len(list(ps)),
        sinr_db=sinr_db,
    )
