"""Independent reference computations for the test suite.

Nothing here imports the package under test; each oracle takes a different
route to the same quantity (closed form, brute force, or numeric integration).
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln

C = 299792458.0
ETA0 = 376.730313668


def image_source_paths(size, tx, rx, max_order: int, frequency_hz: float):
    """All specular paths in an empty perfectly reflecting box [0, L]^3.

    Per axis the image coordinate is (1 - 2u) x + 2 n L with u in {0, 1}; that
    image takes |n - u| + |n| wall bounces on the axis. Every image of a convex
    box is visible, so the path set is exactly the image set.
    Returns sorted (length_m, order, power_linear) tuples.
    """
    lam = C / frequency_hz
    per_axis = []
    for L, x in zip(size, tx):
        opts = []
        for u in (0, 1):
            for n in range(-max_order, max_order + 1):
                order = abs(n - u) + abs(n)
                if order <= max_order:
                    opts.append(((1 - 2 * u) * x + 2 * n * L, order))
        per_axis.append(opts)
    out = []
    for (ix, ox), (iy, oy), (iz, oz) in itertools.product(*per_axis):
        order = ox + oy + oz
        if order > max_order:
            continue
        d = math.dist((ix, iy, iz), rx)
        out.append((d, order, (lam / (4 * math.pi * d)) ** 2))
    return sorted(out)


def brute_intersect(tris: np.ndarray, origin, direction, t_min: float = 1e-6):
    """Closest hit over every triangle by solving each 3x3 barycentric system.

    ``tris`` has shape (n, 3, 3). Ties within 1e-9 m go to the lowest index.
    Returns (t, index) or (inf, -1).
    """
    tris = np.asarray(tris, float)
    d = np.asarray(direction, float)
    a = tris[:, 0]
    m = np.stack([np.broadcast_to(-d, a.shape), tris[:, 1] - a, tris[:, 2] - a], axis=2)
    ok = np.abs(np.linalg.det(m)) > 1e-14
    if not ok.any():
        return math.inf, -1
    sol = np.full((len(tris), 3), np.nan)
    rhs = (np.asarray(origin, float) - a[ok])[..., None]
    sol[ok] = np.linalg.solve(m[ok], rhs)[..., 0]
    t, u, v = sol.T
    with np.errstate(invalid="ignore"):
        hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (t > t_min)
    if not hit.any():
        return math.inf, -1
    best = t[hit].min()
    idx = int(np.flatnonzero(hit & (t <= best + 1e-9))[0])
    return float(t[idx]), idx


def nearest_linear(points: np.ndarray, q) -> tuple[int, float]:
    d2 = ((points - np.asarray(q, float)) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    return i, math.sqrt(d2[i])


def direct_metrics(powers, delays, az_deg, zen_deg) -> dict:
    """Power-weighted channel statistics evaluated with plain Python loops."""
    total = 0.0
    for p in powers:
        total += p
    mean_tau = sum(p * t for p, t in zip(powers, delays)) / total
    var_tau = sum(p * (t - mean_tau) ** 2 for p, t in zip(powers, delays)) / total
    strongest = max(range(len(powers)), key=lambda i: (powers[i], -i))
    ref = az_deg[strongest]
    rel = []
    for a in az_deg:
        r = (a - ref) % 360.0
        if r > 180.0:
            r -= 360.0
        rel.append(r)
    mean_rel = sum(p * r for p, r in zip(powers, rel)) / total
    asa = math.sqrt(sum(p * (r - mean_rel) ** 2 for p, r in zip(powers, rel)) / total)
    mean_zen = sum(p * z for p, z in zip(powers, zen_deg)) / total
    zsa = math.sqrt(sum(p * (z - mean_zen) ** 2 for p, z in zip(powers, zen_deg)) / total)
    if len(powers) == 1:
        # analytically zero; p * t / p need not round back to t
        var_tau, asa, zsa = 0.0, 0.0, 0.0
    rest = total - powers[strongest]
    k_db = math.inf if rest <= 0 else 10 * math.log10(powers[strongest] / rest)
    return {
        "path_gain_db": 10 * math.log10(total),
        "mean_delay_s": mean_tau,
        "rms_delay_s": math.sqrt(var_tau),
        "asa_deg": asa,
        "zsa_deg": zsa,
        "k_factor_db": k_db,
    }


def fresnel_perp_textbook(theta_i: float, eps1: float, eps2: float) -> complex:
    """Perpendicular reflection with a real refraction angle (lossless, no TIR)."""
    sin_t = math.sin(theta_i) * math.sqrt(eps1 / eps2)
    theta_t = math.asin(sin_t)
    eta1, eta2 = ETA0 / math.sqrt(eps1), ETA0 / math.sqrt(eps2)
    ci, ct = math.cos(theta_i), math.cos(theta_t)
    return complex((eta2 * ci - eta1 * ct) / (eta2 * ci + eta1 * ct))


def fresnel_par_textbook(theta_i: float, eps1: float, eps2: float) -> complex:
    n1, n2 = math.sqrt(eps1), math.sqrt(eps2)
    ci = math.cos(theta_i)
    ct = math.sqrt(1 - (n1 / n2 * math.sin(theta_i)) ** 2)
    return complex((n1 * ct - n2 * ci) / (n1 * ct + n2 * ci))


def t_cdf_quad(t: float, dof: float) -> float:
    """Student-t CDF from quadrature of the density."""
    log_norm = gammaln((dof + 1) / 2) - gammaln(dof / 2) - 0.5 * math.log(dof * math.pi)

    def pdf(x):
        return math.exp(log_norm - (dof + 1) / 2 * math.log1p(x * x / dof))

    half, _ = integrate.quad(pdf, 0.0, abs(t), epsabs=1e-13, epsrel=1e-13)
    return 0.5 + half if t >= 0 else 0.5 - half
