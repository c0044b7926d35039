"""Frequency-dependent radio materials and Fresnel interaction coefficients.

Materials follow the ITU-R P.2040 power-law model::

    eps_r(f) = a * f_GHz**b        sigma(f) = c * f_GHz**d   [S/m]

The time convention is ``exp(+j w t)``; loss appears as a negative imaginary
part of the complex relative permittivity ``eps_r - j sigma / (w eps0)``.
"""
from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numba

from .constants import FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY

POLARIZATION_MODES = ("average", "perp")

_BUILTIN = "itu_p2040_3.json"


class MaterialError(ValueError):
    """Raised for malformed or non-physical material definitions."""


@dataclass(frozen=True)
class RadioMaterial:
    name: str
    perm_a: float
    perm_b: float
    cond_c: float
    cond_d: float
    valid_ghz: tuple[float, float]

    def relative_permittivity(self, frequency_hz: float) -> float:
        return self.perm_a * (frequency_hz / 1e9) ** self.perm_b

    def conductivity(self, frequency_hz: float) -> float:
        return self.cond_c * (frequency_hz / 1e9) ** self.cond_d

    def in_range(self, frequency_hz: float) -> bool:
        lo, hi = self.valid_ghz
        return lo <= frequency_hz / 1e9 <= hi

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "perm_a": self.perm_a,
            "perm_b": self.perm_b,
            "cond_c": self.cond_c,
            "cond_d": self.cond_d,
            "valid_ghz": list(self.valid_ghz),
        }


@dataclass(frozen=True)
class ComplexMedium:
    """Complex relative permittivity and the matching wave impedance (ohms)."""

    eta_complex: complex
    impedance: complex

    @classmethod
    def from_permittivity(cls, eps: complex) -> "ComplexMedium":
        eps = complex(eps)
        return cls(eps, FREE_SPACE_IMPEDANCE / cmath.sqrt(eps))


VACUUM = ComplexMedium.from_permittivity(1.0)


@dataclass(frozen=True)
class InteractionCoeffs:
    r_perp: complex
    r_par: complex
    t_perp: complex
    t_par: complex
    theta_t: complex


def _material_from_dict(entry: dict) -> RadioMaterial:
    try:
        lo, hi = entry["valid_ghz"]
        mat = RadioMaterial(
            name=str(entry["name"]),
            perm_a=float(entry["perm_a"]),
            perm_b=float(entry["perm_b"]),
            cond_c=float(entry["cond_c"]),
            cond_d=float(entry["cond_d"]),
            valid_ghz=(float(lo), float(hi)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MaterialError(f"malformed material entry {entry!r}: {exc}") from exc
    if not 0 < mat.valid_ghz[0] <= mat.valid_ghz[1]:
        raise MaterialError(f"material {mat.name!r}: invalid valid_ghz {mat.valid_ghz}")
    # power laws are monotone, so the range endpoints bound the whole window
    for f_ghz in mat.valid_ghz:
        if mat.relative_permittivity(f_ghz * 1e9) < 1.0 - 1e-12:
            raise MaterialError(f"material {mat.name!r}: eps_r < 1 at {f_ghz} GHz")
        if mat.conductivity(f_ghz * 1e9) < 0.0:
            raise MaterialError(f"material {mat.name!r}: negative conductivity at {f_ghz} GHz")
    return mat


def load_catalog(path: str | Path) -> dict[str, RadioMaterial]:
    """Load a material catalog from JSON.

    Accepts either a bare list of material objects or ``{"version": ..., "materials": [...]}``.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MaterialError(f"{path}: invalid JSON ({exc})") from exc
    return _catalog_from_doc(doc, str(path))


def _catalog_from_doc(doc, source: str) -> dict[str, RadioMaterial]:
    entries = doc["materials"] if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise MaterialError(f"{source}: expected a list of materials")
    catalog: dict[str, RadioMaterial] = {}
    for entry in entries:
        mat = _material_from_dict(entry)
        if mat.name in catalog:
            raise MaterialError(f"{source}: duplicate material {mat.name!r}")
        catalog[mat.name] = mat
    return catalog


def catalog_version() -> str:
    doc = json.loads(resources.files("rfray").joinpath("data", _BUILTIN).read_text())
    return doc["version"]


def material_catalog(path: str | Path | None = None) -> dict[str, RadioMaterial]:
    """Return the built-in ITU-R P.2040-3 catalog, or the one stored at ``path``."""
    if path is not None:
        return load_catalog(path)
    doc = json.loads(resources.files("rfray").joinpath("data", _BUILTIN).read_text())
    return _catalog_from_doc(doc, _BUILTIN)


def save_catalog(catalog: dict[str, RadioMaterial], path: str | Path) -> None:
    Path(path).write_text(json.dumps([m.to_dict() for m in catalog.values()], indent=2))


def scale_material(mat: RadioMaterial, scale: float) -> RadioMaterial:
    """Scale eps_r and sigma by ``scale``; eps_r is floored at 1 (b = 0 materials)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return replace(mat, perm_a=max(mat.perm_a * scale, 1.0), cond_c=mat.cond_c * scale)


def complex_permittivity(mat: RadioMaterial, frequency_hz: float) -> complex:
    omega = 2.0 * math.pi * frequency_hz
    return complex(
        mat.relative_permittivity(frequency_hz),
        -mat.conductivity(frequency_hz) / (omega * VACUUM_PERMITTIVITY),
    )


def eval_medium(mat: RadioMaterial, frequency_hz: float) -> ComplexMedium:
    if not mat.in_range(frequency_hz):
        warnings.warn(
            f"{frequency_hz / 1e9:.4g} GHz is outside the validity range "
            f"{mat.valid_ghz} GHz of material {mat.name!r}",
            stacklevel=2,
        )
    return ComplexMedium.from_permittivity(complex_permittivity(mat, frequency_hz))


# --- scalar kernels shared with the compiled ray walker ---------------------


@numba.njit(cache=True)
def normal_wavenumber(eps1, eps2, sin2_i):
    """sqrt(eps2 - eps1 sin^2) on the branch that decays into medium 2 (Im <= 0)."""
    s = cmath.sqrt(complex(eps2 - eps1 * sin2_i))
    # a round-off imaginary part must not flip a propagating wave backwards
    if s.imag > 1e-12 * abs(s):
        s = -s
    return s


@numba.njit(cache=True)
def interface_coeffs(cos_i, eps1, eps2):
    """Fresnel field coefficients for a planar interface, medium 1 -> medium 2.

    ``cos_i`` may be complex (inside a lossy slab). Returns
    ``(r_perp, r_par, t_perp, t_par, cos_t)``.
    """
    cos_i = complex(cos_i)
    sin2_i = 1.0 - cos_i * cos_i
    cos_t = normal_wavenumber(eps1, eps2, sin2_i) / cmath.sqrt(complex(eps2))
    r_perp, r_par, t_perp, t_par = _coeffs_from_cosines(cos_i, cos_t, eps1, eps2)
    return r_perp, r_par, t_perp, t_par, cos_t


@numba.njit(cache=True)
def _coeffs_from_cosines(cos_i, cos_t, eps1, eps2):
    eta1 = FREE_SPACE_IMPEDANCE / cmath.sqrt(complex(eps1))
    eta2 = FREE_SPACE_IMPEDANCE / cmath.sqrt(complex(eps2))
    d_perp = eta2 * cos_i + eta1 * cos_t
    d_par = eta2 * cos_t + eta1 * cos_i
    r_perp = (eta2 * cos_i - eta1 * cos_t) / d_perp
    r_par = (eta2 * cos_t - eta1 * cos_i) / d_par
    t_perp = 2.0 * eta2 * cos_i / d_perp
    t_par = 2.0 * eta2 * cos_i / d_par
    return r_perp, r_par, t_perp, t_par


@numba.njit(cache=True)
def slab_coeffs(cos_i, eps_out, eps_slab, k0, thickness):
    """Single-pass slab transmission for both polarizations: t_in * exp(-j kz d) * t_out."""
    _, _, tin_perp, tin_par, cos_t = interface_coeffs(cos_i, eps_out, eps_slab)
    # same medium on both sides: the exit angle equals the entry angle exactly
    _, _, tout_perp, tout_par = _coeffs_from_cosines(cos_t, complex(cos_i), eps_slab, eps_out)
    kz = k0 * normal_wavenumber(eps_out, eps_slab, 1.0 - cos_i * cos_i)
    prop = cmath.exp(-1j * kz * thickness)
    return _passive(tin_perp * prop * tout_perp), _passive(tin_par * prop * tout_par)


@numba.njit(cache=True)
def _passive(c):
    # single-pass product can exceed unit magnitude for very thin lossy slabs
    a = abs(c)
    return c / a if a > 1.0 else c


@numba.njit(cache=True)
def combine_polarizations(c_perp, c_par, mode):
    """Scalar coefficient: mode 0 averages the two power ratios (phase of perp), 1 is perp only."""
    if mode == 1:
        return c_perp
    mag = math.sqrt(0.5 * (abs(c_perp) ** 2 + abs(c_par) ** 2))
    if abs(c_perp) == 0.0:
        return complex(mag)
    return mag * c_perp / abs(c_perp)


def polarization_code(mode: str) -> int:
    if mode not in POLARIZATION_MODES:
        raise ValueError(f"polarization must be one of {POLARIZATION_MODES}, got {mode!r}")
    return POLARIZATION_MODES.index(mode)


# --- public scalar API -------------------------------------------------------


def snell(theta_i: float, medium1: ComplexMedium, medium2: ComplexMedium) -> complex:
    """Complex transmission angle; beyond the critical angle it has an imaginary part."""
    *_, cos_t = interface_coeffs(math.cos(theta_i), medium1.eta_complex, medium2.eta_complex)
    return cmath.acos(cos_t)


def fresnel(theta_i: float, medium1: ComplexMedium, medium2: ComplexMedium) -> InteractionCoeffs:
    if not 0.0 <= theta_i < math.pi / 2:
        raise ValueError("theta_i must lie in [0, pi/2)")
    r_perp, r_par, t_perp, t_par, cos_t = interface_coeffs(
        math.cos(theta_i), medium1.eta_complex, medium2.eta_complex
    )
    return InteractionCoeffs(r_perp, r_par, t_perp, t_par, cmath.acos(cos_t))


def slab_transmission(
    theta_i: float,
    outside: ComplexMedium,
    slab: ComplexMedium,
    thickness_m: float,
    frequency_hz: float,
    polarization: str = "perp",
) -> complex:
    """Transmission through a homogeneous slab, ignoring internal multiple bounces."""
    if thickness_m < 0:
        raise ValueError("thickness_m must be >= 0")
    k0 = 2.0 * math.pi * frequency_hz / SPEED_OF_LIGHT
    t_perp, t_par = slab_coeffs(
        complex(math.cos(theta_i)), outside.eta_complex, slab.eta_complex, k0, thickness_m
    )
    if polarization == "perp":
        return t_perp
    if polarization == "par":
        return t_par
    return combine_polarizations(t_perp, t_par, polarization_code(polarization))


def reflection_coefficient(theta_i: float, medium1: ComplexMedium, medium2: ComplexMedium,
                           polarization: str = "average") -> complex:
    """Scalar reflection coefficient used by the tracer for ``polarization``."""
    c = fresnel(theta_i, medium1, medium2)
    return combine_polarizations(c.r_perp, c.r_par, polarization_code(polarization))
