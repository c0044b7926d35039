import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ETA0, fresnel_par_textbook, fresnel_perp_textbook
from rfray.constants import SPEED_OF_LIGHT, VACUUM_PERMITTIVITY
from rfray.materials import (
    VACUUM,
    ComplexMedium,
    MaterialError,
    RadioMaterial,
    eval_medium,
    fresnel,
    load_catalog,
    reflection_coefficient,
    save_catalog,
    scale_material,
    slab_transmission,
    snell,
)

FREQS = (2.437e9, 5e9, 6e9)
REQUIRED = ("concrete", "brick", "plasterboard", "wood", "glass", "metal", "ceiling_board", "floorboard")

lossless_eps = st.floats(1.0, 20.0)


def medium(eps):
    return ComplexMedium.from_permittivity(eps)


def test_catalog_contents(catalog):
    for name in REQUIRED:
        assert name in catalog
    assert catalog["metal"].conductivity(2.437e9) >= 1e6
    for m in catalog.values():
        assert m.relative_permittivity(2.437e9) >= 1.0
        assert m.conductivity(2.437e9) >= 0.0


def test_power_law_monotone_over_sweep(catalog):
    for m in catalog.values():
        eps = [m.relative_permittivity(f) for f in FREQS]
        sig = [m.conductivity(f) for f in FREQS]
        for seq, exponent in ((eps, m.perm_b), (sig, m.cond_d)):
            steps = np.diff(seq)
            if exponent > 0:
                assert np.all(steps >= 0)
            elif exponent < 0:
                assert np.all(steps <= 0)
            else:
                assert np.all(steps == 0)


def test_catalog_roundtrip(tmp_path, catalog):
    path = tmp_path / "mats.json"
    save_catalog(catalog, path)
    assert load_catalog(path) == catalog


@pytest.mark.parametrize("entry, fragment", [
    ({"name": "x", "perm_a": 0.5, "perm_b": 0, "cond_c": 0, "cond_d": 0, "valid_ghz": [1, 10]}, "eps_r < 1"),
    ({"name": "x", "perm_a": 2, "perm_b": 0, "cond_c": -1, "cond_d": 0, "valid_ghz": [1, 10]}, "negative"),
    ({"name": "x", "perm_a": 2}, "malformed"),
])
def test_catalog_rejects_bad_entries(tmp_path, entry, fragment):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([entry]))
    with pytest.raises(MaterialError, match=fragment):
        load_catalog(path)


def test_eval_medium_convention(catalog):
    f = 2.437e9
    m = eval_medium(catalog["concrete"], f)
    sigma = catalog["concrete"].conductivity(f)
    assert m.eta_complex == pytest.approx(complex(5.24, -sigma / (2 * math.pi * f * VACUUM_PERMITTIVITY)))
    assert m.eta_complex.imag <= 0
    assert abs(m.impedance) <= ETA0
    assert eval_medium(catalog["vacuum"], f).impedance == ETA0
    assert medium(4.0).impedance == pytest.approx(ETA0 / 2, rel=1e-15)
    assert abs(eval_medium(catalog["metal"], f).impedance) < 0.1


def test_eval_medium_warns_outside_validity(catalog):
    with pytest.warns(UserWarning, match="validity"):
        eval_medium(catalog["floorboard"], 2.437e9)


def test_snell_examples():
    glass = medium(6.0)
    assert snell(0.0, VACUUM, glass) == 0
    t = snell(math.radians(45), VACUUM, glass)
    assert abs(t.imag) < 1e-15
    assert t.real == pytest.approx(math.asin(math.sin(math.radians(45)) / math.sqrt(6)), abs=1e-12)
    assert t.real < math.radians(45)
    beyond = snell(math.radians(60), glass, VACUUM)
    assert abs(beyond.imag) > 0
    assert abs(fresnel(math.radians(60), glass, VACUUM).r_perp) == pytest.approx(1.0, abs=1e-12)


def test_fresnel_examples(catalog):
    c = fresnel(0.0, VACUUM, medium(4.0))
    assert c.r_perp == pytest.approx(-1 / 3, abs=1e-15)
    assert abs(c.r_par) == pytest.approx(abs(c.r_perp), abs=1e-15)
    assert abs(fresnel(math.radians(89.999), VACUUM, medium(4.0)).r_perp) > 0.999
    metal = eval_medium(catalog["metal"], 2.437e9)
    assert fresnel(0.3, VACUUM, metal).r_perp == pytest.approx(-1.0, abs=1e-3)
    with pytest.raises(ValueError):
        fresnel(math.pi / 2, VACUUM, metal)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.5), lossless_eps, lossless_eps)
def test_fresnel_matches_textbook(theta, e1, e2):
    if e1 > e2 and math.sin(theta) * math.sqrt(e1 / e2) >= 1.0 - 1e-9:
        return
    c = fresnel(theta, medium(e1), medium(e2))
    assert abs(c.r_perp - fresnel_perp_textbook(theta, e1, e2)) < 1e-12
    assert abs(c.r_par - fresnel_par_textbook(theta, e1, e2)) < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.5), lossless_eps, lossless_eps)
def test_lossless_energy_and_reciprocity(theta, e1, e2):
    if e1 > e2 and math.sin(theta) * math.sqrt(e1 / e2) >= 1.0 - 1e-6:
        return
    a, b = medium(e1), medium(e2)
    c = fresnel(theta, a, b)
    ct = cmath.cos(c.theta_t).real
    ratio = (a.impedance * ct / (b.impedance * math.cos(theta))).real
    assert abs(c.r_perp) ** 2 + abs(c.t_perp) ** 2 * ratio == pytest.approx(1.0, abs=1e-9)
    assert abs(c.r_par) ** 2 + abs(c.t_par) ** 2 * ratio == pytest.approx(1.0, abs=1e-9)
    back = fresnel(c.theta_t.real, b, a)
    assert abs(c.r_perp + back.r_perp) < 1e-9


def test_passivity_grid(catalog):
    out = eval_medium(catalog["vacuum"], 2.437e9)
    for f in FREQS:
        for mat in catalog.values():
            m = eval_medium(mat, f)
            for deg in range(90):
                th = math.radians(deg)
                c = fresnel(th, out, m)
                assert abs(c.r_perp) <= 1 + 1e-12 and abs(c.r_par) <= 1 + 1e-12
                for thick in (0.0, 0.01, 0.1):
                    for pol in ("perp", "par", "average"):
                        assert abs(slab_transmission(th, out, m, thick, f, pol)) <= 1 + 1e-12


def slab_hand(theta, eps, thickness, f):
    """Single-pass perpendicular slab transmission written with normal wavenumbers."""
    k0 = 2 * math.pi * f / SPEED_OF_LIGHT
    ci = math.cos(theta)
    q = np.sqrt(complex(eps) - math.sin(theta) ** 2)
    if q.imag > 0:
        q = -q
    t_in = 2 * ci / (ci + q)
    t_out = 2 * q / (q + ci)
    return t_in * np.exp(-1j * k0 * q * thickness) * t_out


@pytest.mark.parametrize("deg", [0, 30, 60])
def test_slab_concrete_matches_hand_calculation(catalog, deg):
    f = 2.437e9
    m = eval_medium(catalog["concrete"], f)
    got = slab_transmission(math.radians(deg), VACUUM, m, 0.1, f, "perp")
    want = slab_hand(math.radians(deg), m.eta_complex, 0.1, f)
    assert abs(got - want) < 1e-12
    assert 20 * math.log10(abs(got)) == pytest.approx(20 * math.log10(abs(want)), abs=1e-9)


def test_slab_trivial_cases():
    assert slab_transmission(0.4, VACUUM, VACUUM, 0.0, 2.437e9) == pytest.approx(1.0, abs=1e-15)
    f = 5e9
    thin = slab_transmission(0.2, VACUUM, medium(4.0), 0.05, f, "perp")
    c_in = fresnel(0.2, VACUUM, medium(4.0))
    c_out = fresnel(c_in.theta_t.real, medium(4.0), VACUUM)
    assert abs(thin) == pytest.approx(abs(c_in.t_perp * c_out.t_perp), rel=1e-12)
    with pytest.raises(ValueError):
        slab_transmission(0.2, VACUUM, medium(4.0), -1.0, f)


def test_average_polarization_magnitude():
    c = fresnel(0.7, VACUUM, medium(5.0))
    r = reflection_coefficient(0.7, VACUUM, medium(5.0), "average")
    assert abs(r) == pytest.approx(math.sqrt((abs(c.r_perp) ** 2 + abs(c.r_par) ** 2) / 2), rel=1e-14)
    assert cmath.phase(r) == pytest.approx(cmath.phase(c.r_perp), abs=1e-14)
    assert reflection_coefficient(0.7, VACUUM, medium(5.0), "perp") == c.r_perp
    with pytest.raises(ValueError):
        reflection_coefficient(0.7, VACUUM, medium(5.0), "circular")


def test_scale_material():
    m = RadioMaterial("m", 4.0, 0.0, 0.2, 0.5, (1.0, 10.0))
    assert scale_material(m, 1.0) == m
    assert scale_material(m, 1.15).perm_a == pytest.approx(4.6)
    assert scale_material(m, 1.15).cond_c == pytest.approx(0.23)
    assert scale_material(m, 0.1).perm_a == 1.0
    with pytest.raises(ValueError):
        scale_material(m, 0.0)
