import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import C
from rfray.builders import box_quads, mesh_from_quads, rect
from rfray.channel import LinkBudget, sinr
from rfray.coverage import (
    CoverageError,
    GridSpec,
    compute_map,
    coverage_fraction,
    export_heatmap,
    frequency_sweep,
    inside_solid,
    ramp_color,
)
from rfray.scene import Scene, Transmitter
from rfray.tracer import TraceConfig

F = 2.437e9
CFG = TraceConfig(num_rays=10_000)


def empty_scene(*txs, frequency_hz=F):
    return Scene((), tuple(txs), (), frequency_hz)


def fspl_db(d, f=F):
    return 20 * math.log10(C / f / (4 * math.pi * d))


def test_empty_scene_distance_law(catalog):
    scene = empty_scene(Transmitter("tx", (0.0, 0.0, 1.5)))
    grid = compute_map(scene, CFG, GridSpec((0.5, -0.5), 1.0, 2, 1), catalog)
    near, far = grid.total_rss_dbm[0]
    assert near - far == pytest.approx(20 * math.log10(2), abs=1e-9)
    assert near == pytest.approx(fspl_db(1.0), abs=1e-9)
    assert grid.n_paths.tolist() == [[1, 1]]


def test_transmitter_power_and_superposition(catalog):
    a = Transmitter("a", (0.0, 0.0, 2.5), power_dbm=5.0)
    b = Transmitter("b", (4.0, 0.0, 2.5), power_dbm=-3.0)
    grid = compute_map(empty_scene(a, b), CFG, GridSpec((-0.5, -0.5), 1.0, 5, 1), catalog)
    assert grid.tx_ids == ("a", "b")
    budget = LinkBudget()
    for ix in range(5):
        x = ix * 1.0
        ra = 5.0 + fspl_db(math.hypot(x, 1.0))
        rb = -3.0 + fspl_db(math.hypot(x - 4.0, 1.0))
        assert grid.rss_dbm[:, 0, ix] == pytest.approx([ra, rb], abs=1e-9)
        total = 10 * math.log10(10 ** (ra / 10) + 10 ** (rb / 10))
        assert grid.total_rss_dbm[0, ix] == pytest.approx(total, abs=1e-9)
        strong, weak = max(ra, rb), min(ra, rb)
        assert grid.best_sinr_db[0, ix] == pytest.approx(sinr(strong, [weak], budget), abs=1e-9)


def test_cell_on_transmitter_is_invalid(catalog):
    grid = compute_map(empty_scene(Transmitter("tx", (0.5, 0.5, 1.5))), CFG, GridSpec((0.0, 0.0), 1.0, 2, 1), catalog)
    assert grid.valid.tolist() == [[False, True]]
    assert math.isnan(grid.total_rss_dbm[0, 0])
    assert coverage_fraction(grid, -math.inf).covered_fraction == 1.0


@pytest.fixture(scope="module")
def disc_grid(catalog):
    scene = empty_scene(Transmitter("tx", (0.0, 0.0, 2.5)))
    return compute_map(scene, CFG, GridSpec((-10.25, -10.25), 0.5, 41, 41), catalog)


def test_threshold_extremes(disc_grid):
    assert coverage_fraction(disc_grid, -math.inf).covered_fraction == 1.0
    assert coverage_fraction(disc_grid, math.inf).covered_fraction == 0.0
    res = coverage_fraction(disc_grid, -60.0)
    assert res.to_dict() == {"threshold_dbm": -60.0, "covered_fraction": res.covered_fraction, "frequency_hz": F}


@settings(max_examples=50, deadline=None)
@given(st.floats(-90, -30), st.floats(0, 20))
def test_fraction_non_increasing_in_threshold(disc_grid, thr, step):
    assert coverage_fraction(disc_grid, thr + step).covered_fraction <= coverage_fraction(disc_grid, thr).covered_fraction


def test_free_space_coverage_is_a_disc(disc_grid):
    # 1 m height offset between transmitter and the grid plane
    thr = fspl_db(7.0)
    r = math.sqrt(7.0 ** 2 - 1.0)
    got = coverage_fraction(disc_grid, thr).covered_fraction
    centers = GridSpec((-10.25, -10.25), 0.5, 41, 41).centers()
    exact = np.mean(np.hypot(centers[..., 0], centers[..., 1]) <= r)
    assert got == pytest.approx(exact, abs=1e-12)
    assert got == pytest.approx(math.pi * r * r / 20.5 ** 2, rel=0.03)


def test_frequency_sweep_free_space_scaling(catalog):
    scene = empty_scene(Transmitter("tx", (0.0, 0.0, 2.5)))
    spec = GridSpec((-10.25, -10.25), 0.5, 41, 41)
    freqs = [2.437e9, 5.0e9, 6.0e9]
    out = frequency_sweep(scene, CFG, spec, freqs, -55.0, catalog)
    fr = [r.covered_fraction for r in out]
    assert [r.frequency_hz for r in out] == freqs
    assert fr[0] >= fr[1] >= fr[2] and fr[0] > fr[2]
    g0, g1 = out[0].grid.total_rss_dbm, out[1].grid.total_rss_dbm
    assert np.allclose(g0 - g1, 20 * math.log10(5.0e9 / 2.437e9), atol=1e-9)


def test_inside_solid():
    closed = mesh_from_quads("pillar", "concrete", box_quads((1, 1, 0), (2, 2, 3)))
    wall = mesh_from_quads("wall", "concrete", [rect(0, 5.0, (0, 0), (4, 3))])
    scene = Scene((closed, wall), (), (), F)
    assert inside_solid(scene, (1.5, 1.5, 1.5))
    assert not inside_solid(scene, (3.0, 1.5, 1.5))
    assert not inside_solid(scene, (5.0 - 1e-3, 1.0, 1.0))


def test_closed_shell_around_transmitter_is_a_room():
    room = mesh_from_quads("room", "concrete", box_quads((0, 0, 0), (4, 4, 3)))
    with_tx = Scene((room,), (Transmitter("tx", (1.0, 1.0, 2.0)),), (), F)
    assert not inside_solid(with_tx, (2.0, 2.0, 1.5))
    assert inside_solid(Scene((room,), (), (), F), (2.0, 2.0, 1.5))


def test_cells_inside_pillar_are_excluded(catalog):
    room = mesh_from_quads("room", "concrete", box_quads((0, 0, 0), (4, 4, 3)))
    pillar = mesh_from_quads("pillar", "concrete", box_quads((1, 1, 0), (2, 2, 3)))
    scene = Scene((room, pillar), (Transmitter("tx", (3.0, 3.0, 2.5)),), (), F)
    grid = compute_map(scene, CFG, GridSpec.covering(scene, 1.0), catalog)
    assert (grid.ny, grid.nx) == (4, 4)
    assert not grid.valid[1, 1] and grid.valid.sum() == 15
    assert math.isnan(grid.total_rss_dbm[1, 1])
    assert np.all(np.isfinite(grid.total_rss_dbm[grid.valid]))


def test_metal_wall_shadows(catalog):
    wall = mesh_from_quads("wall", "metal", [rect(0, 2.0, (-3, 0), (3, 3))])
    floor = mesh_from_quads("floor", "concrete", [rect(2, 0.0, (-1, -3), (5, 3))])
    scene = Scene((wall, floor), (Transmitter("tx", (0.0, 0.0, 1.5)),), (), F)
    grid = compute_map(scene, CFG, GridSpec((-0.5, -0.5), 1.0, 5, 1), catalog)
    front, back = grid.total_rss_dbm[0, 1], grid.total_rss_dbm[0, 3]
    assert front - back > 30.0


def test_grid_errors(catalog):
    with pytest.raises(CoverageError):
        GridSpec((0, 0), 0.0, 1, 1)
    with pytest.raises(CoverageError):
        GridSpec((0, 0), 1.0, 0, 1)
    with pytest.raises(CoverageError):
        compute_map(empty_scene(), CFG, GridSpec((0, 0), 1.0, 1, 1), catalog)
    with pytest.raises(CoverageError):
        GridSpec.covering(empty_scene(), 1.0)
    room = Scene((mesh_from_quads("room", "concrete", box_quads((0, 0, 0), (4, 4, 3))),),
                 (Transmitter("tx", (1.0, 1.0, 2.5)),), (), F)
    with pytest.raises(CoverageError, match="outside"):
        compute_map(room, CFG, GridSpec((3.0, 3.0), 1.0, 2, 2), catalog)


def test_covering_grid_is_centred():
    room = Scene((mesh_from_quads("room", "concrete", box_quads((0, 0, 0), (15, 3.5, 3.3))),), (), (), F)
    spec = GridSpec.covering(room, 0.5)
    assert (spec.nx, spec.ny) == (30, 7)
    assert spec.origin == pytest.approx((0.0, 0.0))
    assert spec.centers()[0, 0] == pytest.approx((0.25, 0.25, 1.5))
    spec2 = GridSpec.covering(room, 2.0)
    assert (spec2.nx, spec2.ny) == (7, 1)
    assert spec2.origin == pytest.approx((0.5, 0.75))


def test_ramp_colors():
    lo, hi = -100.0, -20.0
    assert ramp_color(lo, lo, hi) == (0, 0, 128)
    assert ramp_color(hi, lo, hi) == (255, 0, 0)
    assert ramp_color(-math.inf, lo, hi) == (0, 0, 128)
    assert ramp_color(10.0, lo, hi) == (255, 0, 0)
    assert ramp_color(math.nan, lo, hi) == (255, 255, 255)
    assert ramp_color(-60.0, lo, hi) == (0, 255, 255)


def test_heatmap_export(tmp_path, catalog):
    grid = compute_map(empty_scene(Transmitter("tx", (0.0, 0.0, 2.5))), CFG, GridSpec((-0.5, -0.5), 1.0, 1, 1), catalog)
    csv_path, ppm_path = export_heatmap(grid, tmp_path / "one")
    assert csv_path.read_text() == f"{fspl_db(1.0):.6g}\n"
    data = ppm_path.read_bytes()
    assert data.startswith(b"P6\n1 1\n255\n") and len(data) == len(b"P6\n1 1\n255\n") + 3
    again = export_heatmap(grid, tmp_path / "two")
    assert again[0].read_bytes() == csv_path.read_bytes() and again[1].read_bytes() == data
    _, sinr_ppm = export_heatmap(grid, tmp_path / "s", "best_sinr")
    assert sinr_ppm.exists()
    with pytest.raises(CoverageError):
        export_heatmap(grid, tmp_path / "x", "bogus")


def test_heatmap_orientation(tmp_path, catalog):
    grid = compute_map(empty_scene(Transmitter("tx", (0.0, 0.0, 2.5))), CFG, GridSpec((-0.5, -0.5), 1.0, 1, 3), catalog)
    csv_rows = (tmp_path / "m.csv")
    export_heatmap(grid, tmp_path / "m")
    vals = [float(r) for r in csv_rows.read_text().split()]
    assert vals[0] > vals[1] > vals[2]
    pix = (tmp_path / "m.ppm").read_bytes()[-9:]
    # largest y (weakest cell) on the top row
    top = tuple(pix[:3])
    assert top == ramp_color(vals[2], -100.0, -20.0)
