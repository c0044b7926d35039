import csv

import pytest

from rfray.builders import shoebox_scene
from rfray.bvh import build_bvh
from rfray.materials import material_catalog
from rfray.sensitivity import SweepError, SweepSpec, material_perturb, run_sweep, write_sweep_csv
from rfray.tracer import TraceConfig

BASE = TraceConfig(num_rays=5_000)


@pytest.fixture(scope="module")
def box():
    scene = shoebox_scene(material="concrete")
    return scene, build_bvh(scene)


@pytest.fixture(scope="module")
def grid_rows(box, catalog):
    scene, bvh = box
    return run_sweep(scene, BASE, SweepSpec((1, 2), (5_000, 20_000), (0.85, 1.0)), catalog, bvh)


def test_single_cell_is_its_own_baseline(box, catalog):
    scene, bvh = box
    (row,) = run_sweep(scene, BASE, SweepSpec((2,), (5_000,)), catalog, bvh)
    assert all(v == 0.0 for v in row.abs_error.values())
    assert all(v == 0.0 for v in row.norm_error_pct.values())
    assert set(row.values) == {"mean_delay", "rms_delay", "path_loss"}
    assert row.runtime_s > 0


def test_rows_follow_spec_order(grid_rows):
    cells = [(r.depth, r.n_rays, r.material_scale) for r in grid_rows]
    assert cells == [(d, n, s) for d in (1, 2) for n in (5_000, 20_000) for s in (0.85, 1.0)]


def test_errors_are_relative_to_max_cell(grid_rows):
    base = next(r for r in grid_rows if (r.depth, r.n_rays, r.material_scale) == (2, 20_000, 1.0))
    assert all(v == 0.0 for v in base.abs_error.values())
    for r in grid_rows:
        for k, v in r.values.items():
            assert r.abs_error[k] == pytest.approx(abs(v - base.values[k]), abs=1e-12)
            assert r.norm_error_pct[k] == pytest.approx(100 * r.abs_error[k] / abs(base.values[k]), rel=1e-12)


def test_depth_changes_metrics(grid_rows):
    shallow = next(r for r in grid_rows if (r.depth, r.n_rays, r.material_scale) == (1, 20_000, 1.0))
    assert shallow.values["path_loss"] > 0
    assert shallow.abs_error["rms_delay"] > 0


def test_material_scale_shifts_path_loss(grid_rows):
    a = next(r for r in grid_rows if (r.depth, r.n_rays, r.material_scale) == (2, 20_000, 0.85))
    assert a.abs_error["path_loss"] > 0


def test_sweep_is_deterministic(box, catalog):
    scene, bvh = box
    spec = SweepSpec((1, 2), (5_000,), metrics=("path_loss",))
    a = run_sweep(scene, BASE, spec, catalog, bvh)
    b = run_sweep(scene, BASE, spec, catalog, bvh)
    assert [r.values for r in a] == [r.values for r in b]
    assert set(a[0].values) == {"path_loss"}


def test_baseline_outside_grid_is_traced(box, catalog):
    scene, bvh = box
    rows = run_sweep(scene, BASE, SweepSpec((1, 2), (5_000,), (0.85,)), catalog, bvh)
    assert all(r.abs_error["path_loss"] > 0 for r in rows)


def test_material_perturb():
    cat = material_catalog()
    assert material_perturb(cat, 1.0)["concrete"] == cat["concrete"]
    up = material_perturb(cat, 1.15)["concrete"]
    assert up.perm_a == pytest.approx(1.15 * cat["concrete"].perm_a)
    assert up.cond_c == pytest.approx(1.15 * cat["concrete"].cond_c)
    assert material_perturb(cat, 0.5)["vacuum"].perm_a == 1.0
    with pytest.raises(SweepError):
        material_perturb(cat, 0.0)


def test_spec_validation():
    for bad in (dict(depths=(), ray_budgets=(1,)), dict(depths=(1,), ray_budgets=(0,)),
                dict(depths=(1,), ray_budgets=(1,), material_scales=(-1.0,)),
                dict(depths=(1,), ray_budgets=(1,), metrics=("k_factor",))):
        with pytest.raises(SweepError):
            SweepSpec(**bad)


def test_unknown_link(box, catalog):
    scene, bvh = box
    with pytest.raises(KeyError):
        run_sweep(scene, BASE, SweepSpec((1,), (100,), link=("nope", "rx")), catalog, bvh)


def test_sweep_csv(tmp_path, grid_rows):
    out = tmp_path / "sweep.csv"
    write_sweep_csv(grid_rows, out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["depth", "rays", "material_scale", "runtime_s",
                       "mean_delay_ns", "mean_delay_ae_ns", "mean_delay_ne_pct",
                       "rms_delay_ns", "rms_delay_ae_ns", "rms_delay_ne_pct",
                       "path_loss_db", "path_loss_ae_db", "path_loss_ne_pct"]
    assert len(rows) == len(grid_rows) + 1
    assert rows[1][:3] == ["1", "5000", "0.85"]
