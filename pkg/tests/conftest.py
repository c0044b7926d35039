import warnings

import pytest

from rfray.bvh import build_bvh
from rfray.materials import material_catalog
from rfray.scene import bundled_scene_path, load_scene

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n, title = marker.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _CRITERIA[n] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[n]
        line = f"CRITERION {n:2d} {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture(scope="session")
def catalog():
    return material_catalog()


@pytest.fixture(scope="session")
def office(catalog):
    return load_scene(bundled_scene_path("office"), catalog)


@pytest.fixture(scope="session")
def office_bvh(office):
    return build_bvh(office)


@pytest.fixture(autouse=True)
def _quiet_material_range():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*outside the validity range")
        yield
