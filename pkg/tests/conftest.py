import numpy as np
import pytest

from fanct.geometry import GeometrySpec, full_circle_angles


def small_geometry(image_size=16, n_angles=12, n_detector=25, angles=None):
    if angles is None:
        angles = full_circle_angles(n_angles)
    return GeometrySpec(
        source_to_center=60.0,
        center_to_detector=40.0,
        n_detector=n_detector,
        detector_pixel_size=1.5,
        angles=angles,
        image_size=image_size,
        image_pixel_size=1.0,
    )


@pytest.fixture
def geom16():
    return small_geometry()


@pytest.fixture
def desk():
    from fanct.scenarios import desk_geometry
    return desk_geometry()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------------
# Tests marked ``acceptance(number, title)`` are collected here and printed as
# one PASS/FAIL line each at the end of the run. Measured values attached with
# ``record_property("detail", ...)`` are shown alongside.

ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = marker.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        ACCEPTANCE[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[number]
        line = f"criterion {number:>2}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
