import pytest

from irrigrid.raster import GeoBox
from irrigrid.synth import SynthRegion, SynthScene, synth_generate, two_population_scene


def quad_scene(pixel_size=0.025, noise_sigma=0.0, seed=0):
    """1x1 degree scene (four 0.5° tiles) with alternating irrigated/rainfed bands and a lake."""
    b = GeoBox(0.0, 0.0, 1.0, 1.0)
    regions = []
    for i in range(4):
        lon0 = i * 0.25
        regions.append(SynthRegion(GeoBox(lon0, 0.1, lon0 + 0.25, 1.0),
                                   peak_month=3 if i % 2 == 0 else 8, amplitude=0.6,
                                   irrigated=i % 2 == 0))
    regions.append(SynthRegion(GeoBox(0.0, 0.0, 1.0, 0.1), land="water"))
    return SynthScene(b, pixel_size, tuple(regions), noise_sigma=noise_sigma, seed=seed)


@pytest.fixture(scope="session")
def quad():
    return synth_generate(quad_scene())


@pytest.fixture(scope="session")
def small_tile():
    return synth_generate(two_population_scene(pixel_size=0.025))


# --- acceptance summary -----------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
