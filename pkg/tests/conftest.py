import math

import pytest

from quasiloc.groundstate import solve_ground_state
from quasiloc.nonlinearity import NonlinearityModel
from quasiloc.spectrum import radial_spectrum

# (λ, μ₀) = (0.4, -3) gives ω(0) = (√1.2, √0.2)
OMEGA0 = (math.sqrt(1.2), math.sqrt(0.2))

ACCEPTANCE_LINES: list = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model3():
    return NonlinearityModel.power(3)


@pytest.fixture(scope="session")
def model2():
    return NonlinearityModel.power(2)


@pytest.fixture(scope="session")
def gs3(model3):
    return solve_ground_state(model3, 1)


@pytest.fixture(scope="session")
def gs2(model2):
    return solve_ground_state(model2, 1)


@pytest.fixture(scope="session")
def radial3(model3, gs3):
    return radial_spectrum(model3, gs3, 3)


@pytest.fixture(scope="session")
def radial2(model2, gs2):
    return radial_spectrum(model2, gs2, 3)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """Default p = 3 pipeline, emitted to disk, with its wall time."""
    import time

    from quasiloc.pipeline import PipelineConfig, emit_report, run_pipeline

    out = tmp_path_factory.mktemp("default_run")
    t0 = time.perf_counter()
    report = run_pipeline(PipelineConfig.from_dict({}))
    files = emit_report(report, out)
    return {"report": report, "files": files, "out": out,
            "seconds": time.perf_counter() - t0}
