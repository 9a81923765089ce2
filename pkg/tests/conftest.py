import numpy as np
import pytest

import dl4sim


@pytest.fixture(scope="session", autouse=True)
def compiled_kernel():
    # Build (or load) the jitted sample loop once, outside any timed test.
    dl4sim.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(0xD14)


@pytest.fixture
def hann_burst():
    """Factory for a Hann-windowed tone burst: impulse-like but narrowband,
    so the loop filters are transparent at its frequency."""

    def make(freq_hz=1000.0, length_ms=10.0, sample_rate=48000):
        n = int(round(length_ms / 1000.0 * sample_rate))
        t = np.arange(n) / sample_rate
        return np.sin(2.0 * np.pi * freq_hz * t) * np.hanning(n)

    return make


@pytest.fixture
def write_steps(tmp_path):
    def write(text, name="test.steps"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.rsplit("::", 1)[-1]
        _acceptance_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        label = name.removeprefix("test_").replace("_", " ")
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{status}: {label}")
