import numpy as np
import pytest

from transitlabel.model import SAMPLE_DT, GroundTruthSpan, Placement, SemanticClass, SensorTrace


def make_trace(n=100, *, accel=None, gyro=None, mag=None, pressure=None, orientation=None,
               trace_id="t0", station_id="st", placement=Placement.HAND, **kw) -> SensorTrace:
    """Minimal valid trace; channels default to a phone lying flat and still."""
    t = np.arange(n) * SAMPLE_DT
    accel = np.tile([0.0, 0.0, 9.81], (n, 1)) if accel is None else accel
    gyro = np.zeros((n, 3)) if gyro is None else gyro
    mag = np.tile([25.0, 0.0, -38.0], (n, 1)) if mag is None else mag
    pressure = np.full(n, 1013.0) if pressure is None else pressure
    return SensorTrace(trace_id, station_id, placement, kw.pop("start_position", (1.0, 2.0)), t,
                       accel, gyro, mag, pressure, orientation, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def station():
    from transitlabel.simulator import generate_station
    return generate_station(1)


@pytest.fixture(scope="session")
def class_traces(station):
    """One noisy simulated trace per semantic class, with simulator truth."""
    from transitlabel.simulator import simulate_trace, target_scenario
    out = {}
    for i, cls in enumerate(SemanticClass):
        scenario = target_scenario(cls, np.random.default_rng([i, 99]), Placement.HAND)
        out[cls] = simulate_trace(station, scenario, seed=1000 + i, trace_id=f"c-{cls.value}")
    return out


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


__all__ = ["ACCEPTANCE", "make_trace", "GroundTruthSpan"]
