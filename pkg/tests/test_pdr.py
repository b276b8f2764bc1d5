import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import true_landmark_resets
from transitlabel.model import SemanticClass, map_label
from transitlabel.pipeline import analyse_trace
from transitlabel.pdr import (
    PositionTrail, StepEvent, compass_heading, dead_reckon, detect_steps, detection_weight,
    estimate_heading, reset_at_landmark,
)
from transitlabel.preprocess import smooth
from transitlabel.simulator import NoiseModel
from transitlabel.simulator.signals import TraceBuilder

FS = 50.0


def test_stride_bounds():
    with pytest.raises(ValueError):
        StepEvent(0.0, 0.2)
    with pytest.raises(ValueError):
        StepEvent(0.0, 1.3)


# --- steps -------------------------------------------------------------

def test_no_steps_when_stationary(rng):
    assert detect_steps(smooth(9.81 + rng.normal(0, 0.05, 1000))) == []


@pytest.mark.parametrize("seed", range(5))
def test_fifty_simulated_steps(seed):
    b = TraceBuilder(np.random.default_rng(seed), (10.0, 10.0), 0.0, NoiseModel())
    b.still(2.0)
    b.walk([(45.0, 10.0)], n_steps=50, cadence=2.0)
    b.still(2.0)
    r = b.render("hand", 1013.0)
    steps = detect_steps(smooth(np.linalg.norm(r["world_accel"], axis=1)))
    assert abs(len(steps) - 50) <= 1


def test_running_cadence_respects_spacing():
    t = np.arange(int(20 * FS)) / FS
    x = 9.81 + 4.0 * np.sin(2 * np.pi * 3.5 * t)
    steps = detect_steps(x)
    assert 0 < len(steps) <= 20 / 0.3
    assert np.all(np.diff([s.t for s in steps]) >= 0.3 - 1e-9)


def test_isolated_peak_is_not_a_step():
    x = np.full(500, 9.81)
    x[250] = 12.0
    assert detect_steps(x) == []


# --- heading -----------------------------------------------------------

def test_compass_heading_convention():
    # level frame x right, y forward; north along floor +x
    assert compass_heading(np.array([[0.0, 25.0, -38.0]]))[0] == pytest.approx(0.0)
    assert compass_heading(np.array([[25.0, 0.0, -38.0]]))[0] == pytest.approx(90.0)


def test_converges_to_constant_compass():
    n = int(10 * FS)
    c = np.full(n, 30.0)
    c[0] = 0.0  # start far off
    h = estimate_heading(np.zeros(n), c)
    i5 = int(5 * FS)
    # error shrinks geometrically: e_k = 30 alpha^k
    assert 30.0 - h[i5] == pytest.approx(30.0 * 0.98**i5, rel=1e-9)
    assert 30.0 - h[i5] < 0.01 * 30.0


def test_drift_steady_state_matches_fixed_point():
    n = int(60 * FS)
    h = estimate_heading(np.full(n, 1.0), np.zeros(n))
    # fixed point of h = a (h + w dt) + (1 - a) 0  ->  h* = a w dt / (1 - a)
    assert h[-1] == pytest.approx(0.98 * 1.0 / FS / 0.02, rel=1e-6)
    assert abs(h[-1]) < 1.0


def test_compass_ignored_during_magnetic_peak():
    n = int(10 * FS)
    c = np.full(n, 45.0)
    gated = np.zeros(n, bool)
    a, b = int(5 * FS), int(5.5 * FS)
    c[a:b] += 80.0
    gated[a:b] = True
    h0 = estimate_heading(np.zeros(n), np.full(n, 45.0))
    h = estimate_heading(np.zeros(n), c, gated=gated)
    assert np.max(np.abs(h - h0)) < 0.5


def test_compass_unwrapped_across_pm180():
    n = 200
    c = np.where(np.arange(n) % 2, 179.0, -179.0)
    h = estimate_heading(np.zeros(n), c)
    assert np.all(np.abs(np.abs(h) - 179.5) < 1.5)


def test_exact_one_degree_drift_with_compass_noise(rng):
    """A walking trace with a 1 deg/s gyro bias and 5 deg compass noise."""
    b = TraceBuilder(rng, (5.0, 5.0), 0.0, NoiseModel(heading_drift=0.0))
    b.still(1.0)
    b.walk([(40.0, 5.0), (40.0, 30.0), (10.0, 30.0)])
    b.still(5.0)
    r = b.render("hand", 1013.0)
    gz = np.einsum("nij,nj->ni", _rot(r["orientation"]), r["gyro"])[:, 2] + 1.0
    mag = np.einsum("nij,nj->ni", _rot(r["orientation"]), r["mag"])
    h = estimate_heading(gz, compass_heading(mag))
    err = (h - r["heading"] + 180) % 360 - 180
    assert np.sqrt(np.mean(err**2)) <= 10.0


def _rot(q):
    from transitlabel.preprocess import quat_to_matrix
    return quat_to_matrix(q)


# --- dead reckoning ----------------------------------------------------

def steps_at(n, stride=0.7, dt=0.5, t0=0.5):
    return [StepEvent(t0 + i * dt, stride) for i in range(n)]


def test_straight_line():
    tr = dead_reckon(steps_at(10), np.zeros(10), (0.0, 0.0))
    assert tr.end == pytest.approx((7.0, 0.0))
    assert tr.dist[-1] == pytest.approx(7.0)


def test_right_angle():
    tr = dead_reckon(steps_at(8), [0.0] * 4 + [90.0] * 4, (0.0, 0.0))
    assert tr.end == pytest.approx((2.8, 2.8))


def test_zero_steps():
    tr = dead_reckon([], np.zeros(5), (3.0, 4.0), t_end=2.0)
    assert tr.end == (3.0, 4.0) and tr.t[-1] == 2.0


def test_sampled_heading_is_interpolated():
    t = np.arange(0, 5, 0.02)
    tr = dead_reckon(steps_at(4, dt=1.0), np.full(len(t), 90.0), (0.0, 0.0), t)
    assert tr.end == pytest.approx((0.0, 2.8), abs=1e-12)


# --- resets ------------------------------------------------------------

def test_reset_snaps_and_back_propagates():
    tr = dead_reckon(steps_at(10), np.zeros(10), (0.0, 0.0))
    gate = (4.0, 0.0)  # trail ends 3 m east of it
    out = reset_at_landmark(tr, tr.t[-1], gate)
    assert out.end == pytest.approx(gate)
    mid = len(tr.t) // 2  # halfway by distance walked
    assert tr.x[mid] - out.x[mid] == pytest.approx(1.5)
    assert out.dist[-1] == 0.0


def test_reset_at_true_position_is_identity():
    tr = dead_reckon(steps_at(6), np.linspace(0, 90, 6), (1.0, 1.0))
    out = reset_at_landmark(tr, tr.t[3], tr.position_at(tr.t[3]))
    np.testing.assert_allclose(out.x, tr.x, atol=1e-12)
    np.testing.assert_allclose(out.y, tr.y, atol=1e-12)


def test_two_resets_restart_accumulation():
    tr = dead_reckon(steps_at(20), np.zeros(20), (0.0, 0.0))
    a = reset_at_landmark(tr, tr.t[8], (5.0, 1.0))
    b = reset_at_landmark(a, a.t[15], (10.0, 1.0))
    assert b.dist_at(b.t[8]) == 0.0 and b.dist_at(b.t[15]) == 0.0
    assert b.dist[16] == pytest.approx(0.7)
    assert np.all(np.diff(b.dist[9:15]) > 0)
    # the second correction is spread only back to the first reset
    assert b.position_at(b.t[8]) == pytest.approx((5.0, 1.0))
    assert len(b.resets) == 2


def test_reset_between_steps_inserts_point():
    tr = dead_reckon(steps_at(4), np.zeros(4), (0.0, 0.0))
    out = reset_at_landmark(tr, 1.2, (0.0, 0.0))
    assert 1.2 in out.t.tolist()
    assert out.position_at(1.2) == (0.0, 0.0)


def test_reset_outside_trail_raises():
    tr = dead_reckon(steps_at(4), np.zeros(4), (0.0, 0.0))
    with pytest.raises(ValueError):
        reset_at_landmark(tr, 10.0, (0.0, 0.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(1, 29), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
def test_reset_continuity(n, k, cx, cy, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    tr = dead_reckon(steps_at(n), np.cumsum(rng.normal(0, 20, n)), (0.0, 0.0))
    t_r = tr.t[k]
    px, py = tr.position_at(t_r)
    out = reset_at_landmark(tr, t_r, (px + cx, py + cy))
    jump = np.hypot(np.diff(out.x) - np.diff(tr.x), np.diff(out.y) - np.diff(tr.y))
    assert np.all(jump <= np.hypot(cx, cy) + 1e-9)
    assert out.dist_at(t_r) == 0.0
    assert np.all(np.diff(out.dist[k:]) >= 0)


# --- weights -----------------------------------------------------------

def test_weight_values_and_monotonicity():
    assert detection_weight(0.0) == 1.0
    assert detection_weight(9.0) == pytest.approx(0.1)
    d = np.linspace(0, 500, 1001)
    w = [detection_weight(x) for x in d]
    assert all(a > b for a, b in zip(w, w[1:]))
    with pytest.raises(ValueError):
        detection_weight(-1.0)


# --- resets on simulator traces ----------------------------------------

@pytest.mark.parametrize("cls", [c for c in SemanticClass if map_label(c) is not None])
def test_true_landmark_resets(class_traces, cls):
    trace, truth = class_traces[cls]
    checks = list(true_landmark_resets(analyse_trace(trace), trace, truth))
    assert checks
    for before, after, jump, corr, rigid in checks:
        assert after < before  # strictly smaller at the reset point
        assert after < 1e-9
        assert jump <= corr + 1e-9  # no step of the trail moves more than the correction
        assert rigid < 1e-9  # the trail after the reset moves as a whole
