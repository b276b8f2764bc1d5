import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_trace
from oracles import GATING_CASES, lowess_oracle, moving_average_oracle
from transitlabel.config import ConfigError, PreprocessConfig
from transitlabel.model import Motion
from transitlabel.preprocess import (
    axis_angle_quat, denoise_band, estimate_orientation, gate_microphone, leveling_quaternions,
    quat_to_matrix, smooth, stationary_bouts, to_world_frame,
)


def _random_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def test_identity_orientation_is_noop(rng):
    n = 50
    tr = make_trace(n, accel=rng.normal(size=(n, 3)), orientation=np.tile([1.0, 0, 0, 0], (n, 1)))
    w = to_world_frame(tr)
    np.testing.assert_array_equal(w.accel, tr.accel)
    np.testing.assert_array_equal(w.mag, tr.mag)


def test_yaw_90_maps_x_to_y():
    n = 5
    q = np.tile(axis_angle_quat([0, 0, 1], np.pi / 2), (n, 1))
    w = to_world_frame(make_trace(n, accel=np.tile([1.0, 0, 0], (n, 1)), orientation=q))
    np.testing.assert_allclose(w.accel, np.tile([0.0, 1.0, 0.0], (n, 1)), atol=1e-9)


def test_rotation_preserves_norms(rng):
    n = 200
    tr = make_trace(n, accel=rng.normal(size=(n, 3)) * 9, gyro=rng.normal(size=(n, 3)) * 90,
                    mag=rng.normal(size=(n, 3)) * 40, orientation=_random_quats(rng, n))
    w = to_world_frame(tr)
    for ch in ("accel", "gyro", "mag"):
        np.testing.assert_allclose(np.linalg.norm(getattr(w, ch), axis=1),
                                   np.linalg.norm(getattr(tr, ch), axis=1), rtol=1e-9)


def test_quat_matrix_is_orthonormal(rng):
    m = quat_to_matrix(_random_quats(rng, 30))
    np.testing.assert_allclose(np.einsum("nij,nkj->nik", m, m), np.tile(np.eye(3), (30, 1, 1)), atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(m), 1.0, atol=1e-12)


def test_missing_orientation_without_fallback_is_config_error():
    with pytest.raises(ConfigError):
        to_world_frame(make_trace(10), PreprocessConfig(fallback_orientation=False))


def test_leveling_takes_gravity_to_up(rng):
    g = rng.normal(size=(40, 3))
    g[0] = [0, 0, -1.0]  # antiparallel edge case
    m = quat_to_matrix(leveling_quaternions(g))
    up = np.einsum("nij,nj->ni", m, g / np.linalg.norm(g, axis=1, keepdims=True))
    np.testing.assert_allclose(up, np.tile([0, 0, 1.0], (40, 1)), atol=1e-9)


def test_fallback_orientation_levels_a_tilted_still_phone():
    n = 400
    tilt = quat_to_matrix(axis_angle_quat([1, 0, 0], np.radians(35)))
    accel = np.tile(tilt.T @ [0, 0, 9.81], (n, 1))
    w = to_world_frame(make_trace(n, accel=accel))
    np.testing.assert_allclose(w.accel[-1], [0, 0, 9.81], atol=1e-6)
    assert estimate_orientation(make_trace(n, accel=accel)).shape == (n, 4)


# --- smoothing -------------------------------------------------------------

def test_smooth_reproduces_constants_and_lines():
    np.testing.assert_allclose(smooth(np.full(40, 3.25)), 3.25, rtol=1e-12)
    ramp = 0.37 * np.arange(60) - 4.0
    np.testing.assert_allclose(smooth(ramp), ramp, atol=1e-9)


def test_smooth_matches_oracle(rng):
    x = np.sin(np.arange(300) / 9.0) + rng.uniform(-0.5, 0.5, 300)
    for h in (1, 4, 10):
        np.testing.assert_allclose(smooth(x, h), lowess_oracle(x, h), rtol=1e-9, atol=1e-12)


def test_smooth_rejects_short_series():
    with pytest.raises(ValueError):
        smooth(np.zeros(20), 10)
    with pytest.raises(ValueError):
        smooth(np.zeros(20), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 40), st.integers(2, 8))
def test_smooth_shift_equivariant(shift, h):
    x = np.cos(np.arange(200) * 0.21) * 3 + np.arange(200) % 7
    a = smooth(x, h)[shift + h:150]
    b = smooth(x[shift:], h)[h:150 - shift]
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_denoise_band_cases(rng):
    np.testing.assert_allclose(denoise_band(np.full(64, 2.0)), 2.0)
    imp = np.zeros(200)
    imp[100] = 1.0
    out = denoise_band(imp)
    assert np.count_nonzero(out > 0) == 32
    np.testing.assert_allclose(out[out > 0], 1 / 32)
    x = rng.normal(size=150)
    np.testing.assert_allclose(denoise_band(x), moving_average_oracle(x, 32), rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        denoise_band(np.zeros(31))


# --- gating ----------------------------------------------------------------

@pytest.mark.parametrize("name, seq, expected", GATING_CASES, ids=[c[0] for c in GATING_CASES])
def test_gating_scripts(name, seq, expected):
    got = gate_microphone(seq, 4.0, 60.0).intervals
    assert [tuple(map(float, iv)) for iv in got] == expected


def test_gating_invariants_on_random_sequences(rng):
    for _ in range(200):
        runs = [(list(Motion)[rng.integers(3)], float(rng.integers(1, 80)) / 2) for _ in range(12)]
        seq = []
        t = 0.0
        for state, dur in runs:
            for _ in range(int(dur * 2)):
                seq.append((t, state))
                t += 0.5
        sched = gate_microphone(seq)
        bouts = stationary_bouts(seq)
        stationary = sum(b - a for a, b in bouts)
        assert sched.total <= stationary + 1e-9
        for a, b in sched.intervals:
            assert b - a <= 60.0 + 1e-9
            assert any(s + 4.0 - 1e-9 <= a and b <= e + 1e-9 for s, e in bouts)
        ivs = sched.intervals
        assert all(ivs[i][1] <= ivs[i + 1][0] for i in range(len(ivs) - 1))
