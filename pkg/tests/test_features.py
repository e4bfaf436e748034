import numpy as np
import pytest

from gazeps.errors import (
    DegenerateTimingError,
    InvalidInputError,
    WindowUnavailableError,
)
from gazeps.features import (
    Method,
    Recording,
    SelectionEvent,
    VelocityWindow,
    angle_series,
    angular_distance,
    angular_distances,
    angular_velocity_series,
    extract_window,
    window_slice,
    windows_from_recording,
)


def rotate(v, axis, angle_deg):
    """Rodrigues rotation, independent of any package code."""
    v = np.asarray(v, dtype=float)
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    a = np.radians(angle_deg)
    return v * np.cos(a) + np.cross(k, v) * np.sin(a) + k * np.dot(k, v) * (1 - np.cos(a))


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def great_circle_path(start, axis, rate_deg_s, t_ms):
    """Constant-rate rotation of a gaze vector about a perpendicular axis."""
    return np.array([rotate(start, axis, rate_deg_s * t * 1e-3) for t in t_ms])


class TestAngularDistance:
    def test_identity(self):
        assert angular_distance((0, 0, 1), (0, 0, 1)) == 0.0

    def test_orthogonal(self):
        assert angular_distance((0, 0, 1), (0, 1, 0)) == pytest.approx(90.0, abs=1e-12)

    def test_antipodal(self):
        assert angular_distance((0, 0, 1), (0, 0, -1)) == pytest.approx(180.0, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            angular_distance((np.nan, 0, 1), (0, 0, 1))

    def test_rejects_non_unit(self):
        with pytest.raises(InvalidInputError):
            angular_distance((0, 0, 2.0), (0, 0, 1))

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            u, v = random_unit(rng), random_unit(rng)
            assert angular_distance(u, v) == angular_distance(v, u)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            u, v = random_unit(rng), random_unit(rng)
            axis = random_unit(rng)
            ang = rng.uniform(0, 360)
            ru = rotate(u, axis, ang)
            rv = rotate(v, axis, ang)
            ru /= np.linalg.norm(ru)
            rv /= np.linalg.norm(rv)
            assert angular_distance(ru, rv) == pytest.approx(
                angular_distance(u, v), abs=1e-9
            )

    def test_near_parallel_never_nan(self):
        rng = np.random.default_rng(13)
        u = random_unit(rng, 5000)
        v = u + rng.normal(scale=1e-9, size=u.shape)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        stacked = np.empty((2 * len(u), 3))
        stacked[0::2] = u
        stacked[1::2] = v
        d = angular_distances(stacked)
        assert np.all(np.isfinite(d))


class TestVelocitySeries:
    def test_zero_rotation(self):
        t = np.arange(37) * 10.0
        gaze = np.tile([0.0, 0.0, 1.0], (37, 1))
        v = angular_velocity_series(t, gaze)
        assert np.all(v == 0.0)

    def test_one_degree_per_10ms(self):
        t = np.arange(37) * 10.0
        gaze = great_circle_path([0, 0, 1], [1, 0, 0], 100.0, t)
        v = angular_velocity_series(t, gaze)
        np.testing.assert_allclose(v, 100.0, rtol=1e-9)

    def test_dropped_frame_is_gap_normalized(self):
        # 2 degrees over a 20 ms gap reads the same as 1 degree over 10 ms
        t = np.arange(38) * 10.0
        t = np.delete(t, 20)[:37]
        gaze = great_circle_path([0, 0, 1], [1, 0, 0], 100.0, t)
        v = angular_velocity_series(t, gaze)
        np.testing.assert_allclose(v, 100.0, rtol=1e-9)

    def test_constant_rate_random_gaps(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            rate = rng.uniform(1.0, 500.0)
            gaps = rng.uniform(5.0, 40.0, size=36)
            t = np.concatenate([[0.0], np.cumsum(gaps)])
            start = random_unit(rng)
            axis = np.cross(start, random_unit(rng))
            axis /= np.linalg.norm(axis)
            gaze = great_circle_path(start, axis, rate, t)
            gaze /= np.linalg.norm(gaze, axis=1, keepdims=True)
            v = angular_velocity_series(t, gaze)
            np.testing.assert_allclose(v, rate, rtol=1e-6)

    def test_time_shift_invariance(self):
        rng = np.random.default_rng(22)
        t = np.cumsum(rng.uniform(8, 14, size=37))
        gaze = great_circle_path([0, 0, 1], [0, 1, 0], 37.0, t)
        gaze /= np.linalg.norm(gaze, axis=1, keepdims=True)
        v1 = angular_velocity_series(t, gaze)
        v2 = angular_velocity_series(t + 12345.0, gaze)
        np.testing.assert_allclose(v2, v1, rtol=1e-9)

    def test_wrong_count(self):
        t = np.arange(36) * 10.0
        gaze = np.tile([0.0, 0.0, 1.0], (36, 1))
        with pytest.raises(InvalidInputError):
            angular_velocity_series(t, gaze)

    def test_duplicate_timestamp(self):
        t = np.arange(37) * 10.0
        t[5] = t[4]
        gaze = np.tile([0.0, 0.0, 1.0], (37, 1))
        with pytest.raises(DegenerateTimingError):
            angular_velocity_series(t, gaze)

    def test_angle_series_bounds(self):
        t = np.arange(37) * 10.0
        gaze = great_circle_path([0, 0, 1], [1, 0, 0], 100.0, t)
        s = angle_series(gaze)
        assert np.all(s.values >= 0.0) and np.all(s.values <= 180.0)


def make_recording(t_ms, rate_deg_s=5.0):
    gaze = great_circle_path([0, 0, 1], [1, 0, 0], rate_deg_s, t_ms)
    gaze /= np.linalg.norm(gaze, axis=1, keepdims=True)
    return Recording(t_ms=np.asarray(t_ms, dtype=float), gaze=gaze)


class TestExtractWindow:
    def test_90hz_span(self):
        # Index-arithmetic oracle: samples at k*1000/90 ms, selection at 1000 ms.
        # First sample at/after 1200 ms is k=108 (exactly 1200.0); the window is
        # samples 72..108, spanning [800, 1200] ms.
        t = np.arange(200) * (1000.0 / 90.0)
        rec = make_recording(t)
        sl = window_slice(rec.t_ms, 1000.0)
        assert sl == slice(72, 109)
        assert rec.t_ms[sl][0] == pytest.approx(800.0, abs=1e-9)
        assert rec.t_ms[sl][-1] == pytest.approx(1200.0, abs=1e-9)
        w = extract_window(rec, 1000.0)
        assert w.values.shape == (36,)

    def test_phase_shifted_cut(self):
        t = np.arange(200) * (1000.0 / 90.0) + 3.0
        rec = make_recording(t)
        sl = window_slice(rec.t_ms, 1000.0)
        # oracle: first index with t >= 1200 given the 3 ms phase shift
        expect_cut = int(np.argmax(rec.t_ms >= 1200.0))
        assert sl.stop - 1 == expect_cut
        assert sl.stop - sl.start == 37

    def test_exactly_37_samples(self):
        t = np.arange(37) * 10.0  # ends at 360
        rec = make_recording(t)
        w = extract_window(rec, 160.0)  # 160 + 200 = 360 = last sample
        assert w.values.shape == (36,)

    def test_36_samples_unavailable(self):
        t = np.arange(36) * 10.0
        rec = make_recording(t)
        with pytest.raises(WindowUnavailableError):
            extract_window(rec, 150.0)

    def test_recording_ends_too_early(self):
        t = np.arange(100) * 10.0  # ends at 990
        rec = make_recording(t)
        with pytest.raises(WindowUnavailableError):
            extract_window(rec, 800.0)  # needs a sample at/after 1000

    def test_suffix_determinism(self):
        t_long = np.arange(300) * 10.0
        rec_long = make_recording(t_long)
        w_long = extract_window(rec_long, 1500.0)
        t_short = t_long[100:]
        rec_short = Recording(t_ms=t_short, gaze=rec_long.gaze[100:])
        w_short = extract_window(rec_short, 1500.0)
        np.testing.assert_array_equal(w_long.values, w_short.values)

    def test_windows_from_recording_filters(self):
        t = np.arange(300) * 10.0
        rec = make_recording(t)
        rec.events = [
            SelectionEvent(1000.0, Method.DWELL_TIME, 1, "correct"),
            SelectionEvent(1500.0, Method.DWELL_TIME, 2, "incorrect"),
            SelectionEvent(2000.0, Method.NOD, 3, "correct"),
            SelectionEvent(50.0, Method.DWELL_TIME, 4, "correct"),  # unavailable
        ]
        ws = windows_from_recording(rec, method=Method.DWELL_TIME, label="correct")
        assert len(ws) == 1
        assert ws[0].selection_t_ms == 1000.0
        all_dwell = windows_from_recording(rec, method=Method.DWELL_TIME)
        assert len(all_dwell) == 2


class TestVelocityWindowType:
    def test_length_enforced(self):
        with pytest.raises(InvalidInputError):
            VelocityWindow(np.zeros(35))

    def test_negative_rejected(self):
        vals = np.zeros(36)
        vals[3] = -1.0
        with pytest.raises(InvalidInputError):
            VelocityWindow(vals)

    def test_recording_rejects_unordered(self):
        t = np.array([0.0, 10.0, 5.0])
        gaze = np.tile([0.0, 0.0, 1.0], (3, 1))
        with pytest.raises(InvalidInputError):
            Recording(t_ms=t, gaze=gaze)
