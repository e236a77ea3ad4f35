import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dropsindy.data_model import Trajectory, add_gaussian_noise, derived_seed
from dropsindy.diffsmooth import (
    NoiseCalibration,
    SmootherConfig,
    build_noise_calibration,
    compute_derivatives,
    default_eta_grid,
    estimate_noise_level,
    finite_difference,
    reference_trajectory,
    relative_l2,
    savgol_smooth,
    savgol_values,
    smoothing_difference,
)
from dropsindy.errors import CalibrationError, ConfigurationError, RangeError, ValidationError


@pytest.fixture(scope="module")
def calibration():
    return build_noise_calibration(default_eta_grid(), 20, 0)


class TestSmootherConfig:
    @pytest.mark.parametrize("w, p", [(34, 3), (3, 1), (35, 0), (7, 7)])
    def test_invalid(self, w, p):
        with pytest.raises(ConfigurationError):
            SmootherConfig(w, p)

    def test_defaults(self):
        assert SmootherConfig() == SmootherConfig(35, 3)


class TestSavgol:
    @given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.sampled_from([(5, 3), (35, 3), (11, 4)]))
    def test_polynomial_reproduction(self, coefs, wp):
        w, p = wp
        t = np.arange(60) / 15.0
        y = np.polyval(coefs[: p + 1], t) + 50.0
        out = savgol_values(y, SmootherConfig(w, p))
        np.testing.assert_allclose(out, y, rtol=1e-9, atol=1e-9 * np.abs(y).max())

    def test_short_series(self):
        t = Trajectory(np.arange(34) / 15, np.zeros(34))
        with pytest.raises(ConfigurationError):
            savgol_smooth(t, SmootherConfig())

    def test_times_unchanged(self):
        ref = reference_trajectory()
        np.testing.assert_array_equal(savgol_smooth(ref, SmootherConfig()).times, ref.times)

    def test_non_uniform_rejected(self):
        t = np.cumsum(np.r_[0, np.full(39, 0.1)])
        t[5] += 0.01
        with pytest.raises(ValidationError):
            savgol_smooth(Trajectory(t, np.zeros(40)), SmootherConfig(5, 3))

    def test_denoises_reference(self):
        clean = reference_trajectory()
        noisy = add_gaussian_noise(clean, 1.0, 3)
        smoothed = savgol_smooth(noisy, SmootherConfig())
        assert relative_l2(smoothed.heights, clean.heights) < relative_l2(noisy.heights, clean.heights)


class TestFiniteDifference:
    def test_constant(self):
        assert np.all(finite_difference(np.full(10, 3.0), 0.1) == 0)
        assert np.all(finite_difference(np.full(10, 3.0), 0.1, "forward") == 0)

    def test_quadratic_exact(self):
        t = np.arange(200) * 0.01
        np.testing.assert_allclose(finite_difference(t**2, 0.01), 2 * t, atol=1e-10)

    def test_convergence_order(self):
        errs = []
        for n in (50, 100, 200, 400):
            t = np.linspace(0, 2 * np.pi, n + 1)
            dt = t[1] - t[0]
            errs.append(np.max(np.abs(finite_difference(np.sin(t), dt) - np.cos(t))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.9)

    def test_forward_first_order(self):
        t = np.arange(11) * 0.1
        d = finite_difference(t**2, 0.1, "forward")
        assert d[0] == pytest.approx(0.1)
        assert d[-1] == pytest.approx((1.0 - 0.81) / 0.1)

    @pytest.mark.parametrize("dt", [0.0, -1.0])
    def test_bad_dt(self, dt):
        with pytest.raises(ValueError):
            finite_difference(np.arange(5.0), dt)

    def test_lengths(self):
        with pytest.raises(ValueError):
            finite_difference([1.0, 2.0], 0.1)
        with pytest.raises(ValueError):
            finite_difference([1.0], 0.1, "forward")
        with pytest.raises(ValueError):
            finite_difference([1.0, 2.0, 3.0], 0.1, "backward")


class TestDerivatives:
    @staticmethod
    def _linear_drag_accel_error(traj, smooth):
        ds = compute_derivatives(traj, smooth=smooth)
        v_true = -19.6 * (1 - np.exp(-0.5 * ds.times))
        return np.abs(ds.accelerations - (-9.8 - 0.5 * v_true))

    def test_linear_drag_accelerations_interior(self, linear_drop):
        # Away from the two nested one-sided stencils at each end.
        err = self._linear_drag_accel_error(linear_drop, smooth=False)
        assert np.max(err[2:-2]) < 0.1

    @pytest.mark.xfail(strict=True, reason="end-point stencils give ~0.24 m/s^2 (raw) and "
                       "the 35/3 filter biases this curve by up to ~1 m/s^2")
    @pytest.mark.parametrize("smooth", [False, True])
    def test_linear_drag_accelerations_full_length(self, linear_drop, smooth):
        assert np.max(self._linear_drag_accel_error(linear_drop, smooth)) < 0.1

    def test_constant_height(self):
        ds = compute_derivatives(Trajectory(np.arange(50) / 15, np.full(50, 12.0)))
        np.testing.assert_allclose(ds.velocities, 0, atol=1e-10)
        np.testing.assert_allclose(ds.accelerations, 0, atol=1e-10)

    def test_shapes(self, free_fall):
        ds = compute_derivatives(free_fall, smooth=False)
        assert ds.states.shape == (50, 2)
        assert len(ds.times) == len(ds.velocities) == len(ds.accelerations) == 50

    def _accel_error(self, eta, smooth, seed=0):
        clean = reference_trajectory()
        v = -19.6 * (1 - np.exp(-0.5 * clean.times))
        a_true = -9.8 - 0.5 * v
        ds = compute_derivatives(add_gaussian_noise(clean, eta, seed), smooth=smooth)
        return relative_l2(ds.accelerations, a_true), relative_l2(ds.velocities, v)

    def test_smoothing_helps_acceleration(self):
        assert self._accel_error(1.0, True)[0] < self._accel_error(1.0, False)[0]

    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_acceleration_error_exceeds_velocity_error(self, eta):
        for smooth in (True, False):
            acc, vel = self._accel_error(eta, smooth)
            assert acc > vel


class TestCalibration:
    def test_monotone_small_grid(self):
        cal = build_noise_calibration([0.01, 0.1, 1.0], 20, 0)
        assert np.all(np.diff(cal.differences) > 0)

    def test_replicates(self):
        with pytest.raises(ValueError):
            build_noise_calibration([0.01, 0.1], 0, 0)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            build_noise_calibration([0.1, 0.01], 5, 0)

    def test_deterministic(self):
        a = build_noise_calibration([0.01, 0.1, 1.0], 5, 3)
        b = build_noise_calibration([0.01, 0.1, 1.0], 5, 3)
        np.testing.assert_array_equal(a.differences, b.differences)

    def test_non_monotone_rejected(self):
        with pytest.raises(CalibrationError):
            NoiseCalibration([0.1, 0.2, 0.3], [1.0, 0.5, 2.0])

    def test_csv_round_trip(self, calibration):
        text = calibration.to_csv()
        assert text.startswith("eta,relative_difference\n")
        back = NoiseCalibration.from_csv(text)
        np.testing.assert_array_equal(back.differences, calibration.differences)

    def test_reference_closed_form(self):
        ref = reference_trajectory()
        assert ref.heights[0] == 40.0 and ref.dt == pytest.approx(1 / 15)


class TestNoiseEstimate:
    def test_known_injection(self, calibration):
        ref = reference_trajectory()
        ests = [
            estimate_noise_level(add_gaussian_noise(ref, 0.05, derived_seed(11, k)), SmootherConfig(), calibration).eta
            for k in range(20)
        ]
        assert 0.033 <= np.median(ests) <= 0.075

    def test_clean_input_below_range(self, calibration):
        est = estimate_noise_level(reference_trajectory(), SmootherConfig(), calibration)
        assert est.below_range
        assert est.eta == calibration.etas[0]

    def test_above_range(self, calibration):
        noisy = add_gaussian_noise(reference_trajectory(), 50.0, 1)
        with pytest.raises(RangeError) as exc:
            estimate_noise_level(noisy, SmootherConfig(), calibration)
        assert exc.value.lower == calibration.etas[-1]

    def test_window_mismatch(self, calibration):
        with pytest.raises(ConfigurationError):
            estimate_noise_level(reference_trajectory(), SmootherConfig(21, 3), calibration)

    def test_smoothing_difference_matches_definition(self):
        noisy = add_gaussian_noise(reference_trajectory(), 0.1, 5)
        sm = savgol_values(noisy.heights, SmootherConfig())
        assert smoothing_difference(noisy, SmootherConfig()) == pytest.approx(
            np.linalg.norm(sm - noisy.heights) / np.linalg.norm(noisy.heights), rel=1e-12
        )
