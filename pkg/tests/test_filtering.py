import numpy as np
import pytest

from stride_intent.filtering import (
    design_bandpass,
    filtfilt,
    filtfilt_array,
    frequency_response,
)
from stride_intent.signals import MultichannelSignal


@pytest.fixture(scope="module")
def default_filter():
    return design_bandpass()


class TestDesign:
    def test_default_response_levels(self, default_filter):
        taps, fs = default_filter.taps, default_filter.fs_hz
        centre = float(np.sqrt(3 * 45))
        h = frequency_response(taps, [centre, 1.0, 60.0], fs)
        assert 0.99 <= h[0] <= 1.01
        assert h[1] <= 0.1
        assert h[2] <= 10 ** (-20 / 20)

    def test_taps_symmetric_odd(self, default_filter):
        taps = default_filter.taps
        assert len(taps) % 2 == 1
        np.testing.assert_allclose(taps, taps[::-1], atol=1e-12)

    def test_invalid_band(self):
        with pytest.raises(ValueError, match="invalid band"):
            design_bandpass(low_hz=45, high_hz=45)

    def test_even_taps_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            design_bandpass(n_taps=500)

    def test_insufficient_order(self):
        with pytest.raises(ValueError, match="insufficient order"):
            design_bandpass(n_taps=3)


class TestFiltfilt:
    def test_in_band_sine_preserved_zero_lag(self, default_filter):
        fs = 250.0
        t = np.arange(int(20 * fs)) / fs
        x = np.sin(2 * np.pi * 10.0 * t)
        y = filtfilt_array(x, default_filter)
        mid = slice(len(x) // 4, 3 * len(x) // 4)
        amplitude = np.max(np.abs(y[mid]))
        assert 0.98 <= amplitude <= 1.02
        lags = np.arange(-10, 11)  # below the 25-sample probe period
        corr = [np.dot(y[mid], np.roll(x, lag)[mid]) for lag in lags]
        assert lags[np.argmax(corr)] == 0

    def test_zero_signal(self, default_filter):
        y = filtfilt_array(np.zeros(5000), default_filter)
        np.testing.assert_array_equal(y, np.zeros(5000))

    def test_dc_removed(self, default_filter):
        fs = 250.0
        t = np.arange(int(20 * fs)) / fs
        x = np.sin(2 * np.pi * 10.0 * t) + 5.0
        y = filtfilt_array(x, default_filter)
        mid = slice(len(x) // 4, 3 * len(x) // 4)
        assert abs(np.mean(y[mid])) <= 0.05

    def test_length_preserved_multichannel(self, default_filter, rng):
        x = rng.standard_normal((4000, 3))
        y = filtfilt_array(x, default_filter)
        assert y.shape == x.shape

    def test_too_short(self, default_filter):
        with pytest.raises(ValueError, match="too short"):
            filtfilt_array(np.zeros(1500), default_filter)

    def test_signal_wrapper_preserves_metadata(self, default_filter, rng):
        sig = MultichannelSignal(250.0, 2.0, ("a", "b"), rng.standard_normal((4000, 2)))
        out = filtfilt(sig, default_filter)
        assert out.sample_rate_hz == sig.sample_rate_hz
        assert out.start_time_s == sig.start_time_s
        assert out.channel_names == sig.channel_names
        assert out.n_samples == sig.n_samples

    def test_double_pass_squares_attenuation(self, default_filter):
        fs = 250.0
        t = np.arange(int(30 * fs)) / fs
        mid = slice(len(t) // 4, 3 * len(t) // 4)
        for freq in (2.0, 5.0, 30.0, 50.0):
            x = np.sin(2 * np.pi * freq * t)
            once = filtfilt_array(x, default_filter)
            twice = filtfilt_array(once, default_filter)
            a1 = np.sqrt(np.mean(once[mid] ** 2))
            a2 = np.sqrt(np.mean(twice[mid] ** 2))
            h2 = frequency_response(default_filter.taps, freq, fs)[0] ** 2
            if a1 > 1e-9:
                assert abs(a2 / a1 - h2) <= 0.02
