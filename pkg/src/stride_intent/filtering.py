"""Zero-phase FIR bandpass filtering.

Filters are windowed-sinc (Hamming) designs applied forward and backward, so
the effective magnitude response is |H|^2 and the group delay is zero. Edges
are reflect-padded with 3 * n_taps samples and trimmed afterwards.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .signals import MultichannelSignal


@dataclass(frozen=True)
class FirFilter:
    """Linear-phase FIR filter: odd-length symmetric taps."""

    taps: np.ndarray
    low_hz: float
    high_hz: float
    fs_hz: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 1 or len(taps) % 2 == 0:
            raise ValueError("taps must be a 1-D odd-length sequence")
        if not np.allclose(taps, taps[::-1], atol=1e-12):
            raise ValueError("taps must be symmetric (linear phase)")
        object.__setattr__(self, "taps", taps)

    @property
    def n_taps(self):
        return len(self.taps)


def frequency_response(taps, freqs_hz, fs_hz):
    """Magnitude of the filter's discrete frequency response at given freqs."""
    taps = np.asarray(taps, dtype=float)
    n = np.arange(len(taps))
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    phases = np.exp(-2j * np.pi * np.outer(freqs, n) / fs_hz)
    return np.abs(phases @ taps)


def design_bandpass(low_hz=3.0, high_hz=45.0, fs_hz=250.0, n_taps=501):
    """Windowed-sinc (Hamming) bandpass filter.

    The taps are scaled so the response at the geometric band centre is
    exactly 1. A design whose stopband rejection misses -20 dB (probed below
    the low edge and halfway between the high edge and Nyquist) raises
    "insufficient order".
    """
    if not (0 < low_hz < high_hz < fs_hz / 2):
        raise ValueError(
            f"invalid band: need 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs={fs_hz}"
        )
    if n_taps % 2 == 0 or n_taps < 3:
        raise ValueError(f"n_taps must be odd and >= 3, got {n_taps}")
    m = np.arange(n_taps) - (n_taps - 1) / 2
    ideal = (2 * high_hz / fs_hz) * np.sinc(2 * high_hz * m / fs_hz) - (
        2 * low_hz / fs_hz
    ) * np.sinc(2 * low_hz * m / fs_hz)
    taps = ideal * np.hamming(n_taps)
    centre = float(np.sqrt(low_hz * high_hz))
    gain = frequency_response(taps, centre, fs_hz)[0]
    if gain <= 0:
        raise ValueError("insufficient order: passband gain collapsed")
    taps = taps / gain
    probes = [low_hz / 3.0, (high_hz + fs_hz / 2) / 2.0]
    stop = frequency_response(taps, probes, fs_hz)
    if np.any(stop > 10 ** (-20 / 20)):
        raise ValueError(
            f"insufficient order: stopband rejection {20 * np.log10(stop.max()):.1f} dB "
            f"at probes {probes}, need <= -20 dB (increase n_taps)"
        )
    return FirFilter(taps=taps, low_hz=low_hz, high_hz=high_hz, fs_hz=fs_hz)


def _causal_fir(x, taps):
    # y[n] = sum_k taps[k] x[n-k], same length as x
    full = fftconvolve(x, taps[:, None] if x.ndim == 2 else taps, axes=0)
    return full[: x.shape[0]]


def filtfilt_array(data, filt):
    """Forward-backward filtering of a samples x channels array."""
    data = np.asarray(data, dtype=float)
    squeeze = data.ndim == 1
    if squeeze:
        data = data[:, None]
    n = data.shape[0]
    pad = 3 * filt.n_taps
    if n <= pad:
        raise ValueError(
            f"signal too short for filtfilt: {n} samples, need > 3 * n_taps = {pad}"
        )
    padded = np.pad(data, ((pad, pad), (0, 0)), mode="reflect")
    y = _causal_fir(padded, filt.taps)
    y = _causal_fir(y[::-1], filt.taps)[::-1]
    y = y[pad : pad + n]
    return y[:, 0] if squeeze else y


def filtfilt(signal, filt):
    """Zero-phase filter a signal; output length equals input length."""
    return MultichannelSignal(
        sample_rate_hz=signal.sample_rate_hz,
        start_time_s=signal.start_time_s,
        channel_names=signal.channel_names,
        data=filtfilt_array(signal.data, filt),
    )
