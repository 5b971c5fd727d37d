"""
Signal conditioning: zero-phase bandpass, analytic-signal envelope, tapered
windowing and one-sided power spectra.

Traces are numpy arrays whose last axis is time; multichannel input is
``(n_channels, n_samples)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

DEFAULT_BAND = (500.0, 9000.0)
DEFAULT_WINDOW = 0.7e-3
TAPER_FRACTION = 0.1


@dataclass(frozen=True)
class EnvelopeImage:
    """Amplitude envelope ``A(z, t)``: one row per microphone, sorted by height."""

    values: np.ndarray
    fs: float
    heights: np.ndarray
    t_start: float = 0.0

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.heights):
            raise ValueError("envelope image needs one row per height")
        if np.any(np.diff(self.heights) < 0):
            raise ValueError("envelope rows must be sorted by height")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.values.shape[1]) / self.fs

    @property
    def duration(self) -> float:
        return self.values.shape[1] / self.fs

    def to_csv(self, path) -> None:
        """Write as a matrix: header row of times, then ``height, A(z, t)...`` rows."""
        with open(path, "w") as fh:
            fh.write("height_m," + ",".join(f"{t:.9g}" for t in self.times) + "\n")
            for z, row in zip(self.heights, self.values):
                fh.write(f"{z:.6g}," + ",".join(f"{v:.9g}" for v in row) + "\n")


@dataclass(frozen=True)
class PowerSpectrum:
    freqs: np.ndarray
    power: np.ndarray
    window_center: float = float("nan")
    window_len: float = float("nan")


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    start_time: float
    clipped: bool = False


def bandpass(trace, fs: float, lo: float = DEFAULT_BAND[0], hi: float = DEFAULT_BAND[1],
             order: int = 8) -> np.ndarray:
    """Zero-phase Butterworth bandpass (forward-backward, so the effective
    magnitude response is squared and group delay is zero)."""
    if not 0 < lo < hi < fs / 2:
        raise ValueError(f"invalid band {lo:g}-{hi:g} Hz for fs={fs:g} Hz "
                         f"(need 0 < lo < hi < {fs / 2:g})")
    sos = signal.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return signal.sosfiltfilt(sos, np.asarray(trace, dtype=float), axis=-1)


def envelope(trace) -> np.ndarray:
    """Magnitude of the analytic signal, same length as the input."""
    x = np.asarray(trace, dtype=float)
    if x.shape[-1] == 0:
        return x.copy()
    return np.abs(signal.hilbert(x, axis=-1))


def envelope_image(traces, fs: float, heights, band=DEFAULT_BAND, t_start: float = 0.0,
                   order: int = 8) -> EnvelopeImage:
    """Bandpass + envelope for every channel, rows re-ordered by height."""
    heights = np.asarray(heights, dtype=float)
    order_idx = np.argsort(heights, kind="stable")
    env = envelope(bandpass(np.atleast_2d(traces), fs, band[0], band[1], order))
    return EnvelopeImage(env[order_idx], fs, heights[order_idx], t_start)


def taper_window(n: int, fraction: float = TAPER_FRACTION) -> np.ndarray:
    """Raised-cosine taper over ``fraction`` of each end."""
    return signal.windows.tukey(n, alpha=2 * fraction) if n > 2 else np.ones(n)


def window_extract(trace, fs: float, center: float, width: float, t_start: float = 0.0,
                   taper: float = TAPER_FRACTION) -> Segment:
    """Cut ``round(width * fs)`` samples centred on ``center`` and taper them.

    A window hanging over either end of the trace is clipped to the available
    samples; the returned segment is flagged and a warning issued.
    """
    x = np.asarray(trace, dtype=float)
    n = int(round(width * fs))
    if n <= 0:
        raise ValueError(f"empty window (width={width:g} s at fs={fs:g} Hz)")
    c_idx = int(round((center - t_start) * fs))
    start = c_idx - n // 2
    stop = start + n
    lo, hi = max(start, 0), min(stop, x.shape[-1])
    clipped = lo != start or hi != stop
    if hi <= lo:
        raise ValueError("window lies entirely outside the trace")
    if clipped:
        warnings.warn(f"window [{start}, {stop}) clipped to trace bounds [0, {x.shape[-1]})",
                      stacklevel=2)
    seg = x[..., lo:hi] * taper_window(hi - lo, taper)
    return Segment(seg, t_start + lo / fs, clipped)


def power_spectrum(segment, fs: float, resolution: float = 100.0,
                   window_center: float = float("nan")) -> PowerSpectrum:
    """One-sided squared-magnitude DFT, zero-padded so the bin spacing is at
    most ``resolution`` hertz.

    Normalised so the power summed over bins equals the segment energy
    ``sum(x**2)``.
    """
    x = np.asarray(segment.samples if isinstance(segment, Segment) else segment, dtype=float)
    if x.size == 0:
        raise ValueError("empty segment")
    nfft = max(x.shape[-1], int(math.ceil(fs / resolution)))
    spec = np.fft.rfft(x, n=nfft, axis=-1)
    power = np.abs(spec) ** 2 / nfft
    power[..., 1:] *= 2.0
    if nfft % 2 == 0:
        power[..., -1] /= 2.0
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    return PowerSpectrum(freqs, power, window_center, x.shape[-1] / fs)


def average_spectra(spectra) -> PowerSpectrum:
    spectra = list(spectra)
    if not spectra:
        raise ValueError("no spectra to average")
    ref = spectra[0].freqs
    for s in spectra[1:]:
        if s.freqs.shape != ref.shape or not np.allclose(s.freqs, ref, rtol=0, atol=1e-9):
            raise ValueError("spectra have mismatched frequency grids")
    power = np.mean([s.power for s in spectra], axis=0)
    return PowerSpectrum(ref, power, spectra[0].window_center, spectra[0].window_len)
