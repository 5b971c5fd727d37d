"""
Analytic forward model: microphone traces for a hidden impulsive source.

Every propagation path is rendered as a virtual source: delay by the unfolded
path length, 1/R spherical spreading and, for the diffracted path, a
zero-phase filter with the knife-edge loss magnitude ``|L(nu(theta, f))|``.
Filtering and fractional delays are applied by multiplication on a
zero-padded DFT grid, so arrival times are exact to floating point.

The emission is referenced at its temporal centre: a source emitting at
``t0`` places the centre of the pulse at ``t0 + R/c`` on each microphone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.io import wavfile

from . import kedge
from .errors import SceneError
from .scene import (DoorwayScene, EdgeScene, PhysicsConfig, Point3, SourceGroundTruth,
                    validate_scene, validate_source)

ARRIVAL_MARGIN = 2e-3


@dataclass(frozen=True)
class EmissionSpec:
    """Source waveform. ``pulse_cycle``: ``duty`` of one sine period at
    ``center_freq``; ``impulse``: one sample; ``file``: mono WAV at ``path``."""

    kind: str = "pulse_cycle"
    center_freq: float = 5000.0
    duty: float = 0.4
    amplitude: float = 1.0
    path: str | None = None


@dataclass(frozen=True)
class NoiseSpec:
    """White noise and synthetic reverberation.

    ``snr_db`` is relative to the peak absolute sample of the clean diffracted
    arrival, taken per array (each array is its own recording); ``None`` means
    noiseless. Reverberation adds
    Poisson-timed copies of each main arrival, starting ``reverb_gap`` after it,
    with random sign and amplitude ``reverb_gain * exp(-delay / reverb_decay)``.
    """

    snr_db: float | None = None
    reverb_density: float = 0.0
    reverb_decay: float = 0.01
    seed: int = 0
    reverb_gain: float = 0.3
    reverb_gap: float = 1e-3


@dataclass(frozen=True)
class TraceSet:
    samples: np.ndarray
    fs: float
    channel_geometry: np.ndarray
    t_start: float = 0.0
    array_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ValueError("samples must be (n_channels, n_samples)")
        if self.channel_geometry.shape != (self.samples.shape[0], 3):
            raise ValueError("one (x, y, z) per channel required")
        if self.array_ids and len(self.array_ids) != self.samples.shape[0]:
            raise ValueError("one array id per channel required")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.fs

    def channels_of(self, array_id: str) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.array_ids) == array_id)


def _check_emission(spec: EmissionSpec, fs: float) -> None:
    if spec.kind == "pulse_cycle":
        if not spec.center_freq > 0:
            raise SceneError("EmissionSpec.center_freq: must be > 0")
        if not 0 < spec.duty <= 1:
            raise SceneError("EmissionSpec.duty: must satisfy 0 < duty <= 1")
        if fs <= 2 * spec.center_freq:
            raise SceneError(f"sample rate {fs:g} Hz undersamples a {spec.center_freq:g} Hz "
                             f"pulse; need fs > {2 * spec.center_freq:g} Hz")
    elif spec.kind == "file":
        if not spec.path:
            raise SceneError("EmissionSpec.path: required for kind 'file'")
    elif spec.kind != "impulse":
        raise SceneError(f"EmissionSpec.kind: unknown kind {spec.kind!r}")


def _load_emission_file(spec: EmissionSpec, fs: float) -> np.ndarray:
    rate, data = wavfile.read(spec.path)
    if rate != int(round(fs)):
        raise SceneError(f"emission file {spec.path} is at {rate} Hz, expected {fs:g} Hz")
    data = np.asarray(data, dtype=float)
    if data.ndim > 1:
        data = data[:, 0]
    if np.issubdtype(np.asarray(data).dtype, np.integer):
        data = data / 32768.0
    return spec.amplitude * data


def emission_waveform(spec: EmissionSpec, fs: float) -> np.ndarray:
    """Sampled emission (sample centres at ``(n + 1/2) / fs`` for ``pulse_cycle``)."""
    _check_emission(spec, fs)
    if spec.kind == "impulse":
        return np.array([spec.amplitude])
    if spec.kind == "file":
        return _load_emission_file(spec, fs)
    n = max(1, int(round(spec.duty * fs / spec.center_freq)))
    t = (np.arange(n) + 0.5) / fs
    return spec.amplitude * np.sin(2 * np.pi * spec.center_freq * t)


def _segment_integral(a: np.ndarray, length: float) -> np.ndarray:
    # int_0^length exp(j a t) dt
    return length * np.exp(0.5j * a * length) * np.sinc(a * length / (2 * np.pi))


def emission_spectrum(spec: EmissionSpec, freqs: np.ndarray, fs: float) -> np.ndarray:
    """DFT-scaled spectrum of the emission, phase-referenced to its centre."""
    _check_emission(spec, fs)
    w = 2 * np.pi * np.asarray(freqs, dtype=float)
    if spec.kind == "impulse":
        return np.full(w.shape, spec.amplitude, dtype=complex)
    if spec.kind == "file":
        x = _load_emission_file(spec, fs)
        ref = int(np.argmax(np.abs(x))) if x.size else 0
        n = np.arange(x.size) - ref
        return np.exp(-1j * np.outer(w, n) / fs) @ x
    w0 = 2 * np.pi * spec.center_freq
    length = spec.duty / spec.center_freq
    cont = (_segment_integral(w0 - w, length) - _segment_integral(-w0 - w, length)) / 2j
    return fs * spec.amplitude * cont * np.exp(0.5j * w * length)


def diffraction_angle(source: Point3, edge: Point3, mic_xy, shadow_sign: float) -> float:
    """Signed deflection (degrees) of the path source -> edge -> mic, positive in the shadow."""
    d_in = np.array([edge.x - source.x, edge.y - source.y])
    d_out = np.asarray(mic_xy, dtype=float)[:2] - edge.xy
    turn = math.degrees(math.atan2(d_in[0] * d_out[1] - d_in[1] * d_out[0],
                                   float(d_in @ d_out)))
    return -shadow_sign * turn


def _reverb_echoes(rng: np.random.Generator, noise: NoiseSpec):
    if noise.reverb_density <= 0:
        return np.empty(0), np.empty(0)
    span = 6.0 * noise.reverb_decay
    count = rng.poisson(noise.reverb_density * span)
    delays = np.sort(rng.uniform(0.0, span, count))
    signs = rng.choice([-1.0, 1.0], count)
    gains = noise.reverb_gain * np.exp(-delays / noise.reverb_decay) * signs
    return delays + noise.reverb_gap, gains


@dataclass
class _Path:
    toa: np.ndarray       # per channel, seconds
    amp: np.ndarray       # per channel
    loss: np.ndarray | None   # (n_channels, n_freqs) magnitude filter, or None
    diffracted: bool


def _render(paths: list[_Path], mics: np.ndarray, ids, emission: EmissionSpec,
            noise: NoiseSpec, physics: PhysicsConfig, duration: float,
            t_start: float, freqs: np.ndarray, nfft: int) -> TraceSet:
    fs = physics.fs
    n = int(round(duration * fs))
    n_ch = mics.shape[0]
    e_spec = emission_spectrum(emission, freqs, fs)
    rngs = [np.random.default_rng([noise.seed, ch]) for ch in range(n_ch)]
    w = 2 * np.pi * freqs

    clean_diff = np.zeros((n_ch, n))
    total = np.zeros((n_ch, n))
    for ch in range(n_ch):
        for path in paths:
            spec = e_spec * path.amp[ch] * np.exp(-1j * w * (path.toa[ch] - t_start))
            if path.loss is not None:
                spec = spec * path.loss[ch]
            main = sfft.irfft(spec, nfft)[:n]
            delays, gains = _reverb_echoes(rngs[ch], noise)
            if delays.size:
                spec = spec * (1.0 + np.exp(-1j * np.outer(delays, w)).T @ gains)
                sig = sfft.irfft(spec, nfft)[:n]
            else:
                sig = main
            if path.diffracted:
                clean_diff[ch] += main
            total[ch] += sig

    if noise.snr_db is not None and math.isfinite(noise.snr_db):
        ids_arr = np.asarray(ids)
        scale = 10 ** (-noise.snr_db / 20.0)
        for array_id in dict.fromkeys(ids):
            group = np.flatnonzero(ids_arr == array_id)
            sigma = float(np.max(np.abs(clean_diff[group]))) * scale
            for ch in group:
                total[ch] += sigma * rngs[ch].standard_normal(n)

    return TraceSet(total, fs, mics, t_start, tuple(ids))


def _fft_grid(duration: float, fs: float):
    n = int(round(duration * fs))
    nfft = sfft.next_fast_len(2 * n + 4096, real=True)
    return np.fft.rfftfreq(nfft, 1.0 / fs), nfft


def _check_common(scene, source, physics, duration, t_start, last_toa, first_toa):
    problems = validate_scene(scene) + validate_source(source)
    if problems:
        raise SceneError("invalid scene", problems)
    if not source.theta > 0:
        raise SceneError(f"source azimuth {source.theta:g} deg is not in the hidden region "
                         f"(need theta > 0)")
    if first_toa <= t_start:
        raise SceneError(f"first arrival at {first_toa * 1e3:.3f} ms precedes trace start "
                         f"{t_start * 1e3:.3f} ms")
    minimum = last_toa - t_start + ARRIVAL_MARGIN
    if duration < minimum:
        raise SceneError(f"duration {duration * 1e3:.3f} ms too short; minimum duration is "
                         f"{minimum * 1e3:.3f} ms to contain all arrivals")


def _edge_path(src: Point3, edge: Point3, mics: np.ndarray, physics: PhysicsConfig,
               t0: float):
    d1 = math.hypot(src.x - edge.x, src.y - edge.y)
    d2 = np.hypot(mics[:, 0] - edge.x, mics[:, 1] - edge.y)
    horizontal = d1 + d2
    path3d = np.sqrt(horizontal ** 2 + (mics[:, 2] - src.z) ** 2)
    return d1, d2, t0 + path3d / physics.c, 1.0 / path3d


def _loss_rows(src, edge, mics, d1, d2, shadow_sign, freqs, c, scale):
    rows = np.empty((mics.shape[0], freqs.size))
    for ch in range(mics.shape[0]):
        ang = diffraction_angle(src, edge, mics[ch], shadow_sign)
        nu = kedge.fresnel_param(ang, freqs, d1, d2[ch], c, scale)
        rows[ch] = np.abs(kedge.diffraction_loss(nu))
    return rows


def doorway_arrival_times(scene: DoorwayScene, source: SourceGroundTruth,
                          physics: PhysicsConfig):
    """Diffracted and reflected arrival times per channel (bottom mic first)."""
    src = scene.source_position(source)
    mics = scene.array.positions()
    _, _, toa_d, _ = _edge_path(src, scene.edge_d, mics, physics, source.t0)
    _, _, toa_r, _ = _edge_path(src, scene.edge_r, mics, physics, source.t0)
    return toa_d, toa_r


def synthesize_doorway(scene: DoorwayScene, source: SourceGroundTruth,
                       emission: EmissionSpec = EmissionSpec(), noise: NoiseSpec = NoiseSpec(),
                       physics: PhysicsConfig = PhysicsConfig(), duration: float = 0.04,
                       t_start: float = 0.0, reflection: float = 1.0,
                       nu_scale: float = 1.0) -> TraceSet:
    """Traces of the doorway array: a diffracted arrival via the near edge and a
    reflected arrival via the far edge, plus optional reverberation and noise."""
    src = scene.source_position(source)
    mics = scene.array.positions()
    d1, d2, toa_d, amp_d = _edge_path(src, scene.edge_d, mics, physics, source.t0)
    _, _, toa_r, amp_r = _edge_path(src, scene.edge_r, mics, physics, source.t0)
    _check_common(scene, source, physics, duration, t_start,
                  float(max(toa_d.max(), toa_r.max())), float(toa_d.min()))
    if np.any(toa_d >= toa_r):
        raise SceneError("geometry places the reflected arrival before the diffracted one")
    _check_emission(emission, physics.fs)

    freqs, nfft = _fft_grid(duration, physics.fs)
    loss = _loss_rows(src, scene.edge_d, mics, d1, d2, scene.shadow_sign, freqs,
                      physics.c, nu_scale)
    paths = [_Path(toa_d, amp_d, loss, True),
             _Path(toa_r, reflection * amp_r, None, False)]
    ids = [scene.array.id] * scene.array.count
    return _render(paths, mics, ids, emission, noise, physics, duration, t_start, freqs, nfft)


def edge_arrival_times(scene: EdgeScene, source: SourceGroundTruth, physics: PhysicsConfig):
    src = scene.source_position(source)
    mics = np.vstack([a.positions() for a in scene.arrays])
    return _edge_path(src, scene.edge, mics, physics, source.t0)[2]


def synthesize_edge(scene: EdgeScene, source: SourceGroundTruth,
                    emission: EmissionSpec = EmissionSpec(), noise: NoiseSpec = NoiseSpec(),
                    physics: PhysicsConfig = PhysicsConfig(), duration: float = 0.04,
                    t_start: float = 0.0, nu_scale: float = 1.0) -> TraceSet:
    """Traces of both edge-scene arrays (array 0 channels first), diffracted path only."""
    src = scene.source_position(source)
    mics = np.vstack([a.positions() for a in scene.arrays])
    d1, d2, toa, amp = _edge_path(src, scene.edge, mics, physics, source.t0)
    _check_common(scene, source, physics, duration, t_start, float(toa.max()),
                  float(toa.min()))
    _check_emission(emission, physics.fs)

    freqs, nfft = _fft_grid(duration, physics.fs)
    loss = _loss_rows(src, scene.edge, mics, d1, d2, scene.shadow_sign, freqs,
                      physics.c, nu_scale)
    ids = [a.id for a in scene.arrays for _ in range(a.count)]
    return _render([_Path(toa, amp, loss, True)], mics, ids, emission, noise, physics,
                   duration, t_start, freqs, nfft)
