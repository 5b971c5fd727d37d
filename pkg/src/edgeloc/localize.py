"""
Inverse pipelines.

Doorway: detect the diffracted wavefront, fit it for ``(R, z0, t0)``, then
score every hidden grid point by the gated envelope amplitudes of its
predicted diffracted and reflected arrivals,

    M = A_d / R_d**2 * A_r / R_r**2

and take the maximum.

Single edge: fit the wavefront on both arrays for range and height, and get
the azimuth by matching the measured inter-array spectral ratio against the
knife-edge theory curve.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dsp, kedge
from .arrivals import (DEFAULT_K, DEFAULT_NOISE_WINDOW, MAX_RMSE, WavefrontFit,
                       detect_first_arrival, fit_wavefront, toa_model)
from .errors import (AmbiguousAzimuthError, InconsistentFitError, LocalizationError,
                     LowSignalError, NoDetectionError, SceneError)
from .forward import TraceSet
from .scene import DoorwayScene, EdgeScene, PhysicsConfig, Point3, path_distances

DEFAULT_GATE = 0.2e-3
WAVEFRONT_TOLERANCE = 0.5e-3


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned horizontal grid. ``z_levels`` switches on the full 3D search."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    step: float = 0.05
    max_range: float = 6.0
    z_levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be > 0")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("empty grid extents")

    @classmethod
    def hidden_sector(cls, scene, max_range: float = 6.0, step: float = 0.05,
                      z_levels=None) -> "GridSpec":
        """Bounding box of the quarter disc between the LOS and the wall behind the edge."""
        edge = scene.edge_d if isinstance(scene, DoorwayScene) else scene.edge
        u = scene.los_direction
        v = scene.shadow_sign * np.array([-u[1], u[0]])
        pts = [np.zeros(2)]
        for a in np.linspace(0.0, 0.5 * math.pi, 91):
            pts.append(max_range * (math.cos(a) * u + math.sin(a) * v))
        pts = np.array(pts) + edge.xy
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return cls(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), step, max_range,
                   None if z_levels is None else tuple(z_levels))

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.step * np.arange(int(math.floor(
            (self.x_max - self.x_min) / self.step + 1e-9)) + 1)

    @property
    def ys(self) -> np.ndarray:
        return self.y_min + self.step * np.arange(int(math.floor(
            (self.y_max - self.y_min) / self.step + 1e-9)) + 1)


@dataclass(frozen=True)
class Heatmap:
    """Metric per cell, shape ``(ny, nx)`` or ``(nz, ny, nx)`` in 3D mode.

    ``argmax`` is the best grid cell; ``peak`` the sub-cell refinement of it.
    """

    values: np.ndarray
    grid: GridSpec
    argmax: Point3
    argmax_value: float
    peak: Point3
    peak_value: float

    def to_csv(self, path) -> None:
        vals = self.values if self.values.ndim == 2 else self.values.max(axis=0)
        with open(path, "w") as fh:
            fh.write("y_m\\x_m," + ",".join(f"{x:.6g}" for x in self.grid.xs) + "\n")
            for y, row in zip(self.grid.ys, vals):
                fh.write(f"{y:.6g}," + ",".join(f"{v:.9g}" for v in row) + "\n")

    def to_pgm(self, path) -> None:
        """8-bit binary PGM, min-max normalised, first row = largest y."""
        vals = self.values if self.values.ndim == 2 else self.values.max(axis=0)
        lo, hi = float(vals.min()), float(vals.max())
        scaled = np.zeros_like(vals) if hi <= lo else (vals - lo) / (hi - lo)
        img = np.round(scaled[::-1] * 255).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
            fh.write(img.tobytes())


@dataclass
class LocalizationResult:
    r1: float
    theta: float
    z0: float
    rmse: float
    peak_metric: float = float("nan")
    fits: list = field(default_factory=list, repr=False)
    arrivals: list = field(default_factory=list, repr=False)
    envelopes: list = field(default_factory=list, repr=False)
    heatmap: Heatmap | None = field(default=None, repr=False)
    ratio: kedge.RatioCurve | None = field(default=None, repr=False)
    objective: tuple | None = field(default=None, repr=False)

    def csv_line(self) -> str:
        return (f"{self.r1:.9g},{self.theta:.9g},{self.z0:.9g},{self.rmse:.9g},"
                f"{self.peak_metric:.9g}")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r1_m,theta_deg,z0_m,rmse_s,peak_metric\n")
            fh.write(self.csv_line() + "\n")


# -- gated amplitudes ------------------------------------------------------

class _EnvelopeIntegral:
    """Exact running integral of the linearly interpolated envelope (zero outside)."""

    def __init__(self, env: dsp.EnvelopeImage):
        self.e = np.asarray(env.values, dtype=float)
        self.fs = env.fs
        self.t_start = env.t_start
        n = self.e.shape[1]
        self.n = n
        cum = np.zeros_like(self.e)
        if n > 1:
            cum[:, 1:] = np.cumsum(0.5 * (self.e[:, 1:] + self.e[:, :-1]), axis=1) / self.fs
        self.cum = cum
        self.e_next = np.concatenate([self.e[:, 1:], self.e[:, -1:]], axis=1)

    def integral(self, t: np.ndarray) -> np.ndarray:
        """``t`` has shape ``(..., n_channels)``."""
        u = (np.asarray(t, dtype=float) - self.t_start) * self.fs
        u_c = np.clip(u, 0.0, self.n - 1)
        k = np.minimum(np.floor(u_c).astype(np.intp), self.n - 1)
        delta = u_c - k
        ch = np.broadcast_to(np.arange(self.e.shape[0]), k.shape)
        e0 = self.e[ch, k]
        e1 = self.e_next[ch, k]
        return self.cum[ch, k] + (e0 * delta + 0.5 * (e1 - e0) * delta ** 2) / self.fs

    def value(self, t: np.ndarray) -> np.ndarray:
        u = (np.asarray(t, dtype=float) - self.t_start) * self.fs
        inside = (u >= 0) & (u <= self.n - 1)
        u_c = np.clip(u, 0.0, self.n - 1)
        k = np.floor(u_c).astype(np.intp)
        delta = u_c - k
        ch = np.broadcast_to(np.arange(self.e.shape[0]), k.shape)
        val = self.e[ch, k] * (1 - delta) + self.e_next[ch, k] * delta
        return np.where(inside, val, 0.0)

    def gated_mean(self, toa: np.ndarray, gate: float) -> np.ndarray:
        if gate <= 1e-12:
            return self.value(toa)
        a = self.integral(toa - 0.5 * gate)
        b = self.integral(toa + 0.5 * gate)
        return (b - a) / gate


def gate_amplitude(env: dsp.EnvelopeImage, toa_per_channel, gate: float = DEFAULT_GATE) -> float:
    """Mean envelope in ``[toa - gate/2, toa + gate/2]`` per channel, averaged over channels.

    Parts of a gate outside the recording count as zero amplitude; a warning
    is issued when that happens.
    """
    if gate < 0:
        raise ValueError("gate must be >= 0")
    toa = np.asarray(toa_per_channel, dtype=float)
    t_end = env.t_start + (env.values.shape[1] - 1) / env.fs
    if np.any(toa - 0.5 * gate < env.t_start) or np.any(toa + 0.5 * gate > t_end):
        warnings.warn("gate extends beyond the recording; clipped", stacklevel=2)
    return float(np.mean(_EnvelopeIntegral(env).gated_mean(toa, gate)))


# -- doorway -----------------------------------------------------------------

def _hidden_mask(scene, xy: np.ndarray, max_range: float) -> np.ndarray:
    edge = scene.edge_d if isinstance(scene, DoorwayScene) else scene.edge
    u = scene.los_direction
    d = xy - edge.xy
    r = np.hypot(d[..., 0], d[..., 1])
    along = d[..., 0] * u[0] + d[..., 1] * u[1]
    across = scene.shadow_sign * (u[0] * d[..., 1] - u[1] * d[..., 0])
    return (r > 0) & (r <= max_range) & (along > 0) & (across > 0)


def _wavefront_mask(xy, scene: DoorwayScene, fit: WavefrontFit, physics: PhysicsConfig,
                    tolerance: float) -> np.ndarray:
    # at fixed (z0, t0) the TOA offset from the fitted wavefront is (R_d - r0) / c
    rd = path_distances(xy, scene.edge_d, scene.r2_d)
    return np.abs(rd - fit.r0) <= physics.c * tolerance


def _das_amplitude(signals: np.ndarray, fs: float, t_start: float, toa: np.ndarray,
                   gate: float) -> np.ndarray:
    # coherent sum of the band-passed traces along the predicted wavefront
    n_ch, n = signals.shape
    offsets = np.arange(-0.5 * gate, 0.5 * gate + 0.5 / fs, 1.0 / fs)
    beam = 0.0
    ch = np.arange(n_ch)
    for off in offsets:
        u = (toa + off - t_start) * fs
        inside = (u >= 0) & (u <= n - 1)
        u_c = np.clip(u, 0, n - 1)
        k = np.minimum(np.floor(u_c).astype(np.intp), n - 2)
        delta = u_c - k
        chb = np.broadcast_to(ch, k.shape)
        val = signals[chb, k] * (1 - delta) + signals[chb, k + 1] * delta
        beam = beam + np.abs(np.where(inside, val, 0.0).sum(axis=-1))
    return beam / (len(offsets) * n_ch)


def _metric(xy: np.ndarray, z0, t0, scene: DoorwayScene, integ, heights, physics, gate,
            method, signals, fs, t_start):
    rd = path_distances(xy, scene.edge_d, scene.r2_d)
    rr = path_distances(xy, scene.edge_r, scene.r2_r)
    z0 = np.broadcast_to(np.asarray(z0, dtype=float), rd.shape)
    toa_d = toa_model(heights, rd[..., None], z0[..., None], t0, physics.c)
    toa_r = toa_model(heights, rr[..., None], z0[..., None], t0, physics.c)
    if method == "envelope":
        a_d = integ.gated_mean(toa_d, gate).mean(axis=-1)
        a_r = integ.gated_mean(toa_r, gate).mean(axis=-1)
    elif method == "das":
        a_d = _das_amplitude(signals, fs, t_start, toa_d, gate)
        a_r = _das_amplitude(signals, fs, t_start, toa_r, gate)
    else:
        raise ValueError(f"unknown heatmap method {method!r}")
    return a_d / rd ** 2 * a_r / rr ** 2


def doorway_heatmap(env: dsp.EnvelopeImage, scene: DoorwayScene, fit: WavefrontFit,
                    grid: GridSpec | None = None, physics: PhysicsConfig = PhysicsConfig(),
                    gate: float = DEFAULT_GATE, method: str = "envelope",
                    signals: np.ndarray | None = None, refine: bool = True,
                    wavefront_tolerance: float | None = WAVEFRONT_TOLERANCE) -> Heatmap:
    """Beamforming heatmap over the hidden region.

    For every grid point the diffracted and reflected path lengths give
    predicted arrival times on each microphone (with the fitted ``z0`` and
    ``t0``); the gated envelope amplitudes at those times are averaged over
    the array and combined into the product metric. Cells outside the hidden
    sector are zero, and so are cells whose predicted diffracted arrival is
    more than ``wavefront_tolerance`` seconds off the fitted (detected) first
    wavefront. Earlier cells would gate the silent pre-arrival background,
    where the distance weighting lets noise win; later ones can gate the
    reflected arrival as if it were the diffracted one. ``None`` disables the
    restriction.

    ``method="das"`` replaces the envelope gates by a conventional coherent
    delay-and-sum of ``signals`` (band-passed traces, rows as in ``env``).
    With ``grid.z_levels`` set, the search runs over those heights too and the
    fitted ``z0`` is ignored.
    """
    if fit is None or not (fit.r0 > 0 and math.isfinite(fit.t0) and math.isfinite(fit.z0)):
        raise ValueError("a valid wavefront fit is required")
    if grid is None:
        grid = GridSpec.hidden_sector(scene)
    if method == "das" and signals is None:
        raise ValueError("delay-and-sum needs the band-passed signals")
    xs, ys = grid.xs, grid.ys
    if xs.size == 0 or ys.size == 0:
        raise ValueError("empty grid")
    xy = np.stack(np.meshgrid(xs, ys, indexing="xy"), axis=-1)
    mask = _hidden_mask(scene, xy, grid.max_range)
    if not mask.any():
        raise ValueError("grid does not intersect the hidden region")
    if wavefront_tolerance is not None:
        mask &= _wavefront_mask(xy, scene, fit, physics, wavefront_tolerance)
        if not mask.any():
            raise ValueError("no grid cell is consistent with the fitted wavefront")

    integ = _EnvelopeIntegral(env)
    heights = np.asarray(env.heights, dtype=float)
    args = (scene, integ, heights, physics, gate, method, signals, env.fs, env.t_start)

    levels = [fit.z0] if grid.z_levels is None else list(grid.z_levels)
    values = np.zeros((len(levels),) + mask.shape)
    for i, z in enumerate(levels):
        values[i][mask] = _metric(xy[mask], z, fit.t0, *args)

    flat = int(np.argmax(values))
    iz, iy, ix = np.unravel_index(flat, values.shape)
    best = Point3(float(xs[ix]), float(ys[iy]), float(levels[iz]))
    best_val = float(values[iz, iy, ix])

    peak, peak_val = best, best_val
    if refine:
        fine = np.arange(-10, 11) * grid.step / 10.0
        fxy = np.stack(np.meshgrid(best.x + fine, best.y + fine, indexing="xy"), axis=-1)
        fz = [best.z] if grid.z_levels is None else list(
            best.z + np.linspace(-0.5, 0.5, 11) * _level_step(levels))
        fmask = _hidden_mask(scene, fxy, grid.max_range)
        if wavefront_tolerance is not None:
            fmask &= _wavefront_mask(fxy, scene, fit, physics, wavefront_tolerance)
        for z in fz:
            if not fmask.any():
                break
            vals = np.full(fmask.shape, -np.inf)
            vals[fmask] = _metric(fxy[fmask], z, fit.t0, *args)
            j = np.unravel_index(int(np.argmax(vals)), vals.shape)
            if vals[j] > peak_val:
                peak_val = float(vals[j])
                peak = Point3(float(fxy[j][0]), float(fxy[j][1]), float(z))

    out = values[0] if grid.z_levels is None else values
    return Heatmap(out, grid, best, best_val, peak, peak_val)


def _level_step(levels) -> float:
    return float(np.min(np.diff(sorted(levels)))) if len(levels) > 1 else 0.0


@dataclass(frozen=True)
class DoorwayConfig:
    band: tuple[float, float] = dsp.DEFAULT_BAND
    gate: float = DEFAULT_GATE
    grid_step: float = 0.05
    max_range: float = 6.0
    k: float = DEFAULT_K
    noise_window: float = DEFAULT_NOISE_WINDOW
    min_peak_snr: float = 3.0
    max_rmse: float = MAX_RMSE
    method: str = "envelope"
    wavefront_tolerance: float | None = WAVEFRONT_TOLERANCE
    full_3d: bool = False
    z_step: float = 0.05
    refine: bool = True


def _peak_snr(env: dsp.EnvelopeImage, noise_window: float) -> float:
    n = max(1, int(round(noise_window * env.fs)))
    bg = float(env.values[:, :n].mean())
    peak = float(env.values.max())
    if bg == 0:
        return math.inf if peak > 0 else 0.0
    return peak / bg


def _screened_fit(env: dsp.EnvelopeImage, physics: PhysicsConfig, k, noise_window,
                  min_peak_snr, max_rmse, label: str = ""):
    snr = _peak_snr(env, noise_window)
    where = f" on {label}" if label else ""
    if snr < min_peak_snr:
        raise LowSignalError(f"signal too weak{where}: peak/background {snr:.2f} "
                             f"< {min_peak_snr:g}")
    arrivals = detect_first_arrival(env, noise_window, k)
    if arrivals.n_detected == 0:
        raise NoDetectionError(f"no wavefront detected{where}")
    fit = fit_wavefront(arrivals, physics.c, max_rmse)
    return arrivals, fit


def _check_fs(traces: TraceSet, physics: PhysicsConfig) -> None:
    if abs(traces.fs - physics.fs) > 1e-6:
        raise SceneError(f"traces sampled at {traces.fs:g} Hz, expected {physics.fs:g} Hz")


def localize_doorway(traces: TraceSet, scene: DoorwayScene,
                     physics: PhysicsConfig = PhysicsConfig(),
                     config: DoorwayConfig = DoorwayConfig()) -> LocalizationResult:
    """Full doorway pipeline: envelope, first arrivals, wavefront fit, heatmap."""
    _check_fs(traces, physics)
    if traces.n_channels != scene.array.count:
        raise SceneError(f"scene has {scene.array.count} microphones but the recording "
                         f"has {traces.n_channels} channels")
    heights = traces.channel_geometry[:, 2]
    env = dsp.envelope_image(traces.samples, traces.fs, heights, config.band, traces.t_start)
    arrivals, fit = _screened_fit(env, physics, config.k, config.noise_window,
                                  config.min_peak_snr, config.max_rmse)

    signals = None
    if config.method == "das":
        order = np.argsort(heights, kind="stable")
        signals = dsp.bandpass(traces.samples, traces.fs, *config.band)[order]
    z_levels = None
    if config.full_3d:
        z_levels = tuple(np.arange(0.0, heights.max() + 0.5 + 1e-9, config.z_step))
    grid = GridSpec.hidden_sector(scene, config.max_range, config.grid_step, z_levels)
    hm = doorway_heatmap(env, scene, fit, grid, physics, config.gate, config.method,
                         signals, config.refine, config.wavefront_tolerance)

    r1, theta, _ = scene.polar(hm.peak)
    z0 = hm.peak.z if config.full_3d else fit.z0
    return LocalizationResult(r1, theta, z0, fit.rmse, hm.peak_value, [fit], [arrivals],
                              [env], heatmap=hm)


# -- single edge ---------------------------------------------------------------

@dataclass(frozen=True)
class EdgeConfig:
    band: tuple[float, float] = dsp.DEFAULT_BAND
    window: float = dsp.DEFAULT_WINDOW
    k: float = DEFAULT_K
    noise_window: float = DEFAULT_NOISE_WINDOW
    min_peak_snr: float = 3.0
    max_rmse: float = MAX_RMSE
    z_tolerance: float = 0.2
    n_central: int = 3
    resolution: float = 100.0
    fit_band: tuple[float, float] = (2000.0, 9000.0)
    theta_search: tuple[float, float, float] = (1.0, 40.0, 0.5)
    nu_scale: float = 1.0


def estimate_azimuth(measured: kedge.RatioCurve, scene: EdgeScene,
                     physics: PhysicsConfig = PhysicsConfig(), search=(1.0, 40.0, 0.5),
                     d1: float = 3.1, band=(2000.0, 9000.0), nu_scale: float = 1.0,
                     tolerance: float = 1e-9):
    """Azimuth whose theoretical spectral ratio best matches ``measured``.

    The objective is the frequency-weighted (weight proportional to f) mean
    squared dB difference over ``band``. Returns ``(theta, thetas, objective)``.
    """
    freqs = np.asarray(measured.freqs, dtype=float)
    sel = (freqs >= band[0]) & (freqs <= band[1]) & np.isfinite(measured.ratio_db)
    if not sel.any():
        raise ValueError(f"measured ratio has no bins inside {band[0]:g}-{band[1]:g} Hz")
    f = freqs[sel]
    meas = np.asarray(measured.ratio_db, dtype=float)[sel]
    w = f / f.sum()
    lo, hi, step = search
    thetas = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
    d2 = float(np.mean(scene.r2))
    obj = np.empty(thetas.size)
    for i, th in enumerate(thetas):
        theory = kedge.ratio_curve(th, scene.delta_theta, d1, d2, f, physics.c, nu_scale)
        obj[i] = float(w @ (meas - theory.ratio_db) ** 2)
    if np.ptp(obj) < tolerance:
        raise AmbiguousAzimuthError("azimuth objective is flat over the search range")
    return float(thetas[int(np.argmin(obj))]), thetas, obj


def _combine(values, variances):
    v = np.asarray(variances, dtype=float)
    x = np.asarray(values, dtype=float)
    if np.all(np.isfinite(v)) and np.all(v > 0):
        w = 1.0 / v
        return float(w @ x / w.sum())
    return float(x.mean())


def measure_ratio(traces: TraceSet, scene: EdgeScene, fits, z0: float, r1: float,
                  physics: PhysicsConfig = PhysicsConfig(), config: EdgeConfig = EdgeConfig()
                  ) -> kedge.RatioCurve:
    """Spectral ratio (dB) between the two arrays' first arrivals.

    Per array: band-pass, window each of the ``n_central`` microphones nearest
    ``z0`` around its fitted arrival time, average the power spectra. The
    ratio is corrected for the spherical-spreading difference between arrays,
    using the common source estimate ``(r1, z0)`` rather than the per-array
    fits so that independent range errors do not bias it.
    """
    spectra = []
    spreading = []
    for array, fit, r2 in zip(scene.arrays, fits, scene.r2):
        idx = traces.channels_of(array.id)
        z = traces.channel_geometry[idx, 2]
        pick = idx[np.argsort(np.abs(z - z0), kind="stable")[:config.n_central]]
        filtered = dsp.bandpass(traces.samples[pick], traces.fs, *config.band)
        per_mic = []
        dist = []
        for row, ch in zip(filtered, pick):
            zc = traces.channel_geometry[ch, 2]
            center = float(fit.toa(zc, physics.c))
            seg = dsp.window_extract(row, traces.fs, center, config.window, traces.t_start)
            per_mic.append(dsp.power_spectrum(seg, traces.fs, config.resolution, center))
            dist.append(math.hypot(zc - z0, r1 + r2))
        spectra.append(dsp.average_spectra(per_mic))
        spreading.append(float(np.mean(dist)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 10.0 * np.log10(spectra[0].power / spectra[1].power)
    ratio = ratio - 20.0 * math.log10(spreading[1] / spreading[0])
    return kedge.RatioCurve(spectra[0].freqs, ratio, float("nan"), scene.delta_theta)


def localize_edge(traces: TraceSet, scene: EdgeScene, physics: PhysicsConfig = PhysicsConfig(),
                  config: EdgeConfig = EdgeConfig()) -> LocalizationResult:
    """Single-edge pipeline: per-array wavefront fits for range and height,
    spectral-ratio matching for azimuth."""
    _check_fs(traces, physics)
    ids = set(traces.array_ids)
    if len(scene.arrays) != 2 or any(a.id not in ids for a in scene.arrays):
        raise SceneError("edge localization requires two arrays "
                         f"({', '.join(a.id for a in scene.arrays)}) in the recording; "
                         f"found {sorted(ids)}")

    fits, arrivals, envs = [], [], []
    for array in scene.arrays:
        idx = traces.channels_of(array.id)
        env = dsp.envelope_image(traces.samples[idx], traces.fs,
                                 traces.channel_geometry[idx, 2], config.band, traces.t_start)
        arr, fit = _screened_fit(env, physics, config.k, config.noise_window,
                                 config.min_peak_snr, config.max_rmse, f"array {array.id!r}")
        fits.append(fit)
        arrivals.append(arr)
        envs.append(env)

    dz = abs(fits[0].z0 - fits[1].z0)
    if dz > config.z_tolerance:
        raise InconsistentFitError(f"arrays disagree on source height by {dz * 100:.1f} cm "
                                   f"(> {config.z_tolerance * 100:.0f} cm)")
    z0 = _combine([f.z0 for f in fits], [f.cov[1, 1] for f in fits])
    r1 = _combine([f.r0 - r2 for f, r2 in zip(fits, scene.r2)], [f.cov[0, 0] for f in fits])

    ratio = measure_ratio(traces, scene, fits, z0, r1, physics, config)
    theta, thetas, obj = estimate_azimuth(ratio, scene, physics, config.theta_search, r1,
                                          config.fit_band, config.nu_scale)
    return LocalizationResult(r1, theta, z0, max(f.rmse for f in fits), float(obj.min()),
                              fits, arrivals, envs, ratio=ratio, objective=(thetas, obj))


@dataclass
class PositionEstimate:
    """Azimuth from the spectral ratio pooled over repeated measurements.

    ``theta`` comes from the mean (in dB) of the ratios of all accepted
    measurements; ``r1`` and ``z0`` are the means of their per-measurement
    estimates. ``rejected`` holds the reason for each discarded measurement.
    """

    theta: float
    r1: float
    z0: float
    accepted: list
    rejected: list
    ratio: kedge.RatioCurve
    objective: tuple

    @property
    def rejection_rate(self) -> float:
        n = len(self.accepted) + len(self.rejected)
        return len(self.rejected) / n if n else 0.0


def pool_ratios(curves) -> kedge.RatioCurve:
    curves = list(curves)
    if not curves:
        raise ValueError("no ratio curves to pool")
    ref = curves[0]
    for c in curves[1:]:
        if c.freqs.shape != ref.freqs.shape or not np.allclose(c.freqs, ref.freqs, atol=1e-9):
            raise ValueError("ratio curves have mismatched frequency grids")
    return kedge.RatioCurve(ref.freqs, np.mean([c.ratio_db for c in curves], axis=0),
                            float("nan"), ref.delta_theta)


def localize_edge_position(recordings, scene: EdgeScene,
                           physics: PhysicsConfig = PhysicsConfig(),
                           config: EdgeConfig = EdgeConfig()) -> PositionEstimate:
    """Run :func:`localize_edge` on repeated measurements of one source position
    and estimate the azimuth from their pooled spectral ratio.

    Measurements rejected by the pipeline are recorded and skipped; if all are
    rejected the last rejection is raised.
    """
    accepted, rejected = [], []
    last = None
    for traces in recordings:
        try:
            accepted.append(localize_edge(traces, scene, physics, config))
        except LocalizationError as exc:
            rejected.append(str(exc))
            last = exc
    if not accepted:
        if last is None:
            raise ValueError("no recordings given")
        raise last
    pooled = pool_ratios(r.ratio for r in accepted)
    r1 = float(np.mean([r.r1 for r in accepted]))
    z0 = float(np.mean([r.z0 for r in accepted]))
    theta, thetas, obj = estimate_azimuth(pooled, scene, physics, config.theta_search, r1,
                                          config.fit_band, config.nu_scale)
    return PositionEstimate(theta, r1, z0, accepted, rejected, pooled, (thetas, obj))
