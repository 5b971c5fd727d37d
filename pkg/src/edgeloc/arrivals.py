"""
First-arrival detection and spherical wavefront fitting.

A point source at height ``z0`` and horizontal path length ``r0`` emitting at
``t0`` reaches a microphone at height ``z`` at

    TOA(z) = t0 + sqrt((z - z0)**2 + r0**2) / c

The fitter recovers ``(r0, z0, t0)`` from per-channel arrival times.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

from .dsp import EnvelopeImage
from .errors import DegenerateFitError, FitRejectedError, InsufficientChannelsError

DEFAULT_K = 5.0
DEFAULT_NOISE_WINDOW = 2e-3
MAX_RMSE = 1e-4


@dataclass(frozen=True)
class ArrivalSet:
    """Per-channel first-arrival times; undetected channels hold NaN."""

    toa: np.ndarray
    confidence: np.ndarray
    heights: np.ndarray
    detected: np.ndarray
    peak: np.ndarray = field(default=None, repr=False)
    background: np.ndarray = field(default=None, repr=False)

    @property
    def n_detected(self) -> int:
        return int(np.count_nonzero(self.detected))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("channel,height_m,toa_s,confidence,detected\n")
            for i, (z, t, q, d) in enumerate(zip(self.heights, self.toa,
                                                 self.confidence, self.detected)):
                fh.write(f"{i},{z:.6g},{t:.9g},{q:.6g},{int(d)}\n")


@dataclass(frozen=True)
class WavefrontFit:
    r0: float
    z0: float
    t0: float
    rmse: float
    n_used: int
    cov: np.ndarray = field(default=None, repr=False, compare=False)

    def toa(self, z, c: float = 343.0):
        return toa_model(z, self.r0, self.z0, self.t0, c)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r0_m,z0_m,t0_s,rmse_s,n_used\n")
            fh.write(f"{self.r0:.9g},{self.z0:.9g},{self.t0:.9g},{self.rmse:.6g},"
                     f"{self.n_used}\n")


def toa_model(z, r0: float, z0: float, t0: float, c: float = 343.0):
    return t0 + np.sqrt((np.asarray(z, dtype=float) - z0) ** 2 + r0 * r0) / c


def _peak_offset(y: np.ndarray, j: int) -> float:
    # vertex of the parabola through three samples around a local maximum
    if j <= 0 or j >= len(y) - 1:
        return 0.0
    a, b, c = y[j - 1], y[j], y[j + 1]
    den = a - 2 * b + c
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def detect_first_arrival(env: EnvelopeImage, noise_window: float = DEFAULT_NOISE_WINDOW,
                         k: float = DEFAULT_K, rel_floor: float = 0.02,
                         neighbourhood: float = 0.3e-3) -> ArrivalSet:
    """Time of the first envelope peak significantly above the background.

    The background is the mean envelope over the leading ``noise_window``. A
    channel's threshold is ``k`` times that, but never below ``rel_floor``
    times the channel maximum (filter ringing in clean recordings). A peak is
    a sample above threshold that is the maximum within ``neighbourhood``
    seconds either side, which skips shoulders on the rising flank. The search
    starts after the noise window, which by assumption holds no arrival. The
    peak time is refined by parabolic interpolation.
    """
    values = np.asarray(env.values, dtype=float)
    n_ch, n_t = values.shape
    if n_t == 0:
        raise ValueError("empty envelope image")
    n_noise = max(1, min(n_t, int(round(noise_window * env.fs))))
    half = max(1, int(round(neighbourhood * env.fs)))

    toa = np.full(n_ch, np.nan)
    conf = np.zeros(n_ch)
    peak = np.zeros(n_ch)
    background = values[:, :n_noise].mean(axis=1)
    detected = np.zeros(n_ch, dtype=bool)
    local_max = maximum_filter1d(values, size=2 * half + 1, axis=1, mode="nearest")

    for ch in range(n_ch):
        y = values[ch]
        thr = max(k * background[ch], rel_floor * float(y.max()))
        hits = np.flatnonzero((y[n_noise:] > thr) & (y[n_noise:] >= local_max[ch, n_noise:]))
        if hits.size == 0:
            continue
        j = int(hits[0]) + n_noise
        toa[ch] = env.t_start + (j + _peak_offset(y, j)) / env.fs
        peak[ch] = y[j]
        detected[ch] = True
        conf[ch] = 1.0 if background[ch] == 0 else float(
            np.clip(1.0 - k * background[ch] / y[j], 0.0, 1.0))

    return ArrivalSet(toa, conf, np.asarray(env.heights, dtype=float), detected, peak,
                      background)


def _residuals(p, z, d):
    s = np.sqrt((z - p[1]) ** 2 + p[0] ** 2)
    return p[2] + s - d, s


def _jacobian(p, z, s):
    jac = np.empty((len(z), 3))
    jac[:, 0] = p[0] / s
    jac[:, 1] = -(z - p[1]) / s
    jac[:, 2] = 1.0
    return jac


def _levenberg_marquardt(p, z, d, max_iter: int, r_diverge: float):
    res, s = _residuals(p, z, d)
    cost = float(res @ res)
    # residuals at rounding level of the path lengths count as an exact fit
    cost_floor = len(z) * (1e-13 * max(1.0, float(np.abs(d).max()))) ** 2
    lam = 1e-3
    for _ in range(max_iter):
        jac = _jacobian(p, z, s)
        jtj = jac.T @ jac
        grad = jac.T @ res
        diag = np.diag(np.diag(jtj)) + 1e-30
        improved = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * diag, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            res_t, s_t = _residuals(trial, z, d)
            cost_t = float(res_t @ res_t)
            if cost_t <= cost:
                improved = True
                break
            lam *= 10.0
        if not improved:
            return p, res, s, True
        small = np.all(np.abs(step) <= 1e-12 * (np.abs(p) + 1e-9))
        flat = cost - cost_t <= 1e-15 * cost
        p, res, s, cost = trial, res_t, s_t, cost_t
        lam = max(lam / 10.0, 1e-12)
        if abs(p[0]) > r_diverge:
            raise DegenerateFitError(
                f"wavefront radius diverged (r0 > {r_diverge:g} m): plane-wave degenerate")
        if small or flat or cost <= cost_floor:
            return p, res, s, True
    return p, res, s, False


def fit_wavefront(arrivals: ArrivalSet, c: float = 343.0, max_rmse: float | None = MAX_RMSE,
                  r_init=(0.5, 20.0), max_iter: int = 500,
                  r_diverge: float = 1000.0) -> WavefrontFit:
    """Least-squares fit of the spherical wavefront model to detected TOAs.

    Damped Gauss-Newton (Levenberg-Marquardt) with an analytic Jacobian, run in
    distance units (``c * t``) for conditioning. Initialisation: ``z0`` at the
    earliest channel, ``t0 + r0/c`` equal to the earliest TOA and ``r0`` picked
    from a log-spaced scan over ``r_init`` by residual.

    Raises
    ------
    InsufficientChannelsError
        Fewer than 3 detected channels or fewer than 2 distinct heights.
    DegenerateFitError
        Plane-wave data (radius diverges) or no convergence within ``max_iter``.
    FitRejectedError
        rmse above ``max_rmse`` seconds (pass ``None`` to disable).
    """
    mask = np.asarray(arrivals.detected, dtype=bool) & np.isfinite(arrivals.toa)
    z = np.asarray(arrivals.heights, dtype=float)[mask]
    t = np.asarray(arrivals.toa, dtype=float)[mask]
    if z.size < 3 or np.unique(z).size < 2:
        raise InsufficientChannelsError(
            f"need >= 3 detected channels over >= 2 heights, got {z.size}")
    d = c * t
    if np.ptp(d) <= 1e-12 * max(1.0, float(np.abs(d).max())):
        raise DegenerateFitError("identical arrival times on all channels: plane wavefront")

    i_min = int(np.argmin(d))
    z_init = z[i_min]
    best = None
    for r in np.geomspace(r_init[0], r_init[1], 40):
        p = np.array([r, z_init, d[i_min] - r])
        res, _ = _residuals(p, z, d)
        cost = float(res @ res)
        if best is None or cost < best[0]:
            best = (cost, p)

    p, res, s, converged = _levenberg_marquardt(best[1], z, d, max_iter, r_diverge)
    if not converged:
        raise DegenerateFitError(f"wavefront fit did not converge in {max_iter} iterations")
    p[0] = abs(p[0])

    rmse = float(np.sqrt(np.mean(res ** 2))) / c
    n = z.size
    jac = _jacobian(p, z, s)
    sigma2 = float(res @ res) / (n - 3) if n > 3 else 0.0
    try:
        cov = sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.inf)
    scale = np.array([1.0, 1.0, 1.0 / c])
    cov = cov * np.outer(scale, scale)

    fit = WavefrontFit(float(p[0]), float(p[1]), float(p[2] / c), rmse, int(n), cov)
    if max_rmse is not None and rmse > max_rmse:
        raise FitRejectedError(rmse, max_rmse)
    return fit
