"""
Knife-edge diffraction under the Fresnel approximation.

Fresnel integrals, the complex diffraction loss L(nu), the Fresnel-Kirchhoff
parameter and the loss / spectral-ratio curves built from them.

The Fresnel integrals are evaluated without a special-functions dependency:

* power series for ``|x| <= 2.5``
* Lentz continued fraction for ``2.5 < |x| < 6``
* auxiliary-function asymptotic expansion for ``|x| >= 6``

All three agree with adaptive quadrature to better than 1e-12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_MAX = 2.5
ASYMPTOTIC_MIN = 6.0
_EPS = 1e-16
_MAX_TERMS = 200


@dataclass(frozen=True)
class FresnelPair:
    c_val: float
    s_val: float


@dataclass(frozen=True)
class LossCurve:
    """Diffraction loss magnitude over frequency for one diffraction angle."""

    freqs: np.ndarray
    loss: np.ndarray
    theta: float
    d1: float
    d2: float

    @property
    def loss_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.loss))


@dataclass(frozen=True)
class RatioCurve:
    """Loss ratio (dB) between the poles at ``theta`` and ``theta + delta_theta``."""

    freqs: np.ndarray
    ratio_db: np.ndarray
    theta: float
    delta_theta: float


def _series(x: np.ndarray) -> np.ndarray:
    # C + iS = sum_k (i pi/2)^k x^(2k+1) / (k! (2k+1))
    x2 = x * x
    term = x.astype(complex)
    total = term.copy()
    fac = 1j * math.pi / 2.0
    for k in range(1, _MAX_TERMS):
        term = term * fac * x2 / k
        contrib = term / (2 * k + 1)
        total += contrib
        if np.all(np.abs(contrib) < _EPS * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _continued_fraction(x: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the complementary error function form
    pix2 = math.pi * x * x
    b = 1.0 - 1j * pix2
    tiny = 1e-300
    cc = np.full(x.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    n = -1
    for _ in range(_MAX_TERMS):
        n += 2
        a = -n * (n + 1.0)
        b = b + 4.0
        d = 1.0 / (a * d + b)
        cc = b + a / cc
        delta = cc * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise RuntimeError("Fresnel continued fraction failed to converge")
    h = (x - 1j * x) * h
    phase = np.cos(0.5 * pix2) + 1j * np.sin(0.5 * pix2)
    return (0.5 + 0.5j) * (1.0 - phase * h)


def _asymptotic(x: np.ndarray) -> np.ndarray:
    u = math.pi * x * x
    inv_u2 = 1.0 / (u * u)
    f = np.ones_like(x)
    g = 1.0 / u
    tf = np.ones_like(x)
    tg = 1.0 / u
    for m in range(1, 40):
        # (4m-1)!! / u^(2m) and (4m+1)!! / u^(2m+1), built incrementally
        tf_next = tf * (4 * m - 3) * (4 * m - 1) * inv_u2
        tg_next = tg * (4 * m - 1) * (4 * m + 1) * inv_u2
        if np.all(np.abs(tf_next) < _EPS) and np.all(np.abs(tg_next) < _EPS):
            break
        sign = -1.0 if m % 2 else 1.0
        f = f + sign * tf_next
        g = g + sign * tg_next
        tf, tg = tf_next, tg_next
    f = f / (math.pi * x)
    g = g / (math.pi * x)
    arg = 0.5 * u
    s, c = np.sin(arg), np.cos(arg)
    return (0.5 + f * s - g * c) + 1j * (0.5 - f * c - g * s)


def fresnel_complex(x) -> np.ndarray | complex:
    """Return ``C(x) + i S(x)`` elementwise.

    ``C(x) = int_0^x cos(pi t^2 / 2) dt`` and ``S(x) = int_0^x sin(pi t^2 / 2) dt``.
    Both are odd, so only ``|x|`` is evaluated and the sign restored.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("Fresnel integrals need finite arguments")
    scalar = arr.ndim == 0
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty(ax.shape, dtype=complex)

    low = ax <= SERIES_MAX
    high = ax >= ASYMPTOTIC_MIN
    mid = ~(low | high)
    if low.any():
        out[low] = _series(ax[low])
    if mid.any():
        out[mid] = _continued_fraction(ax[mid])
    if high.any():
        out[high] = _asymptotic(ax[high])

    out = np.where(np.atleast_1d(arr) < 0, -out, out)
    return complex(out[0]) if scalar else out


def fresnel_cs(x: float) -> FresnelPair:
    val = fresnel_complex(float(x))
    return FresnelPair(val.real, val.imag)


def diffraction_loss(nu):
    """Complex knife-edge loss ``L(nu)``.

    Closed form of ``(1+j)/2 * int_nu^inf exp(-j pi t^2 / 2) dt``:

        L = (1+j)/2 * [(1/2 - C(nu)) - j (1/2 - S(nu))]

    ``L(0) = 1/2`` and ``|L| -> 1`` for ``nu -> -inf`` (unobstructed path).
    """
    cs = fresnel_complex(nu)
    return (0.5 + 0.5j) * ((0.5 - np.real(cs)) - 1j * (0.5 - np.imag(cs)))


def fresnel_param(theta, f, d1: float, d2: float, c: float = 343.0, scale: float = 1.0):
    """Fresnel-Kirchhoff parameter ``nu = theta * sqrt(2 d1 d2 / (lambda (d1 + d2)))``.

    Parameters
    ----------
    theta : float or array
        Diffraction angle in degrees, positive into the shadow.
    f : float or array
        Frequency in hertz; ``lambda = c / f``.
    d1, d2 : float
        Source-to-edge and edge-to-receiver distances in meters.
    c : float
        Speed of sound in m/s.
    scale : float
        Multiplier on the geometric constant. 1.0 gives the standard small-angle form.
    """
    if d1 <= 0 or d2 <= 0:
        raise ValueError(f"d1 and d2 must be positive (got d1={d1}, d2={d2})")
    if not c > 0:
        raise ValueError(f"c must be positive (got {c})")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("frequencies must be non-negative")
    wavelength_inv = f / c
    geom = np.sqrt(2.0 * d1 * d2 * wavelength_inv / (d1 + d2))
    return scale * np.deg2rad(theta) * geom


def loss_curve(theta: float, d1: float, d2: float, freq_grid, c: float = 343.0,
               scale: float = 1.0) -> LossCurve:
    freqs = np.asarray(freq_grid, dtype=float)
    if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
        raise ValueError("frequency grid must be strictly ascending")
    nu = fresnel_param(theta, freqs, d1, d2, c, scale)
    return LossCurve(freqs, np.abs(diffraction_loss(nu)), float(theta), d1, d2)


def ratio_curve(theta: float, delta_theta: float, d1: float, d2: float, freq_grid,
                c: float = 343.0, scale: float = 1.0) -> RatioCurve:
    """Spectral ratio ``20 log10(|L(theta)| / |L(theta + delta_theta)|)`` in dB.

    The source spectrum cancels in this ratio, which is what makes it measurable.
    """
    near = loss_curve(theta, d1, d2, freq_grid, c, scale)
    far = loss_curve(theta + delta_theta, d1, d2, freq_grid, c, scale)
    ratio = 20.0 * np.log10(near.loss / far.loss)
    return RatioCurve(near.freqs, ratio, float(theta), float(delta_theta))
