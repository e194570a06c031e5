"""Quadrature-fluctuation spectrum and band-limited squeezing.

Frequencies are offsets ``w = omega - omega_0`` from the cavity mode
frequency. The stationary quadrature correlation is the bi-exponential
envelope

    (kappa exp(-mu tau/2) - mu exp(-kappa tau/2)) / (kappa - mu)

whose transform is a difference of two normalised Lorentzians of full widths
``mu`` and ``kappa``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import analytic
from .errors import QuadratureError, ValidationError

#: |kappa - mu| <= CONFLUENT_RTOL * kappa switches to the mu -> kappa limit
CONFLUENT_RTOL = 1e-9


def _confluent(kappa, mu):
    return abs(kappa - mu) <= CONFLUENT_RTOL * kappa


def correlation_envelope(kappa, mu, tau):
    """Normalised stationary two-time correlation at lag ``tau >= 0``."""
    tau = np.asarray(tau, dtype=float)
    if _confluent(kappa, mu):
        return (1.0 + 0.5 * kappa * tau) * np.exp(-0.5 * kappa * tau)
    # symmetric in (kappa, mu); factor out the slower decay and use expm1 so
    # nothing cancels as the two rates approach each other
    slow, fast = min(kappa, mu), max(kappa, mu)
    gap = fast - slow
    return np.exp(-0.5 * slow * tau) * (1.0 - slow * np.expm1(-0.5 * gap * tau) / gap)


def lorentzian(omega, width):
    """Unit-area Lorentzian of full width at half maximum ``width``."""
    omega = np.asarray(omega, dtype=float)
    half = 0.5 * width
    return (width / (2.0 * math.pi)) / (omega**2 + half**2)


def spectrum_kernel(kappa, mu, omega):
    """Unit-area spectral shape; multiply by a quadrature variance.

    Equal to ``(kappa L_mu - mu L_kappa) / (kappa - mu)`` with ``L_w`` the
    unit-area Lorentzian of width ``w``, written in product form, which is
    manifestly positive and has no cancellation near ``kappa = mu``.
    """
    omega = np.asarray(omega, dtype=float)
    w2 = omega**2
    return (kappa * mu * (kappa + mu) / (8.0 * math.pi)
            / ((w2 + 0.25 * mu**2) * (w2 + 0.25 * kappa**2)))


def band_fraction(kappa, mu, lam):
    """Fraction of the kernel's area inside ``[-lam, lam]``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValidationError("lambda", "must be >= 0")
    if _confluent(kappa, mu):
        x = 2.0 * lam / kappa
        return (2.0 / math.pi) * (np.arctan(x) + x / (1.0 + x**2))
    # kappa atan(2l/mu) - mu atan(2l/kappa) regrouped with
    # atan(a) - atan(b) = atan((a - b) / (1 + ab)), stable for kappa ~ mu
    den = mu * kappa + 4.0 * lam**2
    d = 2.0 * lam * (kappa - mu) / den
    with np.errstate(invalid="ignore", divide="ignore"):
        atanc = np.where(d == 0, 1.0, np.arctan(d) / np.where(d == 0, 1.0, d))
    return (2.0 / math.pi) * (np.arctan(2.0 * lam / mu) + 2.0 * mu * lam / den * atanc)


@dataclass(frozen=True)
class SpectrumCurve:
    omega: np.ndarray
    s_minus: np.ndarray
    params: object
    quadrature: str = "minus"

    def rows(self):
        return zip(self.omega.tolist(), self.s_minus.tolist())


@dataclass(frozen=True)
class BandReport:
    lam: float
    z: float
    var_minus_band: float
    var_coherent_band: float
    squeezing_band: float
    squeezing_band_out: float

    def row(self):
        return (self.lam, self.z, self.var_minus_band, self.squeezing_band)


def _check_symmetric(omega):
    s = np.sort(omega)
    if not np.allclose(s, -s[::-1], rtol=1e-12, atol=1e-12 * max(1.0, np.abs(s).max())):
        raise ValidationError("omega", "frequency grid must be symmetric about 0")


def quadrature_spectrum(params, omega_grid, quadrature="minus"):
    """Spectrum of quadrature fluctuations on ``omega_grid``.

    ``quadrature="plus"`` reuses the same kernel with the plus-quadrature
    variance.
    """
    omega = np.asarray(omega_grid, dtype=float)
    _check_symmetric(omega)
    var_plus, var_minus = analytic.quadrature_variances(params)
    if quadrature == "minus":
        var = var_minus
    elif quadrature == "plus":
        var = var_plus
    else:
        raise ValidationError("quadrature", f"expected 'minus' or 'plus', got {quadrature!r}")
    s = var * spectrum_kernel(params.kappa, params.mu, omega)
    return SpectrumCurve(omega, s, params, quadrature)


def z_factor(params, lam):
    """Fraction of the quadrature variance in the band ``[-lam, lam]``."""
    return float(band_fraction(params.kappa, params.mu, lam))


def band_report(params, lam):
    """Band-limited variances and squeezing in ``[-lam, lam]``.

    At ``lam == 0`` both band variances vanish; the reported squeezing is
    then the (lambda independent) global value.
    """
    z = z_factor(params, lam)
    _, var_minus = analytic.quadrature_variances(params)
    var_coh = analytic.coherent_reference_variance(params)
    s_global, s_out = analytic.quadrature_squeezing(params)
    if z > 0:
        band_minus = z * var_minus
        band_coh = z * var_coh
        s_band = (band_coh - band_minus) / band_coh
        # output light: both variances carry the same factor kappa
        s_band_out = (params.kappa * band_coh - params.kappa * band_minus) / (params.kappa * band_coh)
    else:
        band_minus = band_coh = 0.0
        s_band, s_band_out = s_global, s_out
    return BandReport(float(lam), z, band_minus, band_coh, s_band, s_band_out)


@dataclass(frozen=True)
class QuadratureCheck:
    lam: float
    numeric: float
    analytic: float
    difference: float
    error_estimate: float
    tolerance: float

    @property
    def agrees(self):
        return abs(self.difference) <= self.tolerance


def _segments(lo, hi, scales):
    """Breakpoints for [lo, hi] clustered geometrically around 0."""
    pts = {lo, hi}
    if lo < 0 < hi:
        pts.add(0.0)
    s = min(scales) / 8.0
    while s < max(abs(lo), abs(hi)):
        for p in (s, -s):
            if lo < p < hi:
                pts.add(p)
        s *= 4.0
    return sorted(pts)


def integrate_spectrum(params, lo, hi, abs_tol, quadrature="minus"):
    """Adaptive Gauss-Kronrod integral of the spectrum over ``[lo, hi]``.

    Returns ``(value, error_estimate)``; raises :class:`QuadratureError`
    if the estimate exceeds ``abs_tol``.
    """
    if hi <= lo:
        return 0.0, 0.0
    var_plus, var_minus = analytic.quadrature_variances(params)
    var = var_minus if quadrature == "minus" else var_plus
    kappa, mu = params.kappa, params.mu

    def f(w):
        return var * float(spectrum_kernel(kappa, mu, w))

    pts = _segments(lo, hi, (kappa, mu))
    per_tol = abs_tol / (len(pts) - 1)
    total = err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad(f, a, b, epsabs=per_tol, epsrel=0.0, limit=200)
        total += val
        err += e
    if err > abs_tol:
        raise QuadratureError("spectrum quadrature did not converge", err)
    return total, err


def verify_band_by_quadrature(params, lam, abs_tol):
    """Integrate the spectrum numerically over ``[-lam, lam]`` and compare
    with ``z(lam) * var_minus``.

    Agreement is required within ``abs_tol`` plus ``1e-9`` relative.
    """
    if lam < 0:
        raise ValidationError("lambda", "must be >= 0")
    if not abs_tol > 0:
        raise ValidationError("abs_tol", "must be > 0")
    numeric, err = integrate_spectrum(params, -lam, lam, abs_tol)
    ref = band_report(params, lam).var_minus_band
    return QuadratureCheck(float(lam), numeric, ref, numeric - ref, err,
                           abs_tol + 1e-9 * abs(ref))


def spectrum_normalization(params, window=None, abs_tol=1e-10):
    """Total area of the minus-quadrature spectrum.

    Numerical quadrature over ``[-window, window]`` (default ``1e4 kappa``)
    plus the analytic area of the two tails beyond the window.

    Returns ``(area, global_variance)``.
    """
    if window is None:
        window = 1e4 * params.kappa
    inner, _ = integrate_spectrum(params, -window, window, abs_tol)
    _, var_minus = analytic.quadrature_variances(params)
    tail = var_minus * (1.0 - z_factor(params, window))
    return inner + tail, var_minus
