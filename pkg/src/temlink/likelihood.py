"""
Observation vector, design matrices and log-likelihood of the IF-TEM link.

For firing times t_0 < ... < t_K and a timing hypothesis tau, interval k
contributes

    y_k    = kappa*delta - b (t_k - t_{k-1})
    P[k,l] = int_{t_{k-1}}^{t_k} p(t - l T - tau) dt           (pilots)
    G[k,l] = int_{t_{k-1}}^{t_k} p(t - (L_p + l) T - tau) dt   (data)
    w_k    = 1 / (t_k - t_{k-1})

and the log-likelihood is ``-sum_k w_k (y - P s_p - G s_d)_k^2`` up to a
constant that does not depend on (s_d, tau).  The noise PSD only rescales the
quadratic form, so it is dropped; every decision taken from it is invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DimensionMismatch, InvalidFiringRecord, InvalidInterval
from .waveform import PulseShape

__all__ = ["LikelihoodMatrices", "integrated_pulse", "integrated_pulse_dshift",
           "pulse_matrix", "pulse_matrix_dshift", "observation_vector",
           "build_matrices", "log_likelihood", "check_firing_times"]


def check_firing_times(times, min_length=2) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < min_length:
        raise InvalidFiringRecord(f"need a vector of at least {min_length} firing times")
    if np.any(np.diff(times) <= 0) or not np.all(np.isfinite(times)):
        raise InvalidFiringRecord("firing times must be finite and strictly increasing")
    return times


def _quad_integral(pulse, a, b, shift):
    lo, hi = pulse.support
    lo, hi = max(a - shift, lo), min(b - shift, hi)
    if lo >= hi:
        return 0.0
    val, _ = integrate.quad(pulse.eval, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def integrated_pulse(pulse: PulseShape, a, b, shift=0.0, method="antiderivative"):
    """
    Integral of ``p(t - shift)`` over ``[a, b]``.

    Parameters
    ----------
    pulse : PulseShape
    a, b : float or array_like
        Interval limits, broadcast against `shift`; requires ``a < b``.
    shift : float or array_like
        Pulse centre.
    method : {'antiderivative', 'quad'}
        'antiderivative' differences the pulse's running integral (closed
        form for rectangular/triangular, spectral table for RRC).  'quad'
        runs adaptive Gauss-Kronrod quadrature on the support-clipped
        range at absolute tolerance 1e-12.

    Raises
    ------
    InvalidInterval
        If any ``a >= b``.
    """
    a, b, shift = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, shift)))
    if np.any(a >= b):
        raise InvalidInterval("integration interval must satisfy a < b")
    if method == "antiderivative":
        out = pulse.antiderivative(b - shift) - pulse.antiderivative(a - shift)
    elif method == "quad":
        out = np.vectorize(lambda x, y, z: _quad_integral(pulse, x, y, z),
                           otypes=[float])(a, b, shift)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[()] if out.ndim == 0 else out


def integrated_pulse_dshift(pulse: PulseShape, a, b, shift=0.0):
    """d/dshift of :func:`integrated_pulse`, i.e. ``p(a - shift) - p(b - shift)``."""
    a, b, shift = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, shift)))
    if np.any(a >= b):
        raise InvalidInterval("integration interval must satisfy a < b")
    out = pulse.eval(a - shift) - pulse.eval(b - shift)
    return out[()] if out.ndim == 0 else out


def pulse_matrix(times, centers, pulse: PulseShape):
    """
    Matrix of interval integrals ``int_{t_{k-1}}^{t_k} p(t - c_l) dt``.

    `centers` may carry leading batch dimensions (e.g. one row per timing
    hypothesis); the result then has shape ``batch + (K, L)``.
    """
    times = np.asarray(times, dtype=float)
    centers = np.asarray(centers, dtype=float)
    F = pulse.antiderivative(times[:, None] - centers[..., None, :])
    return np.diff(F, axis=-2)


def pulse_matrix_dshift(times, centers, pulse: PulseShape):
    """Derivative of :func:`pulse_matrix` with respect to a common shift of all centres."""
    times = np.asarray(times, dtype=float)
    centers = np.asarray(centers, dtype=float)
    p = pulse.eval(times[:, None] - centers[..., None, :])
    return -np.diff(p, axis=-2)


def observation_vector(times, params):
    """``y_k = kappa*delta - b (t_k - t_{k-1})``."""
    return params.threshold - params.bias * np.diff(times)


@dataclass(frozen=True, eq=False)
class LikelihoodMatrices:
    y: np.ndarray
    P: np.ndarray
    G: np.ndarray
    weights: np.ndarray
    tau: float

    def residual(self, pilots, data):
        pilots = np.asarray(pilots, dtype=float)
        data = np.asarray(data, dtype=float)
        if pilots.shape != (self.P.shape[1],) or data.shape != (self.G.shape[1],):
            raise DimensionMismatch(
                f"expected {self.P.shape[1]} pilots and {self.G.shape[1]} data symbols")
        return self.y - self.P @ pilots - self.G @ data


def build_matrices(times, pilot_length: int, data_length: int, tau: float,
                   pulse: PulseShape, params) -> LikelihoodMatrices:
    """Assemble (y, P, G, T) for the timing hypothesis `tau`."""
    times = check_firing_times(times)
    T = pulse.symbol_period
    centers = np.arange(pilot_length + data_length) * T + tau
    M = pulse_matrix(times, centers, pulse)
    return LikelihoodMatrices(
        y=observation_vector(times, params),
        P=M[:, :pilot_length],
        G=M[:, pilot_length:],
        weights=1.0 / np.diff(times),
        tau=float(tau),
    )


def log_likelihood(matrices: LikelihoodMatrices, pilots, data) -> float:
    """``-|| T^{1/2} (y - P s_p - G s_d) ||^2`` with the additive constant set to zero."""
    e = matrices.residual(pilots, data)
    return -float(np.dot(matrices.weights, e * e))

