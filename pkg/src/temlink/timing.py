"""
Maximum-likelihood symbol timing recovery from pilot firing times.

The timing objective is the interval-weighted sum of squared t-transform
residuals over the pilot window,

    J(tau) = sum_k (y_k - sum_l s_l P_kl(tau))^2 / (2 (t_k - t_{k-1})),

which is non-convex in tau.  :func:`estimate_tau_ml` runs Newton's method on
dJ/dtau = 0 from ``N_guess`` evenly spaced starts in [-T/2, T/2] and keeps the
stationary point with the smallest objective.  The derivative uses the same
interval weights ``t_k - t_{k-1}`` as the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPilotSpikes, InvalidArgument, InvalidFiringRecord
from .likelihood import check_firing_times, observation_vector, pulse_matrix, \
    pulse_matrix_dshift
from .waveform import PulseShape

__all__ = ["NewtonConfig", "TimingEstimate", "timing_objective",
           "timing_objective_derivative", "estimate_tau_ml", "grid_search_tau"]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class NewtonConfig:
    """
    Settings for the multi-start Newton search.

    `step_tolerance` and `fd_step` are in units of the symbol period.
    """

    n_guess: int = 8
    max_iterations: int = 50
    step_tolerance: float = 1e-10
    damping: float = 1.0
    fd_step: float = 1e-6
    golden_iterations: int = 40

    def __post_init__(self):
        if self.n_guess < 2:
            raise InvalidArgument("n_guess must be at least 2")
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be positive")
        if not 0 < self.damping <= 1:
            raise InvalidArgument("damping must lie in (0, 1]")
        if not (self.step_tolerance > 0 and self.fd_step > 0):
            raise InvalidArgument("tolerances must be positive")

    def initial_guesses(self, symbol_period=1.0):
        ell = np.arange(self.n_guess)
        return (-0.5 + ell / (self.n_guess - 1)) * symbol_period


@dataclass(frozen=True, eq=False)
class TimingEstimate:
    tau_hat: float
    objective: float
    converged: bool
    starts_converged: int
    iterations_total: int
    candidates: np.ndarray
    candidate_objectives: np.ndarray


class _PilotProblem:
    # Precomputes everything in J(tau) that does not depend on tau.

    def __init__(self, times, pilots, pulse: PulseShape, params):
        try:
            times = check_firing_times(times)
        except InvalidFiringRecord:
            if np.ndim(times) == 1 and np.size(times) < 2:
                raise InsufficientPilotSpikes("need at least 2 pilot firing times") from None
            raise
        pilots = np.asarray(pilots, dtype=float)
        T = pulse.symbol_period
        base = np.arange(pilots.size) * T
        # pilots whose support never meets [t_0, t_K] for |tau| <= T/2 contribute exact zeros
        reach = pulse.half_support + T / 2
        used = (base - reach < times[-1]) & (base + reach > times[0])
        self.times = times
        self.pulse = pulse
        self.T = T
        self.pilots = pilots[used]
        self.base = base[used]
        self.y = observation_vector(times, params)
        self.dt = np.diff(times)

    def residual(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        P = pulse_matrix(self.times, self.base + tau[:, None], self.pulse)
        return self.y - P @ self.pilots

    def objective(self, tau):
        e = self.residual(tau)
        return 0.5 * np.sum(e * e / self.dt, axis=-1)

    def derivative(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        e = self.residual(tau)
        dP = pulse_matrix_dshift(self.times, self.base + tau[:, None], self.pulse)
        de = -(dP @ self.pilots)
        return np.sum(e * de / self.dt, axis=-1)

    def objective_chunked(self, tau, chunk=512):
        tau = np.asarray(tau, dtype=float)
        return np.concatenate([self.objective(tau[i:i + chunk])
                               for i in range(0, tau.size, chunk)])


def _scalar_or_array(value, like):
    return float(value[0]) if np.ndim(like) == 0 else value


def timing_objective(tau, pilot_times, pilots, pulse: PulseShape, params):
    """
    Weighted least-squares timing objective J(tau).

    `tau` may be a scalar or a 1-D array of hypotheses.
    """
    _check_range(tau, pulse.symbol_period)
    val = _PilotProblem(pilot_times, pilots, pulse, params).objective(tau)
    return _scalar_or_array(val, tau)


def timing_objective_derivative(tau, pilot_times, pilots, pulse: PulseShape, params):
    """Analytic dJ/dtau, built from the pulse values at the interval endpoints."""
    _check_range(tau, pulse.symbol_period)
    val = _PilotProblem(pilot_times, pilots, pulse, params).derivative(tau)
    return _scalar_or_array(val, tau)


def _check_range(tau, T):
    if np.any(np.abs(np.asarray(tau)) > T / 2 * (1 + 1e-12)):
        raise InvalidArgument("timing hypothesis must lie in [-T/2, T/2]")


def _golden_section(f, a, b, n_iter):
    """Vectorized golden-section minimization of `f` on the brackets [a, b]."""
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n_iter):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        # exactly one new point per bracket needs evaluating
        x = np.where(left, c_new, d_new)
        fx = f(x)
        fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
        c, d = c_new, d_new
    return np.where(fc <= fd, c, d)


def estimate_tau_ml(pilot_times, pilots, pulse: PulseShape, params,
                    config: NewtonConfig | None = None) -> TimingEstimate:
    """
    ML timing offset by multi-start Newton root finding on dJ/dtau.

    Each start iterates damped Newton steps, with the second derivative taken
    as a central difference of the analytic first derivative.  Iterates are
    clamped to [-T/2, T/2] and the damping is halved for the step that
    follows a clamp.  A start that leaves the range twice, whose derivative
    magnitude grows tenfold, or that exhausts its iterations is finished by
    golden-section search on J over the neighbourhood of its initial guess.  The returned estimate is the
    candidate with the smallest J; objective ties (within 1e-12) go to the
    smaller |tau|.
    """
    config = config or NewtonConfig()
    prob = _PilotProblem(pilot_times, pilots, pulse, params)
    T = prob.T
    half = T / 2
    tol = config.step_tolerance * T
    h = config.fd_step * T

    start = config.initial_guesses(T)
    n = start.size
    tau = start.copy()
    damping = np.full(n, float(config.damping))
    exits = np.zeros(n, dtype=int)
    iters = np.zeros(n, dtype=int)
    converged = np.zeros(n, dtype=bool)
    g_init = np.abs(prob.derivative(tau))
    active = np.ones(n, dtype=bool)

    for _ in range(config.max_iterations):
        if not active.any():
            break
        ia = np.flatnonzero(active)
        ta = tau[ia]
        g3 = prob.derivative(np.concatenate([ta, np.minimum(ta + h, half),
                                             np.maximum(ta - h, -half)]))
        g, gp, gm = np.split(g3, 3)
        width = np.minimum(ta + h, half) - np.maximum(ta - h, -half)
        curv = (gp - gm) / width
        iters[ia] += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            new = ta - damping[ia] * g / curv
        bad = ~np.isfinite(new) | (np.abs(g) > 10 * g_init[ia]) & (g_init[ia] > 0)
        out = np.abs(new) > half
        new = np.clip(np.where(np.isfinite(new), new, ta), -half, half)
        exits[ia] += out
        # halved for the step after an overshoot, restored once back inside
        damping[ia] = np.where(out, 0.5 * damping[ia], config.damping)
        bad |= exits[ia] >= 2
        done = ~out & ~bad & (np.abs(new - ta) < tol)
        tau[ia] = new
        converged[ia] = done
        active[ia] = ~(done | bad)

    fallback = np.flatnonzero(~converged)
    if fallback.size:
        spacing = T / (n - 1)
        a = np.maximum(start[fallback] - spacing, -half)
        b = np.minimum(start[fallback] + spacing, half)
        tau[fallback] = _golden_section(prob.objective, a, b, config.golden_iterations)

    obj = prob.objective(tau)
    near = obj <= obj.min() + 1e-12
    best = np.flatnonzero(near)[np.argmin(np.abs(tau[near]))]
    return TimingEstimate(
        tau_hat=float(tau[best]),
        objective=float(obj[best]),
        converged=bool(converged[best]),
        starts_converged=int(converged.sum()),
        iterations_total=int(iters.sum()),
        candidates=tau,
        candidate_objectives=obj,
    )


def grid_search_tau(pilot_times, pilots, pulse: PulseShape, params, n_points=10_000):
    """Brute-force minimizer of J over an evenly spaced grid on [-T/2, T/2]."""
    prob = _PilotProblem(pilot_times, pilots, pulse, params)
    grid = np.linspace(-prob.T / 2, prob.T / 2, n_points)
    obj = prob.objective_chunked(grid)
    return grid, obj
