"""
Integrate-and-fire time encoding machine.

The encoder integrates ``b + r(t)`` (plus optional white noise) from zero and
emits a firing time whenever the integral reaches the threshold ``kappa*delta``,
after which the integrator is reset to zero.  In the noiseless case every pair
of consecutive firing times satisfies the t-transform

    int_{t_{k-1}}^{t_k} (b + r(t)) dt = kappa * delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BiasTooSmall, InsufficientDataAnchor, InsufficientPilotSpikes, \
    InvalidArgument, InvalidFiringRecord

__all__ = ["TemParams", "NoiseModel", "FiringRecord", "ConstantSignal", "encode",
           "split_firing_times", "t_transform_residuals",
           "write_firing_record", "read_firing_record"]


@dataclass(frozen=True)
class TemParams:
    """
    Encoder parameters.

    `tolerance` and `dt` default to ``1e-12*T`` and ``T/1000`` of the encoded
    signal when left as None.
    """

    kappa: float = 1.0
    delta: float = 1.0
    bias: float = 1.0
    tolerance: float | None = None
    dt: float | None = None

    def __post_init__(self):
        if not self.kappa * self.delta > 0:
            raise InvalidArgument("threshold kappa*delta must be positive")
        if not self.bias > 0:
            raise InvalidArgument("bias must be positive")
        if self.tolerance is not None and not self.tolerance > 0:
            raise InvalidArgument("tolerance must be positive")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgument("dt must be positive")

    @property
    def threshold(self) -> float:
        return self.kappa * self.delta

    def firing_tolerance(self, symbol_period=1.0) -> float:
        return self.tolerance if self.tolerance is not None else 1e-12 * symbol_period

    def step(self, symbol_period=1.0) -> float:
        return self.dt if self.dt is not None else symbol_period / 1000


@dataclass(frozen=True)
class NoiseModel:
    """White Gaussian noise added at the integrator input, PSD `psd`."""

    kind: str = "none"
    psd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "awgn"):
            raise InvalidArgument(f"unknown noise kind {self.kind!r}")
        if not self.psd >= 0:
            raise InvalidArgument("noise PSD must be nonnegative")

    @classmethod
    def awgn(cls, psd, seed=0):
        return cls("awgn", float(psd), int(seed))

    @property
    def active(self) -> bool:
        return self.kind == "awgn" and self.psd > 0


@dataclass(frozen=True, eq=False)
class FiringRecord:
    times: np.ndarray
    window: tuple
    params: TemParams = field(default_factory=TemParams)

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        start, end = map(float, self.window)
        object.__setattr__(self, "window", (start, end))
        if times.ndim != 1:
            raise InvalidFiringRecord("firing times must be a vector")
        if times.size and (np.any(np.diff(times) <= 0) or times[0] < start or times[-1] >= end):
            raise InvalidFiringRecord("firing times must be strictly increasing and inside the window")

    def __len__(self):
        return self.times.size

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)


class ConstantSignal:
    """r(t) = level; handy for calibration and closed-form checks."""

    def __init__(self, level=0.0, symbol_period=1.0):
        self.level = float(level)
        self.symbol_period = symbol_period

    def evaluate(self, t):
        return np.full(np.shape(t), self.level)

    __call__ = evaluate

    def cumulative(self, t):
        return self.level * np.asarray(t, dtype=float)


def encode(signal, params: TemParams, noise: NoiseModel | None = None, window=None,
           initial_level: float = 0.0) -> FiringRecord:
    """
    IF-TEM encoding of `signal`.

    Parameters
    ----------
    signal : TxSignal, PulseTrain or ConstantSignal
        Anything with vectorized ``evaluate(t)`` and ``cumulative(t)``.
    params : TemParams
        Threshold, bias and numerical settings.
    noise : NoiseModel, optional
        White noise at the integrator; realized as independent Gaussian
        increments of variance ``psd*dt`` on the integration grid.
    window : (float, float), optional
        Observation interval [start, end).  Defaults to the signal's frame
        window when it has one.
    initial_level : float
        Integrator state at the window start as a fraction of the threshold.

    Returns
    -------
    FiringRecord
        All firing times in the window.

    Raises
    ------
    BiasTooSmall
        If ``b <= max|r|`` on the integration grid.
    """
    if noise is None:
        noise = NoiseModel()
    T = getattr(signal, "symbol_period", 1.0)
    if window is None:
        window = signal.default_window()
    start, end = map(float, window)
    if not end > start:
        raise InvalidArgument("empty encoding window")
    if not 0 <= initial_level < 1:
        raise InvalidArgument("initial_level must lie in [0, 1)")
    dt = params.step(T)
    tol = params.firing_tolerance(T)
    b, thr = params.bias, params.threshold

    n = max(int(math.ceil((end - start) / dt)), 1)
    grid = start + dt * np.arange(n + 1)
    if hasattr(signal, "on_grid"):
        r_grid, R_grid = signal.on_grid(start, dt, n + 1)
    else:
        r_grid, R_grid = signal.evaluate(grid), signal.cumulative(grid)
    # the last step may be shorter than dt
    grid[-1] = end
    R_grid[-1] = signal.cumulative(end)
    r_grid[-1] = signal.evaluate(end)
    peak = float(np.max(np.abs(r_grid)))
    if b <= peak:
        raise BiasTooSmall(b, peak)

    r0 = float(signal.cumulative(start))
    offset = initial_level * thr - r0
    phi = b * (grid - start) + R_grid + offset
    w = slope_w = None
    if noise.active:
        rng = np.random.default_rng(noise.seed)
        steps = np.diff(grid)
        inc = rng.standard_normal(n) * np.sqrt(noise.psd * steps)
        w = np.concatenate([[0.0], np.cumsum(inc)])
        phi = phi + w
        slope_w = inc / steps

    # level k is first reached at t_k; the running max locates the bracketing step
    running = np.maximum.accumulate(phi)
    levels = thr * np.arange(1, int(np.floor(running[-1] / thr)) + 1)
    idx = np.searchsorted(running, levels, side="left")
    keep = idx >= 1
    levels, idx = levels[keep], idx[keep]
    if levels.size == 0:
        return FiringRecord(np.empty(0), (start, end), params)

    lo, hi = grid[idx - 1], grid[idx]
    g0 = lo
    const = offset - levels
    sw = 0.0
    if w is not None:
        const = const + w[idx - 1]
        sw = slope_w[idx - 1]

    def resid(t):
        return b * (t - start) + signal.cumulative(t) + const + sw * (t - g0)

    f_lo, f_hi = phi[idx - 1] - levels, phi[idx] - levels
    # secant start, then Newton safeguarded by bisection inside the bracket
    t = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    active = np.ones(t.size, dtype=bool)
    for _ in range(100):
        f = resid(t)
        neg = f < 0
        lo = np.where(neg, t, lo)
        hi = np.where(neg, hi, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / (b + signal.evaluate(t) + sw)
        cand = t - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        small = np.abs(step) <= tol
        finished = small | (hi - lo <= tol) | (f == 0)
        nxt = np.where(finished & ~(small & ~bad), t, cand)
        t = np.where(active, nxt, t)
        active &= ~finished
        if not active.any():
            break
    times = t[t < end]
    # collapsed crossings (possible only under noise) must not produce duplicates
    if times.size > 1:
        times = times[np.concatenate([[True], np.diff(times) > 0])]
    return FiringRecord(times, (start, end), params)


def split_firing_times(record: FiringRecord, pilot_length: int, effective_length: int,
                       data_length: int, symbol_period: float = 1.0):
    """
    Partition firing times into the timing-recovery and data-detection sets.

    Pilot times are those in ``[-T/2, (L_eff - 1/2)T)``.  Data times are the
    last firing strictly before ``(L_p - 1/2)T`` (the anchor) followed by every
    firing in ``[(L_p - 1/2)T, (L_p + L_d - 1/2)T)``.
    """
    T = symbol_period
    t = record.times
    pilot = t[(t >= -0.5 * T) & (t < (effective_length - 0.5) * T)]
    if pilot.size < 2:
        raise InsufficientPilotSpikes(
            f"{pilot.size} firing(s) in the pilot window; need at least 2")
    data_start = (pilot_length - 0.5) * T
    data_end = (pilot_length + data_length - 0.5) * T
    before = t[t < data_start]
    if before.size == 0:
        raise InsufficientDataAnchor("no firing before the data window")
    inside = t[(t >= data_start) & (t < data_end)]
    return pilot, np.concatenate([before[-1:], inside])


def t_transform_residuals(record: FiringRecord, signal, params: TemParams | None = None):
    """kappa*delta - int_{t_{k-1}}^{t_k} (b + r) dt for each consecutive pair."""
    params = params or record.params
    t = record.times
    r = signal.cumulative(t)
    return params.threshold - (params.bias * np.diff(t) + np.diff(r))


def write_firing_record(path, record: FiringRecord):
    """
    Write the line-oriented record format::

        # window <start> <end> <kappa_delta> <b>
        <t_0>
        ...

    Values use 17 significant digits, which round-trips IEEE doubles exactly.
    """
    start, end = record.window
    lines = ["# window {:.17g} {:.17g} {:.17g} {:.17g}".format(
        start, end, record.params.threshold, record.params.bias)]
    lines += ["{:.17g}".format(x) for x in record.times]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_firing_record(path) -> FiringRecord:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[:2] != ["#", "window"]:
            raise InvalidFiringRecord(f"{path}: malformed header")
        start, end, kd, b = map(float, header[2:])
        times = [float(line) for line in fh if line.strip()]
    return FiringRecord(np.array(times), (start, end), TemParams(kappa=kd, delta=1.0, bias=b))
