"""
Data detection from data-region firing times.

- build_detection_system - (y_d, G_bar, T_d) with known-pilot ISI removed.
- zf_detect              - Interval-weighted zero-forcing pre-estimate.
- hard_decision          - Nearest-point slicing onto an M-PAM alphabet.
- brute_force_ml         - Exhaustive minimizer of the weighted residual (small L_d only).
- spike_count_detect     - Baseline that only uses firing counts per symbol period.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, RankDeficiency, SearchSpaceTooLarge
from .if_tem import FiringRecord, TemParams, encode
from .likelihood import check_firing_times, observation_vector, pulse_matrix
from .waveform import Constellation, PulseShape, PulseTrain

__all__ = ["DetectionSystem", "SymbolEstimate", "build_detection_system",
           "zf_detect", "hard_decision", "brute_force_ml", "weighted_objective",
           "SpikeCountCalibration", "calibrate_spike_counts", "spike_counts",
           "spike_count_detect"]

MAX_CONDITION = 1e12
MAX_SEARCH = 2 ** 20


@dataclass(frozen=True, eq=False)
class DetectionSystem:
    y: np.ndarray
    G: np.ndarray
    weights: np.ndarray
    tau: float

    @property
    def shape(self):
        return self.G.shape


@dataclass(frozen=True, eq=False)
class SymbolEstimate:
    pre_estimate: np.ndarray
    decided: np.ndarray
    method: str


def build_detection_system(data_times, pilots, tau_hat: float, pulse: PulseShape,
                           params: TemParams, data_length: int,
                           memory: int | None = None) -> DetectionSystem:
    """
    Detection system for the data symbols at timing estimate `tau_hat`.

    The contribution of the known pilots is subtracted from y_d.  The sum runs
    over the last ``L_f + 1`` pilots; it is widened to earlier pilots only if
    the anchor interval is long enough to reach their support (those terms are
    zero otherwise).
    """
    times = check_firing_times(data_times)
    pilots = np.asarray(pilots, dtype=float)
    L_p = pilots.size
    L_f = pulse.memory if memory is None else memory
    if L_f >= L_p:
        raise InvalidArgument(f"pulse memory {L_f} must be below the pilot length {L_p}")
    T = pulse.symbol_period
    first = max(L_p - 1 - L_f, 0)
    # earliest pilot whose support still extends past the anchor firing
    reach = int(np.floor((times[0] - tau_hat - pulse.half_support) / T)) + 1
    first = max(min(first, reach), 0)

    pilot_centers = np.arange(first, L_p) * T + tau_hat
    data_centers = (L_p + np.arange(data_length)) * T + tau_hat
    M = pulse_matrix(times, np.concatenate([pilot_centers, data_centers]), pulse)
    n_pil = L_p - first
    y = observation_vector(times, params) - M[:, :n_pil] @ pilots[first:]
    return DetectionSystem(y=y, G=M[:, n_pil:], weights=1.0 / np.diff(times),
                           tau=float(tau_hat))


def zf_detect(system: DetectionSystem) -> np.ndarray:
    """
    Weighted zero-forcing pre-estimate ``(G' T G)^{-1} G' T y``.

    Solved as the least-squares problem ``min |T^{1/2}(y - G s)|`` through an
    SVD of ``T^{1/2} G``; no normal equations are formed.

    Raises
    ------
    RankDeficiency
        Fewer intervals than symbols, or condition number above 1e12.
    """
    K, L = system.G.shape
    if K < L:
        raise RankDeficiency(f"{K} firing intervals for {L} data symbols")
    sw = np.sqrt(system.weights)
    A = system.G * sw[:, None]
    sol, _, rank, sv = np.linalg.lstsq(A, system.y * sw, rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if rank < L or cond > MAX_CONDITION:
        raise RankDeficiency("weighted ZF system is ill-conditioned", cond)
    return sol


def hard_decision(pre_estimate, constellation: Constellation) -> np.ndarray:
    """Map each entry to the nearest point; exact midpoints go to the smaller point."""
    x = np.asarray(pre_estimate, dtype=float)
    pts = constellation.points
    mids = 0.5 * (pts[:-1] + pts[1:])
    return pts[np.searchsorted(mids, x, side="left")]


def weighted_objective(system: DetectionSystem, symbols) -> float:
    e = system.y - system.G @ np.asarray(symbols, dtype=float)
    return float(np.dot(system.weights, e * e))


def brute_force_ml(system: DetectionSystem, constellation: Constellation,
                   chunk: int = 16384) -> np.ndarray:
    """
    Exhaustive ML sequence detection over the full alphabet A^{L_d}.

    Candidates are scanned in lexicographic order of constellation index, so
    ties resolve to the lexicographically smallest sequence.
    """
    L = system.G.shape[1]
    M = constellation.order
    if float(M) ** L > MAX_SEARCH:
        raise SearchSpaceTooLarge(f"{M}^{L} candidates exceed the limit of {MAX_SEARCH}")
    pts = constellation.points
    best_val, best_seq = np.inf, None
    combos = itertools.product(range(M), repeat=L)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        S = pts[block.reshape(-1, L)]
        E = system.y[None, :] - S @ system.G.T
        vals = (E * E) @ system.weights
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_seq = vals[i], S[i]
    return best_seq.copy()


@dataclass(frozen=True, eq=False)
class SpikeCountCalibration:
    points: np.ndarray
    counts: np.ndarray

    def decide(self, counts) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        # points are increasing in amplitude and so are calibrated counts
        d = np.abs(counts[:, None] - self.counts[None, :])
        return self.points[np.argmin(d, axis=1)]


@functools.lru_cache(maxsize=64)
def _calibrate(points, pulse, params, n_phases):
    T = pulse.symbol_period
    counts = []
    for s in points:
        train = PulseTrain([s], [0.0], pulse)
        n = [len(encode(train, params, window=(-0.5 * T, 0.5 * T), initial_level=u))
             for u in np.arange(n_phases) / n_phases]
        counts.append(np.mean(n))
    return np.array(counts)


def calibrate_spike_counts(constellation: Constellation, pulse: PulseShape,
                           params: TemParams, n_phases: int = 16) -> SpikeCountCalibration:
    """
    Expected firing count per symbol period for each isolated constellation point.

    Each point is encoded alone and without noise; its count inside
    [-T/2, T/2) is averaged over `n_phases` evenly spaced initial integrator
    states, since the receiver has no control over the integrator phase.
    """
    counts = _calibrate(tuple(constellation.points), pulse, params, n_phases)
    return SpikeCountCalibration(constellation.points.copy(), counts)


def spike_counts(record_or_times, tau_hat, pilot_length, data_length, symbol_period=1.0):
    """Firing counts in ``[(L_p+l-1/2)T + tau, (L_p+l+1/2)T + tau)`` for each data symbol."""
    t = getattr(record_or_times, "times", record_or_times)
    T = symbol_period
    edges = (pilot_length + np.arange(data_length + 1) - 0.5) * T + tau_hat
    return np.diff(np.searchsorted(t, edges, side="left"))


def spike_count_detect(record: FiringRecord, tau_hat: float, calibration: SpikeCountCalibration,
                       pilot_length: int, data_length: int,
                       symbol_period: float = 1.0) -> SymbolEstimate:
    n = spike_counts(record, tau_hat, pilot_length, data_length, symbol_period)
    return SymbolEstimate(pre_estimate=n.astype(float), decided=calibration.decide(n),
                          method="spike_count")
