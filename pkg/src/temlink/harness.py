"""
Monte Carlo engine: seeded end-to-end trials and parameter sweeps.

Trial ``i`` of a run uses the seed ``(base_seed + i) mod 2**64``.  That seed is
split with :class:`numpy.random.SeedSequence` into three child streams (data
symbols, timing offset, channel noise), so a trial's outcome depends only on
(config, seed), not on worker scheduling.  Every sweep point reuses the same
trial seeds, which gives common random numbers across the sweep.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import ExperimentConfig
from .detect import brute_force_ml, build_detection_system, calibrate_spike_counts, \
    hard_decision, spike_count_detect, zf_detect
from .errors import BiasTooSmall, ConfigError, InsufficientDataAnchor, \
    InsufficientPilotSpikes, InvalidFiringRecord, RankDeficiency, SearchSpaceTooLarge, \
    TemlinkError
from .if_tem import NoiseModel, encode, split_firing_times
from .timing import estimate_tau_ml
from .waveform import Frame, TxSignal, effective_pilot_length

__all__ = ["TrialResult", "SweepRow", "CSV_HEADER", "run_trial", "run_trials",
           "run_sweep", "write_csv", "format_csv", "wilson_interval", "design_effect",
           "worker_count",
           "trial_seed", "trial_frame"]

CSV_HEADER = ["sweep_value", "trials", "failures", "timing_mse", "timing_mse_se",
              "ser_zf", "ser_zf_lo", "ser_zf_hi", "ser_ml", "ser_count",
              "ser_ml_lo", "ser_ml_hi", "ser_count_lo", "ser_count_hi"]

_FAILURES = [
    (BiasTooSmall, "bias_too_small"),
    (InsufficientPilotSpikes, "insufficient_pilot_spikes"),
    (InsufficientDataAnchor, "insufficient_data_anchor"),
    (RankDeficiency, "rank_deficient"),
    (SearchSpaceTooLarge, "search_space_too_large"),
    (InvalidFiringRecord, "invalid_firing_record"),
]


@dataclass
class TrialResult:
    seed: int
    tau_true: float
    tau_hat: float = math.nan
    timing_sq_error: float = math.nan
    symbol_errors: dict = field(default_factory=dict)
    ser: dict = field(default_factory=dict)
    n_firings: int = 0
    n_pilot_firings: int = 0
    n_data_firings: int = 0
    timing_converged: bool = False
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self):
        return asdict(self)


class _Link:
    # Everything a trial needs that depends on the config only.

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.constellation = config.build_constellation()
        self.pulse = config.build_pulse()
        self.params = config.build_tem()
        self.newton = config.build_newton()
        self.pilots = config.pilots()
        self.psd = config.noise_psd()
        self.T = config.frame.symbol_period
        self.L_p = config.frame.pilot_length
        self.L_d = config.frame.data_length
        self.L_eff = effective_pilot_length(self.L_p, self.pulse.memory)
        self.detectors = tuple(config.detectors)
        self._calibration = None

    @property
    def calibration(self):
        # built on first use so that encoder errors surface inside a trial
        if self._calibration is None:
            self._calibration = calibrate_spike_counts(self.constellation, self.pulse,
                                                       self.params)
        return self._calibration

    def __getstate__(self):
        return {"config": self.config}

    def __setstate__(self, state):
        self.__init__(state["config"])


def trial_seed(base_seed: int, index: int) -> int:
    return (int(base_seed) + int(index)) % 2 ** 64


def _streams(seed):
    data_ss, tau_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(data_ss), np.random.default_rng(tau_ss),
            int(noise_ss.generate_state(1, np.uint64)[0]))


def _draw(link: _Link, seed: int):
    data_rng, tau_rng, noise_seed = _streams(seed)
    data = data_rng.choice(link.constellation.points, size=link.L_d)
    tm = link.config.timing
    if tm.mode == "fixed":
        tau = tm.value * link.T
    else:
        tau = tau_rng.uniform(-tm.max_abs, tm.max_abs) * link.T
    frame = Frame(link.pilots, data, link.T, link.constellation)
    return frame, float(tau), noise_seed


def trial_frame(config: ExperimentConfig, seed: int):
    """The (frame, timing offset, noise seed) that :func:`run_trial` would use."""
    return _draw(_Link(config), seed)


def _run(link: _Link, seed: int) -> TrialResult:
    frame, tau, noise_seed = _draw(link, seed)
    res = TrialResult(seed=seed, tau_true=tau)
    noise = NoiseModel.awgn(link.psd, noise_seed) if link.psd > 0 else NoiseModel()
    try:
        signal = TxSignal(frame, link.pulse, tau)
        record = encode(signal, link.params, noise)
        res.n_firings = len(record)
        pilot_t, data_t = split_firing_times(record, link.L_p, link.L_eff, link.L_d, link.T)
        res.n_pilot_firings = pilot_t.size
        res.n_data_firings = data_t.size
        est = estimate_tau_ml(pilot_t, link.pilots, link.pulse, link.params, link.newton)
        res.tau_hat = est.tau_hat
        res.timing_sq_error = (est.tau_hat - tau) ** 2
        res.timing_converged = est.converged
        decisions = {}
        if "zf" in link.detectors or "ml_bruteforce" in link.detectors:
            system = build_detection_system(data_t, link.pilots, est.tau_hat, link.pulse,
                                            link.params, link.L_d)
            if "zf" in link.detectors:
                decisions["zf"] = hard_decision(zf_detect(system), link.constellation)
            if "ml_bruteforce" in link.detectors:
                decisions["ml_bruteforce"] = brute_force_ml(system, link.constellation)
        if "spike_count" in link.detectors:
            decisions["spike_count"] = spike_count_detect(
                record, est.tau_hat, link.calibration, link.L_p, link.L_d, link.T).decided
    except TemlinkError as exc:
        res.failure = next((name for cls, name in _FAILURES if isinstance(exc, cls)), "error")
        return res
    for name, dec in decisions.items():
        n_err = int(np.count_nonzero(dec != frame.data))
        res.symbol_errors[name] = n_err
        res.ser[name] = n_err / link.L_d
    return res


def run_trial(config: ExperimentConfig, seed: int) -> TrialResult:
    """
    One end-to-end trial: synthesize, encode, recover timing, detect.

    Module errors are recorded in ``failure`` instead of being raised.
    """
    return _run(_Link(config), seed)


def worker_count() -> int:
    env = os.environ.get("TEMLINK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _run_chunk(args):
    link, seeds = args
    return [_run(link, s) for s in seeds]


def _execute(link, seeds, workers=None):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(seeds) < 64:
        return [_run(link, s) for s in seeds]
    n_chunks = workers * 4
    chunks = [seeds[i::n_chunks] for i in range(n_chunks)]
    out = [None] * len(seeds)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, part in enumerate(pool.map(_run_chunk, [(link, c) for c in chunks])):
            out[i::n_chunks] = part
    return out


def run_trials(config: ExperimentConfig, trials=None, base_seed=None, workers=None):
    trials = config.trials if trials is None else trials
    base_seed = config.seed if base_seed is None else base_seed
    link = _Link(config)
    return _execute(link, [trial_seed(base_seed, i) for i in range(trials)], workers)


def wilson_interval(errors: float, n: float, z: float = 1.959963984540054):
    """
    Wilson score interval for a binomial proportion (95% by default).

    `errors` and `n` may be fractional effective counts.
    """
    if n <= 0:
        return math.nan, math.nan
    p = errors / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def design_effect(errors_per_trial, symbols_per_trial: int) -> float:
    """
    Variance inflation of the pooled SER caused by errors clustering in trials.

    Symbols of one trial share a timing estimate and a noise path, so their
    errors are positively correlated.  The ratio of the between-trial
    variance of the per-trial SER to its binomial value (Kish's design
    effect, floored at 1) converts the symbol count into an effective
    sample size for the Wilson interval.
    """
    e = np.asarray(errors_per_trial, dtype=float) / symbols_per_trial
    if e.size < 2:
        return 1.0
    p = e.mean()
    if p <= 0 or p >= 1:
        return 1.0
    return max(1.0, float(np.var(e, ddof=1)) / (p * (1 - p) / symbols_per_trial))


@dataclass
class SweepRow:
    sweep_value: float
    trials: int
    failures: int
    timing_mse: float
    timing_mse_se: float
    ser: dict
    ser_ci: dict
    failure_counts: dict

    def csv_fields(self):
        def ser(name):
            return self.ser.get(name)

        def ci(name, i):
            return self.ser_ci[name][i] if name in self.ser_ci else None

        return [self.sweep_value, self.trials, self.failures, self.timing_mse,
                self.timing_mse_se, ser("zf"), ci("zf", 0), ci("zf", 1),
                ser("ml_bruteforce"), ser("spike_count"),
                ci("ml_bruteforce", 0), ci("ml_bruteforce", 1),
                ci("spike_count", 0), ci("spike_count", 1)]


def aggregate(value, results, detectors, data_length) -> SweepRow:
    ok = [r for r in results if r.ok]
    failure_counts = {}
    for r in results:
        if not r.ok:
            failure_counts[r.failure] = failure_counts.get(r.failure, 0) + 1
    sq = np.array([r.timing_sq_error for r in ok])
    mse = float(np.mean(sq)) if sq.size else math.nan
    se = float(np.std(sq, ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan
    ser, ser_ci = {}, {}
    n_sym = len(ok) * data_length
    for name in detectors:
        per_trial = np.array([r.symbol_errors[name] for r in ok], dtype=float)
        errors = float(per_trial.sum())
        ser[name] = errors / n_sym if n_sym else math.nan
        deff = design_effect(per_trial, data_length)
        ser_ci[name] = wilson_interval(errors / deff, n_sym / deff)
    return SweepRow(value, len(results), len(results) - len(ok), mse, se, ser, ser_ci,
                    failure_counts)


def _variant(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "snr":
        return config.updated(noise={"snr_db": float(value), "psd": None})
    if axis == "effective_pilot_length":
        if config.frame.pilots is not None:
            raise ConfigError("an effective_pilot_length sweep needs generated pilots")
        return config.updated(frame={"pilot_length": int(value) + config.pulse.memory})
    if axis == "n_guess":
        return config.updated(estimator={"n_guess": int(value)})
    raise ConfigError(f"unknown sweep axis {axis!r}")


def run_sweep(config: ExperimentConfig, axis=None, values=None, trials=None,
              base_seed=None, workers=None, progress=None):
    """
    Run `trials` trials at every sweep point and aggregate them.

    Returns one :class:`SweepRow` per value: mean squared timing error with
    its standard error, per-detector SER with a Wilson 95% interval (on the
    design-effect-adjusted sample size), and the failure count.  Failed trials are excluded from the averages.
    """
    if axis is None or values is None:
        if config.sweep is None:
            raise ConfigError("no sweep axis/values given and config has no 'sweep' section")
        axis = axis or config.sweep.axis
        values = config.sweep.values if values is None else values
    trials = config.trials if trials is None else trials
    if trials == 0:
        return []
    rows = []
    for value in values:
        variant = _variant(config, axis, value)
        results = run_trials(variant, trials, base_seed, workers)
        rows.append(aggregate(float(value), results, variant.detectors,
                              variant.frame.data_length))
        if progress is not None:
            progress(rows[-1])
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_fmt(v) for v in row.csv_fields()])
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(rows))
