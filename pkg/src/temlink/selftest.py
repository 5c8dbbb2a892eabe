"""
Fast invariant checks that run without a test framework (``temlink selftest``).
"""

from __future__ import annotations

import numpy as np

from .detect import build_detection_system, hard_decision, zf_detect
from .if_tem import TemParams, encode, split_firing_times, t_transform_residuals
from .likelihood import build_matrices, integrated_pulse
from .timing import estimate_tau_ml, timing_objective, timing_objective_derivative
from .waveform import TxSignal, effective_pilot_length, pam_constellation, random_frame, \
    rrc_pulse


def _checks():
    rng = np.random.default_rng(2024)
    const = pam_constellation(4)
    pulse = rrc_pulse(0.5, memory=4)
    params = TemParams(kappa=1.0, delta=1.0, bias=2.5)
    L_p, L_d = 12, 16
    L_eff = effective_pilot_length(L_p, pulse.memory)
    frame = random_frame(rng, const, L_p, L_d)
    tau = 0.23
    record = encode(TxSignal(frame, pulse, tau), params)

    yield "t-transform holds on encoder output", \
        np.max(np.abs(t_transform_residuals(record, TxSignal(frame, pulse, tau), params))) < 1e-9

    a, b, s = -0.7, 1.9, 0.3
    yield "interval integral matches quadrature", \
        abs(integrated_pulse(pulse, a, b, s) - integrated_pulse(pulse, a, b, s, method="quad")) < 1e-9

    times = record.times
    m = build_matrices(times, L_p, L_d, tau, pulse, params)
    yield "noiseless residual vanishes at the true offset", \
        np.max(np.abs(m.residual(frame.pilots, frame.data))) < 1e-7

    pilot_t, data_t = split_firing_times(record, L_p, L_eff, L_d, 1.0)
    h = 1e-6
    f = lambda x: timing_objective(x, pilot_t, frame.pilots, pulse, params)
    fd = (f(0.1 + h) - f(0.1 - h)) / (2 * h)
    an = timing_objective_derivative(0.1, pilot_t, frame.pilots, pulse, params)
    yield "timing derivative matches finite differences", abs(fd - an) <= 1e-5 * max(abs(an), 1e-8)

    est = estimate_tau_ml(pilot_t, frame.pilots, pulse, params)
    yield "noiseless timing recovery is exact", abs(est.tau_hat - tau) < 1e-6

    system = build_detection_system(data_t, frame.pilots, est.tau_hat, pulse, params, L_d)
    yield "noiseless zero-forcing recovers the data", \
        np.array_equal(hard_decision(zf_detect(system), const), frame.data)


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, passed in _checks():
        passed = bool(passed)
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
