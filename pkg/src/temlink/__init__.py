"""
temlink: pulse-shaped PAM over an integrate-and-fire time-encoding link.

Modules
-------
waveform    constellations, pulse shapes, transmitted signal
if_tem      integrate-and-fire encoder and firing records
likelihood  interval observations and pulse-integral matrices
timing      ML symbol-timing recovery from pilot firings
detect      zero-forcing, brute-force ML and spike-count detectors
harness     seeded Monte Carlo trials and sweeps
"""

from .errors import *  # noqa: F401,F403
from .waveform import Constellation, Frame, PulseShape, TxSignal, pam_constellation, \
    rrc_pulse, rectangular_pulse, triangular_pulse, make_pulse, random_frame
from .if_tem import FiringRecord, NoiseModel, TemParams, encode, split_firing_times
from .likelihood import build_matrices, integrated_pulse, pulse_matrix
from .timing import NewtonConfig, TimingEstimate, estimate_tau_ml, timing_objective, \
    timing_objective_derivative
from .detect import brute_force_ml, build_detection_system, hard_decision, zf_detect
from .config import ExperimentConfig, load_config, parse_config
from .harness import run_sweep, run_trial, run_trials

__version__ = "0.1.0"
