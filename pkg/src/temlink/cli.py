"""
Command line interface.

    temlink simulate --config c.json [--seed S]
    temlink sweep    --config c.json --axis snr --out r.csv [--values ...]
    temlink encode   --config c.json --out rec.txt [--frame-out frame.json]
    temlink decode   --config c.json --record rec.txt [--detector zf]
    temlink selftest

Exit status: 0 on success, 1 on usage or configuration errors, 2 on runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import load_config
from .detect import brute_force_ml, build_detection_system, hard_decision, \
    spike_count_detect, zf_detect
from .errors import ConfigError, TemlinkError
from .harness import _Link, _draw, format_csv, run_sweep, run_trial, trial_seed
from .if_tem import NoiseModel, encode, read_firing_record, split_firing_times, \
    write_firing_record
from .timing import estimate_tau_ml
from .waveform import TxSignal

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _parser():
    p = _Parser(prog="temlink", description="IF-TEM link simulator and receiver")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one trial and print its result")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="trial seed (default: config seed)")

    s = sub.add_parser("sweep", help="Monte Carlo sweep, written as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", choices=["snr", "effective_pilot_length", "n_guess"])
    s.add_argument("--values", type=float, nargs="+")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int, help="override the config base seed")
    s.add_argument("--out", required=True)
    s.add_argument("--quiet", action="store_true")

    s = sub.add_parser("encode", help="synthesize and encode one frame")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="firing-record file")
    s.add_argument("--frame-out", help="JSON file receiving the true symbols and offset")

    s = sub.add_parser("decode", help="recover timing and data from a firing record")
    s.add_argument("--config", required=True)
    s.add_argument("--record", required=True)
    s.add_argument("--detector", choices=["zf", "ml_bruteforce", "spike_count"], default="zf")

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return p


def _simulate(args):
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    print(json.dumps(run_trial(config, seed).to_dict(), indent=2))
    return EXIT_OK


def _sweep(args):
    config = load_config(args.config)
    axis = args.axis or (config.sweep.axis if config.sweep else None)
    values = args.values
    if values is None and config.sweep is not None:
        values = config.sweep.values
    if axis is None or values is None:
        raise ConfigError("sweep needs --axis/--values or a 'sweep' config section")

    def progress(row):
        if not args.quiet:
            print(f"{axis}={row.sweep_value:g}: {row.trials} trials, "
                  f"{row.failures} failed, mse={row.timing_mse:.4g}, ser={row.ser}",
                  file=sys.stderr)

    rows = run_sweep(config, axis, values, trials=args.trials, base_seed=args.seed,
                     progress=progress)
    with open(args.out, "w", newline="") as fh:
        fh.write(format_csv(rows))
    return EXIT_OK


def _encode(args):
    config = load_config(args.config)
    link = _Link(config)
    seed = trial_seed(config.seed if args.seed is None else args.seed, 0)
    frame, tau, noise_seed = _draw(link, seed)
    noise = NoiseModel.awgn(link.psd, noise_seed) if link.psd > 0 else NoiseModel()
    record = encode(TxSignal(frame, link.pulse, tau), link.params, noise)
    write_firing_record(args.out, record)
    if args.frame_out:
        with open(args.frame_out, "w") as fh:
            json.dump({"pilots": frame.pilots.tolist(), "data": frame.data.tolist(),
                       "timing_offset": tau, "seed": seed}, fh, indent=2)
    return EXIT_OK


def _decode(args):
    config = load_config(args.config)
    link = _Link(config)
    record = read_firing_record(args.record)
    params = record.params
    pilot_t, data_t = split_firing_times(record, link.L_p, link.L_eff, link.L_d, link.T)
    est = estimate_tau_ml(pilot_t, link.pilots, link.pulse, params, link.newton)
    if args.detector == "spike_count":
        from .detect import calibrate_spike_counts
        cal = calibrate_spike_counts(link.constellation, link.pulse, params)
        symbols = spike_count_detect(record, est.tau_hat, cal, link.L_p, link.L_d,
                                     link.T).decided
    else:
        system = build_detection_system(data_t, link.pilots, est.tau_hat, link.pulse,
                                        params, link.L_d)
        if args.detector == "zf":
            symbols = hard_decision(zf_detect(system), link.constellation)
        else:
            symbols = brute_force_ml(system, link.constellation)
    print(json.dumps({"tau_hat": est.tau_hat, "detector": args.detector,
                      "symbols": np.asarray(symbols).tolist()}))
    return EXIT_OK


def _selftest(args):
    from .selftest import run_selftest
    return EXIT_OK if run_selftest() else EXIT_RUNTIME


_COMMANDS = {"simulate": _simulate, "sweep": _sweep, "encode": _encode,
             "decode": _decode, "selftest": _selftest}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TemlinkError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
