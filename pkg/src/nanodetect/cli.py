"""Command-line surface for the detection toolkit.

Exit codes: 0 success, 2 bad input (files, formats, parameters), 3 numeric
failure (e.g. whitening a constant trace). Errors print a single
machine-parsable line to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import io as nio
from .bayes import default_table, posterior
from .conditioning import DetrendMethod, detrend, low_pass, whiten
from .exceptions import NumericError
from .hsmm import apply_bins, discretize, em_train, init_model, viterbi_decode
from .matched_filter import BoxcarFilterSpec, scan_trace, scan_trace_bank
from .pipeline import load_pipeline_config, run_pipeline, score_series
from .threshold import ThresholdPolicy, threshold_detect
from .trace import derive_wire_seeds, synthesize_trace
from .xcorr import ensemble_subtract, noise_only, pairwise_xcorr, xcorr

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3


def _out(args, name: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _resolve(args, path_opt, default_name: str) -> Path:
    if path_opt:
        p = Path(path_opt)
        if p.is_absolute():
            return p
        return _out(args, str(p))
    return _out(args, default_name)


def _header(args, command: str) -> str:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    return nio.provenance(command, params, getattr(args, "seed", None))


def _parse_range(text: str) -> tuple[int, int]:
    a, _, b = text.partition(":")
    return int(a), int(b)


def cmd_simulate(args) -> int:
    scenario = nio.load_scenario(args.scenario)
    wires = list(scenario.wires)
    if args.seed is not None:
        seeds = derive_wire_seeds(args.seed, len(wires))
        wires = [replace(w, noise=replace(w.noise, seed=s)) for w, s in zip(wires, seeds)]
    traces = [
        synthesize_trace(w.events, w.noise, scenario.duration, scenario.dt,
                         baseline=scenario.baseline)
        for w in wires
    ]
    path = _resolve(args, args.out, "simulated.csv")
    if len(traces) == 1:
        nio.write_trace_csv(path, traces[0], _header(args, "simulate"))
    else:
        nio.write_wires_csv(path, traces, _header(args, "simulate"))
    print(path)
    return EXIT_OK


def cmd_detrend(args) -> int:
    trace = nio.read_trace_csv(args.input)
    method = DetrendMethod(kind=args.method, degree=args.degree,
                           window_s=args.window, bin_width=args.bin_width)
    detrended, trend = detrend(trace, method)
    path = _resolve(args, args.out, "detrended.csv")
    nio.write_trace_csv(path, detrended, _header(args, "detrend"))
    if args.trend_out:
        nio.emit_plot_data(_resolve(args, args.trend_out, "trend.csv"),
                           [("trend", trend)], _header(args, "detrend"))
    print(path)
    return EXIT_OK


def cmd_whiten(args) -> int:
    trace = nio.read_trace_csv(args.input)
    path = _resolve(args, args.out, "whitened.csv")
    nio.write_trace_csv(path, whiten(trace), _header(args, "whiten"))
    print(path)
    return EXIT_OK


def cmd_lowpass(args) -> int:
    trace = nio.read_trace_csv(args.input)
    path = _resolve(args, args.out, "lowpassed.csv")
    nio.write_trace_csv(path, low_pass(trace, args.cutoff), _header(args, "lowpass"))
    print(path)
    return EXIT_OK


def cmd_matchfilter(args) -> int:
    trace = nio.read_trace_csv(args.input)
    widths = [max(1, int(round(w / trace.dt))) for w in args.width]
    if len(widths) == 1:
        spec = BoxcarFilterSpec(args.amp, widths[0], args.n)
        events = scan_trace(trace, spec, args.threshold)
    else:
        events = scan_trace_bank(trace, widths, args.amp, args.n, args.threshold)
    path = _resolve(args, args.out, "detections.csv")
    nio.write_detections_csv(path, events, _header(args, "matchfilter"))
    spec = BoxcarFilterSpec(args.amp, widths[0], args.n)
    nio.emit_plot_data(_resolve(args, args.plot_out, "scores.csv"),
                       [("score", score_series(trace, spec))],
                       _header(args, "matchfilter"), x_name="index")
    print(path)
    return EXIT_OK


def cmd_threshold(args) -> int:
    trace = nio.read_trace_csv(args.input)
    if args.policy == "fixed":
        if args.level is None:
            raise ValueError("--level is required for the fixed policy")
        policy = ThresholdPolicy.fixed(args.level, args.polarity)
    elif args.policy == "calibrated":
        if args.cal is None:
            raise ValueError("--cal START:STOP is required for the calibrated policy")
        policy = ThresholdPolicy.calibrated(args.k, _parse_range(args.cal), args.polarity)
    else:
        policy = ThresholdPolicy.adaptive(args.k, args.window, args.polarity)
    events = threshold_detect(trace, policy, args.cutoff, min_duration_s=args.min_duration)
    path = _resolve(args, args.out, "detections.csv")
    nio.write_detections_csv(path, events, _header(args, "threshold"))
    print(path)
    return EXIT_OK


def cmd_bayes(args) -> int:
    table = nio.read_table_csv(args.table) if args.table else default_table()
    evidence = nio.read_evidence_csv(args.evidence, table)
    prior = nio.read_prior_csv(args.prior, table) if args.prior else None
    post = posterior(table, evidence, prior, use_strengths=args.soft)
    path = _resolve(args, args.out, "posterior.csv")
    nio.write_posterior_csv(path, post.agents, post.probs, _header(args, "bayes"))
    if args.plot_out:
        nio.emit_plot_data(_resolve(args, args.plot_out, "posterior_bars.csv"),
                           [("probability", post.probs)], _header(args, "bayes"),
                           x_name="index")
    print(path)
    return EXIT_OK


def cmd_hsmm_train(args) -> int:
    trace = nio.read_trace_csv(args.input)
    obs, edges = discretize(trace, args.bins, args.scheme)
    labels = nio.read_labels_csv(args.labels, len(trace)) if args.labels else None
    initial = init_model(obs, k=edges.size + 1, labels=labels, phases=args.phases,
                         n_components=args.components, seed=args.seed or 0)
    model, history = em_train(initial, obs, labels, max_iters=args.max_iter, tol=args.tol)
    path = _resolve(args, args.model_out, "model.json")
    nio.save_model(path, model, edges, args.scheme,
                   meta={"iterations": len(history), "dt": trace.dt})
    print(path)
    return EXIT_OK


def cmd_hsmm_decode(args) -> int:
    trace = nio.read_trace_csv(args.input)
    model, edges, _scheme = nio.load_model(args.model)
    obs = apply_bins(trace, edges)
    labels, events = viterbi_decode(model, obs, dt=trace.dt, t0=trace.t0,
                                    short_run_samples=args.short_run,
                                    long_run_samples=args.long_run)
    labels_path = _resolve(args, args.labels_out, "decoded_labels.csv")
    nio.write_labels_csv(labels_path, labels, _header(args, "hsmm-decode"))
    events_path = _resolve(args, args.events_out, "events.csv")
    nio.write_detections_csv(events_path, events, _header(args, "hsmm-decode"))
    print(events_path)
    return EXIT_OK


def cmd_xcorr(args) -> int:
    wires = nio.read_wires_csv(args.input)
    method = DetrendMethod.moving_median(args.window)
    residuals = [noise_only(w, method, args.cutoff) for w in wires]
    results = pairwise_xcorr(residuals, args.max_lag)
    header = _header(args, "xcorr")
    path = _resolve(args, args.out, "xcorr_summary.csv")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        fh.write("wire_i,wire_j,peak_lag,peak_value\n")
        for (a, b), res in sorted(results.items()):
            fh.write(f"w{a + 1},w{b + 1},{res.peak_lag},{nio.fmt(res.peak_value)}\n")
    for (a, b), res in sorted(results.items()):
        nio.emit_plot_data(_out(args, f"xcorr_w{a + 1}_w{b + 1}.csv"),
                           [("value", res.values)], header,
                           x=res.lags.astype(float), x_name="lag")
    print(path)
    return EXIT_OK


def cmd_denoise(args) -> int:
    wires = nio.read_wires_csv(args.input)
    target_idx = args.target - 1
    # accept both "2,3" and the column names "w2,w3"
    ref_idx = [int(r.lstrip("w")) - 1 for r in args.refs.split(",") if r]
    if not 0 <= target_idx < len(wires):
        raise ValueError(f"target wire {args.target} out of range")
    if any(not 0 <= j < len(wires) for j in ref_idx):
        raise ValueError("reference wire out of range")
    method = DetrendMethod.moving_median(args.window)
    target_detrended, _ = detrend(wires[target_idx], method)
    target_noise = noise_only(wires[target_idx], method, args.cutoff)
    refs = [noise_only(wires[j], method, args.cutoff) for j in ref_idx]
    lags = [xcorr(target_noise, r, args.max_lag).peak_lag for r in refs]
    cleaned = ensemble_subtract(target_detrended, refs, lags)
    path = _resolve(args, args.out, "denoised.csv")
    nio.write_trace_csv(path, cleaned, _header(args, "denoise"))
    print(path)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    if not args.config:
        raise ValueError("pipeline needs --config")
    config = load_pipeline_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    outputs = run_pipeline(config, args.out_dir)
    for path in outputs:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global random seed")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--config", default=None, help="pipeline config file")

    parser = argparse.ArgumentParser(
        prog="nanodetect",
        description="Binding-event detection in nanowire conductance traces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="render a scenario to traces")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detrend", parents=[common], help="remove the slow trend")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--trend-out")
    p.add_argument("--method", default="histogram", choices=["poly", "mean", "median", "histogram"])
    p.add_argument("--window", type=float, default=200.0)
    p.add_argument("--bin-width", type=float, default=2.0)
    p.add_argument("--degree", type=int, default=2)
    p.set_defaults(func=cmd_detrend)

    p = sub.add_parser("whiten", parents=[common], help="subtract mean, divide by std")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_whiten)

    p = sub.add_parser("lowpass", parents=[common], help="brick-wall low-pass filter")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--cutoff", type=float, required=True)
    p.set_defaults(func=cmd_lowpass)

    p = sub.add_parser("matchfilter", parents=[common], help="boxcar matched filtering")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--plot-out")
    p.add_argument("--width", type=lambda s: [float(w) for w in s.split(",")],
                   default=[20.0], help="template width(s) in seconds, comma separated")
    p.add_argument("--amp", type=float, default=-20.0)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--threshold", type=float, default=4.0)
    p.set_defaults(func=cmd_matchfilter)

    p = sub.add_parser("threshold", parents=[common], help="low-pass + threshold detection")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--policy", default="calibrated", choices=["fixed", "calibrated", "adaptive"])
    p.add_argument("--level", type=float, default=None)
    p.add_argument("--k", type=float, default=5.0)
    p.add_argument("--cal", default=None, help="calibration sample range START:STOP")
    p.add_argument("--window", type=float, default=200.0)
    p.add_argument("--cutoff", type=float, default=0.05)
    p.add_argument("--polarity", default="negative", choices=["negative", "positive"])
    p.add_argument("--min-duration", type=float, default=5.0)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("bayes", parents=[common], help="naive Bayes agent posterior")
    p.add_argument("--table")
    p.add_argument("--evidence", required=True)
    p.add_argument("--prior")
    p.add_argument("--out")
    p.add_argument("--plot-out")
    p.add_argument("--soft", action="store_true", help="use soft evidence strengths")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("hsmm-train", parents=[common], help="EM-train the docking HSMM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--labels")
    p.add_argument("--model-out")
    p.add_argument("--phases", type=int, default=2)
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--scheme", default="quantile", choices=["equal", "quantile"])
    p.add_argument("--components", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_hsmm_train)

    p = sub.add_parser("hsmm-decode", parents=[common], help="Viterbi-decode dock intervals")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--events-out")
    p.add_argument("--short-run", type=int, default=3)
    p.add_argument("--long-run", type=int, default=600)
    p.set_defaults(func=cmd_hsmm_decode)

    p = sub.add_parser("xcorr", parents=[common], help="pairwise noise cross-correlation")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--window", type=float, default=60.0)
    p.add_argument("--cutoff", type=float, default=0.05)
    p.set_defaults(func=cmd_xcorr)

    p = sub.add_parser("denoise", parents=[common], help="ensemble noise subtraction")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--target", type=int, default=1, help="1-based target wire")
    p.add_argument("--refs", required=True, help="comma-separated 1-based reference wires")
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--window", type=float, default=60.0)
    p.add_argument("--cutoff", type=float, default=0.05)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("pipeline", parents=[common], help="run a configured stage pipeline")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
