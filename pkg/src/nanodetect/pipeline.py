"""Config-driven batch pipelines binding the processing stages together.

A pipeline is an ordered stage list applied to a trace (or wire set), with
all randomness flowing from one global seed through named per-wire
sub-streams. Every artifact file carries a provenance header, and a given
config + seed always produces byte-identical outputs.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import io as nio
from .bayes import default_table, posterior
from .conditioning import DetrendMethod, detrend, low_pass, whiten
from .hsmm import (
    UNLABELED,
    apply_bins,
    discretize,
    em_train,
    init_model,
    viterbi_decode,
)
from .matched_filter import BoxcarFilterSpec, filter_window, scan_trace
from .threshold import ThresholdPolicy, threshold_detect
from .trace import Trace, derive_wire_seeds, synthesize_trace
from .xcorr import ensemble_subtract, noise_only, pairwise_xcorr

KNOWN_STAGES = (
    "simulate",
    "detrend",
    "whiten",
    "lowpass",
    "matchfilter",
    "score-labels",
    "threshold",
    "hsmm-train",
    "hsmm-decode",
    "xcorr",
    "denoise",
    "bayes",
)


def score_series(trace: Trace, spec: BoxcarFilterSpec) -> np.ndarray:
    """Matched-filter scores aligned 1:1 with the trace samples.

    The trace is covered with 50%-overlapping power-of-two windows; positions
    covered twice take the score of the later window. Used for plot data and
    label generation; event extraction goes through the deduplicating scan.
    """
    n = len(trace)
    n_fft = spec.n
    if n < n_fft:
        n_fft = 1 << (n.bit_length() - 1)
        spec = BoxcarFilterSpec(spec.amplitude, spec.width_samples, n_fft)
    out = np.zeros(n)
    starts = list(range(0, n - n_fft + 1, n_fft // 2))
    if starts[-1] != n - n_fft:
        starts.append(n - n_fft)
    for s in starts:
        out[s : s + n_fft] = filter_window(trace.samples[s : s + n_fft], spec, dt=trace.dt).scores
    return out


def labels_from_scores(scores: np.ndarray, hi: float, lo: float | None = None) -> np.ndarray:
    """Two-band labeling of a score series: dock above hi, nodock below lo."""
    if lo is None:
        lo = hi / 2.0
    labels = np.full(scores.size, UNLABELED, dtype=int)
    labels[scores >= hi] = 1
    labels[scores <= lo] = 0
    return labels


def _detrend_method(params: dict) -> DetrendMethod:
    return DetrendMethod(
        kind=params.get("method", "median"),
        degree=int(params.get("degree", 2)),
        window_s=float(params.get("window", 200.0)),
        bin_width=float(params.get("bin_width", 2.0)),
    )


class _PipelineRun:
    def __init__(self, config: dict, out_dir: Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.seed = int(config.get("seed", 0))
        self.header = nio.provenance("pipeline", config, self.seed)
        self.outputs: list[Path] = []
        self.trace: Trace | None = None
        self.wires: list[Trace] | None = None
        self.scores: np.ndarray | None = None
        self.train_labels: np.ndarray | None = None
        self.obs: np.ndarray | None = None
        self.model = None
        self.edges = None
        self.scheme = "quantile"

    def path(self, index: int, name: str) -> Path:
        p = self.out_dir / f"{index:02d}_{name}"
        self.outputs.append(p)
        return p

    def need_trace(self) -> Trace:
        if self.trace is None:
            raise ValueError("stage needs a trace; provide 'input' or a simulate stage")
        return self.trace

    def need_wires(self) -> list[Trace]:
        if self.wires is not None:
            return self.wires
        if self.trace is not None:
            return [self.trace]
        raise ValueError("stage needs wire data; provide 'input' or a simulate stage")


def run_pipeline(config: dict, out_dir) -> list[Path]:
    """Execute the configured stages in order; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _PipelineRun(config, out_dir)

    if "input" in config:
        path = Path(config["input"])
        if not path.exists():
            raise ValueError(f"input file {path} not found")
        with open(path) as fh:
            first_data = next((l for l in fh if not l.startswith("#")), "")
        if first_data.startswith("time,conductance"):
            run.trace = nio.read_trace_csv(path)
        else:
            run.wires = nio.read_wires_csv(path)
            run.trace = run.wires[0]

    stages = config.get("stages", [])
    for i, stage in enumerate(stages, start=1):
        if not isinstance(stage, dict) or "op" not in stage:
            raise ValueError(f"stage {i} must be a mapping with an 'op' key")
        op = stage["op"]
        if op not in KNOWN_STAGES:
            raise ValueError(f"unknown stage {op!r} (known: {', '.join(KNOWN_STAGES)})")
        _run_stage(run, i, op, stage)

    if not stages:
        if run.wires is not None and len(run.wires) > 1:
            nio.write_wires_csv(run.path(0, "output.csv"), run.wires, run.header)
        else:
            nio.write_trace_csv(run.path(0, "output.csv"), run.need_trace(), run.header)
    return run.outputs


def _run_stage(run: _PipelineRun, i: int, op: str, params: dict) -> None:
    if op == "simulate":
        scenario_path = params.get("scenario") or run.config.get("scenario")
        if not scenario_path:
            raise ValueError("simulate stage needs a 'scenario' file")
        scenario = nio.load_scenario(scenario_path)
        seeds = derive_wire_seeds(run.seed, len(scenario.wires))
        traces = []
        for wire, seed in zip(scenario.wires, seeds):
            noise = replace(wire.noise, seed=seed)
            traces.append(
                synthesize_trace(wire.events, noise, scenario.duration, scenario.dt,
                                 baseline=scenario.baseline)
            )
        run.wires = traces
        run.trace = traces[0]
        if len(traces) > 1:
            nio.write_wires_csv(run.path(i, "simulated.csv"), traces, run.header)
        else:
            nio.write_trace_csv(run.path(i, "simulated.csv"), traces[0], run.header)

    elif op == "detrend":
        trace = run.need_trace()
        detrended, trend = detrend(trace, _detrend_method(params))
        run.trace = detrended
        nio.write_trace_csv(run.path(i, "detrended.csv"), detrended, run.header)
        nio.emit_plot_data(run.path(i, "trend.csv"), [("trend", trend)], run.header)

    elif op == "whiten":
        run.trace = whiten(run.need_trace())
        nio.write_trace_csv(run.path(i, "whitened.csv"), run.trace, run.header)

    elif op == "lowpass":
        run.trace = low_pass(run.need_trace(), float(params.get("cutoff", 0.05)))
        nio.write_trace_csv(run.path(i, "lowpassed.csv"), run.trace, run.header)

    elif op == "matchfilter":
        trace = run.need_trace()
        spec = BoxcarFilterSpec(
            amplitude=float(params.get("amplitude", -20.0)),
            width_samples=max(1, int(round(float(params.get("width", 20.0)) / trace.dt))),
            n=int(params.get("n", 1024)),
        )
        threshold_sigma = float(params.get("threshold", 4.0))
        events = scan_trace(trace, spec, threshold_sigma)
        run.scores = score_series(trace, spec)
        nio.write_detections_csv(run.path(i, "detections.csv"), events, run.header)
        nio.emit_plot_data(run.path(i, "scores.csv"), [("score", run.scores)], run.header,
                           x_name="index")

    elif op == "score-labels":
        if run.scores is None:
            raise ValueError("score-labels stage needs a preceding matchfilter stage")
        hi = float(params.get("threshold", 4.0))
        lo = params.get("low")
        run.train_labels = labels_from_scores(run.scores, hi, None if lo is None else float(lo))
        nio.write_labels_csv(run.path(i, "labels.csv"), run.train_labels, run.header)

    elif op == "threshold":
        trace = run.need_trace()
        kind = params.get("policy", "calibrated")
        polarity = params.get("polarity", "negative")
        if kind == "fixed":
            policy = ThresholdPolicy.fixed(float(params["level"]), polarity)
        elif kind == "calibrated":
            cal = params.get("cal", (0, 300))
            if isinstance(cal, str):
                a, b = cal.split(":")
                cal = (int(a), int(b))
            policy = ThresholdPolicy.calibrated(float(params.get("k", 5.0)), cal, polarity)
        else:
            policy = ThresholdPolicy.adaptive(
                float(params.get("k", 5.0)), float(params.get("window", 200.0)), polarity
            )
        events = threshold_detect(
            trace, policy, float(params.get("cutoff", 0.05)),
            min_duration_s=float(params.get("min_duration", 5.0)),
        )
        nio.write_detections_csv(run.path(i, "detections.csv"), events, run.header)

    elif op == "hsmm-train":
        trace = run.need_trace()
        k = int(params.get("bins", 8))
        run.scheme = params.get("scheme", "quantile")
        obs, edges = discretize(trace, k, run.scheme)
        labels = run.train_labels
        if "labels" in params:
            labels = nio.read_labels_csv(params["labels"], len(trace))
        initial = init_model(
            obs, k=edges.size + 1, labels=labels,
            phases=int(params.get("phases", 2)),
            n_components=int(params.get("components", 1)),
            seed=run.seed,
        )
        model, _ = em_train(
            initial, obs, labels,
            max_iters=int(params.get("max_iter", 50)),
            tol=float(params.get("tol", 1e-6)),
        )
        run.model, run.edges, run.obs = model, edges, obs
        nio.save_model(run.path(i, "model.json"), model, edges, run.scheme,
                       meta={"provenance": run.header.lstrip("# ")})

    elif op == "hsmm-decode":
        trace = run.need_trace()
        if run.model is None:
            if "model" not in params:
                raise ValueError("hsmm-decode needs a trained model or a 'model' file")
            run.model, run.edges, run.scheme = nio.load_model(params["model"])
        obs = apply_bins(trace, run.edges)
        labels, events = viterbi_decode(
            run.model, obs, dt=trace.dt, t0=trace.t0,
            short_run_samples=int(params.get("short_run", 3)),
            long_run_samples=int(params.get("long_run", 600)),
        )
        nio.write_labels_csv(run.path(i, "decoded_labels.csv"), labels, run.header)
        nio.write_detections_csv(run.path(i, "events.csv"), events, run.header)
        if run.scores is not None and run.train_labels is not None:
            # Stacked figure bundle, top to bottom: discretized input, predicted
            # labels, conditioned trace, training labels, boxcar filter output.
            nio.emit_plot_data(
                run.path(i, "figure_hsmm.csv"),
                [
                    ("discretized", obs.astype(float)),
                    ("predicted", labels.astype(float)),
                    ("conditioned", trace.samples),
                    ("training_labels", run.train_labels.astype(float)),
                    ("filter_output", run.scores),
                ],
                run.header,
            )

    elif op == "xcorr":
        wires = run.need_wires()
        method = DetrendMethod.moving_median(float(params.get("window", 60.0)))
        cutoff = float(params.get("cutoff", 0.05))
        residuals = [noise_only(w, method, cutoff) for w in wires]
        results = pairwise_xcorr(residuals, int(params.get("max_lag", 50)))
        summary = run.path(i, "xcorr_summary.csv")
        with open(summary, "w") as fh:
            fh.write(run.header + "\n")
            fh.write("wire_i,wire_j,peak_lag,peak_value\n")
            for (a, b), res in sorted(results.items()):
                fh.write(f"w{a + 1},w{b + 1},{res.peak_lag},{nio.fmt(res.peak_value)}\n")
        for (a, b), res in sorted(results.items()):
            nio.emit_plot_data(
                run.path(i, f"xcorr_w{a + 1}_w{b + 1}.csv"),
                [("value", res.values)],
                run.header,
                x=res.lags.astype(float),
                x_name="lag",
            )

    elif op == "denoise":
        wires = run.need_wires()
        target_idx = int(params.get("target", 1)) - 1
        ref_idx = [int(r) - 1 for r in params.get("refs", [])]
        if not 0 <= target_idx < len(wires):
            raise ValueError(f"target wire {target_idx + 1} out of range")
        method = DetrendMethod.moving_median(float(params.get("window", 60.0)))
        cutoff = float(params.get("cutoff", 0.05))
        max_lag = int(params.get("max_lag", 50))
        target_detrended, _ = detrend(wires[target_idx], method)
        target_noise = noise_only(wires[target_idx], method, cutoff)
        refs = [noise_only(wires[j], method, cutoff) for j in ref_idx]
        from .xcorr import xcorr as _xcorr

        lags = [_xcorr(target_noise, r, max_lag).peak_lag for r in refs]
        cleaned = ensemble_subtract(target_detrended, refs, lags)
        run.trace = cleaned
        nio.write_trace_csv(run.path(i, "denoised.csv"), cleaned, run.header)

    elif op == "bayes":
        table = nio.read_table_csv(params["table"]) if "table" in params else default_table()
        if "evidence" not in params:
            raise ValueError("bayes stage needs an 'evidence' file")
        evidence = nio.read_evidence_csv(params["evidence"], table)
        prior = nio.read_prior_csv(params["prior"], table) if "prior" in params else None
        post = posterior(table, evidence, prior)
        nio.write_posterior_csv(run.path(i, "posterior.csv"), post.agents, post.probs, run.header)
        nio.emit_plot_data(
            run.path(i, "posterior_bars.csv"), [("probability", post.probs)],
            run.header, x_name="index",
        )


def load_pipeline_config(path) -> dict:
    with open(path) as fh:
        config = yaml.safe_load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"{path}: pipeline config must be a mapping")
    return config
