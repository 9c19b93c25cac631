"""Detection of viral binding events in nanowire conductance traces.

Library + batch CLI covering trace simulation, conditioning (detrending,
whitening, low-pass), matched filtering, threshold detection, naive Bayes
array fusion, Coxian-duration hidden semi-Markov modeling, and noise
cross-correlation across multiplexed wires.
"""

from .bayes import (
    ArrayNaiveBayes,
    Evidence,
    Posterior,
    ResponseTable,
    collapse_replicates,
    default_table,
    noisy_or,
    posterior,
    simulate_evidence,
)
from .conditioning import (
    Detrender,
    DetrendMethod,
    LowPassFilter,
    Whitener,
    detrend,
    low_pass,
    whiten,
)
from .exceptions import NumericError
from .hsmm import (
    DOCK,
    NODOCK,
    UNLABELED,
    CoxianDuration,
    CoxianHsmm,
    EmissionModel,
    HsmmModel,
    apply_bins,
    discretize,
    duration_pmf,
    duration_pmf_series,
    em_train,
    expand,
    forward_likelihood,
    init_model,
    labels_from_events,
    sample_hsmm,
    viterbi_decode,
    viterbi_path,
)
from .matched_filter import (
    BoxcarFilterSpec,
    FilterOutput,
    MatchedFilterDetector,
    build_boxcar_filter,
    detect_peaks,
    fft_convolve,
    filter_window,
    scan_trace,
    scan_trace_bank,
)
from .pipeline import run_pipeline
from .threshold import (
    ThresholdDetector,
    ThresholdPolicy,
    calibrate_noise,
    threshold_detect,
)
from .trace import (
    ArrayScenario,
    CommonSpike,
    DetectionEvent,
    EventSpec,
    NoiseSpec,
    Trace,
    TrendSpec,
    WireSpec,
    derive_wire_seeds,
    synthesize_array,
    synthesize_trace,
)
from .xcorr import XcorrResult, ensemble_subtract, noise_only, pairwise_xcorr, xcorr

__version__ = "0.1.0"

__all__ = [
    "ArrayNaiveBayes",
    "ArrayScenario",
    "BoxcarFilterSpec",
    "CommonSpike",
    "CoxianDuration",
    "CoxianHsmm",
    "DetectionEvent",
    "Detrender",
    "DetrendMethod",
    "DOCK",
    "duration_pmf",
    "duration_pmf_series",
    "em_train",
    "EmissionModel",
    "Evidence",
    "expand",
    "fft_convolve",
    "FilterOutput",
    "filter_window",
    "forward_likelihood",
    "HsmmModel",
    "init_model",
    "labels_from_events",
    "LowPassFilter",
    "MatchedFilterDetector",
    "NODOCK",
    "NoiseSpec",
    "NumericError",
    "Posterior",
    "ResponseTable",
    "Trace",
    "TrendSpec",
    "ThresholdDetector",
    "ThresholdPolicy",
    "UNLABELED",
    "Whitener",
    "WireSpec",
    "XcorrResult",
    "apply_bins",
    "build_boxcar_filter",
    "calibrate_noise",
    "collapse_replicates",
    "default_table",
    "derive_wire_seeds",
    "detect_peaks",
    "detrend",
    "discretize",
    "ensemble_subtract",
    "low_pass",
    "noise_only",
    "noisy_or",
    "pairwise_xcorr",
    "posterior",
    "run_pipeline",
    "sample_hsmm",
    "scan_trace",
    "scan_trace_bank",
    "simulate_evidence",
    "synthesize_array",
    "synthesize_trace",
    "threshold_detect",
    "viterbi_decode",
    "viterbi_path",
    "whiten",
    "xcorr",
]
