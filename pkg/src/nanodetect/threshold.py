"""Low-pass + threshold detection with calibrated and adaptive thresholds.

Events are maximal excursions beyond a per-wire threshold on the low-passed
trace. Closing uses hysteresis at 50% of the threshold toward baseline so a
noisy recrossing does not chatter, and events shorter than a minimum
duration are dropped to reject residual spikes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator

from .conditioning import low_pass
from .trace import DetectionEvent, Trace

MAD_TO_SIGMA = 1.4826

POLARITIES = ("negative", "positive")


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold selection policy.

    kind "fixed"      : absolute level in nS.
    kind "calibrated" : level = mean -/+ k_sigma * sigma measured over an
                        event-free calibration sample range.
    kind "adaptive"   : per-sample level from a trailing rolling median and
                        MAD-based sigma over window_s seconds.
    """

    kind: str
    level: float = 0.0
    k_sigma: float = 5.0
    cal_window: tuple | None = None
    window_s: float = 200.0
    polarity: str = "negative"

    def __post_init__(self):
        if self.kind not in ("fixed", "calibrated", "adaptive"):
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}")
        if self.kind != "fixed" and not self.k_sigma > 0:
            raise ValueError("k_sigma must be > 0")
        if self.kind == "adaptive" and not self.window_s > 0:
            raise ValueError("window_s must be > 0")
        if self.kind == "calibrated" and self.cal_window is None:
            raise ValueError("calibrated policy needs a calibration window")

    @classmethod
    def fixed(cls, level: float, polarity: str = "negative") -> "ThresholdPolicy":
        return cls(kind="fixed", level=level, polarity=polarity)

    @classmethod
    def calibrated(cls, k_sigma: float, cal_window, polarity: str = "negative") -> "ThresholdPolicy":
        return cls(kind="calibrated", k_sigma=k_sigma, cal_window=tuple(cal_window),
                   polarity=polarity)

    @classmethod
    def adaptive(cls, k_sigma: float, window_s: float, polarity: str = "negative") -> "ThresholdPolicy":
        return cls(kind="adaptive", k_sigma=k_sigma, window_s=window_s, polarity=polarity)


def calibrate_noise(trace: Trace, window) -> tuple[float, float]:
    """Population std and mean over a sample range of an event-free segment.

    The caller is responsible for passing the signal it thresholds (normally
    the low-passed residual) and for the segment being event-free.
    """
    a, b = int(window[0]), int(window[1])
    seg = trace.samples[a:b]
    if seg.size == 0:
        raise ValueError(f"empty calibration window {window!r}")
    return float(seg.std()), float(seg.mean())


def rolling_noise_stats(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Trailing rolling median and MAD-based sigma (window truncated at start)."""
    n = x.size
    center = np.empty(n)
    sigma = np.empty(n)
    for i in range(min(w - 1, n)):
        seg = x[: i + 1]
        med = np.median(seg)
        center[i] = med
        sigma[i] = MAD_TO_SIGMA * np.median(np.abs(seg - med))
    if n >= w:
        windows = sliding_window_view(x, w)
        med = np.median(windows, axis=1)
        center[w - 1 :] = med
        sigma[w - 1 :] = MAD_TO_SIGMA * np.median(np.abs(windows - med[:, None]), axis=1)
    return center, sigma


def _extract_runs(y, beyond_mask, close_mask):
    """Maximal runs: open where beyond_mask, close at the first close_mask sample."""
    runs = []
    n = y.size
    i = 0
    while i < n:
        if beyond_mask[i]:
            j = i + 1
            while j < n and not close_mask[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


def threshold_detect(
    trace: Trace,
    policy: ThresholdPolicy,
    lp_cutoff_hz: float,
    *,
    min_duration_s: float = 5.0,
) -> list[DetectionEvent]:
    """Detect binding events by thresholding the low-passed trace.

    An event opens when the signal passes the threshold and closes with
    hysteresis when it recrosses 50% of the threshold-to-center distance.
    The reported amplitude is the extremal excursion from the policy center;
    width and height ride along for downstream processing.
    """
    y = low_pass(trace, lp_cutoff_hz).samples
    n = y.size

    if policy.kind == "fixed":
        center = np.zeros(n)
        thr = np.full(n, policy.level)
    elif policy.kind == "calibrated":
        a, b = policy.cal_window
        if a < 0 or b > n or b - a < 2:
            raise ValueError(
                f"calibration segment {policy.cal_window!r} does not fit the "
                f"{n}-sample trace"
            )
        sigma, mean = calibrate_noise(trace.with_samples(y), policy.cal_window)
        center = np.full(n, mean)
        delta = policy.k_sigma * sigma
        thr = center - delta if policy.polarity == "negative" else center + delta
    else:
        w = max(2, int(round(policy.window_s / trace.dt)))
        med, sig = rolling_noise_stats(y, w)
        center = med
        delta = policy.k_sigma * sig
        thr = center - delta if policy.polarity == "negative" else center + delta

    close_level = center + 0.5 * (thr - center)
    if policy.polarity == "negative":
        beyond = y < thr
        closed = y >= close_level
    else:
        beyond = y > thr
        closed = y <= close_level

    events = []
    for start, stop in _extract_runs(y, beyond, closed):
        duration = (stop - start) * trace.dt
        if duration < min_duration_s:
            continue
        excursion = y[start:stop] - center[start:stop]
        amplitude = excursion.min() if policy.polarity == "negative" else excursion.max()
        events.append(
            DetectionEvent(
                onset=trace.t0 + start * trace.dt,
                duration=duration,
                amplitude=float(amplitude),
                width=duration,
            )
        )
    return events


class ThresholdDetector(BaseEstimator):
    """Calibrate-then-detect estimator around :func:`threshold_detect`.

    ``fit`` runs the calibration phase on an event-free stretch of the
    training trace (storing ``sigma_``, ``mean_`` and ``threshold_``);
    ``predict`` applies the frozen fixed threshold to new traces. Use the
    functional API directly for the fixed and adaptive policies.
    """

    def __init__(self, k_sigma=5.0, cal_window=(0, 300), cutoff_hz=0.05,
                 polarity="negative", min_duration_s=5.0, dt=1.0):
        self.k_sigma = k_sigma
        self.cal_window = cal_window
        self.cutoff_hz = cutoff_hz
        self.polarity = polarity
        self.min_duration_s = min_duration_s
        self.dt = dt

    def fit(self, X, y=None):
        trace = Trace(np.asarray(X, dtype=float), self.dt)
        filtered = low_pass(trace, self.cutoff_hz)
        self.sigma_, self.mean_ = calibrate_noise(filtered, self.cal_window)
        delta = self.k_sigma * self.sigma_
        self.threshold_ = self.mean_ - delta if self.polarity == "negative" else self.mean_ + delta
        return self

    def predict(self, X) -> list[DetectionEvent]:
        if not hasattr(self, "threshold_"):
            raise RuntimeError("ThresholdDetector must be fitted before predict")
        trace = Trace(np.asarray(X, dtype=float), self.dt)
        policy = ThresholdPolicy.fixed(self.threshold_, self.polarity)
        return threshold_detect(trace, policy, self.cutoff_hz,
                                min_duration_s=self.min_duration_s)
