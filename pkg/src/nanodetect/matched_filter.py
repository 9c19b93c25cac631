"""FFT matched filtering with an unwrapped boxcar template.

The template is laid out wrap-around style for zero-phase circular
correlation: for a width-w boxcar, the first ceil(w/2) and last floor(w/2)
entries of the length-n kernel carry the amplitude, everything else is zero.
Correlating whitened data with this kernel yields a peak at the center of
each matching boxcar; negative template times negative binding makes the
peaks positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks
from sklearn.base import BaseEstimator

from .trace import DetectionEvent, Trace


@dataclass(frozen=True)
class BoxcarFilterSpec:
    """Boxcar template: amplitude in nS, width in samples, transform length n."""

    amplitude: float = -20.0
    width_samples: int = 20
    n: int = 1024

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"transform length must be a power of two, got {self.n}")
        if not 0 < self.width_samples < self.n:
            raise ValueError("width must satisfy 0 < width < n")


@dataclass
class FilterOutput:
    """Normalized matched-filter scores plus peak bookkeeping."""

    scores: np.ndarray
    width_samples: int
    dt: float = 1.0
    t0: float = 0.0
    peaks: list = field(default_factory=list)


def build_boxcar_filter(spec: BoxcarFilterSpec, data_std: float) -> np.ndarray:
    """Whitened wrap-around boxcar kernel of length spec.n."""
    if not data_std > 0:
        raise ValueError(f"data_std must be > 0, got {data_std}")
    head = (spec.width_samples + 1) // 2
    tail = spec.width_samples // 2
    kernel = np.zeros(spec.n)
    value = spec.amplitude / data_std
    kernel[:head] = value
    if tail:
        kernel[-tail:] = value
    return kernel


def fft_convolve(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular cross-correlation via the FFT.

    Convention: ``out[j] = sum_i data[(i + j) % n] * kernel[i]``, computed as
    the inverse transform of ``fft(data) * conj(fft(kernel))``. A unit impulse
    at index 0 therefore returns the index-reversed kernel.
    """
    data = np.asarray(data, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    n = data.size
    if kernel.size != n:
        raise ValueError("data and kernel must have equal length")
    if n < 2 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    product = np.fft.rfft(data) * np.conj(np.fft.rfft(kernel))
    return np.fft.irfft(product, n)


def filter_window(
    data: np.ndarray,
    spec: BoxcarFilterSpec,
    data_std: float | None = None,
    dt: float = 1.0,
    t0: float = 0.0,
) -> FilterOutput:
    """Matched-filter one length-n window; scores normalized to unit std.

    ``data_std`` whitens the template; by default it is taken from the window
    itself, so already-whitened data gives an (approximately) unit divisor.
    """
    data = np.asarray(data, dtype=float)
    if data.size != spec.n:
        raise ValueError(f"window must have exactly {spec.n} samples")
    if data_std is None:
        data_std = float(data.std())
    if data_std == 0:
        return FilterOutput(np.zeros(spec.n), spec.width_samples, dt, t0)
    kernel = build_boxcar_filter(spec, data_std)
    raw = fft_convolve(data, kernel)
    std = raw.std()
    scores = raw / std if std > 0 else raw
    return FilterOutput(scores, spec.width_samples, dt, t0)


def _greedy_suppress(indices: np.ndarray, scores: np.ndarray, min_separation: int):
    """Keep the strongest peaks, dropping any within min_separation of a kept one."""
    order = np.argsort(scores)[::-1]
    kept: list[int] = []
    kept_scores: list[float] = []
    for j in order:
        idx = int(indices[j])
        if all(abs(idx - k) > min_separation for k in kept):
            kept.append(idx)
            kept_scores.append(float(scores[j]))
    pairs = sorted(zip(kept, kept_scores))
    return [p[0] for p in pairs], [p[1] for p in pairs]


def detect_peaks(
    output: FilterOutput,
    threshold_sigma: float = 4.0,
    min_separation: int | None = None,
) -> list[DetectionEvent]:
    """Extract events from score peaks above threshold_sigma.

    Local maxima within ``min_separation`` samples of a stronger one are
    suppressed (default separation: the template width). Onset is reported at
    peak index minus half the template width, since the peak sits at the
    boxcar center.
    """
    if not threshold_sigma > 0:
        raise ValueError("threshold_sigma must be > 0")
    if min_separation is None:
        min_separation = output.width_samples
    idx, props = find_peaks(output.scores, height=threshold_sigma)
    if idx.size == 0:
        output.peaks = []
        return []
    kept_idx, kept_scores = _greedy_suppress(idx, props["peak_heights"], min_separation)
    output.peaks = list(zip(kept_idx, kept_scores))
    half = output.width_samples // 2
    width_s = output.width_samples * output.dt
    return [
        DetectionEvent(
            onset=output.t0 + (i - half) * output.dt,
            duration=width_s,
            score=s,
            width=width_s,
        )
        for i, s in zip(kept_idx, kept_scores)
    ]


def _window_starts(n_samples: int, n_fft: int) -> list[int]:
    if n_samples == n_fft:
        return [0]
    starts = list(range(0, n_samples - n_fft + 1, n_fft // 2))
    if starts[-1] != n_samples - n_fft:
        starts.append(n_samples - n_fft)
    return starts


def scan_trace(
    trace: Trace,
    spec: BoxcarFilterSpec | None = None,
    threshold_sigma: float = 4.0,
    min_separation: int | None = None,
) -> list[DetectionEvent]:
    """Matched-filter a whole trace, windowing when it is not one FFT block.

    Traces longer than the transform length are processed in 50%-overlapping
    windows; candidate peaks are merged by global greedy suppression so an
    event seen in two windows is reported once. Traces shorter than the
    transform length fall back to the largest power of two that fits.
    """
    if spec is None:
        spec = BoxcarFilterSpec()
    n_samples = len(trace)
    n_fft = spec.n
    if n_samples < n_fft:
        n_fft = 1 << (n_samples.bit_length() - 1)
        if n_fft <= 2 * spec.width_samples:
            raise ValueError("trace too short for the requested template width")
        spec = BoxcarFilterSpec(spec.amplitude, spec.width_samples, n_fft)
    if min_separation is None:
        min_separation = spec.width_samples

    candidates_idx: list[int] = []
    candidates_score: list[float] = []
    for start in _window_starts(n_samples, n_fft):
        window = trace.samples[start : start + n_fft]
        out = filter_window(window, spec, dt=trace.dt)
        idx, props = find_peaks(out.scores, height=threshold_sigma)
        candidates_idx.extend(int(i) + start for i in idx)
        candidates_score.extend(float(h) for h in props["peak_heights"])

    if not candidates_idx:
        return []
    kept_idx, kept_scores = _greedy_suppress(
        np.asarray(candidates_idx), np.asarray(candidates_score), min_separation
    )
    half = spec.width_samples // 2
    width_s = spec.width_samples * trace.dt
    return [
        DetectionEvent(
            onset=trace.t0 + (i - half) * trace.dt,
            duration=width_s,
            score=s,
            width=width_s,
        )
        for i, s in zip(kept_idx, kept_scores)
    ]


def scan_trace_bank(
    trace: Trace,
    widths_samples,
    amplitude: float = -20.0,
    n: int = 1024,
    threshold_sigma: float = 4.0,
) -> list[DetectionEvent]:
    """Union of detections over a bank of template widths, tagged per width."""
    events: list[DetectionEvent] = []
    for w in widths_samples:
        spec = BoxcarFilterSpec(amplitude=amplitude, width_samples=int(w), n=n)
        events.extend(scan_trace(trace, spec, threshold_sigma))
    events.sort(key=lambda e: (e.onset, e.width))
    return events


class MatchedFilterDetector(BaseEstimator):
    """Boxcar matched-filter detector over raw (already conditioned) samples.

    Parameters mirror the functional API: ``width_s`` is the template width in
    seconds, converted to samples with ``dt``. ``predict`` returns the event
    list; ``decision_function`` the normalized score series of the first
    window-aligned scan.
    """

    def __init__(self, width_s=20.0, amplitude=-20.0, n_fft=1024,
                 threshold_sigma=4.0, dt=1.0):
        self.width_s = width_s
        self.amplitude = amplitude
        self.n_fft = n_fft
        self.threshold_sigma = threshold_sigma
        self.dt = dt

    def _spec(self) -> BoxcarFilterSpec:
        return BoxcarFilterSpec(
            amplitude=self.amplitude,
            width_samples=max(1, int(round(self.width_s / self.dt))),
            n=self.n_fft,
        )

    def fit(self, X, y=None):
        return self

    def predict(self, X) -> list[DetectionEvent]:
        return scan_trace(Trace(np.asarray(X, dtype=float), self.dt), self._spec(),
                          self.threshold_sigma)

    def decision_function(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=float)
        spec = self._spec()
        if x.size < spec.n:
            n_fft = 1 << (x.size.bit_length() - 1)
            spec = BoxcarFilterSpec(spec.amplitude, spec.width_samples, n_fft)
        return filter_window(x[: spec.n], spec, dt=self.dt).scores
