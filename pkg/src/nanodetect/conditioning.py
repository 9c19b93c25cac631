"""Trace conditioning: detrending, whitening, and low-pass filtering.

Four detrenders are provided: a global polynomial fit, a moving average, a
moving median, and a histogram-mode local mean that is robust to boxcar
binding signatures occupying a minority of the window. Whitening subtracts
the mean and divides by the population (1/N) standard deviation; the same
1/N convention is used everywhere in this package so whitening and filter
normalization stay consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import NumericError
from .trace import Trace

DETREND_METHODS = ("poly", "mean", "median", "histogram")


@dataclass(frozen=True)
class DetrendMethod:
    """Detrending method selector.

    kind      : one of "poly", "mean", "median", "histogram"
    degree    : polynomial degree for the global fit
    window_s  : moving-window length in seconds for the windowed variants
    bin_width : histogram bin width in nS for the histogram-mode variant
    """

    kind: str = "histogram"
    degree: int = 2
    window_s: float = 200.0
    bin_width: float = 2.0

    def __post_init__(self):
        if self.kind not in DETREND_METHODS:
            raise ValueError(f"unknown detrend method {self.kind!r}")
        if self.degree < 0:
            raise ValueError("polynomial degree must be >= 0")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")

    @classmethod
    def poly(cls, degree: int = 2) -> "DetrendMethod":
        return cls(kind="poly", degree=degree)

    @classmethod
    def moving_average(cls, window_s: float) -> "DetrendMethod":
        return cls(kind="mean", window_s=window_s)

    @classmethod
    def moving_median(cls, window_s: float) -> "DetrendMethod":
        return cls(kind="median", window_s=window_s)

    @classmethod
    def histogram_mode(cls, window_s: float = 200.0, bin_width: float = 2.0) -> "DetrendMethod":
        return cls(kind="histogram", window_s=window_s, bin_width=bin_width)


def _window_bounds(n: int, w: int, i: int) -> tuple[int, int]:
    # Centered window of nominal length w, truncated (shrinking) at the ends.
    lo = max(0, i - (w - 1) // 2)
    hi = min(n, i + w // 2 + 1)
    return lo, hi


def _window_samples(window_s: float, dt: float, n: int) -> int:
    w = max(1, int(round(window_s / dt)))
    if n < w:
        raise ValueError(f"trace of {n} samples is shorter than the {w}-sample window")
    return w


def _poly_trend(x: np.ndarray, degree: int) -> np.ndarray:
    t = np.arange(x.size, dtype=float)
    fit = np.polynomial.Polynomial.fit(t, x, degree)
    return fit(t)


def _moving_average_trend(x: np.ndarray, w: int) -> np.ndarray:
    n = x.size
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lo = np.maximum(0, idx - (w - 1) // 2)
    hi = np.minimum(n, idx + w // 2 + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _moving_median_trend(x: np.ndarray, w: int) -> np.ndarray:
    n = x.size
    trend = np.empty(n)
    left = (w - 1) // 2
    first_full = left
    last_full = n - 1 - w // 2
    if last_full >= first_full:
        trend[first_full : last_full + 1] = np.median(sliding_window_view(x, w), axis=1)
    for i in range(min(first_full, n)):
        lo, hi = _window_bounds(n, w, i)
        trend[i] = np.median(x[lo:hi])
    for i in range(max(last_full + 1, 0), n):
        lo, hi = _window_bounds(n, w, i)
        trend[i] = np.median(x[lo:hi])
    return trend


def _histogram_mode_trend(x: np.ndarray, w: int, bin_width: float) -> np.ndarray:
    # Bins form a fixed absolute grid: bin k covers [k*bw, (k+1)*bw). The
    # local mean at i is the center of the most populated bin in the window;
    # ties break toward the lowest (most negative) bin.
    n = x.size
    bins = np.floor(x / bin_width).astype(np.int64)
    bmin = bins.min()
    shifted = bins - bmin
    nbins = int(shifted.max()) + 1
    trend = np.empty(n)
    for i in range(n):
        lo, hi = _window_bounds(n, w, i)
        counts = np.bincount(shifted[lo:hi], minlength=nbins)
        mode = int(np.argmax(counts))
        trend[i] = (mode + bmin + 0.5) * bin_width
    return trend


def detrend(trace: Trace, method: DetrendMethod) -> tuple[Trace, np.ndarray]:
    """Estimate and remove the slow trend; returns (detrended trace, trend).

    The trend series is aligned 1:1 with the input samples, so adding it back
    reconstructs the input exactly. Windowed variants slide one sample at a
    time with truncated windows at both ends.
    """
    x = trace.samples
    if method.kind == "poly":
        trend = _poly_trend(x, method.degree)
    else:
        w = _window_samples(method.window_s, trace.dt, x.size)
        if method.kind == "mean":
            trend = _moving_average_trend(x, w)
        elif method.kind == "median":
            trend = _moving_median_trend(x, w)
        else:
            trend = _histogram_mode_trend(x, w, method.bin_width)
    return trace.with_samples(x - trend), trend


def whiten(trace: Trace) -> Trace:
    """Subtract the mean and divide by the population standard deviation."""
    x = trace.samples
    if x.size < 2:
        raise ValueError("whitening needs at least 2 samples")
    # ptp, not std: the computed std of a bit-identical array can be a few
    # ulps above zero because the mean itself rounds.
    if np.ptp(x) == 0:
        raise NumericError("constant trace cannot be whitened")
    return trace.with_samples((x - x.mean()) / x.std())


def low_pass(trace: Trace, cutoff_hz: float) -> Trace:
    """Brick-wall FFT low-pass filter with unit DC gain.

    Frequency bins with |f| <= cutoff_hz are kept, all others zeroed.
    """
    x = trace.samples
    nyquist = 0.5 / trace.dt
    if not (0 < cutoff_hz < nyquist):
        raise ValueError(f"cutoff must lie in (0, {nyquist}) Hz, got {cutoff_hz}")
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, trace.dt)
    spectrum[freqs > cutoff_hz] = 0.0
    return trace.with_samples(np.fft.irfft(spectrum, x.size))


def _rows(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return X[None, :], True
    if X.ndim == 2:
        return X, False
    raise ValueError("expected a 1-D trace or a 2-D (n_wires, n_samples) array")


class Detrender(BaseEstimator, TransformerMixin):
    """Stateless detrending transformer over raw sample arrays.

    Accepts a 1-D trace or a 2-D (n_wires, n_samples) array and removes the
    per-row trend. The trend of the last transform is kept in ``trend_``.
    """

    def __init__(self, method="histogram", window_s=200.0, bin_width=2.0, degree=2, dt=1.0):
        self.method = method
        self.window_s = window_s
        self.bin_width = bin_width
        self.degree = degree
        self.dt = dt

    def _spec(self) -> DetrendMethod:
        return DetrendMethod(
            kind=self.method,
            degree=self.degree,
            window_s=self.window_s,
            bin_width=self.bin_width,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows, squeeze = _rows(X)
        out = np.empty_like(rows)
        trend = np.empty_like(rows)
        for i, row in enumerate(rows):
            detrended, tr = detrend(Trace(row, self.dt), self._spec())
            out[i] = detrended.samples
            trend[i] = tr
        self.trend_ = trend[0] if squeeze else trend
        return out[0] if squeeze else out


class Whitener(BaseEstimator, TransformerMixin):
    """Per-trace standardization: each row is scaled by its own mean and 1/N std.

    Unlike a train-time scaler this is instance-wise by design: detection
    operates on each trace's own statistics.
    """

    def __init__(self, dt=1.0):
        self.dt = dt

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows, squeeze = _rows(X)
        out = np.stack([whiten(Trace(row, self.dt)).samples for row in rows])
        return out[0] if squeeze else out


class LowPassFilter(BaseEstimator, TransformerMixin):
    """Brick-wall low-pass transformer (see :func:`low_pass`)."""

    def __init__(self, cutoff_hz=0.05, dt=1.0):
        self.cutoff_hz = cutoff_hz
        self.dt = dt

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows, squeeze = _rows(X)
        out = np.stack([low_pass(Trace(row, self.dt), self.cutoff_hz).samples for row in rows])
        return out[0] if squeeze else out
