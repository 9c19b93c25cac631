"""Cross-correlation of noise-only residuals and ensemble noise subtraction.

Similarly modified wires share background noise (injections, flow changes,
electrical interference). Extracting noise-only residuals per wire, locating
the peak correlation lag per pair, and subtracting the lag-aligned ensemble
average removes part of that common-mode noise from a target wire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditioning import DetrendMethod, detrend, low_pass
from .exceptions import NumericError
from .trace import Trace


@dataclass(frozen=True)
class XcorrResult:
    """Normalized cross-correlation over lags; peak is the max-|value| entry."""

    lags: np.ndarray
    values: np.ndarray
    peak_lag: int
    peak_value: float

    def __post_init__(self):
        object.__setattr__(self, "lags", np.asarray(self.lags, dtype=int))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def noise_only(trace: Trace, method: DetrendMethod | None = None,
               lp_cutoff_hz: float = 0.05) -> Trace:
    """Noise-only residual: detrended trace minus its low-passed signal estimate."""
    if method is None:
        method = DetrendMethod.moving_median(60.0)
    detrended, _ = detrend(trace, method)
    signal_estimate = low_pass(detrended, lp_cutoff_hz)
    return detrended.with_samples(detrended.samples - signal_estimate.samples)


def xcorr(a: Trace, b: Trace, max_lag: int) -> XcorrResult:
    """Normalized cross-correlation of two traces over lags -max_lag..max_lag.

    Each lag's value is the correlation of the mean-removed overlapping
    segments, normalized by the overlap length and the product of the
    segments' standard deviations, so values stay in [-1, 1], large lags are
    not artificially damped, and anti-correlated wires show negative peaks.
    A positive peak lag means b trails a by that many samples.
    """
    xa = np.asarray(a.samples, dtype=float)
    xb = np.asarray(b.samples, dtype=float)
    n = xa.size
    if xb.size != n:
        raise ValueError("traces must have equal length")
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n}), got {max_lag}")
    if xa.std() == 0 or xb.std() == 0:
        raise NumericError("zero-variance trace has no defined correlation")

    lags = np.arange(-max_lag, max_lag + 1)
    values = np.empty(lags.size)
    for j, lag in enumerate(lags):
        if lag >= 0:
            sa, sb = xa[: n - lag], xb[lag:]
        else:
            sa, sb = xa[-lag:], xb[: n + lag]
        da = sa - sa.mean()
        db = sb - sb.mean()
        denom = sa.size * sa.std() * sb.std()
        values[j] = (da @ db) / denom if denom > 0 else 0.0

    peak_idx = int(np.argmax(np.abs(values)))
    return XcorrResult(lags, values, int(lags[peak_idx]), float(values[peak_idx]))


def peak_lag(target: Trace, reference: Trace, max_lag: int) -> int:
    """Peak-|correlation| lag of reference against target."""
    return xcorr(target, reference, max_lag).peak_lag


def ensemble_subtract(target: Trace, references, lags) -> Trace:
    """Subtract the lag-aligned average of reference noise estimates.

    Each reference is shifted by its own peak lag against the target (a lag
    of L aligns reference sample t+L with target sample t); shifted-out edges
    contribute zero. With no references the target is returned unchanged.
    """
    refs = list(references)
    lags = [int(l) for l in lags]
    if len(refs) != len(lags):
        raise ValueError("need exactly one lag per reference")
    if not refs:
        return target
    n = len(target)
    estimate = np.zeros(n)
    for ref, lag in zip(refs, lags):
        if len(ref) != n:
            raise ValueError("references must match the target length")
        shifted = np.zeros(n)
        if lag >= 0:
            shifted[: n - lag] = ref.samples[lag:]
        else:
            shifted[-lag:] = ref.samples[: n + lag]
        estimate += shifted
    estimate /= len(refs)
    return target.with_samples(target.samples - estimate)


def pairwise_xcorr(traces, max_lag: int) -> dict:
    """All-pairs correlation results keyed by wire index pair (i < j)."""
    results = {}
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            results[(i, j)] = xcorr(traces[i], traces[j], max_lag)
    return results
