"""Conductance traces, binding events, and the ground-truth trace simulator.

A trace is a uniformly sampled conductance series in nanosiemens. Synthetic
traces are built from a baseline, an optional slow trend, rectangular binding
events (which superimpose), brief transient spikes, and white Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SPIKE = "spike"
BINDING = "binding"

SPIKE_SHAPES = ("impulse", "triangle")


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled conductance series.

    samples : conductance values in nS
    dt      : sample interval in seconds (> 0)
    t0      : time of the first sample in seconds
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("trace samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("trace samples must be finite")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be a positive finite number, got {self.dt}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt

    def with_samples(self, samples: np.ndarray) -> "Trace":
        return replace(self, samples=np.asarray(samples, dtype=float))


@dataclass(frozen=True)
class EventSpec:
    """Ground-truth binding or transient-spike event.

    Amplitudes are signed; binding polarity depends on solution pH and the
    modifier charge, so negative-going events are merely the common case.
    """

    kind: str
    onset: float
    duration: float
    amplitude: float

    def __post_init__(self):
        if self.kind not in (SPIKE, BINDING):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("event duration must be > 0")
        if self.onset < 0:
            raise ValueError("event onset must be >= 0")

    @property
    def end(self) -> float:
        return self.onset + self.duration

    @classmethod
    def binding(cls, onset: float, duration: float, amplitude: float) -> "EventSpec":
        return cls(BINDING, onset, duration, amplitude)

    @classmethod
    def spike(cls, onset: float, amplitude: float, duration: float = 1.0) -> "EventSpec":
        return cls(SPIKE, onset, duration, amplitude)


@dataclass(frozen=True)
class TrendSpec:
    """Slow background drift added to a synthetic trace.

    kind is one of "none", "linear", "quadratic", "steps". A steps trend is 0
    before the first change time and holds ``levels[k]`` from ``times[k]`` on.
    """

    kind: str = "none"
    slope: float = 0.0
    a: float = 0.0
    b: float = 0.0
    times: tuple = ()
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "linear", "quadratic", "steps"):
            raise ValueError(f"unknown trend kind {self.kind!r}")
        if self.kind == "steps":
            if len(self.times) != len(self.levels):
                raise ValueError("steps trend needs one level per change time")
            if len(self.times) and np.any(np.diff(self.times) <= 0):
                raise ValueError("steps trend times must be strictly increasing")

    @classmethod
    def none(cls) -> "TrendSpec":
        return cls()

    @classmethod
    def linear(cls, slope: float) -> "TrendSpec":
        return cls(kind="linear", slope=slope)

    @classmethod
    def quadratic(cls, a: float, b: float) -> "TrendSpec":
        return cls(kind="quadratic", a=a, b=b)

    @classmethod
    def steps(cls, times, levels) -> "TrendSpec":
        return cls(kind="steps", times=tuple(times), levels=tuple(levels))

    def render(self, elapsed: np.ndarray) -> np.ndarray:
        """Evaluate the trend on elapsed-time values (seconds from trace start)."""
        if self.kind == "none":
            return np.zeros_like(elapsed)
        if self.kind == "linear":
            return self.slope * elapsed
        if self.kind == "quadratic":
            return self.a * elapsed**2 + self.b * elapsed
        idx = np.searchsorted(np.asarray(self.times), elapsed, side="right")
        level = np.concatenate(([0.0], np.asarray(self.levels, dtype=float)))
        return level[idx]


@dataclass(frozen=True)
class CommonSpike:
    """A spike injected across wires; lag shifts it on this particular wire."""

    time: float
    amplitude: float
    lag: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    white_sigma: float = 0.0
    trend: TrendSpec = field(default_factory=TrendSpec)
    common_spikes: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.white_sigma) and self.white_sigma >= 0):
            raise ValueError("white_sigma must be finite and >= 0")
        object.__setattr__(self, "common_spikes", tuple(self.common_spikes))


@dataclass(frozen=True)
class WireSpec:
    modifier: str
    events: tuple = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class ArrayScenario:
    """Multi-wire simulation scenario; all wires share duration and dt."""

    wires: tuple
    duration: float
    dt: float
    baseline: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))
        if not self.wires:
            raise ValueError("scenario needs at least one wire")
        if not (self.dt > 0 and self.duration > 0):
            raise ValueError("scenario duration and dt must be > 0")


@dataclass
class DetectionEvent:
    """A detected event: onset/duration in seconds, measured attributes as available.

    ``score`` is detector-specific (matched-filter sigma units), ``width`` the
    template width for matched filtering, ``amplitude`` the extremal excursion
    for threshold detection, ``tag`` a decoder annotation.
    """

    onset: float
    duration: float
    amplitude: float = 0.0
    score: float = 0.0
    width: float = 0.0
    tag: str = ""

    @property
    def end(self) -> float:
        return self.onset + self.duration


def _sample_index(time: float, dt: float, n: int) -> int:
    idx = int(round(time / dt))
    if idx < 0 or idx >= n:
        raise ValueError(f"event at t={time} s falls outside the trace")
    return idx


def _add_spike(out: np.ndarray, onset: float, amplitude: float, dt: float, shape: str) -> None:
    n = out.size
    i = _sample_index(onset, dt, n)
    if shape == "impulse":
        out[i] += amplitude
    else:
        out[i] += amplitude
        if i - 1 >= 0:
            out[i - 1] += amplitude / 2.0
        if i + 1 < n:
            out[i + 1] += amplitude / 2.0


def synthesize_trace(
    events,
    noise: NoiseSpec | None = None,
    duration: float = 0.0,
    dt: float = 1.0,
    *,
    baseline: float = 0.0,
    t0: float = 0.0,
    spike_shape: str = "impulse",
    spike_max_duration: float = 2.0,
) -> Trace:
    """Render ground-truth events plus trend and white noise into a trace.

    Bindings contribute their amplitude over [onset, onset + duration) with
    event edges snapped to the nearest sample; overlapping bindings add.
    Spikes render as a single sample or a 3-sample triangular pulse depending
    on ``spike_shape``; their duration field is validated against
    ``spike_max_duration`` but does not stretch the pulse. Output is
    deterministic for a given noise seed.
    """
    if noise is None:
        noise = NoiseSpec()
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if spike_shape not in SPIKE_SHAPES:
        raise ValueError(f"spike_shape must be one of {SPIKE_SHAPES}")
    n = int(round(duration / dt))
    if n <= 0:
        raise ValueError("duration must cover at least one sample")

    out = np.full(n, float(baseline))
    elapsed = dt * np.arange(n)
    out += noise.trend.render(elapsed)

    for ev in events:
        if ev.end > duration + 1e-9:
            raise ValueError(
                f"event ending at t={ev.end} s extends past the {duration} s trace"
            )
        if ev.kind == BINDING:
            i0 = int(round(ev.onset / dt))
            i1 = int(round(ev.end / dt))
            out[i0:i1] += ev.amplitude
        else:
            if ev.duration > spike_max_duration:
                raise ValueError(
                    f"transient spike duration {ev.duration} s exceeds the "
                    f"{spike_max_duration} s maximum"
                )
            _add_spike(out, ev.onset, ev.amplitude, dt, spike_shape)

    for cs in noise.common_spikes:
        ratio = cs.lag / dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("common-spike lag must be an integer multiple of dt")
        _add_spike(out, cs.time + cs.lag, cs.amplitude, dt, spike_shape)

    if noise.white_sigma > 0:
        rng = np.random.default_rng(noise.seed)
        out += rng.normal(0.0, noise.white_sigma, n)

    return Trace(out, dt, t0)


def synthesize_array(scenario: ArrayScenario, **kwargs) -> list[Trace]:
    """Render every wire of a scenario; one trace per wire, shared time base.

    Per-wire white-noise streams are independent as long as the wires carry
    distinct noise seeds (see :func:`derive_wire_seeds`).
    """
    return [
        synthesize_trace(
            wire.events,
            wire.noise,
            scenario.duration,
            scenario.dt,
            baseline=scenario.baseline,
            **kwargs,
        )
        for wire in scenario.wires
    ]


def derive_wire_seeds(global_seed: int, n_wires: int) -> list[int]:
    """Derive one independent sub-seed per wire from a single global seed."""
    state = np.random.SeedSequence(global_seed).generate_state(n_wires)
    return [int(s) for s in state]
