"""Two-state hidden semi-Markov model with discrete Coxian durations.

The latent macro states are docking and not-docking. Each macro state holds
for a duration drawn from a discrete-time Coxian distribution: a chain of M
phases where phase k stays put, advances to phase k+1, or exits the macro
state. Expanding macro states over their phases turns the HSMM into an
ordinary HMM on 2M states with emissions tied per macro state, so standard
forward-backward, Baum-Welch and Viterbi machinery applies. Observations are
discretized conductance symbols with multinomial (optionally mixture of
multinomials) emissions, and semi-supervised training clamps the macro state
at labeled samples while phases stay latent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import NumericError
from .trace import DetectionEvent, Trace

NODOCK = 0
DOCK = 1
UNLABELED = -1

_ROW_ATOL = 1e-9


@dataclass(frozen=True)
class CoxianDuration:
    """Discrete Coxian duration law over M sequential phases.

    Per phase k: stay[k] + advance[k] + exit[k] = 1, with advance on the last
    phase structurally zero. The holding duration is the number of steps until
    exit (absorption) when entering at a given phase.
    """

    stay: np.ndarray
    advance: np.ndarray
    exit: np.ndarray

    def __post_init__(self):
        stay = np.asarray(self.stay, dtype=float)
        advance = np.asarray(self.advance, dtype=float)
        exit_ = np.asarray(self.exit, dtype=float)
        object.__setattr__(self, "stay", stay)
        object.__setattr__(self, "advance", advance)
        object.__setattr__(self, "exit", exit_)
        if not (stay.shape == advance.shape == exit_.shape) or stay.ndim != 1 or stay.size < 1:
            raise ValueError("stay/advance/exit must be equal-length 1-D vectors")
        probs = np.stack([stay, advance, exit_])
        if np.any(probs < -_ROW_ATOL) or np.any(probs > 1 + _ROW_ATOL):
            raise ValueError("Coxian probabilities must lie in [0, 1]")
        if not np.allclose(stay + advance + exit_, 1.0, atol=_ROW_ATOL):
            raise ValueError("each Coxian phase row must sum to 1")
        if abs(advance[-1]) > _ROW_ATOL:
            raise ValueError("the last phase cannot advance (advance[M-1] must be 0)")

    @property
    def n_phases(self) -> int:
        return self.stay.size

    def phase_matrix(self) -> np.ndarray:
        """Sub-stochastic M x M transition matrix among phases."""
        m = self.n_phases
        t = np.diag(self.stay)
        for k in range(m - 1):
            t[k, k + 1] = self.advance[k]
        return t

    @classmethod
    def geometric(cls, exit_prob: float) -> "CoxianDuration":
        if not 0 < exit_prob <= 1:
            raise ValueError("exit probability must lie in (0, 1]")
        return cls(np.array([1.0 - exit_prob]), np.array([0.0]), np.array([exit_prob]))

    @classmethod
    def with_mean(cls, mean: float, phases: int = 2) -> "CoxianDuration":
        """Simple initializer with the requested mean holding time.

        Each phase leaves with probability p, split evenly between advancing
        and exiting (the last phase only exits); p is solved so the expected
        absorption time from phase 1 equals ``mean``.
        """
        if phases < 1:
            raise ValueError("phases must be >= 1")
        if mean <= 1:
            raise ValueError("mean duration must exceed 1 sample")
        p = min(0.9, (2.0 - 2.0 ** (1 - phases)) / mean)
        stay = np.full(phases, 1.0 - p)
        advance = np.full(phases, p / 2.0)
        exit_ = np.full(phases, p / 2.0)
        advance[-1] = 0.0
        exit_[-1] = p
        return cls(stay, advance, exit_)


def duration_pmf(dur: CoxianDuration, start_phase: int, t: int) -> float:
    """P(exit exactly at step t) entering the Coxian at start_phase (1-based)."""
    if not 1 <= start_phase <= dur.n_phases:
        raise ValueError(f"start phase must lie in [1, {dur.n_phases}]")
    if t < 1:
        raise ValueError("t must be >= 1")
    alpha = np.zeros(dur.n_phases)
    alpha[start_phase - 1] = 1.0
    tmat = dur.phase_matrix()
    for _ in range(t - 1):
        alpha = alpha @ tmat
    return float(alpha @ dur.exit)


def duration_pmf_series(dur: CoxianDuration, start_phase: int, t_max: int) -> np.ndarray:
    """Vector of duration_pmf for t = 1..t_max (computed in one sweep)."""
    if not 1 <= start_phase <= dur.n_phases:
        raise ValueError(f"start phase must lie in [1, {dur.n_phases}]")
    alpha = np.zeros(dur.n_phases)
    alpha[start_phase - 1] = 1.0
    tmat = dur.phase_matrix()
    out = np.empty(t_max)
    for i in range(t_max):
        out[i] = alpha @ dur.exit
        alpha = alpha @ tmat
    return out


@dataclass(frozen=True)
class EmissionModel:
    """Multinomial or mixture-of-multinomials emission over K symbols.

    components : (C, K) per-component symbol probabilities
    weights    : (C,) mixture weights
    """

    components: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        comps = np.atleast_2d(np.asarray(self.components, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", weights)
        if comps.shape[1] < 2:
            raise ValueError("emission model needs K >= 2 symbols")
        if weights.shape != (comps.shape[0],):
            raise ValueError("one weight per mixture component required")
        if np.any(comps < 0) or np.any(weights < 0):
            raise ValueError("probabilities must be nonnegative")
        if not np.allclose(comps.sum(axis=1), 1.0, atol=_ROW_ATOL):
            raise ValueError("each component must sum to 1")
        if not np.isclose(weights.sum(), 1.0, atol=_ROW_ATOL):
            raise ValueError("mixture weights must sum to 1")

    @classmethod
    def multinomial(cls, probs) -> "EmissionModel":
        probs = np.asarray(probs, dtype=float)
        return cls(probs[None, :], np.array([1.0]))

    @property
    def n_symbols(self) -> int:
        return self.components.shape[1]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def probs(self) -> np.ndarray:
        """Mixed per-symbol probabilities, shape (K,)."""
        return self.weights @ self.components


@dataclass(frozen=True)
class HsmmModel:
    """Two-macro-state HSMM; index 0 is NoDock, index 1 is Dock.

    On exit from one macro state the chain enters the other (deterministic
    swap for two states) at a phase drawn from that state's entry
    distribution, a point mass on phase 1 by default.
    """

    pi: np.ndarray
    durations: tuple
    emissions: tuple
    entry: tuple | None = None

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "durations", tuple(self.durations))
        object.__setattr__(self, "emissions", tuple(self.emissions))
        if pi.shape != (2,) or np.any(pi < 0) or not np.isclose(pi.sum(), 1.0, atol=_ROW_ATOL):
            raise ValueError("pi must be a 2-state probability vector")
        if len(self.durations) != 2 or len(self.emissions) != 2:
            raise ValueError("need one duration and one emission model per macro state")
        if self.emissions[0].n_symbols != self.emissions[1].n_symbols:
            raise ValueError("both macro states must share the symbol alphabet")
        if self.entry is not None:
            entry = tuple(np.asarray(e, dtype=float) for e in self.entry)
            object.__setattr__(self, "entry", entry)
            for m, e in enumerate(entry):
                if e.shape != (self.durations[m].n_phases,):
                    raise ValueError("entry distribution must have one entry per phase")
                if np.any(e < 0) or not np.isclose(e.sum(), 1.0, atol=_ROW_ATOL):
                    raise ValueError("entry distributions must be probability vectors")

    @property
    def n_symbols(self) -> int:
        return self.emissions[0].n_symbols

    def entry_dist(self, m: int) -> np.ndarray:
        if self.entry is not None:
            return self.entry[m]
        e = np.zeros(self.durations[m].n_phases)
        e[0] = 1.0
        return e


def expand(model: HsmmModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expanded HMM over (macro, phase) states.

    Returns (transition matrix A, initial distribution, macro index per
    expanded state). State (m, k) self-loops with stay, advances with
    advance, and exits to the other macro state's entry phases with exit.
    """
    sizes = [model.durations[0].n_phases, model.durations[1].n_phases]
    offsets = [0, sizes[0]]
    n_states = sizes[0] + sizes[1]
    a = np.zeros((n_states, n_states))
    init = np.zeros(n_states)
    macro_of = np.zeros(n_states, dtype=int)
    for m in (0, 1):
        dur = model.durations[m]
        other = 1 - m
        entry_other = model.entry_dist(other)
        for k in range(sizes[m]):
            i = offsets[m] + k
            macro_of[i] = m
            a[i, i] = dur.stay[k]
            if k < sizes[m] - 1:
                a[i, i + 1] = dur.advance[k]
            a[i, offsets[other] : offsets[other] + sizes[other]] += dur.exit[k] * entry_other
        init[offsets[m] : offsets[m] + sizes[m]] = model.pi[m] * model.entry_dist(m)
    return a, init, macro_of


def emission_matrix(model: HsmmModel) -> np.ndarray:
    """Per-expanded-state symbol probabilities (tied across phases), (S, K)."""
    rows = []
    for m in (0, 1):
        mixed = model.emissions[m].probs()
        rows.extend([mixed] * model.durations[m].n_phases)
    return np.asarray(rows)


def _check_obs(model: HsmmModel, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=int)
    if obs.ndim != 1 or obs.size == 0:
        raise ValueError("observation sequence must be non-empty and 1-D")
    if obs.min() < 0 or obs.max() >= model.n_symbols:
        raise ValueError(f"symbols must lie in [0, {model.n_symbols})")
    return obs


def _check_labels(labels, t: int) -> np.ndarray | None:
    if labels is None:
        return None
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (t,):
        raise ValueError("labels must align 1:1 with observations")
    if not np.all(np.isin(labels, (NODOCK, DOCK, UNLABELED))):
        raise ValueError("labels must be 0 (nodock), 1 (dock) or -1 (unlabeled)")
    return labels


def _masked_emissions(model, obs, labels) -> np.ndarray:
    """(T, S) emission likelihoods with macro clamping at labeled samples."""
    _, _, macro_of = expand(model)
    b = emission_matrix(model)[:, obs].T.copy()
    if labels is not None:
        for m in (NODOCK, DOCK):
            rows = labels == m
            if rows.any():
                b[np.ix_(rows, macro_of != m)] = 0.0
    return b


def forward_likelihood(model: HsmmModel, obs, labels=None) -> float:
    """Total log-likelihood by the scaled forward recursion.

    Labeled samples clamp the macro state (the phase stays latent); a clamped
    path of zero probability is an error.
    """
    obs = _check_obs(model, obs)
    labels = _check_labels(labels, obs.size)
    a, init, _ = expand(model)
    b = _masked_emissions(model, obs, labels)
    alpha = init * b[0]
    loglik = 0.0
    for t in range(obs.size):
        if t > 0:
            alpha = (alpha @ a) * b[t]
        c = alpha.sum()
        if c <= 0:
            if labels is not None:
                raise NumericError(f"labels inconsistent with model support at t={t}")
            raise NumericError(f"observation impossible under model at t={t}")
        alpha /= c
        loglik += np.log(c)
    return float(loglik)


def forward_backward(model: HsmmModel, obs, labels=None):
    """Scaled forward-backward pass.

    Returns (log-likelihood, gamma (T, S) state posteriors, xi_sum (S, S)
    expected transition counts summed over time).
    """
    obs = _check_obs(model, obs)
    labels = _check_labels(labels, obs.size)
    a, init, _ = expand(model)
    b = _masked_emissions(model, obs, labels)
    t_len, n_states = b.shape

    alpha = np.empty((t_len, n_states))
    scales = np.empty(t_len)
    alpha[0] = init * b[0]
    for t in range(t_len):
        if t > 0:
            alpha[t] = (alpha[t - 1] @ a) * b[t]
        c = alpha[t].sum()
        if c <= 0:
            if labels is not None:
                raise NumericError(f"labels inconsistent with model support at t={t}")
            raise NumericError(f"observation impossible under model at t={t}")
        scales[t] = c
        alpha[t] /= c

    beta = np.empty((t_len, n_states))
    beta[-1] = 1.0
    for t in range(t_len - 2, -1, -1):
        beta[t] = a @ (b[t + 1] * beta[t + 1]) / scales[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    weighted = b[1:] * beta[1:] / scales[1:, None]
    xi_sum = (alpha[:-1].T @ weighted) * a
    return float(np.log(scales).sum()), gamma, xi_sum


def _floor_normalize(counts: np.ndarray, floor: float) -> np.ndarray:
    total = counts.sum()
    if total <= 0:
        probs = np.full(counts.size, 1.0 / counts.size)
    else:
        probs = counts / total
    probs = np.maximum(probs, floor)
    return probs / probs.sum()


def em_train(
    initial: HsmmModel,
    obs,
    labels=None,
    max_iters: int = 50,
    tol: float = 1e-6,
    *,
    emission_floor: float = 1e-6,
) -> tuple[HsmmModel, list[float]]:
    """Baum-Welch on the expanded chain with macro clamping and tying.

    Emissions are tied across the phases of a macro state; the Coxian rows
    are re-estimated from expected stay/advance/exit counts. Returns the
    trained model and the per-iteration log-likelihood history (evaluated at
    the start of each iteration), which is nondecreasing up to numerical
    noise. With max_iters=0 the initial model is returned unchanged.
    """
    obs = _check_obs(initial, obs)
    labels = _check_labels(labels, obs.size)
    if labels is not None and np.any(labels >= 0):
        present = set(labels[labels >= 0].tolist())
        if present != {NODOCK, DOCK}:
            raise ValueError("partial labels must include at least one sample of each macro state")

    model = initial
    history: list[float] = []
    sizes = [model.durations[0].n_phases, model.durations[1].n_phases]
    offsets = [0, sizes[0]]
    k_symbols = model.n_symbols

    for _ in range(max_iters):
        loglik, gamma, xi_sum = forward_backward(model, obs, labels)
        if history and abs(loglik - history[-1]) < tol:
            history.append(loglik)
            break
        history.append(loglik)

        new_pi = np.array([gamma[0, offsets[m] : offsets[m] + sizes[m]].sum() for m in (0, 1)])
        new_pi = _floor_normalize(new_pi, 1e-6)

        new_durations = []
        new_emissions = []
        for m in (0, 1):
            lo, hi = offsets[m], offsets[m] + sizes[m]
            gamma_m = gamma[:, lo:hi].sum(axis=1)

            em = model.emissions[m]
            if em.n_components == 1:
                counts = np.bincount(obs, weights=gamma_m, minlength=k_symbols)
                new_emissions.append(
                    EmissionModel.multinomial(_floor_normalize(counts, emission_floor))
                )
            else:
                comp_like = em.components[:, obs] * em.weights[:, None]
                denom = comp_like.sum(axis=0)
                denom[denom == 0] = 1.0
                resp = comp_like / denom * gamma_m[None, :]
                weights = _floor_normalize(resp.sum(axis=1), 1e-6)
                comps = np.stack(
                    [
                        _floor_normalize(
                            np.bincount(obs, weights=resp[c], minlength=k_symbols),
                            emission_floor,
                        )
                        for c in range(em.n_components)
                    ]
                )
                new_emissions.append(EmissionModel(comps, weights))

            other_lo, other_hi = offsets[1 - m], offsets[1 - m] + sizes[1 - m]
            stay = np.empty(sizes[m])
            advance = np.zeros(sizes[m])
            exit_ = np.empty(sizes[m])
            old = model.durations[m]
            for k in range(sizes[m]):
                i = lo + k
                n_stay = xi_sum[i, i]
                n_adv = xi_sum[i, i + 1] if k < sizes[m] - 1 else 0.0
                n_exit = xi_sum[i, other_lo:other_hi].sum()
                total = n_stay + n_adv + n_exit
                if total <= 0:
                    stay[k], advance[k], exit_[k] = old.stay[k], old.advance[k], old.exit[k]
                else:
                    stay[k] = n_stay / total
                    advance[k] = n_adv / total
                    exit_[k] = n_exit / total
            new_durations.append(CoxianDuration(stay, advance, exit_))

        model = HsmmModel(new_pi, tuple(new_durations), tuple(new_emissions), model.entry)

    return model, history


def viterbi_path(model: HsmmModel, obs, labels=None) -> tuple[np.ndarray, float]:
    """Most probable expanded-state path and its log-probability."""
    obs = _check_obs(model, obs)
    labels = _check_labels(labels, obs.size)
    a, init, _ = expand(model)
    b = _masked_emissions(model, obs, labels)
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
        log_init = np.log(init)
    t_len, n_states = log_b.shape
    delta = log_init + log_b[0]
    back = np.zeros((t_len, n_states), dtype=int)
    for t in range(1, t_len):
        cand = delta[:, None] + log_a
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(n_states)] + log_b[t]
    path = np.empty(t_len, dtype=int)
    path[-1] = int(np.argmax(delta))
    best = float(delta[path[-1]])
    if not np.isfinite(best):
        raise NumericError("no admissible state path for the observations")
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


def dock_runs(labels: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, stop) runs of dock samples in a 0/1 label array."""
    labels = np.asarray(labels)
    padded = np.concatenate(([0], (labels == DOCK).astype(int), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def viterbi_decode(
    model: HsmmModel,
    obs,
    *,
    dt: float = 1.0,
    t0: float = 0.0,
    short_run_samples: int = 3,
    long_run_samples: int = 600,
) -> tuple[np.ndarray, list[DetectionEvent]]:
    """Decode macro labels and report maximal dock runs as events.

    Runs shorter than ``short_run_samples`` are tagged "spike-like" (a brief
    stay in the docking state looks like a noisy spike) and runs longer than
    ``long_run_samples`` are tagged "anomalous" (e.g. a broken wire); tagging
    never suppresses an event.
    """
    path, _ = viterbi_path(model, obs)
    _, _, macro_of = expand(model)
    labels = macro_of[path]
    events = []
    for start, stop in dock_runs(labels):
        run = stop - start
        tag = ""
        if run < short_run_samples:
            tag = "spike-like"
        elif run > long_run_samples:
            tag = "anomalous"
        events.append(
            DetectionEvent(onset=t0 + start * dt, duration=run * dt, tag=tag)
        )
    return labels.astype(np.int8), events


def discretize(trace, k: int, scheme: str = "quantile") -> tuple[np.ndarray, np.ndarray]:
    """Bin a conditioned trace into K symbols; returns (symbols, bin edges).

    The K-1 interior edges are returned for reuse at decode time. Under the
    quantile scheme, inputs with fewer distinct values than K fall back to
    one bin per distinct value with a warning.
    """
    x = trace.samples if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    if k < 2:
        raise ValueError("need at least 2 bins")
    if scheme not in ("equal", "quantile"):
        raise ValueError(f"unknown binning scheme {scheme!r}")
    lo, hi = x.min(), x.max()
    if lo == hi:
        edges = lo + np.arange(1, k)
    elif scheme == "equal":
        edges = np.linspace(lo, hi, k + 1)[1:-1]
    else:
        distinct = np.unique(x)
        if distinct.size < k:
            warnings.warn(
                f"only {distinct.size} distinct values for {k} quantile bins; "
                "falling back to distinct-value bins"
            )
            edges = 0.5 * (distinct[:-1] + distinct[1:])
        else:
            edges = np.quantile(x, np.arange(1, k) / k)
            unique_edges = np.unique(edges)
            if unique_edges.size < edges.size:
                warnings.warn("duplicate quantile edges collapsed; fewer bins than requested")
                edges = unique_edges
    return apply_bins(x, edges), edges


def apply_bins(x, edges) -> np.ndarray:
    """Map values to symbols with stored bin edges (monotone in the value)."""
    x = x.samples if isinstance(x, Trace) else np.asarray(x, dtype=float)
    return np.searchsorted(np.asarray(edges), x, side="right").astype(int)


def labels_from_events(events, n: int, dt: float, t0: float = 0.0,
                       background: int = UNLABELED) -> np.ndarray:
    """Per-sample label array marking event intervals as dock.

    Samples outside every event get ``background`` (unlabeled by default; pass
    NODOCK for a fully labeled sequence).
    """
    labels = np.full(n, background, dtype=int)
    for ev in events:
        i0 = max(0, int(round((ev.onset - t0) / dt)))
        i1 = min(n, int(round((ev.end - t0) / dt)))
        labels[i0:i1] = DOCK
    return labels


def sample_hsmm(model: HsmmModel, t_len: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw (symbols, macro labels) of length t_len from the generative model."""
    rng = np.random.default_rng(seed)
    a, init, macro_of = expand(model)
    n_states = init.size
    mixed = [model.emissions[m].probs() for m in (0, 1)]
    obs = np.empty(t_len, dtype=int)
    macros = np.empty(t_len, dtype=np.int8)
    state = rng.choice(n_states, p=init)
    for t in range(t_len):
        m = macro_of[state]
        macros[t] = m
        obs[t] = rng.choice(mixed[m].size, p=mixed[m])
        state = rng.choice(n_states, p=a[state])
    return obs, macros


def init_model(
    obs,
    k: int,
    labels=None,
    *,
    phases: int = 2,
    n_components: int = 1,
    mean_duration: float = 20.0,
    seed: int = 0,
) -> HsmmModel:
    """Starting model for EM: labeled-histogram emissions, mean-20 durations.

    With labels, each macro state's emission starts from the add-one-smoothed
    histogram of its labeled samples; otherwise from uniform plus 1% seeded
    jitter. Dock-state mixtures (n_components > 1) start from jittered copies
    of the base vector.
    """
    obs = np.asarray(obs, dtype=int)
    rng = np.random.default_rng(seed)

    def base_vector(m: int) -> np.ndarray:
        if labels is not None:
            sel = np.asarray(labels) == m
            if sel.any():
                counts = np.bincount(obs[sel], minlength=k).astype(float) + 1.0
                return counts / counts.sum()
        probs = 1.0 + 0.01 * rng.uniform(-1.0, 1.0, k)
        return probs / probs.sum()

    emissions = []
    for m in (NODOCK, DOCK):
        base = base_vector(m)
        c = n_components if m == DOCK else 1
        if c == 1:
            emissions.append(EmissionModel.multinomial(base))
        else:
            comps = np.stack([base * (1.0 + 0.05 * rng.uniform(-1.0, 1.0, k)) for _ in range(c)])
            comps /= comps.sum(axis=1, keepdims=True)
            emissions.append(EmissionModel(comps, np.full(c, 1.0 / c)))

    durations = (
        CoxianDuration.with_mean(mean_duration, phases),
        CoxianDuration.with_mean(mean_duration, phases),
    )
    return HsmmModel(np.array([0.5, 0.5]), durations, tuple(emissions))


class CoxianHsmm(BaseEstimator):
    """Semi-supervised HSMM estimator over conditioned 1-D traces.

    ``fit(X, y)`` discretizes X (storing the bin edges for decode time),
    builds the starting model from the partial labels y (1 dock, 0 nodock,
    -1 unlabeled, or None) and runs EM. ``predict`` returns per-sample dock
    labels for new data, ``decode_events`` the dock intervals as events.
    """

    def __init__(self, n_phases=2, n_bins=8, scheme="quantile", n_components=1,
                 max_iter=50, tol=1e-6, mean_duration_init=20.0, random_state=0,
                 short_run_samples=3, long_run_samples=600, dt=1.0):
        self.n_phases = n_phases
        self.n_bins = n_bins
        self.scheme = scheme
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.mean_duration_init = mean_duration_init
        self.random_state = random_state
        self.short_run_samples = short_run_samples
        self.long_run_samples = long_run_samples
        self.dt = dt

    def fit(self, X, y=None):
        x = np.asarray(X, dtype=float)
        obs, edges = discretize(x, self.n_bins, self.scheme)
        labels = None if y is None else np.asarray(y, dtype=int)
        initial = init_model(
            obs,
            k=edges.size + 1,
            labels=labels,
            phases=self.n_phases,
            n_components=self.n_components,
            mean_duration=self.mean_duration_init,
            seed=self.random_state,
        )
        self.edges_ = edges
        self.model_, self.history_ = em_train(
            initial, obs, labels, max_iters=self.max_iter, tol=self.tol
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("CoxianHsmm must be fitted before use")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        obs = apply_bins(np.asarray(X, dtype=float), self.edges_)
        labels, _ = viterbi_decode(
            self.model_, obs, dt=self.dt,
            short_run_samples=self.short_run_samples,
            long_run_samples=self.long_run_samples,
        )
        return labels

    def decode_events(self, X, t0: float = 0.0) -> list[DetectionEvent]:
        self._check_fitted()
        obs = apply_bins(np.asarray(X, dtype=float), self.edges_)
        _, events = viterbi_decode(
            self.model_, obs, dt=self.dt, t0=t0,
            short_run_samples=self.short_run_samples,
            long_run_samples=self.long_run_samples,
        )
        return events

    def score(self, X, y=None) -> float:
        self._check_fitted()
        obs = apply_bins(np.asarray(X, dtype=float), self.edges_)
        return forward_likelihood(self.model_, obs)
