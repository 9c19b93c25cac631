"""Naive Bayes fusion of per-modifier detections into agent posteriors.

Each cell of the response table is read as the conditional probability of a
detection on that modifier given the agent, so the per-modifier outcomes
combine multiplicatively (in log space) under the naive independence
assumption. The hypothesis list is exhaustive and exclusive by construction:
it carries a catch-all "New" agent and a "Buffer" (nothing present) column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import NumericError

PROB_CLAMP = 1e-6

DEFAULT_AGENTS = ("A1", "A2", "A3", "Other-A", "B1", "B2", "New", "Buffer")
DEFAULT_MODIFIERS = (
    "Anti-A1-1",
    "Anti-A1-2",
    "Anti-A2-1",
    "Anti-A3-1",
    "Anti-B1-1",
    "Anti-B2-1",
    "CellSurface",
)


@dataclass(frozen=True)
class ResponseTable:
    """Modifier x agent matrix of binding-response probabilities in [0, 1]."""

    modifiers: tuple
    agents: tuple
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modifiers", tuple(self.modifiers))
        object.__setattr__(self, "agents", tuple(self.agents))
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if not self.modifiers or not self.agents:
            raise ValueError("response table needs at least one modifier and one agent")
        if probs.shape != (len(self.modifiers), len(self.agents)):
            raise ValueError(
                f"probability matrix shape {probs.shape} does not match "
                f"{len(self.modifiers)} modifiers x {len(self.agents)} agents"
            )
        if np.any(probs < 0) or np.any(probs > 1) or not np.all(np.isfinite(probs)):
            raise ValueError("response probabilities must lie in [0, 1]")

    def __getitem__(self, key) -> float:
        modifier, agent = key
        return float(self.probs[self.modifiers.index(modifier), self.agents.index(agent)])

    def agent_index(self, agent: str) -> int:
        return self.agents.index(agent)


def default_table(
    specific: float = 0.98,
    family: float = 0.3,
    cross: float = 0.02,
    receptor: float = 0.95,
) -> ResponseTable:
    """Idealized response patterns for two families (3 + 2 variants).

    Specific bindings respond at 0.98; within-family and cross-family levels
    and the cell-surface-receptor response are package defaults on the same
    0-to-1 scale (close to unity / intermediate / near zero respectively).
    The receptor row responds strongly to every virus and not to buffer.
    """
    agents = DEFAULT_AGENTS
    families = {
        "A1": "A", "A2": "A", "A3": "A", "Other-A": "A",
        "B1": "B", "B2": "B",
    }
    antibody_target = {
        "Anti-A1-1": "A1",
        "Anti-A1-2": "A1",
        "Anti-A2-1": "A2",
        "Anti-A3-1": "A3",
        "Anti-B1-1": "B1",
        "Anti-B2-1": "B2",
    }
    probs = np.full((len(DEFAULT_MODIFIERS), len(agents)), cross)
    for i, modifier in enumerate(DEFAULT_MODIFIERS[:-1]):
        target = antibody_target[modifier]
        for j, agent in enumerate(agents):
            if agent == target:
                probs[i, j] = specific
            elif agent in families and families[agent] == families[target]:
                probs[i, j] = family
    receptor_row = len(DEFAULT_MODIFIERS) - 1
    for j, agent in enumerate(agents):
        probs[receptor_row, j] = cross if agent == "Buffer" else receptor
    return ResponseTable(DEFAULT_MODIFIERS, agents, probs)


@dataclass(frozen=True)
class Evidence:
    """Per-modifier detection outcomes, aligned with a table's modifier order.

    ``outcomes[m]`` is True for Detected. ``strengths`` optionally carries a
    soft response level in [0, 1] per modifier for soft-evidence fusion.
    """

    outcomes: tuple
    strengths: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(bool(o) for o in self.outcomes))
        if self.strengths is not None:
            strengths = tuple(float(s) for s in self.strengths)
            if len(strengths) != len(self.outcomes):
                raise ValueError("strengths must align with outcomes")
            if any(not 0 <= s <= 1 for s in strengths):
                raise ValueError("strengths must lie in [0, 1]")
            object.__setattr__(self, "strengths", strengths)

    @classmethod
    def from_dict(cls, table: ResponseTable, detected: dict) -> "Evidence":
        missing = set(table.modifiers) - set(detected)
        if missing:
            raise ValueError(f"evidence missing outcomes for {sorted(missing)}")
        return cls(tuple(bool(detected[m]) for m in table.modifiers))


@dataclass(frozen=True)
class Posterior:
    agents: tuple
    probs: np.ndarray

    def __getitem__(self, agent: str) -> float:
        return float(self.probs[self.agents.index(agent)])

    def top(self, k: int = 2) -> list:
        order = np.argsort(self.probs)[::-1][:k]
        return [(self.agents[i], float(self.probs[i])) for i in order]

    def argmax(self) -> str:
        return self.agents[int(np.argmax(self.probs))]

    def is_ambiguous(self, ratio: float = 3.0) -> bool:
        """True when the runner-up is within ``ratio`` of the winner (likely mix)."""
        (_, p1), (_, p2) = self.top(2)
        return p1 < ratio * p2


def posterior(
    table: ResponseTable,
    evidence: Evidence,
    prior=None,
    *,
    clamp: bool = True,
    use_strengths: bool = False,
) -> Posterior:
    """Agent posterior from the response table and per-modifier outcomes.

    Likelihoods multiply in log space: a Detected modifier contributes
    p[m][a], NotDetected contributes 1 - p[m][a]. With ``use_strengths`` and
    soft evidence, the contribution is p*s + (1-p)*(1-s). Table cells are
    clamped away from exact 0/1 by default so rounding in a hand-edited table
    cannot make all hypotheses impossible.
    """
    if len(evidence.outcomes) != len(table.modifiers):
        raise ValueError("evidence must carry one outcome per table modifier")
    if prior is None:
        prior = np.full(len(table.agents), 1.0 / len(table.agents))
    else:
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (len(table.agents),):
            raise ValueError("prior must have one entry per agent")
        if np.any(prior < 0) or not np.isclose(prior.sum(), 1.0):
            raise ValueError("prior must be a probability vector")

    p = table.probs
    if clamp:
        p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)

    with np.errstate(divide="ignore"):
        log_post = np.log(prior)
        for m in range(len(table.modifiers)):
            if use_strengths and evidence.strengths is not None:
                s = evidence.strengths[m]
                like = p[m] * s + (1.0 - p[m]) * (1.0 - s)
            else:
                like = p[m] if evidence.outcomes[m] else 1.0 - p[m]
            log_post += np.log(like)

    total = logsumexp(log_post)
    if not np.isfinite(total):
        raise NumericError("evidence impossible under table")
    return Posterior(table.agents, np.exp(log_post - total))


def noisy_or(probs) -> float:
    """Detection probability under independent simultaneous causes."""
    probs = np.asarray(probs, dtype=float)
    return float(1.0 - np.prod(1.0 - probs))


def simulate_evidence(
    table: ResponseTable,
    true_agents,
    noise_sigma: float,
    seed: int,
) -> Evidence:
    """Draw one noisy array response for a set of truly present agents.

    Per modifier, the nominal response is the noisy-OR of the present agents'
    table entries; Gaussian response noise of scale ``noise_sigma`` perturbs
    it and the outcome is Detected when the perturbed response reaches 0.5.
    So outcomes flip with a probability governed by noise_sigma, and at zero
    noise the evidence is the deterministic idealized pattern. "Buffer" (or
    an empty set) means nothing is present.
    """
    present = [a for a in true_agents if a != "Buffer"]
    unknown = set(present) - set(table.agents)
    if unknown:
        raise ValueError(f"unknown agents {sorted(unknown)}")
    cols = [table.agent_index(a) for a in present]
    rng = np.random.default_rng(seed)
    outcomes = []
    strengths = []
    for m in range(len(table.modifiers)):
        q = noisy_or(table.probs[m, cols]) if cols else 0.0
        r = q + noise_sigma * rng.standard_normal()
        outcomes.append(r >= 0.5)
        strengths.append(min(1.0, max(0.0, r)))
    return Evidence(tuple(outcomes), tuple(strengths))


def collapse_replicates(modifier_ids, outcomes) -> dict:
    """Majority-vote outcomes of identically modified wires (ties detect).

    Wires sharing a modifier are redundant replicates; fusion wants a single
    row per modifier. Correlated failures across replicates are not modeled.
    """
    votes: dict = {}
    for mod, out in zip(modifier_ids, outcomes):
        votes.setdefault(mod, []).append(bool(out))
    return {mod: sum(v) * 2 >= len(v) for mod, v in votes.items()}


class ArrayNaiveBayes(BaseEstimator, ClassifierMixin):
    """Scikit-learn-style classifier over binary evidence vectors.

    Rows of X are per-modifier outcomes (1 = detected) in the table's
    modifier order; classes are the table's agent hypotheses.
    """

    def __init__(self, table: ResponseTable | None = None, prior=None, clamp=True):
        self.table = table
        self.prior = prior
        self.clamp = clamp

    def fit(self, X=None, y=None):
        self.table_ = self.table if self.table is not None else default_table()
        self.classes_ = np.asarray(self.table_.agents)
        return self

    def _check_fitted(self):
        if not hasattr(self, "table_"):
            raise RuntimeError("ArrayNaiveBayes must be fitted before use")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X))
        rows = []
        for row in X:
            ev = Evidence(tuple(bool(v) for v in row))
            rows.append(posterior(self.table_, ev, self.prior, clamp=self.clamp).probs)
        return np.asarray(rows)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
