"""File formats: trace/detections/labels/table CSVs, scenario files, models.

All writers stamp a provenance comment line (command, seed, config hash) so
any artifact can be traced to the exact invocation that produced it; readers
skip comment lines. Numbers are written in shortest round-trip decimal form.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .bayes import Evidence, ResponseTable
from .hsmm import DOCK, NODOCK, UNLABELED, CoxianDuration, EmissionModel, HsmmModel
from .trace import (
    ArrayScenario,
    CommonSpike,
    DetectionEvent,
    EventSpec,
    NoiseSpec,
    Trace,
    TrendSpec,
    WireSpec,
)

MODEL_FORMAT = "nanodetect-hsmm-v1"


def fmt(value: float) -> str:
    """Shortest decimal representation that round-trips to the same float."""
    return repr(float(value))


def config_hash(params: dict) -> str:
    """Deterministic short hash of a parameter mapping."""
    canon = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def provenance(command: str, params: dict | None = None, seed=None) -> str:
    """One-line provenance header comment for output files."""
    parts = [f"# nanodetect {command}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    parts.append(f"config={config_hash(params or {})}")
    return " ".join(parts)


def _open_rows(path):
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            yield next(csv.reader([line]))


# -- traces -----------------------------------------------------------------

def write_trace_csv(path, trace: Trace, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write("time,conductance\n")
        for t, v in zip(trace.times, trace.samples):
            fh.write(f"{fmt(t)},{fmt(v)}\n")


def read_trace_csv(path) -> Trace:
    rows = list(_open_rows(path))
    if not rows or rows[0] != ["time", "conductance"]:
        raise ValueError(f"{path}: expected a 'time,conductance' trace CSV")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: trace needs at least 2 samples")
    times, samples = data[:, 0], data[:, 1]
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-9 * max(1.0, abs(dt))):
        raise ValueError(f"{path}: trace must be uniformly sampled")
    return Trace(samples, dt, float(times[0]))


def write_wires_csv(path, traces, header: str | None = None) -> None:
    if not traces:
        raise ValueError("need at least one wire")
    n = len(traces[0])
    if any(len(t) != n or t.dt != traces[0].dt for t in traces):
        raise ValueError("all wires must share length and dt")
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write("time," + ",".join(f"w{i + 1}" for i in range(len(traces))) + "\n")
        times = traces[0].times
        for i in range(n):
            fh.write(fmt(times[i]) + "," + ",".join(fmt(t.samples[i]) for t in traces) + "\n")


def read_wires_csv(path) -> list[Trace]:
    rows = list(_open_rows(path))
    if not rows or rows[0][0] != "time" or len(rows[0]) < 2:
        raise ValueError(f"{path}: expected a 'time,w1,w2,...' multi-wire CSV")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: traces need at least 2 samples")
    times = data[:, 0]
    dt = float(times[1] - times[0])
    if dt <= 0 or not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-9 * max(1.0, abs(dt))):
        raise ValueError(f"{path}: traces must be uniformly sampled")
    return [Trace(data[:, j], dt, float(times[0])) for j in range(1, data.shape[1])]


# -- detections ---------------------------------------------------------------

DETECTION_COLUMNS = ("onset", "duration", "score", "width", "amplitude", "tag")


def write_detections_csv(path, events, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write(",".join(DETECTION_COLUMNS) + "\n")
        for ev in events:
            fh.write(
                f"{fmt(ev.onset)},{fmt(ev.duration)},{fmt(ev.score)},"
                f"{fmt(ev.width)},{fmt(ev.amplitude)},{ev.tag}\n"
            )


def read_detections_csv(path) -> list[DetectionEvent]:
    rows = list(_open_rows(path))
    if not rows or tuple(rows[0]) != DETECTION_COLUMNS:
        raise ValueError(f"{path}: expected a detections CSV header {DETECTION_COLUMNS}")
    return [
        DetectionEvent(
            onset=float(r[0]),
            duration=float(r[1]),
            score=float(r[2]),
            width=float(r[3]),
            amplitude=float(r[4]),
            tag=r[5],
        )
        for r in rows[1:]
    ]


# -- HSMM labels --------------------------------------------------------------

def write_labels_csv(path, labels, header: str | None = None) -> None:
    """Write `index,label` rows for labeled samples; unlabeled indices are absent."""
    labels = np.asarray(labels, dtype=int)
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write("index,label\n")
        for i in np.flatnonzero(labels != UNLABELED):
            name = "dock" if labels[i] == DOCK else "nodock"
            fh.write(f"{i},{name}\n")


def read_labels_csv(path, length: int) -> np.ndarray:
    rows = list(_open_rows(path))
    if not rows or rows[0] != ["index", "label"]:
        raise ValueError(f"{path}: expected an 'index,label' labels CSV")
    labels = np.full(length, UNLABELED, dtype=int)
    for r in rows[1:]:
        idx = int(r[0])
        if not 0 <= idx < length:
            raise ValueError(f"{path}: label index {idx} outside the {length}-sample trace")
        name = r[1].strip().lower()
        if name not in ("dock", "nodock"):
            raise ValueError(f"{path}: label must be dock or nodock, got {r[1]!r}")
        labels[idx] = DOCK if name == "dock" else NODOCK
    return labels


# -- Bayes tables, evidence, posteriors ---------------------------------------

def write_table_csv(path, table: ResponseTable, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write("modifier," + ",".join(table.agents) + "\n")
        for i, modifier in enumerate(table.modifiers):
            fh.write(modifier + "," + ",".join(fmt(v) for v in table.probs[i]) + "\n")


def read_table_csv(path) -> ResponseTable:
    rows = list(_open_rows(path))
    if not rows or rows[0][0] != "modifier" or len(rows[0]) < 2:
        raise ValueError(f"{path}: expected 'modifier,<agents...>' response table CSV")
    agents = tuple(rows[0][1:])
    modifiers = tuple(r[0] for r in rows[1:])
    probs = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return ResponseTable(modifiers, agents, probs)


def write_evidence_csv(path, table: ResponseTable, evidence: Evidence,
                       header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        has_strength = evidence.strengths is not None
        fh.write("modifier,outcome" + (",strength\n" if has_strength else "\n"))
        for i, modifier in enumerate(table.modifiers):
            outcome = "detected" if evidence.outcomes[i] else "notdetected"
            if has_strength:
                fh.write(f"{modifier},{outcome},{fmt(evidence.strengths[i])}\n")
            else:
                fh.write(f"{modifier},{outcome}\n")


def read_evidence_csv(path, table: ResponseTable) -> Evidence:
    rows = list(_open_rows(path))
    if not rows or rows[0][:2] != ["modifier", "outcome"]:
        raise ValueError(f"{path}: expected a 'modifier,outcome[,strength]' evidence CSV")
    has_strength = len(rows[0]) > 2
    outcomes: dict = {}
    strengths: dict = {}
    for r in rows[1:]:
        name = r[1].strip().lower()
        if name in ("detected", "1", "yes", "true"):
            outcomes[r[0]] = True
        elif name in ("notdetected", "0", "no", "false"):
            outcomes[r[0]] = False
        else:
            raise ValueError(f"{path}: outcome must be detected/notdetected, got {r[1]!r}")
        if has_strength:
            strengths[r[0]] = float(r[2])
    missing = set(table.modifiers) - set(outcomes)
    if missing:
        raise ValueError(f"{path}: missing outcomes for {sorted(missing)}")
    ev = tuple(outcomes[m] for m in table.modifiers)
    if has_strength:
        return Evidence(ev, tuple(strengths[m] for m in table.modifiers))
    return Evidence(ev)


def write_posterior_csv(path, agents, probs, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        fh.write("agent,probability\n")
        for agent, p in zip(agents, probs):
            fh.write(f"{agent},{fmt(p)}\n")


def read_prior_csv(path, table: ResponseTable) -> np.ndarray:
    rows = list(_open_rows(path))
    if not rows or rows[0] != ["agent", "probability"]:
        raise ValueError(f"{path}: expected an 'agent,probability' prior CSV")
    values = {r[0]: float(r[1]) for r in rows[1:]}
    missing = set(table.agents) - set(values)
    if missing:
        raise ValueError(f"{path}: missing prior for {sorted(missing)}")
    return np.array([values[a] for a in table.agents])


# -- plot data -----------------------------------------------------------------

def emit_plot_data(path, series, header: str | None = None,
                   x=None, x_name: str = "x") -> None:
    """Plain-text columns for external plotting tools.

    ``series`` is a list of (name, y) pairs sharing one x column (``x``, or
    0..N-1 when omitted), or (name, x, y) triples written as per-series
    column pairs.
    """
    series = list(series)
    if not series:
        raise ValueError("no series to emit")
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        if all(len(s) == 2 for s in series):
            n = len(series[0][1])
            if any(len(y) != n for _, y in series):
                raise ValueError("shared-x series must have equal length")
            if x is None:
                xcol = [str(i) for i in range(n)]
            else:
                if len(x) != n:
                    raise ValueError("shared x column must match the series length")
                xcol = [fmt(v) for v in x]
            fh.write(x_name + "," + ",".join(name for name, _ in series) + "\n")
            for i in range(n):
                fh.write(xcol[i] + "," + ",".join(fmt(y[i]) for _, y in series) + "\n")
        elif all(len(s) == 3 for s in series):
            n = max(len(x) for _, x, _ in series)
            fh.write(",".join(f"{name}_x,{name}_y" for name, _, _ in series) + "\n")
            for i in range(n):
                cells = []
                for _, x, y in series:
                    if i < len(x):
                        cells.extend([fmt(x[i]), fmt(y[i])])
                    else:
                        cells.extend(["", ""])
                fh.write(",".join(cells) + "\n")
        else:
            raise ValueError("series must be uniformly (name, y) or (name, x, y)")


# -- scenario files --------------------------------------------------------------

def _trend_from_config(cfg) -> TrendSpec:
    if cfg is None:
        return TrendSpec.none()
    kind = cfg.get("type", "none")
    if kind == "none":
        return TrendSpec.none()
    if kind == "linear":
        return TrendSpec.linear(float(cfg["slope"]))
    if kind == "quadratic":
        return TrendSpec.quadratic(float(cfg.get("a", 0.0)), float(cfg.get("b", 0.0)))
    if kind == "steps":
        return TrendSpec.steps([float(t) for t in cfg["times"]],
                               [float(v) for v in cfg["levels"]])
    raise ValueError(f"unknown trend type {kind!r}")


def load_scenario(path) -> ArrayScenario:
    """Parse a YAML scenario file (see README for the grammar)."""
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict) or "wires" not in cfg:
        raise ValueError(f"{path}: scenario must be a mapping with a 'wires' list")
    wires = []
    for i, wire_cfg in enumerate(cfg["wires"]):
        events = []
        for ev in wire_cfg.get("events", []):
            kind = ev.get("kind", "binding")
            events.append(
                EventSpec(
                    kind,
                    float(ev["onset"]),
                    float(ev.get("duration", 1.0)),
                    float(ev["amplitude"]),
                )
            )
        noise_cfg = wire_cfg.get("noise", {}) or {}
        spikes = tuple(
            CommonSpike(float(s["time"]), float(s["amplitude"]), float(s.get("lag", 0.0)))
            for s in noise_cfg.get("common_spikes", [])
        )
        noise = NoiseSpec(
            white_sigma=float(noise_cfg.get("white_sigma", 0.0)),
            trend=_trend_from_config(noise_cfg.get("trend")),
            common_spikes=spikes,
            seed=int(noise_cfg.get("seed", i)),
        )
        wires.append(WireSpec(str(wire_cfg.get("modifier", f"w{i + 1}")), tuple(events), noise))
    return ArrayScenario(
        tuple(wires),
        duration=float(cfg["duration"]),
        dt=float(cfg.get("dt", 1.0)),
        baseline=float(cfg.get("baseline", 0.0)),
    )


# -- HSMM model files -------------------------------------------------------------

def save_model(path, model: HsmmModel, edges, scheme: str = "quantile",
               meta: dict | None = None) -> None:
    """Serialize a trained model plus its bin edges as structured text (JSON)."""
    doc = {
        "format": MODEL_FORMAT,
        "pi": model.pi.tolist(),
        "states": [],
        "bins": {"scheme": scheme, "edges": np.asarray(edges).tolist()},
    }
    for m, name in ((NODOCK, "nodock"), (DOCK, "dock")):
        dur = model.durations[m]
        em = model.emissions[m]
        doc["states"].append(
            {
                "name": name,
                "coxian": {
                    "stay": dur.stay.tolist(),
                    "advance": dur.advance.tolist(),
                    "exit": dur.exit.tolist(),
                },
                "emission": {
                    "weights": em.weights.tolist(),
                    "components": em.components.tolist(),
                },
                "entry": model.entry_dist(m).tolist(),
            }
        )
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path) -> tuple[HsmmModel, np.ndarray, str]:
    """Load a model file; returns (model, bin edges, binning scheme)."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} model file")
    durations = []
    emissions = []
    entries = []
    for state in doc["states"]:
        cox = state["coxian"]
        durations.append(
            CoxianDuration(np.array(cox["stay"]), np.array(cox["advance"]), np.array(cox["exit"]))
        )
        em = state["emission"]
        emissions.append(EmissionModel(np.array(em["components"]), np.array(em["weights"])))
        entries.append(np.array(state["entry"]))
    model = HsmmModel(np.array(doc["pi"]), tuple(durations), tuple(emissions), tuple(entries))
    return model, np.array(doc["bins"]["edges"]), doc["bins"]["scheme"]
