"""JSON model and query files.

Model file::

    {"states": ["a", "b"],
     "rate_set": {"type": "intervals", "lower": [[null, 1], [1, null]],
                                       "upper": [[null, 2], [3, null]]},
     "initial_credal": {"type": "vacuous"},
     "output_model": {"type": "gaussian",
                      "params": {"a": {"mean": 0, "std": 1}, "b": {"mean": 2, "std": 1}}}}

``rate_set`` may instead be ``{"type": "generators", "rows": {state: [row, ...]}}``;
``initial_credal`` may be ``{"type": "vertices", "pmfs": [[...], ...]}``;
``output_model`` may be ``{"type": "categorical", "alphabet": [...], "pmfs": {state: [...]}}``
or ``{"type": "tabulated", "grid": [...], "densities": {state: [...]},
"interpolation": "step" | "linear"}``.

Query file::

    {"observations": [{"time": 0.5, "event": ["x", "y"]},
                      {"time": 1.0, "event": {"interval": [-1, 1]}}],
     "target_time": 1.0, "f": {"a": 1, "b": 0}, "tolerance": 1e-6}

Point observations are written ``{"time": t, "point": y}``.  A sequence is
either all events or all points.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from icthmc.errors import InputError, ValidationError
from icthmc.inference import Model, Query
from icthmc.outputs import (
    Categorical,
    CategoricalEvent,
    GaussianDensity,
    IntervalEvent,
    Observation,
    ObservationSequence,
    Point,
    TabulatedDensity,
    likelihood_vector,
)
from icthmc.propagation import CredalSet
from icthmc.ratesets import GeneratorRows, IntervalRows, StateSpace

DEFAULT_TOLERANCE = 1e-6


def read_json(path) -> dict:
    """Read a JSON document; ``OSError``/``ValueError`` propagate to the caller."""
    with open(Path(path), encoding="utf-8") as fh:
        return json.load(fh)


def _per_state(mapping, states: StateSpace, what: str, issues: list) -> list | None:
    """Order a ``{state: value}`` mapping by the state space, checking integrity."""
    if not isinstance(mapping, dict):
        issues.append(f"{what}: expected an object keyed by state")
        return None
    unknown = [k for k in mapping if k not in states.labels]
    missing = [s for s in states.labels if s not in mapping]
    if unknown:
        issues.append(f"{what}: unknown state(s) {', '.join(map(str, unknown))}")
    if missing:
        issues.append(f"{what}: missing state(s) {', '.join(missing)}")
    if unknown or missing:
        return None
    return [mapping[s] for s in states.labels]


def _matrix(raw, n: int, what: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != n or any(
        not isinstance(r, list) or len(r) != n for r in raw
    ):
        raise InputError(f"{what} must be a {n}x{n} matrix")
    return np.array([[np.nan if v is None else float(v) for v in row] for row in raw])


def _parse_rates(raw, states: StateSpace, issues: list):
    kind = raw.get("type") if isinstance(raw, dict) else None
    n = states.size
    try:
        if kind == "generators":
            rows = _per_state(raw.get("rows"), states, "rate_set.rows", issues)
            if rows is None:
                return None
            return GeneratorRows(rows, labels=states.labels)
        if kind == "intervals":
            lower = _matrix(raw.get("lower"), n, "rate_set.lower")
            upper = _matrix(raw.get("upper"), n, "rate_set.upper")
            return IntervalRows(lower, upper, labels=states.labels)
    except (InputError, TypeError, ValueError) as exc:
        issues.append(f"rate_set: {exc}")
        return None
    issues.append(f"rate_set: unknown type {kind!r} (expected 'generators' or 'intervals')")
    return None


def _parse_credal(raw, states: StateSpace, issues: list):
    kind = raw.get("type") if isinstance(raw, dict) else None
    if kind == "vacuous":
        return CredalSet.vacuous(states.size)
    if kind == "vertices":
        try:
            pmfs = raw.get("pmfs")
            cs = CredalSet(pmfs)
            if cs.size != states.size:
                raise InputError(f"vertices have {cs.size} entries, expected {states.size}")
            return cs
        except (InputError, TypeError, ValueError) as exc:
            issues.append(f"initial_credal: {exc}")
            return None
    issues.append(f"initial_credal: unknown type {kind!r} (expected 'vertices' or 'vacuous')")
    return None


def _parse_output(raw, states: StateSpace, issues: list):
    kind = raw.get("type") if isinstance(raw, dict) else None
    try:
        if kind == "categorical":
            pmfs = _per_state(raw.get("pmfs"), states, "output_model.pmfs", issues)
            if pmfs is None:
                return None
            return Categorical(raw.get("alphabet") or [], pmfs)
        if kind == "gaussian":
            params = _per_state(raw.get("params"), states, "output_model.params", issues)
            if params is None:
                return None
            return GaussianDensity([p["mean"] for p in params], [p["std"] for p in params])
        if kind == "tabulated":
            dens = _per_state(raw.get("densities"), states, "output_model.densities", issues)
            if dens is None:
                return None
            return TabulatedDensity(raw.get("grid"), dens, raw.get("interpolation", "step"))
    except (InputError, KeyError, TypeError, ValueError) as exc:
        issues.append(f"output_model: {exc}")
        return None
    issues.append(
        f"output_model: unknown type {kind!r} (expected 'categorical', 'gaussian' or 'tabulated')"
    )
    return None


def load_model(doc: dict) -> Model:
    """Build a :class:`Model`, reporting every violated invariant at once."""
    if not isinstance(doc, dict):
        raise ValidationError(["model: top level must be an object"])
    issues: list[str] = []
    try:
        states = StateSpace(tuple(doc.get("states") or ()))
    except InputError as exc:
        raise ValidationError([f"states: {exc}"]) from None
    rates = _parse_rates(doc.get("rate_set"), states, issues)
    initial = _parse_credal(doc.get("initial_credal"), states, issues)
    output = _parse_output(doc.get("output_model"), states, issues)
    if issues:
        raise ValidationError(issues)
    try:
        return Model(states, rates, initial, output)
    except InputError as exc:
        raise ValidationError([f"model: {exc}"]) from None


def _parse_observation(raw, i: int) -> Observation:
    if not isinstance(raw, dict) or "time" not in raw:
        raise InputError(f"observation {i} needs a 'time'")
    if "point" in raw:
        y = raw["point"]
        payload = Point(y if isinstance(y, str) else float(y))
    elif "event" in raw:
        ev = raw["event"]
        if isinstance(ev, dict):
            a, b = ev["interval"]
            payload = IntervalEvent(float(a), float(b))
        else:
            payload = CategoricalEvent(ev)
    else:
        raise InputError(f"observation {i} needs an 'event' or a 'point'")
    return Observation(float(raw["time"]), payload)


def load_query(doc: dict, model: Model) -> Query:
    if not isinstance(doc, dict):
        raise ValidationError(["query: top level must be an object"])
    issues: list[str] = []
    observations = None
    try:
        raw_obs = doc.get("observations")
        if not isinstance(raw_obs, list):
            raise InputError("'observations' must be a list")
        observations = ObservationSequence(
            [_parse_observation(o, i) for i, o in enumerate(raw_obs)]
        )
        for o in observations:
            likelihood_vector(model.output, o)
    except (InputError, KeyError, TypeError, ValueError) as exc:
        issues.append(f"observations: {exc}")
        observations = None
    f = _per_state(doc.get("f"), model.states, "f", issues)
    target = doc.get("target_time")
    tol = doc.get("tolerance", DEFAULT_TOLERANCE)
    if not isinstance(target, (int, float)) or isinstance(target, bool):
        issues.append("target_time: must be a number")
    if not isinstance(tol, (int, float)) or isinstance(tol, bool):
        issues.append("tolerance: must be a number")
    if issues:
        raise ValidationError(issues)
    try:
        return Query(observations, float(target), np.array(f, dtype=float), float(tol))
    except (InputError, TypeError, ValueError) as exc:
        raise ValidationError([f"query: {exc}"]) from None


# -- serialisation ----------------------------------------------------------------


def model_to_dict(model: Model) -> dict:
    labels = model.states.labels
    rates = model.rates
    if isinstance(rates, GeneratorRows):
        rate_doc = {
            "type": "generators",
            "rows": {s: rates.rows[i].tolist() for i, s in enumerate(labels)},
        }
    else:
        def with_null_diag(m):
            rows = m.tolist()
            for i in range(len(rows)):
                rows[i][i] = None
            return rows

        rate_doc = {
            "type": "intervals",
            "lower": with_null_diag(rates.lower),
            "upper": with_null_diag(rates.upper),
        }
    out = model.output
    if isinstance(out, Categorical):
        out_doc = {
            "type": "categorical",
            "alphabet": list(out.alphabet),
            "pmfs": {s: out.pmfs[i].tolist() for i, s in enumerate(labels)},
        }
    elif isinstance(out, GaussianDensity):
        out_doc = {
            "type": "gaussian",
            "params": {
                s: {"mean": float(out.means[i]), "std": float(out.stds[i])}
                for i, s in enumerate(labels)
            },
        }
    else:
        out_doc = {
            "type": "tabulated",
            "grid": out.grid.tolist(),
            "densities": {s: out.densities[i].tolist() for i, s in enumerate(labels)},
            "interpolation": out.interpolation,
        }
    return {
        "states": list(labels),
        "rate_set": rate_doc,
        "initial_credal": {"type": "vertices", "pmfs": model.initial.vertices.tolist()},
        "output_model": out_doc,
    }


def _observation_to_dict(o: Observation) -> dict:
    p = o.payload
    if isinstance(p, Point):
        return {"time": o.time, "point": p.value}
    if isinstance(p, IntervalEvent):
        return {"time": o.time, "event": {"interval": [p.a, p.b]}}
    return {"time": o.time, "event": sorted(p.symbols)}


def query_to_dict(query: Query, model: Model) -> dict:
    return {
        "observations": [_observation_to_dict(o) for o in query.observations],
        "target_time": query.target_time,
        "f": {s: float(v) for s, v in zip(model.states.labels, query.f)},
        "tolerance": query.tolerance,
    }
