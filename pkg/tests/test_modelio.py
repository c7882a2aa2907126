import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icthmc.errors import ValidationError
from icthmc.modelio import load_model, load_query, model_to_dict, query_to_dict

BASE = {
    "states": ["a", "b"],
    "rate_set": {"type": "intervals", "lower": [[None, 1], [1, None]], "upper": [[None, 2], [3, None]]},
    "initial_credal": {"type": "vacuous"},
    "output_model": {"type": "gaussian", "params": {"a": {"mean": 0, "std": 1}, "b": {"mean": 2, "std": 0.5}}},
}
QUERY = {
    "observations": [{"time": 0.5, "point": 0.3}, {"time": 1.0, "point": 1.7}],
    "target_time": 1.2,
    "f": {"a": 1, "b": 0},
}


def _with(doc, **changes):
    out = json.loads(json.dumps(doc))
    out.update(changes)
    return out


def _same_model(m1, m2):
    assert m1.states == m2.states
    assert type(m1.rates) is type(m2.rates)
    if hasattr(m1.rates, "rows"):
        assert all(np.array_equal(a, b) for a, b in zip(m1.rates.rows, m2.rates.rows))
    else:
        assert np.array_equal(m1.rates.lower, m2.rates.lower)
        assert np.array_equal(m1.rates.upper, m2.rates.upper)
    assert np.array_equal(m1.initial.vertices, m2.initial.vertices)
    assert model_to_dict(m1)["output_model"] == model_to_dict(m2)["output_model"]


def test_defaults_and_shapes():
    model = load_model(BASE)
    query = load_query(QUERY, model)
    assert query.tolerance == 1e-6
    assert np.array_equal(model.initial.vertices, np.eye(2))
    assert query.observations.kind == "density"


def test_all_variants_round_trip():
    docs = [
        BASE,
        _with(BASE,
              rate_set={"type": "generators", "rows": {"a": [[-1, 1], [-2, 2]], "b": [[3, -3]]}},
              initial_credal={"type": "vertices", "pmfs": [[0.25, 0.75], [1, 0]]},
              output_model={"type": "categorical", "alphabet": ["h", "t"],
                            "pmfs": {"a": [0.5, 0.5], "b": [0.1, 0.9]}}),
        _with(BASE, output_model={"type": "tabulated", "grid": [0, 1, 2],
                                  "densities": {"a": [0.5, 0.5], "b": [1, 0]}}),
        _with(BASE, output_model={"type": "tabulated", "grid": [-1, 0, 1], "interpolation": "linear",
                                  "densities": {"a": [0.5, 0.5, 0.5], "b": [1, 0, 1]}}),
    ]
    for doc in docs:
        model = load_model(doc)
        again = load_model(json.loads(json.dumps(model_to_dict(model))))
        _same_model(model, again)


def test_query_round_trip_event_kinds():
    model = load_model(BASE)
    q = {"observations": [{"time": 0.0, "event": {"interval": [-1, 1]}},
                          {"time": 2.0, "event": {"interval": [0.5, 0.5]}}],
         "target_time": 0.7, "f": {"a": -1, "b": 4.5}, "tolerance": 1e-4}
    query = load_query(q, model)
    assert query_to_dict(query, model) == json.loads(json.dumps(query_to_dict(query, model)))
    again = load_query(query_to_dict(query, model), model)
    assert again.observations.observations == query.observations.observations
    assert np.array_equal(again.f, query.f) and again.tolerance == 1e-4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=5, unique=True),
       st.lists(st.sampled_from(["h", "t"]), min_size=1, max_size=2, unique=True),
       st.floats(-5, 5), st.floats(0, 10))
def test_categorical_query_round_trip(times, symbols, fval, target):
    model = load_model(_with(BASE, output_model={"type": "categorical", "alphabet": ["h", "t"],
                                                 "pmfs": {"a": [0.5, 0.5], "b": [0.1, 0.9]}}))
    doc = {"observations": [{"time": t, "event": symbols} for t in sorted(times)],
           "target_time": target, "f": {"a": fval, "b": 0.0}}
    query = load_query(doc, model)
    again = load_query(json.loads(json.dumps(query_to_dict(query, model))), model)
    assert again.observations.observations == query.observations.observations
    assert again.target_time == query.target_time and np.array_equal(again.f, query.f)


def test_issues_are_accumulated():
    doc = _with(BASE,
                rate_set={"type": "generators", "rows": {"a": [[-1, 1]], "c": [[1, -1]]}},
                initial_credal={"type": "vertices", "pmfs": [[0.5, 0.6]]},
                output_model={"type": "gaussian", "params": {"a": {"mean": 0, "std": -1},
                                                             "b": {"mean": 0, "std": 1}}})
    with pytest.raises(ValidationError) as err:
        load_model(doc)
    text = "\n".join(err.value.issues)
    assert len(err.value.issues) == 4
    assert "unknown state(s) c" in text and "missing state(s) b" in text
    assert "initial_credal" in text and "output_model" in text


def test_row_sum_names_state():
    doc = _with(BASE, rate_set={"type": "generators", "rows": {"a": [[-1, 1]], "b": [[1, -3]]}})
    with pytest.raises(ValidationError, match="state b"):
        load_model(doc)


def test_query_errors():
    model = load_model(BASE)
    with pytest.raises(ValidationError, match="strictly increasing"):
        load_query(_with(QUERY, observations=[{"time": 1, "point": 0}, {"time": 0.5, "point": 1}]), model)
    with pytest.raises(ValidationError, match="mixes"):
        load_query(_with(QUERY, observations=[{"time": 0, "point": 0},
                                              {"time": 1, "event": {"interval": [0, 1]}}]), model)
    with pytest.raises(ValidationError) as err:
        load_query({"observations": [{"time": 0, "event": ["h"]}], "f": {"a": 1}}, model)
    assert len(err.value.issues) == 3
