import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxdde import core
from maxdde.core import Parameters, ProblemError, ftilde_inverse, problem_from_dict


def test_ex2_normalization(ex2):
    assert ex2.shift == pytest.approx(-math.pi / 2)
    assert ex2.beta == pytest.approx(math.pi)
    assert ex2.offset == pytest.approx(0.0, abs=1e-12)
    assert ex2.period == pytest.approx(2 * math.pi)
    # f(s) = 1 + cos s after the shift; ftilde divides by |a+b| = 0.68
    s = np.linspace(0, 2 * math.pi, 9)
    assert np.allclose(ex2.ftilde(s), (1 + np.cos(s)) / 0.68, atol=1e-12)
    assert ex2.ftilde_max == pytest.approx(2 / 0.68)


def test_ex1_normalization(ex1):
    assert ex1.params.a == 0 and ex1.params.b == -1
    assert ex1.ftilde(0.0) == pytest.approx(ex1.ftilde_max)
    assert ex1.ftilde(ex1.beta) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("a,b,h,stable,branch", [
    (0.32, -1.0, 1.5 * math.pi, True, "second"),  # ah > 1 here
    (0.32, -1.0, 3.0, True, "first"),
    (0.0, -1.0, 1.0, True, "first"),
    (0.5, 0.2, 1.0, False, None),
    (1.0, -3.0, 2.0, True, "second"),
])
def test_stability_branches(a, b, h, stable, branch):
    res = core.stability_check(Parameters(a, b, h))
    assert res.stable is stable and res.branch == branch


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 10))
def test_stable_first_branch_needs_negative_sum(a, b, h):
    if a + b == 0:
        return
    res = core.stability_check(Parameters(a, b, h))
    if res.branch == "first":
        assert a + b < 0


def test_parameter_validation():
    with pytest.raises(ProblemError):
        Parameters(0.0, -1.0, 0.0)
    with pytest.raises(ProblemError):
        Parameters(1.0, -1.0, 1.0)


def test_hedonic_mapping():
    assert core.map_hedonic_params(0.68, 1.0) == pytest.approx((0.32, -1.0))


@given(st.floats(0.0, 1.0))
def test_ftilde_inverse_round_trip(frac):
    prob = core.preset("ex2")
    p = frac * prob.ftilde_max
    q = ftilde_inverse(prob, p)
    assert 0.0 <= q <= prob.beta
    assert float(prob.ftilde(q)) == pytest.approx(p, abs=1e-10)


def test_ftilde_inverse_monotone(ex2):
    ps = np.linspace(0, ex2.ftilde_max, 50)
    qs = [ftilde_inverse(ex2, p) for p in ps]
    assert np.all(np.diff(qs) < 0)
    with pytest.raises(ProblemError):
        ftilde_inverse(ex2, -0.5)


@given(st.floats(-20, 20))
def test_raw_time_round_trip(t):
    prob = core.preset("ex2")
    assert prob.to_raw_time(prob.from_raw_time(t)) == pytest.approx(t, abs=1e-12)
    assert prob.to_raw_value(prob.from_raw_value(t)) == pytest.approx(t, abs=1e-12)


def test_problem_file_round_trip(tmp_path, ex2):
    definition = core.problem_to_dict(ex2)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(definition))
    prob = core.load_problem(path)
    s = np.linspace(0, 6, 13)
    assert np.allclose(prob.ftilde(s), ex2.ftilde(s), atol=1e-12)
    assert prob.params == ex2.params


def test_table_forcing_matches_sine():
    t = np.linspace(0, 2 * math.pi, 200, endpoint=False)
    definition = {"a": 0.32, "b": -1.0, "h": 1.5 * math.pi,
            "forcing": {"type": "table", "period": 2 * math.pi,
                        "samples": np.column_stack([t, 1 - np.sin(t)]).tolist()}}
    prob = problem_from_dict(definition)
    assert prob.beta == pytest.approx(math.pi, abs=1e-5)
    assert prob.ftilde_max == pytest.approx(2 / 0.68, abs=1e-5)


@pytest.mark.parametrize("definition", [
    {"a": 0.3},
    {"a": 0.3, "b": -1, "h": 1, "forcing": {"type": "nope"}},
    {"a": 0.3, "b": -1, "h": -1, "forcing": {"type": "one_minus_sin"}},
    {"a": 0.3, "b": -1, "h": 1, "forcing": {"type": "table", "samples": [[0, 1], [1, 2]]}},
])
def test_bad_problem_definitions(definition):
    with pytest.raises(ProblemError):
        problem_from_dict(definition)


def test_non_sine_like_forcing_rejected():
    t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    definition = {"a": 0.3, "b": -1, "h": 1,
            "forcing": {"type": "table", "samples": np.column_stack([t, np.sin(3 * t)]).tolist()}}
    with pytest.raises(ProblemError, match="sine-like"):
        problem_from_dict(definition)


def test_bad_problem_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ProblemError):
        core.load_problem(path)
    with pytest.raises(ProblemError):
        core.preset("ex3")
