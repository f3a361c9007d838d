import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxdde import integrate, window_max
from maxdde.core import ProblemError
from maxdde.integrator import (detect_qualified_maxima, sliding_window_max, steps_per_window)


@pytest.fixture(scope="module")
def run(ex2):
    return integrate(ex2, 1.5, 40.0)


def test_step_snapping(ex2):
    h = ex2.params.h
    assert steps_per_window(h, None) == 2000
    assert steps_per_window(h, h / 500 * 1.0000001) == 500
    with pytest.raises(ProblemError):
        steps_per_window(h, h / 50)
    with pytest.raises(ProblemError):
        steps_per_window(h, -1.0)


def test_rejects_bad_input(ex2):
    with pytest.raises(ProblemError):
        integrate(ex2, float("nan"), 5.0)
    with pytest.raises(ProblemError):
        integrate(ex2, 1.0, -1.0)
    with pytest.raises(ValueError):
        integrate(ex2, 1.0, 5.0, mode="sideways")


def test_dense_output_hits_nodes(run):
    t = run.times[run.n_hist::97]
    assert np.allclose(run(t), run.values[run.n_hist::97], rtol=0, atol=1e-14)


def test_history_is_kept(run):
    t = np.linspace(-run.h, 0, 11)
    assert np.allclose(run(t), 1.5)


def test_callable_history(ex2):
    r = integrate(ex2, lambda t: 1.0 + 0.1 * np.sin(t), 10.0)
    assert r(-1.0) == pytest.approx(1.0 + 0.1 * math.sin(-1.0), abs=1e-10)
    assert r.deriv(-1.0) == pytest.approx(0.1 * math.cos(-1.0), abs=1e-6)


def test_derivative_satisfies_equation(run, ex2):
    a, b = ex2.params.a, ex2.params.b
    for t in np.linspace(1.0, 39.0, 25):
        rhs = a * run(t) + b * window_max(run, t) + float(ex2.forcing(t))
        assert run.deriv(t) == pytest.approx(rhs, abs=1e-6)


@given(st.floats(0.0, 40.0))
@settings(max_examples=60)
def test_window_max_matches_scan(t):
    from maxdde import preset
    r = _cached_run(preset)
    ts = np.linspace(t - r.h, t, 30001)
    brute = float(np.max(r(ts)))
    assert window_max(r, t) == pytest.approx(brute, abs=1e-8)
    assert window_max(r, t) >= brute - 1e-12


_RUN = {}


def _cached_run(preset):
    if "r" not in _RUN:
        _RUN["r"] = integrate(preset("ex2"), 1.5, 40.0)
    return _RUN["r"]


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60), st.integers(0, 10))
def test_sliding_window_max_deque(values, width):
    v = np.array(values)
    naive = [v[max(0, i - width):i + 1].max() for i in range(len(v))]
    assert np.array_equal(sliding_window_max(v, width), naive)


def test_stored_window_max_matches_dense(run):
    idx = np.arange(run.n_hist, run.values.size, 503)
    for i in idx:
        assert run.window_max[i] == pytest.approx(window_max(run, run.times[i]), abs=1e-9)


def test_events_are_qualified_maxima(run, ex2):
    assert len(run.events) >= 3
    T = ex2.period
    for e in run.events:
        assert abs(e.value - float(ex2.ftilde(e.tau))) < 1e-4
        assert 0.0 <= e.tau % T < ex2.beta
        assert e.branch_j == math.floor(e.tau / T)
        assert e.value >= window_max(run, e.tau) - 1e-9
        assert run(e.tau + e.epsilon_used) < e.value


def test_max_events_stops_early(ex2):
    r = integrate(ex2, 1.5, 200.0, max_events=2)
    assert len(r.events) == 2
    assert r.t_end < 200.0
    full = integrate(ex2, 1.5, 40.0)
    assert [e.tau for e in r.events] == pytest.approx([e.tau for e in full.events[:2]], abs=1e-9)


def test_event_epsilon_is_configurable(run):
    ev = detect_qualified_maxima(run, eps=0.05)
    assert all(e.epsilon_used == 0.05 for e in ev)
    assert [e.tau for e in ev] == pytest.approx([e.tau for e in run.events], abs=1e-9)


def test_delay_mode_is_linear(ex2):
    # u' = a u + b u(t - h) + f is linear in the history
    h = ex2.params.h
    r1 = integrate(ex2, 1.0, 2 * h, mode="delay")
    r2 = integrate(ex2, 2.0, 2 * h, mode="delay")
    r3 = integrate(ex2, 3.0, 2 * h, mode="delay")
    t = np.linspace(0, 2 * h, 41)
    assert np.allclose(r3(t) - r2(t), r2(t) - r1(t), atol=1e-9)


def test_no_grazing_for_generic_start(run):
    assert run.grazing == ()
