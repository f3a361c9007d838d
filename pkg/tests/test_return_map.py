import math

import numpy as np
import pytest

from maxdde.core import ProblemError
from maxdde import return_map as rm

from oracles import heun_first_peak

R0 = 2.2372776488


@pytest.fixture(scope="module")
def discs(ex2):
    return rm.find_discontinuities(ex2)


@pytest.fixture(scope="module")
def fixed1(ex2):
    return rm.fixed_points(ex2, 1)


def test_R0_frozen_and_oracle(ex2):
    r0 = rm.R_value(ex2, 0.0)
    assert r0 == pytest.approx(R0, abs=1e-8)
    assert rm.R_value(ex2, r0) == pytest.approx(0.4567862253, abs=1e-8)
    assert heun_first_peak(0.0)[1] == pytest.approx(r0, abs=1e-4)
    assert heun_first_peak(r0)[1] == pytest.approx(rm.R_value(ex2, r0), abs=1e-4)


def test_event_time_matches_oracle(ex2):
    s = rm.eval_R(ex2, 0.0)
    tau_raw, _ = heun_first_peak(0.0)
    assert ex2.to_raw_time(s.nu_star) == pytest.approx(tau_raw, abs=5e-3)
    assert s.branch_j == math.floor(s.nu_star / ex2.period)


def test_sample_structure(ex2):
    for p in (0.0, 0.5, 1.5, 2.5):
        s = rm.eval_R(ex2, p)
        assert s.q <= s.lam <= s.mu <= s.nu_star
        assert float(ex2.ftilde(s.q)) == pytest.approx(p, abs=1e-10)
        row = s.as_row()
        assert set(row) >= {"p", "q", "lambda", "mu", "nu_star", "R", "Rprime", "branch_j"}


def test_p_outside_K(ex2):
    with pytest.raises(ProblemError):
        rm.eval_R(ex2, -0.1)
    with pytest.raises(ProblemError):
        rm.eval_R(ex2, ex2.ftilde_max + 0.1)


@pytest.mark.parametrize("p", [0.05, 0.3, 0.6, 0.9, 1.05, 1.5, 2.0, 2.8])
def test_derivative_matches_finite_difference(ex2, p):
    d = rm.derivative_R(ex2, p)
    fd = rm.finite_difference_R(ex2, p, step=1e-5)
    assert d == pytest.approx(fd, rel=2e-3, abs=2e-4)


def test_elementary_derivative_form(ex2):
    for p in (0.3, 0.9):
        s = rm.eval_R(ex2, p)
        if s.mu - s.q <= ex2.params.h:
            assert rm.derivative_fr(ex2, s.q, s.mu, s.nu_star) == pytest.approx(s.Rprime, rel=1e-8)


def test_ex1_fixed_point(ex1):
    assert rm.R_value(ex1, 1.0) == pytest.approx(1.0, abs=1e-8)
    want = (1 - 7 * math.pi / 4 + math.pi ** 2 / 32) * math.exp(-math.pi / 4)
    assert rm.derivative_R(ex1, 1.0) == pytest.approx(want, abs=1e-6)
    assert rm.finite_difference_R(ex1, 1.0, step=1e-4) == pytest.approx(want, abs=1e-3)


def test_beta1_and_q0(ex2):
    b1 = rm.beta1(ex2)
    assert ex2.to_raw_time(b1) == pytest.approx(0.39289753, abs=1e-7)
    assert float(ex2.ftilde(b1)) == pytest.approx(0.90754887, abs=1e-7)
    assert rm.condition_fs(ex2, b1) == pytest.approx(0.0, abs=1e-9)
    q0 = rm.q0_root(ex2)
    assert ex2.to_raw_time(q0) == pytest.approx(1.18459423, abs=1e-7)
    assert float(ex2.ftilde(q0)) == pytest.approx(0.10831426, abs=1e-7)
    assert rm.q0_applicable(ex2)


def test_discontinuities(ex2, discs):
    assert [d.p for d in discs] == pytest.approx([1.19242378, 2.60345690], abs=1e-7)
    for d in discs:
        assert d.contract_ok
        assert d.j_right == d.j_left + 1
        assert d.R_at == pytest.approx(R0, abs=1e-6)
    # the same jump seen by the brute-force oracle
    assert heun_first_peak(discs[0].p - 2e-3)[1] < 0.05
    assert heun_first_peak(discs[0].p + 2e-3)[1] == pytest.approx(R0, abs=5e-3)


def test_fixed_points(ex2, fixed1):
    assert [f.p for f in fixed1] == pytest.approx([1.03774178, 1.64799322], abs=1e-7)
    assert fixed1[0].multiplier == pytest.approx(-5.5414, abs=1e-3)
    assert fixed1[1].multiplier == pytest.approx(-2.1685, abs=1e-3)
    for f in fixed1:
        assert abs(f.residual) < 1e-9
        assert heun_first_peak(f.p)[1] == pytest.approx(f.p, abs=1e-4)


def test_iterate_tracks_branches(ex2):
    orbit, branches = rm.iterate(ex2, 0.0, 3)
    assert orbit[1] == pytest.approx(R0, abs=1e-8)
    assert len(branches) == 3
    assert all(j >= 0 for j in branches)


def test_return_map_grid(ex2):
    samples = rm.return_map_grid(ex2, 5, with_derivative=False)
    assert [s.p for s in samples] == pytest.approx(np.linspace(0, ex2.ftilde_max, 5))
    with pytest.raises(ValueError):
        rm.return_map_grid(ex2, 1)


def test_simpson():
    assert rm.simpson(np.sin, 0.0, math.pi, panels=200) == pytest.approx(2.0, abs=1e-8)
