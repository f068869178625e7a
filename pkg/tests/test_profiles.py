import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrs_prophet.control_solver import solve_mu_bar
from mrs_prophet.profiles import (Constant, Constrained, Custom, DiscreteSchedule, InfeasibleSchedule,
                                  ScheduleClampWarning, ThreeStepLimit, UnconstrainedOpt,
                                  constrained_g, discretize, k_for_profile, mrs_k_zero_schedule,
                                  parse_profile, raw_sizes, schedule_for, three_step,
                                  unconstrained_opt_g)

MU = solve_mu_bar()


def test_three_step_examples():
    assert three_step(3).f == (2, 3, 1)
    assert three_step(6).f == (5, 5, 7, 7, 3, 3)
    for n in (3, 9, 300):
        # max_i f(i) - i + 1 is n - 1; a budget of n samples is sufficient
        assert three_step(n).k_required == n - 1
        three_step(n).check(n)
    for n in (4, 5, 0):
        with pytest.raises(ValueError):
            three_step(n)


@pytest.mark.xfail(strict=True, reason="stated k_required = n contradicts k_required = max f(i)-i+1 = n-1")
def test_three_step_k_required_literal():
    assert three_step(6).k_required == 6


def test_unconstrained_opt_g_examples():
    assert unconstrained_opt_g(1.0, MU) == 0.0
    assert unconstrained_opt_g(0.0, 1.9202) == pytest.approx(1.4434, abs=1e-4)
    assert unconstrained_opt_g(0.75, MU) == pytest.approx(unconstrained_opt_g(0.0, MU) / 2, rel=1e-14)
    g = UnconstrainedOpt(MU)
    y = np.linspace(0, 1, 1001)
    assert np.all(np.diff(g(y)) < 0)
    assert g(0.0) == pytest.approx(2 / math.sqrt(MU))


def test_constrained_g_examples():
    b, t = 1.0, 0.317590
    assert constrained_g(t, b, t) == pytest.approx(b + t)
    assert constrained_g(np.nextafter(t, 1), b, t) == pytest.approx(b + t, rel=1e-12)
    assert constrained_g(1.0, b, t) == 0.0
    assert constrained_g(0.6, b, t) == pytest.approx(1.31759 * math.sqrt(0.4 / 0.68241), abs=1e-12)
    assert constrained_g(0.6, b, t) == pytest.approx(1.0087, abs=1e-4)
    # t = 1 is the linear branch everywhere
    assert constrained_g(0.9, 0.5, 1.0) == pytest.approx(1.4)


def test_constrained_shape():
    g = Constrained(0.8, 0.55)
    y = np.linspace(0, 1, 2001)
    v = g(y)
    up, down = y <= 0.55, y > 0.55
    assert np.allclose(np.diff(v[up]), np.diff(y[up]))
    assert np.all(np.diff(v[down]) < 0)


def test_discretize_examples():
    assert discretize(Constant(1.0), 5, 5).f == (5,) * 5
    s = discretize(UnconstrainedOpt(MU), 1000, 1444)
    # ceil(g(0.001) * 1000) = ceil(1442.57)
    assert s.f[0] == 1443 == math.ceil(float(UnconstrainedOpt(MU)(0.001)) * 1000)
    assert discretize(Constant(10.0), 4, 2).f == (2, 3, 4, 5)
    assert discretize(Constant(10.0), 4, 2).clamped
    with pytest.raises(ValueError):
        discretize(Constant(1.0), 4, 0)


@pytest.mark.xfail(strict=True, reason="stated f(1) = 1444 uses g(0) rounded up; g(0.001) * 1000 = 1442.57")
def test_discretize_opt_first_step_literal():
    assert discretize(UnconstrainedOpt(MU), 1000, 1444).f[0] == 1444


def test_clamp_low_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        s = discretize(UnconstrainedOpt(MU), 100, 200)
    assert s.f[-1] == 1
    assert any(issubclass(r.category, ScheduleClampWarning) for r in rec)


def test_round_trip_before_clamping():
    for g in (UnconstrainedOpt(MU), Constrained(1.0, 0.31759), ThreeStepLimit()):
        for n in (1000, 3000):
            i = np.arange(1, n + 1)
            raw = raw_sizes(g, n)
            assert np.all(np.abs(raw / n - g(i / n)) <= 1 / n + 1e-12)


def test_constrained_budget():
    for beta, t in [(1.0, 0.31759), (0.8, 0.551596), (0.5, 1.0)]:
        for n in (1000, 10000):
            k = k_for_profile(Constrained(beta, t), n)
            assert k <= beta * n + 2


@given(st.floats(0.05, 3.0), st.integers(1, 300), st.integers(1, 400))
@settings(max_examples=60, deadline=None)
def test_discretize_feasible(c, n, k):
    s = discretize(Constant(c), n, k, warn=False)
    f = s.array()
    i = np.arange(1, n + 1)
    assert np.all(f >= 1) and np.all(f <= k + i - 1)
    s.check(k)


def test_schedule_check_and_infeasible():
    s = DiscreteSchedule.from_sizes([3, 3, 3])
    assert s.k_required == 3
    with pytest.raises(InfeasibleSchedule) as ei:
        s.check(2)
    assert ei.value.step == 1
    with pytest.raises(InfeasibleSchedule) as ei:
        schedule_for("opt", 1000, 1000, clamp=False)
    assert ei.value.step == 1
    assert schedule_for("opt", 1000, 1000, clamp=True).clamped


def test_k_zero_schedule():
    s = mrs_k_zero_schedule(5)
    assert s.f == (0, 1, 2, 3, 4)
    s.check(0)


def test_parse_profile(tmp_path):
    assert isinstance(parse_profile("three-step"), ThreeStepLimit)
    assert parse_profile("opt", MU) == UnconstrainedOpt(MU)
    assert parse_profile("constrained:beta=1.0,t=0.31759") == Constrained(1.0, 0.31759)
    assert parse_profile("const:0.5") == Constant(0.5)
    f = tmp_path / "g.csv"
    f.write_text("y,g\n0,1\n0.5,2\n1,0\n")
    g = parse_profile(f"custom:@{f}")
    assert isinstance(g, Custom) and g(0.25) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        parse_profile("bogus")
