import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siwkit import presets as P
from siwkit.geometry import generate_tee_divider, validate_layout
from siwkit.optimizer import (
    TuningProblem,
    baseline_objective,
    default_xp_bounds,
    evaluate,
    optimize_post,
)

L = P.DIVIDER["arm_length"]
BOUNDS = (10e-3, 60e-3)


def bowl(center, depth=-20.0):
    return lambda x, r: depth + 1e4 * (x - center) ** 2


def stub_problem(fn, bounds=BOUNDS, **kw):
    return TuningProblem(P.RSIW, L, bounds, evaluator=fn, **kw)


def test_finds_stub_minimum():
    res = optimize_post(stub_problem(bowl(20.57e-3)))
    assert res.x_p == pytest.approx(20.57e-3, abs=0.05e-3)
    assert res.converged
    assert res.r == 1.2e-3
    assert len(res.history) < 30


def test_collapsed_bounds_evaluate_once():
    res = optimize_post(stub_problem(bowl(0.0), bounds=(20.57e-3, 20.57e-3)))
    assert len(res.history) == 1
    assert res.x_p == 20.57e-3 and res.converged


def test_every_radius_is_searched():
    def fn(x, r):
        return (x - 30e-3) ** 2 * 1e4 - 1e3 * r
    res = optimize_post(stub_problem(fn, radii=(0.5e-3, 1.5e-3)))
    assert {e.r for e in res.history} == {0.5e-3, 1.5e-3}
    assert res.r == 1.5e-3


def test_all_invalid_raises():
    with pytest.raises(ValueError, match="invalid"):
        optimize_post(stub_problem(lambda x, r: math.inf))


def test_invalid_points_are_skipped():
    # +inf left of 30 mm, bowl right of it
    def fn(x, r):
        return math.inf if x < 30e-3 else (x - 40e-3) ** 2
    res = optimize_post(stub_problem(fn))
    assert res.x_p == pytest.approx(40e-3, abs=0.05e-3)
    assert math.isfinite(res.objective)


def test_problem_validation():
    with pytest.raises(ValueError):
        stub_problem(bowl(0), bounds=(2e-3, 1e-3))
    with pytest.raises(ValueError):
        stub_problem(bowl(0), radii=())
    with pytest.raises(ValueError):
        stub_problem(bowl(0), coarse_points=2)
    with pytest.raises(ValueError):
        stub_problem(bowl(0), band=(3e9, 2e9))


def test_history_csv():
    res = optimize_post(stub_problem(bowl(25e-3), coarse_points=3, tol=10e-3))
    lines = res.history_csv().splitlines()
    assert lines[0] == "eval_index,x_p_m,r_m,objective_db"
    assert len(lines) == len(res.history) + 1
    for k, (line, e) in enumerate(zip(lines[1:], res.history)):
        idx, x, r, v = line.split(",")
        assert int(idx) == k
        assert (float(x), float(r), float(v)) == (e.x_p, e.r, e.objective)


def test_default_bounds_give_valid_layouts():
    r = P.DIVIDER["post_radius"]
    lo, hi = default_xp_bounds(P.RSIW, L, r)
    for x in np.linspace(lo, hi, 25):
        assert not validate_layout(generate_tee_divider(P.RSIW, L, r, x))


def test_overlapping_post_scores_inf():
    problem = TuningProblem(P.RSIW, L, BOUNDS)
    # centred on the back wall of the junction
    assert evaluate(problem, L + P.RSIW.w_siw, 1.2e-3) == math.inf
    assert evaluate(problem, 0.5e-3, 1.2e-3) == math.inf


def test_baseline_uses_no_post():
    seen = []
    problem = stub_problem(lambda x, r: seen.append((x, r)) or 0.0)
    baseline_objective(problem)
    assert seen == [(0.0, 0.0)]


_bumpy = st.lists(st.floats(-40, 0), min_size=3, max_size=12)


def _interp(vals, bounds):
    xs = np.linspace(*bounds, len(vals))
    return lambda x, r: float(np.interp(x, xs, vals))


@settings(max_examples=60, deadline=None)
@given(_bumpy, st.integers(3, 9))
def test_search_properties(vals, coarse):
    problem = stub_problem(_interp(vals, BOUNDS), coarse_points=coarse)
    res = optimize_post(problem)
    best = res.best_so_far()
    assert np.all(np.diff(best) <= 0)
    assert all(BOUNDS[0] <= e.x_p <= BOUNDS[1] for e in res.history)
    assert BOUNDS[0] <= res.x_p <= BOUNDS[1]
    assert res.objective == best[-1]
    again = optimize_post(problem)
    assert again.history == res.history
    assert optimize_post(problem, workers=3).history == res.history


def geometry_only(center):
    """The real penalty rule with a cheap stand-in for the solver."""
    def fn(x, r):
        try:
            layout = generate_tee_divider(P.RSIW, L, r, x)
        except ValueError:
            return math.inf
        return math.inf if validate_layout(layout) else (x - center) ** 2
    return fn


@settings(max_examples=30, deadline=None)
@given(st.floats(L, 70e-3))
def test_returned_layout_is_valid(center):
    # the range runs past the back wall, where the post would overlap it
    bounds = (L, L + P.RSIW.w_siw + 1e-3)
    problem = stub_problem(geometry_only(center), bounds=bounds, coarse_points=5, tol=1e-3)
    res = optimize_post(problem)
    assert not validate_layout(generate_tee_divider(P.RSIW, L, res.r, res.x_p))
