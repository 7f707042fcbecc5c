import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdera_ccuc.solver import EQ, GE, LE, LinearModel, SolverError, Status, get_backend, solve_lp, solve_milp


def small_lp(sense="min", rhs=(4.0, 1.0, 3.0)):
    # min x + 2y  s.t.  x + y >= 4, x - y <= 1, y == 3
    m = LinearModel(sense)
    v = m.add_vars(2, 0.0, 10.0, obj=[1.0, 2.0])
    m.add_row(v, [1.0, 1.0], ">=", rhs[0])
    m.add_row(v, [1.0, -1.0], "<=", rhs[1])
    m.add_row([v[1]], [1.0], "==", rhs[2])
    return m


def test_lp_solution_and_duals():
    res = solve_lp(small_lp())
    assert res.optimal and res.objective == pytest.approx(7.0)
    assert np.allclose(res.x, [1.0, 3.0])


@pytest.mark.parametrize("sense", ["min", "max"])
@pytest.mark.parametrize("row", [0, 1, 2])
def test_duals_are_rhs_sensitivities(sense, row):
    base = solve_lp(small_lp(sense))
    h = 1e-3
    rhs = [4.0, 1.0, 3.0]
    rhs[row] += h
    bumped = solve_lp(small_lp(sense, rhs))
    assert base.duals[row] == pytest.approx((bumped.objective - base.objective) / h, abs=1e-6)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_phase_one_certificate(seed):
    """infeasibility + ray @ (b' - b) bounds the violation of any other rhs from below."""
    rng = np.random.default_rng(seed)
    n, mrows = 3, 5
    A = rng.normal(size=(mrows, n))
    senses = rng.choice([LE, GE, EQ], mrows)
    b = rng.normal(size=mrows) * 5

    def build(rhs):
        m = LinearModel()
        v = m.add_vars(n, -2.0, 2.0)
        r, c = np.nonzero(np.ones((mrows, n)))
        m.add_rows(r, v[c], A[r, c], senses, rhs)
        return m

    res = solve_lp(build(b))
    if res.status is not Status.INFEASIBLE:
        return
    assert res.infeasibility > 0
    for _ in range(5):
        b2 = b + rng.normal(size=mrows) * 3
        r2 = solve_lp(build(b2))
        viol = r2.infeasibility if r2.status is Status.INFEASIBLE else 0.0
        assert res.infeasibility + res.ray @ (b2 - b) <= viol + 1e-6


def test_milp_knapsack():
    m = LinearModel("max")
    v = m.add_binaries(4, obj=[10, 13, 7, 8])
    m.add_row(v, [5, 7, 4, 3], LE, 12)
    res = solve_milp(m)
    assert res.optimal and res.objective == pytest.approx(25.0)
    assert np.allclose(res.x, np.rint(res.x))


def test_infeasible_and_unbounded():
    m = LinearModel()
    v = m.add_vars(1, 0.0, 1.0)
    m.add_row(v, [1.0], GE, 2.0)
    assert solve_lp(m).status is Status.INFEASIBLE
    u = LinearModel()
    w = u.add_vars(1, -np.inf, np.inf, obj=1.0)
    u.add_row(w, [1.0], LE, 0.0)
    assert solve_lp(u).status is Status.UNBOUNDED


def test_builder_validation(tmp_path):
    m = LinearModel()
    v = m.add_vars(2, name="p")
    with pytest.raises(ValueError):
        m.add_row([5], [1.0], LE, 1.0)
    with pytest.raises(ValueError):
        m.add_row(v, [np.nan, 1.0], LE, 1.0)
    with pytest.raises(ValueError):
        m.add_vars(1, 2.0, 1.0)
    with pytest.raises(ValueError):
        LinearModel("maximize")
    with pytest.raises(SolverError):
        get_backend("cplex")
    m.add_row(v, [1.0, 2.0], GE, 1.0)
    m.write_lp(tmp_path / "m.lp")
    text = (tmp_path / "m.lp").read_text()
    assert "p_0" in text and ">= 1" in text
    m.add_binaries(1)
    with pytest.raises(SolverError):
        solve_lp(m)
