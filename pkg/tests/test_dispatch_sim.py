import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdera_ccuc.bhmm.grouping import DfDataset
from mdera_ccuc.cases import toy_case
from mdera_ccuc.dispatch_sim import (DispatchError, HistoryConfig, RtedConfig, df_estimate, generate_df_history,
                                     run_rted, self_dispatch, simulate)
from mdera_ccuc.network import compute_shift_factors
from mdera_ccuc.profiles import load_history, operating_day
from mdera_ccuc.ucmodel import UcOptions, solve_ncuc

TOY = toy_case()
SF = compute_shift_factors(TOY)
M = TOY.mderas[0]
CAP = np.array([d.pmax for d in M.ders])
COST = np.array([d.marginal_cost for d in M.ders])


def merit_order(instruction, cap, cost):
    p = np.zeros_like(cap)
    left = instruction
    for i in np.argsort(cost, kind="stable"):
        p[i] = min(cap[i], left)
        left -= p[i]
    return p


@given(st.floats(0.0, float(CAP.sum())))
def test_sd1_is_merit_order(instr):
    o = self_dispatch("sd1", instr, np.full(3, 1 / 3), np.zeros(len(TOY.lines)), M, SF)
    assert np.allclose(o.der_outputs, merit_order(instr, CAP, COST), atol=1e-7)
    assert o.der_outputs.sum() == pytest.approx(instr, abs=1e-9)
    assert o.penalty_cost == 0.0


@given(st.floats(0.1, 45.0), st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
def test_strategy_ordering_and_balance(instr, raw):
    df = np.array(raw) / sum(raw)
    if np.any(instr * df > CAP):
        return
    f_star = SF[:, M.der_buses] @ (instr * df)
    outs = {s: self_dispatch(s, instr, df, f_star, M, SF) for s in ("sd1", "sd2", "sd3")}
    for o in outs.values():
        assert o.der_outputs.sum() == pytest.approx(instr, abs=1e-9)
        assert np.all(o.der_outputs >= -1e-12) and np.all(o.der_outputs <= CAP + 1e-9)
    assert np.allclose(outs["sd3"].der_outputs, instr * df)
    assert np.allclose(outs["sd3"].flows, f_star)
    # following the estimate is feasible for sd2, so its objective cannot exceed sd3's cost
    sd2 = outs["sd2"]
    assert sd2.der_cost + sd2.penalty_cost <= outs["sd3"].der_cost + 1e-6
    assert outs["sd1"].der_cost <= sd2.der_cost + 1e-6
    assert np.all(np.abs(sd2.flows) <= np.abs(f_star) + sd2.slack + 1e-7)


def test_dispatch_errors():
    with pytest.raises(DispatchError):
        self_dispatch("sd1", CAP.sum() + 1, np.full(3, 1 / 3), np.zeros(4), M, SF)
    with pytest.raises(DispatchError):
        self_dispatch("sd3", 40.0, np.array([1.0, 0.0, 0.0]), np.zeros(4), M, SF)
    with pytest.raises(ValueError):
        self_dispatch("sd4", 1.0, np.full(3, 1 / 3), np.zeros(4), M, SF)
    with pytest.raises(ValueError):
        RtedConfig([np.array([0.5, 0.6])])


@pytest.fixture(scope="module")
def toy_day():
    case, load5 = operating_day(TOY, seed=3)
    plan = solve_ncuc(case, [np.full(3, 1 / 3)], SF, UcOptions(gap_tol=1e-4))
    return case, load5, plan


def test_rted_balance_and_limits(toy_day):
    case, load5, plan = toy_day
    cfg = RtedConfig([np.full(3, 1 / 3)])
    r = run_rted(case, plan.x, load5, cfg, SF)
    supply = r.pg.sum(axis=1) + r.pa.sum(axis=1) + r.shed.sum(axis=1) - r.spill.sum(axis=1)
    assert np.allclose(supply, load5.sum(axis=0), atol=1e-6)
    caps = np.array([l.capacity for l in case.lines])
    assert np.all(np.abs(r.flows) <= caps + 1e-6)
    assert np.all(r.pa <= M.pmax + 1e-9)
    assert r.n_intervals == load5.shape[1]
    # a unit off both this hour and the previous one produces nothing
    on = np.repeat(np.rint(plan.x), 12, axis=1).T
    idle = (on[12:] < 0.5) & (on[:-12] < 0.5)
    assert np.all(r.pg[12:][idle] <= 1e-9)


def test_following_rted_dfs_never_overloads(toy_day):
    case, load5, plan = toy_day
    _, reports = simulate(case, plan.x, load5, RtedConfig([np.full(3, 1 / 3)]), sf=SF)
    assert reports["sd3"].overload_count == 0
    s1, s3 = reports["sd1"].summary(), reports["sd3"].summary()
    assert s1["overload_intervals"] >= s3["overload_intervals"]
    assert s1["sd_cost"] <= s3["sd_cost"] + 1e-6
    assert s1["generation_cost"] == s3["generation_cost"]


def test_df_estimates():
    hist = DfDataset(np.array([[0.2, 0.3, 0.5], [0.4, 0.3, 0.3]]), [0, 1], [0, 0])
    assert np.allclose(df_estimate("uniform", TOY)[0], 1 / 3)
    assert np.allclose(df_estimate("historical_mean", TOY, hist)[0], [0.3, 0.3, 0.4])
    with pytest.raises(ValueError):
        df_estimate("historical_mean", TOY)
    with pytest.raises(ValueError):
        df_estimate("median", TOY)


def test_history_records_are_valid_dfs():
    load = load_history(TOY.loads, 1, seed=0)
    ds = generate_df_history(TOY, load, seed=0, hcfg=HistoryConfig())
    assert len(ds) > 100
    assert np.allclose(ds.values.sum(axis=1), 1.0, atol=1e-12) and ds.values.min() >= 0
    # merit-order self-dispatch puts many records on faces of the simplex
    assert np.any(ds.values == 0.0)
