import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dirichlet_scenarios, ring5_case, triangle_case
from oracles import uc_cost, uc_violations

from mdera_ccuc.cases import toy_case
from mdera_ccuc.network import CaseError
from mdera_ccuc.scenarios import ScenarioSet
from mdera_ccuc.solver import EQ, solve_milp
from mdera_ccuc.ucmodel import (UcFormulation, UcOptions, UcSolution, build_extensive, check_chance_constraint,
                                solve_extensive, solve_ncuc)


def brute_force(form, eps):
    """Enumerate every skip pattern within the budget and keep the cheapest."""
    S = form.n_scenarios
    best = np.inf
    k_max = int(np.floor(eps * S + 1e-9))
    for k in range(k_max + 1):
        for skip in itertools.combinations(range(S), k):
            m, lay = build_extensive(form, eps)
            for s in range(S):
                if form.weights[s] <= eps + 1e-12:
                    m.add_row([lay.z[s]], [1.0], EQ, 1.0 if s in skip else 0.0)
            res = solve_milp(m, 1e-9)
            if res.optimal:
                best = min(best, res.objective)
    return best


@pytest.mark.parametrize("make,S,eps", [(triangle_case, 5, 0.2), (triangle_case, 6, 0.34), (ring5_case, 5, 0.2)])
def test_extensive_matches_brute_force_skip_enumeration(make, S, eps):
    case = make()
    form = UcFormulation(case, dirichlet_scenarios(case, S, seed=S), options=UcOptions(gap_tol=1e-9))
    sol = solve_extensive(form, eps)
    assert sol.objective == pytest.approx(brute_force(form, eps), rel=1e-6)


@pytest.mark.parametrize("eps", [0.0, 0.2, 0.4])
def test_perspective_and_bigm_agree(eps):
    case = ring5_case()
    scen = dirichlet_scenarios(case, 5, seed=11)
    a = solve_extensive(UcFormulation(case, scen, options=UcOptions(gap_tol=1e-9)), eps)
    b = solve_extensive(UcFormulation(case, scen, options=UcOptions(gap_tol=1e-9, skip_form="bigm")), eps)
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


@settings(max_examples=6)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.2, 0.4]))
def test_solution_is_feasible_and_cost_consistent(seed, eps):
    case = triangle_case(horizon=4)
    scen = dirichlet_scenarios(case, 5, seed=seed, alpha=0.7)
    sol = solve_extensive(UcFormulation(case, scen, options=UcOptions(gap_tol=1e-9)), eps)
    assert uc_violations(case, scen, sol) == []
    assert sol.objective == pytest.approx(uc_cost(case, sol), rel=1e-6, abs=1e-4)
    b = sol.breakdown
    assert sum(b.values()) == pytest.approx(sol.objective, rel=1e-6)


def test_skip_budget_counts_scenarios():
    case = triangle_case()
    scen = dirichlet_scenarios(case, 10, seed=1)
    for eps, k in [(0.0, 0), (0.05, 0), (0.1, 1), (0.25, 2)]:
        sol = solve_extensive(UcFormulation(case, scen, options=UcOptions(gap_tol=1e-9)), eps)
        assert sol.z.sum() <= k


def test_objective_monotone_in_eps():
    case = ring5_case()
    form = UcFormulation(case, dirichlet_scenarios(case, 8, seed=4), options=UcOptions(gap_tol=1e-9))
    objs = [solve_extensive(form, e).objective for e in (0.0, 0.125, 0.25)]
    assert objs[0] >= objs[1] - 1e-6 >= objs[2] - 2e-6


def test_ncuc_equals_single_scenario_ccuc():
    case = triangle_case()
    df = [np.array([0.3, 0.7])]
    a = solve_ncuc(case, df)
    b = solve_extensive(UcFormulation(case, ScenarioSet.fixed(df, case.horizon)), 0.0)
    assert a.objective == pytest.approx(b.objective, rel=1e-9)
    assert uc_violations(case, ScenarioSet.fixed(df, case.horizon), a) == []


def test_tight_line_is_binding_for_unfavourable_df():
    # all M-DERA output at the bus that loads line 0 forces generator redispatch
    case = triangle_case()
    cheap = solve_ncuc(case, [np.array([0.0, 1.0])]).objective
    costly = solve_ncuc(case, [np.array([1.0, 0.0])]).objective
    assert costly != pytest.approx(cheap)


def test_fresh_scenarios_violation_check():
    case = triangle_case()
    scen = dirichlet_scenarios(case, 6, seed=2)
    sol = solve_extensive(UcFormulation(case, scen), 0.0)
    assert check_chance_constraint(sol, case, scen) == 0.0
    fresh = dirichlet_scenarios(case, 30, seed=99)
    assert 0.0 <= check_chance_constraint(sol, case, fresh) <= 1.0


def test_solution_json_round_trip(tmp_path):
    case = triangle_case()
    sol = solve_extensive(UcFormulation(case, dirichlet_scenarios(case, 3, seed=0)), 0.0)
    sol.save(tmp_path / "s.json")
    back = UcSolution.load(tmp_path / "s.json")
    back.save(tmp_path / "s2.json")
    assert (tmp_path / "s.json").read_bytes() == (tmp_path / "s2.json").read_bytes()
    assert np.array_equal(back.x, np.rint(sol.x))


def test_invalid_inputs():
    case = triangle_case()
    scen = dirichlet_scenarios(case, 3, seed=0)
    with pytest.raises(ValueError):
        solve_extensive(UcFormulation(case, scen), 1.0)
    with pytest.raises(CaseError):
        UcFormulation(toy_case(horizon=6), scen)
    with pytest.raises(ValueError):
        UcOptions(skip_form="cuts")
    starved = triangle_case(peak=400.0)
    with pytest.raises(CaseError):
        UcFormulation(starved, dirichlet_scenarios(starved, 2, seed=0))
