import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdera_ccuc.cases import builtin_case, rts24_case, toy_case
from mdera_ccuc.network import (
    Bus, CaseError, DisconnectedNetwork, Generator, Line, NetworkCase, ZeroAggregateOutput, aggregate_sensitivity,
    compute_df, compute_shift_factors, load_case, mdera_sensitivities, read_loads_csv, save_case, write_loads_csv,
)


def random_network(rng, n):
    """Connected network: a random spanning tree plus a few extra lines."""
    lines = []
    for b in range(1, n):
        lines.append((int(rng.integers(0, b)), b))
    for _ in range(int(rng.integers(0, n))):
        i, j = rng.choice(n, 2, replace=False)
        lines.append((int(i), int(j)))
    slack = int(rng.integers(0, n))
    case = NetworkCase(
        "rand", [Bus(i, i == slack) for i in range(n)],
        [Line(k, i, j, float(rng.uniform(0.05, 0.5)), 100.0) for k, (i, j) in enumerate(lines)],
        [], [], np.zeros((n, 1)), 0.0, 0.0)
    return case


def dc_flows(case, injection):
    """Direct DC power flow: solve B theta = p with the slack angle at 0."""
    n = case.n_buses
    B = np.zeros((n, n))
    for l in case.lines:
        b = 1.0 / l.reactance
        B[l.from_bus, l.from_bus] += b
        B[l.to_bus, l.to_bus] += b
        B[l.from_bus, l.to_bus] -= b
        B[l.to_bus, l.from_bus] -= b
    keep = [i for i in range(n) if i != case.slack]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], injection[keep])
    return np.array([(theta[l.from_bus] - theta[l.to_bus]) / l.reactance for l in case.lines])


def test_triangle_ptdf_matches_hand_values():
    case = NetworkCase("tri", [Bus(0, True), Bus(1), Bus(2)],
                       [Line(0, 0, 1, 0.1, 1.0), Line(1, 1, 2, 0.1, 1.0), Line(2, 0, 2, 0.1, 1.0)],
                       [], [], np.zeros((3, 1)), 0.0, 0.0)
    sf = compute_shift_factors(case)
    expected = np.array([[0, -2 / 3, -1 / 3], [0, 1 / 3, -1 / 3], [0, -1 / 3, -2 / 3]])
    assert np.max(np.abs(sf - expected)) < 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_flow_reconstruction_matches_dc_solve(seed):
    rng = np.random.default_rng(seed)
    case = random_network(rng, int(rng.integers(2, 11)))
    p = rng.normal(0, 50, case.n_buses)
    p[case.slack] -= p.sum()
    sf = compute_shift_factors(case)
    assert np.max(np.abs(sf @ p - dc_flows(case, p))) < 1e-8


@given(st.integers(0, 10_000), st.integers(2, 10))
def test_shift_factor_invariants(seed, n):
    rng = np.random.default_rng(seed)
    case = random_network(rng, n)
    sf = compute_shift_factors(case)
    assert np.all(sf[:, case.slack] == 0.0)
    # each injection reaches the slack: flows out of a bus balance its injection
    for b in range(n):
        if b == case.slack:
            continue
        net = np.zeros(n)
        for k, l in enumerate(case.lines):
            net[l.from_bus] += sf[k, b]
            net[l.to_bus] -= sf[k, b]
        e = np.zeros(n)
        e[b], e[case.slack] = 1.0, -1.0
        assert np.allclose(net, e, atol=1e-9)


def test_disconnected_network_rejected():
    case = NetworkCase("split", [Bus(0, True), Bus(1), Bus(2), Bus(3)],
                       [Line(0, 0, 1, 0.1, 1.0), Line(1, 2, 3, 0.1, 1.0)], [], [], np.zeros((4, 1)), 0.0, 0.0)
    with pytest.raises(DisconnectedNetwork):
        compute_shift_factors(case)


def test_case_validation():
    with pytest.raises(CaseError):
        Line(0, 1, 1, 0.1, 1.0)
    with pytest.raises(CaseError):
        Generator(0, 0, 10.0, 5.0, 1, 1, 1, 1, 0, 0, ((1.0, 0.0),))
    with pytest.raises(CaseError):
        Generator(0, 0, 0.0, 5.0, 1, 1, 1, 1, 0, 0, ((3.0, 0.0), (1.0, 0.0)))
    with pytest.raises(CaseError):
        NetworkCase("x", [Bus(0)], [], [], [], np.zeros((1, 1)), 0.0, 0.0)


def test_compute_df_example_and_errors():
    assert np.allclose(compute_df([1.2, 0.8], 2.0), [0.6, 0.4])
    with pytest.raises(ZeroAggregateOutput):
        compute_df([0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        compute_df([1.0, 1.0], 3.0)


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3))
def test_compute_df_on_simplex(outputs):
    df = compute_df(outputs, sum(outputs))
    assert abs(df.sum() - 1.0) < 1e-12 and np.all(df >= 0)


def test_aggregate_sensitivity_is_df_weighted_sum():
    case = toy_case()
    sf = compute_shift_factors(case)
    m = case.mderas[0]
    df = np.array([0.2, 0.3, 0.5])
    s = mdera_sensitivities(df, sf, m.der_buses)
    for l in range(len(case.lines)):
        assert s[l] == pytest.approx(aggregate_sensitivity(df, sf, m.der_buses, l), abs=1e-14)
        assert s[l] == pytest.approx(sum(d * sf[l, b] for d, b in zip(df, m.der_buses)), abs=1e-14)


@pytest.mark.parametrize("make", [toy_case, rts24_case])
def test_case_json_round_trip(tmp_path, make):
    case = make()
    save_case(case, tmp_path / "c.json")
    back = load_case(tmp_path / "c.json")
    assert back.to_dict() == case.to_dict()
    json.loads((tmp_path / "c.json").read_text(encoding="utf-8"))


@pytest.mark.parametrize("name", ["toy", "rts24"])
def test_bundled_cases_match_builders(name):
    built = {"toy": toy_case, "rts24": rts24_case}[name]()
    assert builtin_case(name).to_dict() == built.to_dict()


def test_rts24_skeleton_shape():
    case = rts24_case()
    assert case.n_buses == 24 and len(case.lines) == 34
    assert sorted(case.mderas[0].der_buses.tolist()) == [10, 11, 18, 19]
    compute_shift_factors(case)


def test_loads_csv_round_trip(tmp_path):
    loads = np.random.default_rng(0).uniform(0, 10, (4, 5))
    write_loads_csv(loads, tmp_path / "l.csv")
    assert np.array_equal(read_loads_csv(tmp_path / "l.csv", 4), loads)
