"""Rolling 5-minute RTED under a fixed UC plan and M-DERA self-dispatch.

The RTED clears each interval as an LP with the M-DERA's line impact
estimated from a DF vector. Each M-DERA then splits its aggregate
instruction among its DERs under one of three strategies, and the
post-dispatch flows are recomputed from the actual DER outputs.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .bhmm.grouping import DfDataset
from .bhmm.model import Bhmm, bhmm_mean
from .network import MDera, NetworkCase, compute_df, compute_shift_factors
from .profiles import INTERVALS_PER_HOUR, case_for_loads, hourly_average
from .solver import EQ, GE, LE, LinearModel, solve_lp

log = logging.getLogger(__name__)

STRATEGIES = ("sd1", "sd2", "sd3")
DF_SOURCES = ("uniform", "historical_mean", "bhmm_mean")
OVERLOAD_TOL = 1e-6


class DispatchError(RuntimeError):
    pass


@dataclass
class RtedConfig:
    """``df`` holds one DF estimate per M-DERA used for the RTED line limits."""

    df: list[np.ndarray]
    df_source: str = "uniform"
    interval_minutes: int = 5
    loadshed_penalty: float = 5000.0
    enforce_lines: bool = True
    # cap the aggregate so that following the DF estimate fits every DER
    follow_guard: bool = True

    def __post_init__(self):
        self.df = [np.asarray(d, dtype=float) for d in self.df]
        for d in self.df:
            if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
                raise ValueError("RTED DF estimates must lie on the simplex")
        if self.interval_minutes <= 0 or 60 % self.interval_minutes:
            raise ValueError("interval length must divide the hour")

    @property
    def dt(self) -> float:
        return self.interval_minutes / 60.0


def df_estimate(source: str, case: NetworkCase, history: DfDataset | None = None,
                models: list[Bhmm] | None = None) -> list[np.ndarray]:
    """Point DF estimate per M-DERA: uniform, historical mean or BHMM expectation."""
    if source == "uniform":
        return [np.full(m.size, 1.0 / m.size) for m in case.mderas]
    if source == "historical_mean":
        if history is None:
            raise ValueError("historical_mean needs DF history")
        return [history.for_mdera(m.id).mean() for m in case.mderas]
    if source == "bhmm_mean":
        if models is None or len(models) != len(case.mderas):
            raise ValueError("bhmm_mean needs one fitted model per M-DERA")
        return [bhmm_mean(b) for b in models]
    raise ValueError(f"unknown DF source {source!r}; choose from {DF_SOURCES}")


# --- RTED -------------------------------------------------------------------

@dataclass
class RtedResult:
    pg: np.ndarray  # (K, G)
    pa: np.ndarray  # (K, A) aggregate instructions
    shed: np.ndarray  # (K, N)
    spill: np.ndarray  # (K, N)
    flows: np.ndarray  # (K, L) RTED flows with estimated M-DERA impact
    mdera_flows: np.ndarray  # (K, A, L) estimated M-DERA line contributions
    gen_cost: np.ndarray  # (K,) $ per interval
    mdera_cost: np.ndarray
    ls_cost: np.ndarray
    loads: np.ndarray  # (N, K)
    df: list[np.ndarray]
    dt: float

    @property
    def n_intervals(self) -> int:
        return self.pg.shape[0]


def commitment_by_interval(x: np.ndarray, n_intervals: int, per_hour: int) -> np.ndarray:
    """Hourly commitment (G, T) held over each hour's intervals -> (K, G)."""
    x = np.rint(np.asarray(x, dtype=float))
    k_hour = np.minimum(np.arange(n_intervals) // per_hour, x.shape[1] - 1)
    return x[:, k_hour].T


def run_rted(case: NetworkCase, x: np.ndarray, load5: np.ndarray, cfg: RtedConfig,
             sf: np.ndarray | None = None, der_pmax: list[np.ndarray] | None = None) -> RtedResult:
    """Myopic interval-by-interval RTED under the hourly commitment ``x``.

    ``der_pmax`` optionally gives per-interval DER capacities (K, D) per
    M-DERA; by default the nominal capacities apply. The aggregate output is
    capped so that following the DF estimate never exceeds any DER's
    capacity.
    """
    sf = compute_shift_factors(case) if sf is None else sf
    load5 = np.asarray(load5, dtype=float)
    N, K = load5.shape
    if N != case.n_buses:
        raise ValueError(f"load series has {N} buses, case has {case.n_buses}")
    if len(cfg.df) != len(case.mderas):
        raise ValueError("need one DF estimate per M-DERA")
    per_hour = 60 // cfg.interval_minutes
    dt = cfg.dt
    gens, mderas = case.generators, case.mderas
    G, A, L = len(gens), len(mderas), len(case.lines)
    max_mc = max([k for g in gens for k, _ in g.cost_segments] + [k for a in mderas for k, _ in a.cost_segments])
    if cfg.loadshed_penalty <= max_mc:
        raise ValueError("load-shed penalty must exceed every marginal cost")
    on = commitment_by_interval(x, K, per_hour)
    gbus = np.array([g.bus for g in gens], dtype=int)
    pmin = np.array([g.pmin for g in gens])
    pmax = np.array([g.pmax for g in gens])
    ramp_up = np.array([g.ramp_up for g in gens]) * dt
    ramp_dn = np.array([g.ramp_down for g in gens]) * dt
    sens = np.array([sf[:, m.der_buses] @ d for m, d in zip(mderas, cfg.df)]).reshape(A, L)
    caps = np.array([l.capacity for l in case.lines])
    if der_pmax is None:
        der_pmax = [np.broadcast_to([d.pmax for d in m.ders], (K, m.size)) for m in mderas]

    out = RtedResult(np.zeros((K, G)), np.zeros((K, A)), np.zeros((K, N)), np.zeros((K, N)),
                     np.zeros((K, L)), np.zeros((K, A, L)), np.zeros(K), np.zeros(K), np.zeros(K),
                     load5.copy(), [d.copy() for d in cfg.df], dt)
    prev_p = np.array([g.initial_power if g.initially_on else 0.0 for g in gens])
    prev_on = np.array([1.0 if g.initially_on else 0.0 for g in gens])
    prev_a = np.array([a.initial_power for a in mderas])
    for k in range(K):
        lo = pmin * on[k]
        hi = pmax * on[k]
        steady = (on[k] > 0.5) & (prev_on > 0.5)
        lo = np.where(steady, np.maximum(lo, prev_p - ramp_dn), lo)
        hi = np.where(steady, np.minimum(hi, prev_p + ramp_up), hi)
        # a unit switched off winds down no slower than its ramp rate
        winding = (on[k] < 0.5) & (prev_p > 1e-9)
        hi = np.where(winding, np.maximum(prev_p - ramp_dn, 0.0), hi)
        a_hi = np.zeros(A)
        for i, (m, d) in enumerate(zip(mderas, cfg.df)):
            share = d > 0
            follow = np.min(der_pmax[i][k][share] / d[share]) if share.any() else 0.0
            if not cfg.follow_guard:
                follow = np.inf
            a_hi[i] = min(m.pmax, der_pmax[i][k].sum(), follow, prev_a[i] + m.ramp_up * dt)
        a_lo = np.array([max(0.0, p - m.ramp_down * dt) for p, m in zip(prev_a, mderas)])
        a_lo = np.minimum(a_lo, a_hi)

        lp = LinearModel("min", "rted")
        pg = lp.add_vars(G, lo, hi)
        cg = lp.add_vars(G, -np.inf, np.inf, obj=dt)
        pa = lp.add_vars(A, a_lo, a_hi)
        ca = lp.add_vars(A, -np.inf, np.inf, obj=dt)
        shed = lp.add_vars(N, 0.0, load5[:, k], obj=cfg.loadshed_penalty * dt)
        spill = lp.add_vars(N, 0.0, np.inf, obj=cfg.loadshed_penalty * dt)
        for i, g in enumerate(gens):
            for slope, icpt in g.cost_segments:
                lp.add_row([cg[i], pg[i]], [1.0, -slope], GE, icpt * on[k, i])
        for i, a in enumerate(mderas):
            for slope, icpt in a.cost_segments:
                lp.add_row([ca[i], pa[i]], [1.0, -slope], GE, icpt)
        lp.add_row(np.r_[pg, pa, shed, spill], np.r_[np.ones(G + A + N), -np.ones(N)], EQ, load5[:, k].sum())
        if cfg.enforce_lines and L:
            # flow = SF (gen + M-DERA - load + shed - spill)
            coef = np.hstack([sf[:, gbus], sens.T, sf, -sf])
            base = sf @ load5[:, k]
            cols = np.r_[pg, pa, shed, spill]
            r, c = np.nonzero(coef)
            lp.add_rows(r, cols[c], coef[r, c], LE, caps + base)
            lp.add_rows(r, cols[c], -coef[r, c], LE, caps - base)
        res = solve_lp(lp, want_ray=False)
        if not res.optimal:
            raise DispatchError(f"RTED interval {k} {res.status.value}: {res.message}")
        v = res.x
        out.pg[k], out.pa[k] = v[pg], v[pa]
        out.shed[k], out.spill[k] = v[shed], v[spill]
        out.mdera_flows[k] = sens * v[pa][:, None]
        inj = np.bincount(gbus, v[pg], N) - load5[:, k] + v[shed] - v[spill]
        out.flows[k] = sf @ inj + out.mdera_flows[k].sum(axis=0)
        out.gen_cost[k] = dt * v[cg].sum()
        out.mdera_cost[k] = dt * v[ca].sum()
        out.ls_cost[k] = cfg.loadshed_penalty * dt * (v[shed].sum() + v[spill].sum())
        prev_p, prev_on, prev_a = v[pg], on[k], v[pa]
    return out


# --- self-dispatch -------------------------------------------------------------

@dataclass
class SdOutcome:
    der_outputs: np.ndarray  # (D,)
    slack: np.ndarray  # (L,) line slack of the congestion-aware strategy
    der_cost: float  # $/h
    penalty_cost: float  # $/h
    flows: np.ndarray  # (L,) M-DERA line contributions after self-dispatch


def _close_balance(p: np.ndarray, total: float, cap: np.ndarray) -> np.ndarray:
    """Remove LP round-off so the outputs sum to the instruction exactly."""
    p = np.clip(p, 0.0, cap)
    r = total - p.sum()
    i = int(np.argmax(cap - p if r > 0 else p))
    p[i] += r
    return p


def self_dispatch(strategy: str, instruction: float, df_star: np.ndarray, f_star: np.ndarray,
                  mdera: MDera, sf: np.ndarray, penalty: float = 1000.0,
                  der_pmax: np.ndarray | None = None, der_cost: np.ndarray | None = None) -> SdOutcome:
    """Split one aggregate instruction among the M-DERA's DERs.

    sd1 minimizes DER cost only; sd2 also penalizes line impacts beyond the
    RTED estimate ``f_star``; sd3 follows ``df_star`` exactly.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    cap = np.array([d.pmax for d in mdera.ders]) if der_pmax is None else np.asarray(der_pmax, dtype=float)
    cost = np.array([d.marginal_cost for d in mdera.ders]) if der_cost is None else np.asarray(der_cost, dtype=float)
    shares = sf[:, mdera.der_buses]  # (L, D)
    L, D = shares.shape
    if instruction > cap.sum() + 1e-9:
        raise DispatchError(f"instruction {instruction} MW exceeds DER capacity {cap.sum()} MW")
    slack = np.zeros(L)
    if instruction <= 0:
        p = np.zeros(D)
    elif strategy == "sd3":
        p = instruction * np.asarray(df_star, dtype=float)
        if np.any(p > cap + 1e-9):
            raise DispatchError("following the RTED DFs exceeds a DER's capacity")
    else:
        lp = LinearModel("min", strategy)
        pv = lp.add_vars(D, 0.0, cap, obj=cost)
        lp.add_row(pv, np.ones(D), EQ, instruction)
        if strategy == "sd2" and L:
            sv = lp.add_vars(L, 0.0, np.inf, obj=penalty)
            bound = np.abs(f_star)
            r = np.repeat(np.arange(L), D)
            c = np.tile(pv, L)
            rows = np.r_[r, np.arange(L)]
            cols = np.r_[c, sv]
            lp.add_rows(rows, cols, np.r_[shares.ravel(), -np.ones(L)], LE, bound)
            lp.add_rows(rows, cols, np.r_[-shares.ravel(), -np.ones(L)], LE, bound)
        res = solve_lp(lp, want_ray=False)
        if not res.optimal:
            raise DispatchError(f"{strategy} self-dispatch {res.status.value}: {res.message}")
        p = _close_balance(res.x[pv], instruction, cap)
        if strategy == "sd2" and L:
            slack = np.clip(res.x[sv], 0.0, None)
    return SdOutcome(p, slack, float(cost @ p), float(penalty * slack.sum()), shares @ p)


# --- evaluation -----------------------------------------------------------------

@dataclass
class EvalReport:
    strategy: str
    generation_cost: float
    ls_cost: float
    sd_cost: float
    sd_penalty: float
    loading: np.ndarray  # (K, L) |flow| / capacity after self-dispatch
    der_outputs: list[np.ndarray]  # per M-DERA (K, D)
    meta: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.generation_cost + self.ls_cost + self.sd_cost

    @property
    def overloaded(self) -> np.ndarray:
        return np.any(self.loading > 1.0 + OVERLOAD_TOL, axis=1)

    @property
    def overload_count(self) -> int:
        return int(self.overloaded.sum())

    @property
    def average_overload(self) -> float:
        """Mean excess loading of the worst line over the overloaded intervals."""
        ov = self.overloaded
        if not ov.any():
            return 0.0
        return float((self.loading[ov].max(axis=1) - 1.0).mean())

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "generation_cost": self.generation_cost,
            "ls_cost": self.ls_cost,
            "sd_cost": self.sd_cost,
            "total_cost": self.total_cost,
            "sd_penalty": self.sd_penalty,
            "overload_intervals": self.overload_count,
            "avg_overload": self.average_overload,
            "max_loading": float(self.loading.max()) if self.loading.size else 0.0,
        }

    def write_loading_csv(self, path, line_ids=None) -> None:
        K, L = self.loading.shape
        ids = list(range(L)) if line_ids is None else list(line_ids)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["interval"] + [f"line_{i}" for i in ids])
            for k in range(K):
                w.writerow([k] + [repr(float(v)) for v in self.loading[k]])


def evaluate(case: NetworkCase, rted: RtedResult, strategy: str, outcomes: list[list[SdOutcome]],
             sf: np.ndarray | None = None) -> EvalReport:
    """Costs and post-dispatch line loadings; ``outcomes[k][a]`` per interval and M-DERA."""
    sf = compute_shift_factors(case) if sf is None else sf
    K = rted.n_intervals
    N = case.n_buses
    gbus = np.array([g.bus for g in case.generators], dtype=int)
    caps = np.array([l.capacity for l in case.lines])
    der = [np.zeros((K, m.size)) for m in case.mderas]
    flows = np.zeros((K, len(case.lines)))
    sd_cost = sd_pen = 0.0
    for k in range(K):
        inj = np.bincount(gbus, rted.pg[k], N) - rted.loads[:, k] + rted.shed[k] - rted.spill[k]
        for a, (m, o) in enumerate(zip(case.mderas, outcomes[k])):
            der[a][k] = o.der_outputs
            np.add.at(inj, m.der_buses, o.der_outputs)
            sd_cost += rted.dt * o.der_cost
            sd_pen += rted.dt * o.penalty_cost
        flows[k] = sf @ inj
    loading = np.abs(flows) / caps if caps.size else np.zeros((K, 0))
    return EvalReport(strategy, float(rted.gen_cost.sum()), float(rted.ls_cost.sum()), sd_cost, sd_pen,
                      loading, der)


def simulate(case: NetworkCase, x: np.ndarray, load5: np.ndarray, cfg: RtedConfig,
             strategies=STRATEGIES, sd_penalty: float = 1000.0, sf: np.ndarray | None = None
             ) -> tuple[RtedResult, dict[str, EvalReport]]:
    """One RTED run shared by every self-dispatch strategy."""
    sf = compute_shift_factors(case) if sf is None else sf
    rted = run_rted(case, x, load5, cfg, sf)
    reports = {}
    for st in strategies:
        outs = [[self_dispatch(st, rted.pa[k, a], cfg.df[a], rted.mdera_flows[k, a], m, sf, sd_penalty)
                 for a, m in enumerate(case.mderas)] for k in range(rted.n_intervals)]
        reports[st] = evaluate(case, rted, st, outs, sf)
    return rted, reports


# --- synthetic DF history ---------------------------------------------------------

@dataclass
class HistoryConfig:
    """Randomness of DER conditions while the history is generated."""

    cost_noise: float = 0.3  # lognormal sigma on DER marginal costs
    availability: tuple[float, float] = (0.3, 1.0)  # uniform fraction of DER pmax
    outage_prob: float = 0.15  # chance a DER is unavailable for an hour
    availability_jitter: float = 0.05  # relative 5-minute variation of availability
    min_aggregate: float = 1e-3
    uc_gap: float = 1e-4


def generate_df_history(case: NetworkCase, history_loads: np.ndarray, seed: int = 0,
                        hcfg: HistoryConfig = HistoryConfig(), rcfg: RtedConfig | None = None
                        ) -> DfDataset:
    """DF records from day-by-day NCUC, RTED and cost-driven self-dispatch.

    Each day is committed by an NCUC on hourly averages with uniform DFs,
    dispatched in the RTED, and each M-DERA then splits its instruction by
    merit order under randomized DER costs and availabilities. Intervals with
    no M-DERA output are skipped.
    """
    from .ucmodel import UcOptions, solve_ncuc

    history_loads = np.asarray(history_loads, dtype=float)
    per_day = 24 * INTERVALS_PER_HOUR
    if history_loads.ndim != 2 or history_loads.shape[1] < per_day:
        raise ValueError("history must hold at least one full day of 5-minute loads")
    days = history_loads.shape[1] // per_day
    rng = np.random.default_rng(seed)
    sf = compute_shift_factors(case)
    uniform = [np.full(m.size, 1.0 / m.size) for m in case.mderas]
    rcfg = rcfg or RtedConfig(uniform, follow_guard=False)
    values, periods, ids = [], [], []
    for day in range(days):
        load5 = history_loads[:, day * per_day:(day + 1) * per_day]
        hourly = hourly_average(load5)
        day_case = case_for_loads(case, hourly)
        plan = solve_ncuc(day_case, uniform, sf, UcOptions(gap_tol=hcfg.uc_gap))
        caps, costs = [], []
        for m in case.mderas:
            nominal = np.array([d.pmax for d in m.ders])
            frac = rng.uniform(*hcfg.availability, (24, m.size))
            frac[rng.random((24, m.size)) < hcfg.outage_prob] = 0.0
            frac = np.repeat(frac, INTERVALS_PER_HOUR, axis=0)
            frac *= 1.0 + rng.normal(0.0, hcfg.availability_jitter, frac.shape)
            caps.append(np.clip(frac, 0.0, 1.0) * nominal)
            base = np.array([d.marginal_cost for d in m.ders])
            costs.append(base * rng.lognormal(0.0, hcfg.cost_noise, (per_day, m.size)))
        rted = run_rted(day_case, plan.x, load5, rcfg, sf, der_pmax=caps)
        for k in range(per_day):
            for a, m in enumerate(case.mderas):
                p_a = rted.pa[k, a]
                if p_a <= hcfg.min_aggregate:
                    continue
                o = self_dispatch("sd1", p_a, rcfg.df[a], rted.mdera_flows[k, a], m, sf,
                                  der_pmax=caps[a][k], der_cost=costs[a][k])
                values.append(compute_df(o.der_outputs, o.der_outputs.sum()))
                periods.append(day * per_day + k)
                ids.append(m.id)
    if not values:
        raise ValueError("history produced no M-DERA output")
    return DfDataset(np.array(values), np.array(periods), np.array(ids))

