"""Unit commitment models: deterministic NCUC and scenario-based CCUC.

First-stage decisions are the commitment binaries (x, u, v, x_nr). Each
scenario carries its own dispatch, reserves and cost epigraph variables. All
rows of a scenario take the form ``A y + B x (sense) b`` so the same blocks
feed the extensive form and the Benders subproblems.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .network import CaseError, NetworkCase, compute_shift_factors
from .scenarios import ScenarioSet
from .solver import EQ, GE, LE, LinearModel, SolveResult, Status, solve_lp, solve_milp

ROW_OTHER, ROW_LINE = 0, 1
SKIP_FORMS = ("perspective", "bigm")


@dataclass(frozen=True)
class UcOptions:
    gap_tol: float = 1e-6
    time_limit: float | None = None
    backend: str = "highs"
    # drop line rows that no dispatch within variable bounds can violate
    prune_redundant_lines: bool = True
    # how a skipped scenario is relaxed: "perspective" (exact hull) or "bigm"
    skip_form: str = "perspective"

    def __post_init__(self):
        if self.skip_form not in SKIP_FORMS:
            raise ValueError(f"skip_form must be one of {SKIP_FORMS}")


@dataclass
class FirstStage:
    """Local indices of the first-stage variables (all binary)."""

    G: int
    T: int
    quick: np.ndarray  # generator ids in the quick-start set

    def __post_init__(self):
        G, T, Q = self.G, self.T, len(self.quick)
        self.x = np.arange(G * T).reshape(G, T)
        self.u = self.x + G * T
        self.v = self.u + G * T
        self.xnr = (3 * G * T + np.arange(Q * T)).reshape(Q, T)
        self.n = 3 * G * T + Q * T


@dataclass
class SecondStage:
    """Local indices of one scenario's continuous variables."""

    G: int
    A: int
    T: int
    Q: int

    def __post_init__(self):
        G, A, T, Q = self.G, self.A, self.T, self.Q
        k = 0

        def take(rows):
            nonlocal k
            out = (k + np.arange(rows * T)).reshape(rows, T)
            k += rows * T
            return out

        self.pg = take(G)
        self.pa = take(A)
        self.rsr = take(G)
        self.rnr = take(Q)
        self.cg = take(G)
        self.ca = take(A)
        self.n = k


@dataclass
class RowBlock:
    """Rows ``A y + B x (sense) rhs`` in local indices of one scenario."""

    a_rows: np.ndarray
    a_cols: np.ndarray
    a_vals: np.ndarray
    b_rows: np.ndarray
    b_cols: np.ndarray
    b_vals: np.ndarray
    senses: np.ndarray
    rhs: np.ndarray
    kind: np.ndarray
    big_m: np.ndarray  # relaxation needed when the scenario is skipped (line rows only)

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def B_dense(self, n_first: int) -> np.ndarray:
        B = np.zeros((self.n_rows, n_first))
        np.add.at(B, (self.b_rows, self.b_cols), self.b_vals)
        return B


class _Rows:
    """Accumulates rows with separate y- and x-parts."""

    def __init__(self):
        self.a, self.b, self.senses, self.rhs, self.kind, self.big_m = [], [], [], [], [], []

    def add(self, y_terms, x_terms, sense, rhs, kind=ROW_OTHER, big_m=0.0):
        i = len(self.rhs)
        self.a += [(i, j, v) for j, v in y_terms if v != 0.0]
        self.b += [(i, j, v) for j, v in x_terms if v != 0.0]
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.kind.append(kind)
        self.big_m.append(float(big_m))

    def block(self) -> RowBlock:
        def split(trip):
            if not trip:
                return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
            r, c, v = zip(*trip)
            return np.array(r), np.array(c), np.array(v, dtype=float)
        return RowBlock(*split(self.a), *split(self.b), np.array(self.senses, dtype=np.int8),
                        np.array(self.rhs), np.array(self.kind, dtype=np.int8), np.array(self.big_m))


def _concat_blocks(p: RowBlock, q: RowBlock) -> RowBlock:
    off = p.n_rows
    cat = np.concatenate
    return RowBlock(cat([p.a_rows, q.a_rows + off]), cat([p.a_cols, q.a_cols]), cat([p.a_vals, q.a_vals]),
                    cat([p.b_rows, q.b_rows + off]), cat([p.b_cols, q.b_cols]), cat([p.b_vals, q.b_vals]),
                    cat([p.senses, q.senses]), cat([p.rhs, q.rhs]), cat([p.kind, q.kind]), cat([p.big_m, q.big_m]))


class UcFormulation:
    """Row generator for the UC on one case and scenario set."""

    def __init__(self, case: NetworkCase, scenarios: ScenarioSet, sf: np.ndarray | None = None,
                 options: UcOptions = UcOptions()):
        if scenarios.horizon != case.horizon:
            raise CaseError(f"scenario horizon {scenarios.horizon} != case horizon {case.horizon}")
        if len(scenarios.dfs) != len(case.mderas):
            raise CaseError("need one DF array per M-DERA")
        self.case = case
        self.scenarios = scenarios
        self.sf = compute_shift_factors(case) if sf is None else sf
        self.options = options
        G, T = len(case.generators), case.horizon
        self.quick = np.array([g.id for g in case.generators if g.quick_start], dtype=int)
        self.first = FirstStage(G, T, self.quick)
        self.second = SecondStage(G, len(case.mderas), T, len(self.quick))
        self.sens = scenarios.sensitivities(case, self.sf)  # per M-DERA (S, T, L)
        self._common = None
        self.check_capacity()

    @property
    def n_scenarios(self) -> int:
        return self.scenarios.n_scenarios

    @property
    def weights(self) -> np.ndarray:
        return self.scenarios.weights

    def check_capacity(self) -> None:
        cap = sum(g.pmax for g in self.case.generators) + sum(a.pmax for a in self.case.mderas)
        peak = self.case.loads.sum(axis=0).max()
        if cap < peak - 1e-9:
            raise CaseError(f"installed capacity {cap:.1f} MW below peak load {peak:.1f} MW")

    # --- first stage ------------------------------------------------------

    def first_stage_costs(self) -> np.ndarray:
        c = np.zeros(self.first.n)
        for g in self.case.generators:
            c[self.first.u[g.id]] = g.startup_cost
            c[self.first.v[g.id]] = g.shutdown_cost
        return c

    def first_stage_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds encoding the minimum on/off time carried over from before t = 0."""
        lb, ub = np.zeros(self.first.n), np.ones(self.first.n)
        T = self.first.T
        for g in self.case.generators:
            h = g.initial_hours
            if h > 0:
                lb[self.first.x[g.id, :max(0, min(T, g.min_on - h))]] = 1.0
            else:
                ub[self.first.x[g.id, :max(0, min(T, g.min_off + h))]] = 0.0
        return lb, ub

    def first_stage_rows(self) -> RowBlock:
        """Switching logic, min up/down times and NR exclusivity (B-part only)."""
        fs, rows = self.first, _Rows()
        T = fs.T
        for g in self.case.generators:
            x, u, v = fs.x[g.id], fs.u[g.id], fs.v[g.id]
            x0 = 1.0 if g.initially_on else 0.0
            for t in range(T):
                prev = [(x[t - 1], 1.0)] if t else []
                rprev = -x0 if t == 0 else 0.0
                # u_t >= x_t - x_{t-1};  v_t >= x_{t-1} - x_t
                rows.add([], [(u[t], 1.0), (x[t], -1.0)] + prev, GE, rprev)
                rows.add([], [(v[t], 1.0), (x[t], 1.0)] + [(j, -c) for j, c in prev], GE, -rprev)
                for tau in range(t + 1, min(t + g.min_on - 1, T - 1) + 1):
                    # x_t - x_{t-1} <= x_tau
                    rows.add([], [(x[t], 1.0), (x[tau], -1.0)] + [(j, -c) for j, c in prev], LE, x0 if t == 0 else 0.0)
                for tau in range(t + 1, min(t + g.min_off - 1, T - 1) + 1):
                    # x_{t-1} - x_t <= 1 - x_tau
                    rows.add([], [(x[t], -1.0), (x[tau], 1.0)] + prev, LE, 1.0 - (x0 if t == 0 else 0.0))
        for q, gid in enumerate(self.quick):
            for t in range(T):
                rows.add([], [(fs.xnr[q, t], 1.0), (fs.x[gid, t], 1.0)], LE, 1.0)
        return rows.block()

    def capacity_cut_rows(self) -> RowBlock:
        """Committed capacity must cover net load plus spinning reserve (implied, but helps masters)."""
        fs, rows = self.first, _Rows()
        mdera_cap = sum(a.pmax for a in self.case.mderas)
        load = self.case.loads.sum(axis=0)
        for t in range(fs.T):
            terms = [(fs.x[g.id, t], g.pmax) for g in self.case.generators]
            rows.add([], terms, GE, load[t] + self.case.sr_req[t] - mdera_cap)
        return rows.block()

    # --- second stage -----------------------------------------------------

    def common_rows(self) -> RowBlock:
        """Scenario rows that do not depend on the DF realization."""
        if self._common is not None:
            return self._common
        case, fs, ss, rows = self.case, self.first, self.second, _Rows()
        T = fs.T
        for g in case.generators:
            i = g.id
            for t in range(T):
                for k, b in g.cost_segments:
                    rows.add([(ss.cg[i, t], 1.0), (ss.pg[i, t], -k)], [(fs.x[i, t], -b)], GE, 0.0)
                rows.add([(ss.pg[i, t], 1.0), (ss.rsr[i, t], -1.0)], [(fs.x[i, t], -g.pmin)], GE, 0.0)
                rows.add([(ss.pg[i, t], 1.0), (ss.rsr[i, t], 1.0)], [(fs.x[i, t], -g.pmax)], LE, 0.0)
                rows.add([(ss.rsr[i, t], 1.0)], [(fs.x[i, t], -g.sr_limit)], LE, 0.0)
                # ramping; t = 0 uses the initial state as constants
                on0 = 1.0 if g.initially_on else 0.0
                p_prev = [(ss.pg[i, t - 1], -1.0)] if t else []
                p0 = 0.0 if t else g.initial_power
                up_x = [(fs.x[i, t], g.pmax - g.pmin)]
                dn_x = [(fs.x[i, t], g.pmin - g.ramp_down)]
                rhs_up, rhs_dn = g.pmax + p0, g.pmax - p0
                if t:
                    up_x.append((fs.x[i, t - 1], g.pmin - g.ramp_up))
                    dn_x.append((fs.x[i, t - 1], g.pmax - g.pmin))
                else:
                    rhs_up -= (g.pmin - g.ramp_up) * on0
                    rhs_dn -= (g.pmax - g.pmin) * on0
                rows.add([(ss.pg[i, t], 1.0)] + p_prev, up_x, LE, rhs_up)
                rows.add([(ss.pg[i, t], -1.0)] + [(j, -c) for j, c in p_prev], dn_x, LE, rhs_dn)
        for q, gid in enumerate(self.quick):
            g = case.generators[gid]
            for t in range(T):
                rows.add([(ss.rnr[q, t], 1.0)], [(fs.xnr[q, t], -g.pmin)], GE, 0.0)
                rows.add([(ss.rnr[q, t], 1.0)], [(fs.xnr[q, t], -g.nr_limit)], LE, 0.0)
        for a_idx, a in enumerate(case.mderas):
            for t in range(T):
                for k, b in a.cost_segments:
                    rows.add([(ss.ca[a_idx, t], 1.0), (ss.pa[a_idx, t], -k)], [], GE, b)
                prev = [(ss.pa[a_idx, t - 1], -1.0)] if t else []
                p0 = 0.0 if t else a.initial_power
                rows.add([(ss.pa[a_idx, t], 1.0)] + prev, [], LE, a.ramp_up + p0)
                rows.add([(ss.pa[a_idx, t], -1.0)] + [(j, -c) for j, c in prev], [], LE, a.ramp_down - p0)
        load = case.loads.sum(axis=0)
        for t in range(T):
            gen = [(ss.pg[g.id, t], 1.0) for g in case.generators]
            der = [(ss.pa[a, t], 1.0) for a in range(len(case.mderas))]
            rows.add(gen + der, [], EQ, load[t])
            sr = [(ss.rsr[g.id, t], 1.0) for g in case.generators]
            rows.add(sr, [], GE, case.sr_req[t])
            nr = [(ss.rnr[q, t], 1.0) for q in range(len(self.quick))]
            rows.add(sr + nr, [], GE, case.sr_req[t] + case.nr_req[t])
        self._common = rows.block()
        return self._common

    def line_rows(self, s: int) -> RowBlock:
        """Two-sided flow limits of scenario s with their exact skip relaxations."""
        case, ss = self.case, self.second
        sf = self.sf
        gbus = np.array([g.bus for g in case.generators], dtype=int)
        gmax = np.array([g.pmax for g in case.generators])
        amax = np.array([a.pmax for a in case.mderas])
        base = sf @ case.loads  # (L, T) flow of the withdrawals
        rows = _Rows()
        for t in range(case.horizon):
            for l, line in enumerate(case.lines):
                cg = sf[l, gbus]
                ca = np.array([self.sens[a][s, t, l] for a in range(len(case.mderas))])
                hi = np.maximum(cg, 0) @ gmax + np.maximum(ca, 0) @ amax - base[l, t]
                lo = np.minimum(cg, 0) @ gmax + np.minimum(ca, 0) @ amax - base[l, t]
                terms = [(ss.pg[i, t], cg[i]) for i in range(len(gbus))]
                terms += [(ss.pa[a, t], ca[a]) for a in range(len(ca))]
                m_up, m_dn = hi - line.capacity, -lo - line.capacity
                if m_up > 0 or not self.options.prune_redundant_lines:
                    rows.add(terms, [], LE, line.capacity + base[l, t], ROW_LINE, max(m_up, 0.0))
                if m_dn > 0 or not self.options.prune_redundant_lines:
                    rows.add([(j, -c) for j, c in terms], [], LE, line.capacity - base[l, t], ROW_LINE, max(m_dn, 0.0))
        return rows.block()

    def scenario_rows(self, s: int) -> RowBlock:
        return _concat_blocks(self.common_rows(), self.line_rows(s))

    def second_stage_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        ss = self.second
        lb, ub = np.zeros(ss.n), np.full(ss.n, np.inf)
        lb[ss.cg.ravel()] = -np.inf
        lb[ss.ca.ravel()] = -np.inf
        for a_idx, a in enumerate(self.case.mderas):
            ub[ss.pa[a_idx]] = a.pmax
        return lb, ub

    def second_stage_costs(self) -> np.ndarray:
        f = np.zeros(self.second.n)
        f[self.second.cg.ravel()] = 1.0
        f[self.second.ca.ravel()] = 1.0
        return f

    def cost_upper_bound(self) -> float:
        """Largest possible scenario cost (used as the skip relaxation of eta)."""
        T = self.case.horizon
        tot = sum(max(max(0.0, b, k * g.pmax + b) for k, b in g.cost_segments) for g in self.case.generators)
        tot += sum(max(max(0.0, b, k * a.pmax + b) for k, b in a.cost_segments) for a in self.case.mderas)
        return T * tot


@dataclass
class ExtensiveLayout:
    n_first: int
    z: np.ndarray
    eta: np.ndarray
    y_offset: np.ndarray  # start of each scenario's y block


def add_products(m: LinearModel, x: np.ndarray, z: np.ndarray, keys) -> dict[tuple[int, int], int]:
    """McCormick auxiliaries w = x_i * z_s for binary x and z, keyed by (s, i)."""
    keys = sorted(set(keys))
    if not keys:
        return {}
    wv = m.add_vars(len(keys), 0.0, 1.0, name="w")
    sc = np.array([k[0] for k in keys])
    xi = np.array([k[1] for k in keys])
    n = len(keys)
    r = np.arange(n)
    one = np.ones(n)
    m.add_rows(np.r_[r, r], np.r_[wv, x[xi]], np.r_[one, -one], LE, np.zeros(n))
    m.add_rows(np.r_[r, r], np.r_[wv, z[sc]], np.r_[one, -one], LE, np.zeros(n))
    m.add_rows(np.r_[r, r, r], np.r_[wv, x[xi], z[sc]], np.r_[one, -one, -one], GE, -one)
    return {k: int(c) for k, c in zip(keys, wv)}


def product_keys(s: int, blk: RowBlock):
    return [(s, int(i)) for i in np.unique(blk.b_cols)]


def add_scenario_block(m: LinearModel, form: UcFormulation, s: int, blk: RowBlock, x: np.ndarray,
                       eta: int, z: int | None = None, products: dict | None = None) -> np.ndarray:
    """Add scenario s with its cost epigraph ``eta >= f y``; returns the y columns.

    With a skip indicator ``z`` the block must vanish when z = 1. The
    perspective form scales every right-hand side by (1 - z) and replaces x
    by x - x*z (``products`` holds those columns), so y = 0 is the only
    dispatch of a skipped scenario. The big-M form relaxes line rows and the
    epigraph instead.
    """
    lb2, ub2 = form.second_stage_bounds()
    ys = m.add_vars(form.second.n, lb2, ub2, name=f"y{s}")
    f = form.second_stage_costs()
    fy = np.flatnonzero(f)
    cols = [ys[blk.a_cols], x[blk.b_cols]]
    vals = [blk.a_vals, blk.b_vals]
    rws = [blk.a_rows, blk.b_rows]
    eta_cols, eta_vals = np.r_[eta, ys[fy]], np.r_[1.0, -f[fy]]
    if z is not None and form.options.skip_form == "bigm":
        line = np.flatnonzero(blk.kind == ROW_LINE)
        rws.append(line)
        cols.append(np.full(line.size, z))
        vals.append(-blk.big_m[line])
        eta_cols, eta_vals = np.r_[eta_cols, z], np.r_[eta_vals, form.cost_upper_bound()]
    elif z is not None:
        nzr = np.flatnonzero(blk.rhs)
        rws += [blk.b_rows, nzr]
        cols += [np.array([products[(s, int(i))] for i in blk.b_cols], dtype=int), np.full(nzr.size, z)]
        vals += [-blk.b_vals, blk.rhs[nzr]]
        # capacity bounds scale too
        pa = form.second.pa
        cap = np.repeat([a.pmax for a in form.case.mderas], pa.shape[1])
        r = np.arange(cap.size)
        m.add_rows(np.r_[r, r], np.r_[ys[pa.ravel()], np.full(cap.size, z)], np.r_[np.ones(cap.size), cap], LE, cap)
    m.add_rows(np.concatenate(rws), np.concatenate(cols), np.concatenate(vals), blk.senses, blk.rhs)
    m.add_row(eta_cols, eta_vals, GE, 0.0)
    return ys


def build_extensive(form: UcFormulation, eps: float) -> tuple[LinearModel, ExtensiveLayout]:
    """Scenario-based chance-constrained UC as one MILP."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    S, w = form.n_scenarios, form.weights
    m = LinearModel("min", "ccuc_extensive")
    lb1, ub1 = form.first_stage_bounds()
    xs = m.add_vars(form.first.n, lb1, ub1, integer=True, obj=form.first_stage_costs(), name="x")
    # a scenario can only be skipped if its weight fits inside the budget
    z_ub = (w <= eps + 1e-12).astype(float)
    z = m.add_vars(S, 0.0, z_ub, integer=True, name="z")
    eta = m.add_vars(S, 0.0, np.inf, obj=w, name="eta")
    fb = form.first_stage_rows()
    m.add_rows(fb.b_rows, xs[fb.b_cols], fb.b_vals, fb.senses, fb.rhs)
    skippable = [s for s in range(S) if z_ub[s] > 0]
    products = {}
    if form.options.skip_form == "perspective":
        products = add_products(m, xs, z, [k for s in skippable for k in product_keys(s, form.scenario_rows(s))])
    offsets = []
    for s in range(S):
        ys = add_scenario_block(m, form, s, form.scenario_rows(s), xs, eta[s],
                                z[s] if z_ub[s] > 0 else None, products)
        offsets.append(ys[0])
    if skippable:
        m.add_row(z, w, LE, eps)
    return m, ExtensiveLayout(form.first.n, z, eta, np.array(offsets))


# --- solutions ----------------------------------------------------------

@dataclass
class UcSolution:
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    xnr: np.ndarray
    pg: np.ndarray  # (S, G, T)
    pa: np.ndarray  # (S, A, T)
    rsr: np.ndarray
    rnr: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    weights: np.ndarray
    objective: float
    status: str = "Optimal"
    eps: float = 0.0
    gap: float = 0.0
    breakdown: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def active(self) -> np.ndarray:
        return self.z < 0.5

    def expected_dispatch(self) -> tuple[np.ndarray, np.ndarray]:
        """Weighted mean over active scenarios of generator and M-DERA dispatch."""
        w = self.weights * self.active
        w = w / w.sum()
        return np.tensordot(w, self.pg, axes=1), np.tensordot(w, self.pa, axes=1)

    def to_dict(self) -> dict:
        r = lambda a: np.round(np.asarray(a, dtype=float), 9).tolist()
        # averages of the rounded scenario values, so a reloaded solution writes the same bytes
        rounded = replace(self, pg=np.round(self.pg, 9), pa=np.round(self.pa, 9))
        pg, pa = rounded.expected_dispatch()
        return {
            "status": self.status,
            "objective": round(float(self.objective), 6),
            "eps": self.eps,
            "gap": float(self.gap),
            "breakdown": {k: round(float(v), 6) for k, v in self.breakdown.items()},
            "commitment": np.rint(self.x).astype(int).tolist(),
            "startup": np.rint(self.u).astype(int).tolist(),
            "shutdown": np.rint(self.v).astype(int).tolist(),
            "nr_commitment": np.rint(self.xnr).astype(int).tolist(),
            "generator_dispatch": r(pg),
            "mdera_dispatch": r(pa),
            "scenario_weights": r(self.weights),
            "scenario_skipped": np.rint(self.z).astype(int).tolist(),
            "scenario_cost": r(self.eta),
            "scenario_generator_dispatch": r(self.pg),
            "scenario_mdera_dispatch": r(self.pa),
            "spinning_reserve": r(self.rsr),
            "nonspinning_reserve": r(self.rnr),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UcSolution":
        a = lambda k: np.asarray(d[k], dtype=float)
        return cls(a("commitment"), a("startup"), a("shutdown"), a("nr_commitment"),
                   a("scenario_generator_dispatch"), a("scenario_mdera_dispatch"),
                   a("spinning_reserve"), a("nonspinning_reserve"), a("scenario_skipped"),
                   a("scenario_cost"), a("scenario_weights"), d["objective"], d["status"],
                   d.get("eps", 0.0), d.get("gap", 0.0), d.get("breakdown", {}), d.get("meta", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "UcSolution":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def first_stage_parts(form: UcFormulation, xv: np.ndarray):
    fs = form.first
    xv = np.rint(xv)
    xnr = np.zeros((fs.G, fs.T))
    if len(form.quick):
        xnr[form.quick] = xv[fs.xnr]
    return xv[fs.x], xv[fs.u], xv[fs.v], xnr


def assemble_solution(form: UcFormulation, xv, ys: list[np.ndarray | None], z, eta, objective,
                      eps, status="Optimal", gap=0.0) -> UcSolution:
    """Package first-stage values and per-scenario y vectors (None for skipped)."""
    ss, fs = form.second, form.first
    S, G, A, T = form.n_scenarios, fs.G, len(form.case.mderas), fs.T
    pg, pa = np.zeros((S, G, T)), np.zeros((S, A, T))
    rsr, rnr = np.zeros((S, G, T)), np.zeros((S, G, T))
    for s, y in enumerate(ys):
        if y is None:
            continue
        pg[s], pa[s], rsr[s] = y[ss.pg], y[ss.pa], y[ss.rsr]
        if len(form.quick):
            rnr[s, form.quick] = y[ss.rnr]
    x, u, v, xnr = first_stage_parts(form, np.asarray(xv))
    c1 = form.first_stage_costs()
    xr = np.rint(np.asarray(xv))
    w = form.weights
    act = np.asarray(z) < 0.5
    gen_cost = mdera_cost = 0.0
    for s, y in enumerate(ys):
        if y is None or not act[s]:
            continue
        gen_cost += w[s] * y[ss.cg].sum()
        mdera_cost += w[s] * y[ss.ca].sum()
    breakdown = {
        "startup": float(c1[fs.u.ravel()] @ xr[fs.u.ravel()]),
        "shutdown": float(c1[fs.v.ravel()] @ xr[fs.v.ravel()]),
        "generation": gen_cost,
        "mdera": mdera_cost,
    }
    return UcSolution(x, u, v, xnr, pg, pa, rsr, rnr, np.rint(np.asarray(z, dtype=float)),
                      np.asarray(eta, dtype=float), w.copy(), float(objective), status, eps, gap, breakdown)


def solve_extensive(form: UcFormulation, eps: float) -> UcSolution:
    model, lay = build_extensive(form, eps)
    res = solve_milp(model, form.options.gap_tol, form.options.time_limit, form.options.backend)
    if res.x is None:
        raise InfeasibleUc(f"extensive CCUC {res.status.value}: {res.message}")
    ys = [res.x[o:o + form.second.n] for o in lay.y_offset]
    z = res.x[lay.z]
    ys = [y if z[s] < 0.5 else None for s, y in enumerate(ys)]
    gap = abs(res.objective - res.dual_bound) / max(abs(res.objective), 1.0)
    return assemble_solution(form, res.x[:form.first.n], ys, z, res.x[lay.eta], res.objective, eps,
                             "Optimal" if res.optimal else "Limit", gap)


class InfeasibleUc(RuntimeError):
    pass


def build_ncuc(case: NetworkCase, dfs, sf=None, options: UcOptions = UcOptions()):
    """Deterministic NCUC with a fixed DF per M-DERA (a vector or a (T, D) array each)."""
    form = UcFormulation(case, ScenarioSet.fixed(dfs, case.horizon), sf, options)
    return build_extensive(form, 0.0)


def solve_ncuc(case: NetworkCase, dfs, sf=None, options: UcOptions = UcOptions()) -> UcSolution:
    return solve_extensive(UcFormulation(case, ScenarioSet.fixed(dfs, case.horizon), sf, options), 0.0)


def build_ccuc_extensive(case: NetworkCase, scenarios: ScenarioSet, eps: float, sf=None,
                         options: UcOptions = UcOptions()):
    return build_extensive(UcFormulation(case, scenarios, sf, options), eps)


# --- scenario LPs -------------------------------------------------------

def scenario_lp(form: UcFormulation, s: int, xv: np.ndarray, rows: RowBlock | None = None) -> LinearModel:
    """Second-stage LP of scenario s with the first stage fixed at ``xv``."""
    blk = form.scenario_rows(s) if rows is None else rows
    m = LinearModel("min", f"scenario_{s}")
    lb, ub = form.second_stage_bounds()
    m.add_vars(form.second.n, lb, ub, obj=form.second_stage_costs(), name="y")
    bx = np.zeros(blk.n_rows)
    np.add.at(bx, blk.b_rows, blk.b_vals * np.asarray(xv, dtype=float)[blk.b_cols])
    m.add_rows(blk.a_rows, blk.a_cols, blk.a_vals, blk.senses, blk.rhs - bx)
    return m


def check_chance_constraint(solution: UcSolution, case: NetworkCase, fresh: ScenarioSet, sf=None,
                            options: UcOptions = UcOptions()) -> float:
    """Fraction of fresh scenarios whose re-dispatch LP cannot respect every line limit."""
    form = UcFormulation(case, fresh, sf, options)
    xv = solution_first_stage_vector(form, solution)
    bad = 0
    for s in range(fresh.n_scenarios):
        res = solve_lp(scenario_lp(form, s, xv), options.backend, want_ray=False)
        if res.status is not Status.OPTIMAL:
            bad += 1
    return bad / fresh.n_scenarios


def solution_first_stage_vector(form: UcFormulation, sol: UcSolution) -> np.ndarray:
    fs = form.first
    xv = np.zeros(fs.n)
    xv[fs.x] = sol.x
    xv[fs.u] = sol.u
    xv[fs.v] = sol.v
    if len(form.quick):
        xv[fs.xnr] = sol.xnr[form.quick]
    return xv


def max_line_violation(form: UcFormulation, sol: UcSolution) -> float:
    """Largest flow excess over capacity among active scenarios (<= 0 when all limits hold)."""
    worst = -math.inf
    gbus = np.array([g.bus for g in form.case.generators], dtype=int)
    cap = np.array([l.capacity for l in form.case.lines])
    for s in np.flatnonzero(sol.active):
        flow = form.sf[:, gbus] @ sol.pg[s] - form.sf @ form.case.loads
        for a in range(len(form.case.mderas)):
            flow += form.sens[a][s].T * sol.pa[s, a]
        worst = max(worst, float((np.abs(flow) - cap[:, None]).max()))
    return worst
