"""Benders decomposition of the scenario-based CCUC.

The master problem holds the commitment binaries, the scenario skip
binaries z and one cost variable per scenario. Each cut is generated from a
scenario LP solved at the current commitment and is multiplied by (1 - z_s)
in the master; the products x * z_s are replaced by exact McCormick
auxiliaries.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .solver import GE, LE, LinearModel, Status, solve_lp, solve_milp
from .ucmodel import (InfeasibleUc, RowBlock, UcFormulation, UcSolution, add_products, add_scenario_block,
                      assemble_solution, product_keys, scenario_lp, solve_extensive,
                      solution_first_stage_vector)

log = logging.getLogger(__name__)

OPTIMALITY, FEASIBILITY = "optimality", "feasibility"


@dataclass(frozen=True)
class BendersConfig:
    gap_tol: float = 1e-4
    max_iter: int = 100
    master_gap: float = 1e-7
    master_time_limit: float | None = None
    warm_start: bool = True
    seed_scenarios: int = 5
    capacity_cut: bool = True
    # one network-free dispatch copy inside the master (valid for every active scenario)
    dispatch_copy: bool = True
    # scenarios that produce a feasibility cut are moved into the master in full
    promote_infeasible: bool = True
    # keep the warm-start seed scenarios in the master in full
    keep_seed_scenarios: bool = True
    time_limit: float | None = None


@dataclass
class BendersCut:
    """Cut ``(alpha + beta @ x) * (1 - z_s) <= eta_s`` (optimality) or ``<= 0`` (feasibility)."""

    kind: str
    scenario: int
    alpha: float
    beta: np.ndarray
    iteration: int
    duals: np.ndarray | None = None

    def value(self, x) -> float:
        return float(self.alpha + self.beta @ x)

    def to_dict(self) -> dict:
        nz = np.flatnonzero(self.beta)
        return {
            "kind": self.kind,
            "scenario": self.scenario,
            "iteration": self.iteration,
            "alpha": float(self.alpha),
            "beta": {str(int(i)): float(self.beta[i]) for i in nz},
        }


@dataclass
class SubResult:
    scenario: int
    feasible: bool
    theta: float
    y: np.ndarray | None
    cut: BendersCut


@dataclass
class IterRecord:
    iter: int
    lb: float
    ub: float
    gap: float
    activated: int
    cuts_added: int
    wall_ms: float


@dataclass
class BendersState:
    lb: float = -np.inf
    ub: float = np.inf
    iter: int = 0
    x_hat: np.ndarray | None = None
    z_hat: np.ndarray | None = None
    cuts: list[BendersCut] = field(default_factory=list)
    history: list[IterRecord] = field(default_factory=list)
    status: str = "NotStarted"

    @property
    def gap(self) -> float:
        if not np.isfinite(self.ub) or not np.isfinite(self.lb):
            return np.inf
        return (self.ub - self.lb) / max(abs(self.lb), 1.0)

    def write_log(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "lb", "ub", "gap", "activated_scenarios", "cuts_added", "wall_ms"])
            for r in self.history:
                w.writerow([r.iter, f"{r.lb:.6f}", f"{r.ub:.6f}", f"{r.gap:.3e}", r.activated, r.cuts_added,
                            f"{r.wall_ms:.0f}"])

    def dump_cuts(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([c.to_dict() for c in self.cuts], fh, indent=1)
            fh.write("\n")


class _RowCache:
    def __init__(self, form: UcFormulation):
        self.form = form
        self._rows: dict[int, RowBlock] = {}

    def __getitem__(self, s: int) -> RowBlock:
        if s not in self._rows:
            self._rows[s] = self.form.scenario_rows(s)
        return self._rows[s]


def _bt_dot(blk: RowBlock, d: np.ndarray, n_first: int) -> np.ndarray:
    out = np.zeros(n_first)
    np.add.at(out, blk.b_cols, blk.b_vals * d[blk.b_rows])
    return out


def solve_subproblem(form: UcFormulation, s: int, x_hat: np.ndarray, rows: RowBlock | None = None,
                     iteration: int = 0) -> SubResult:
    """Scenario LP at a fixed commitment, with the cut it induces.

    The scenario value is convex in the right-hand side ``b - B x``; its duals
    give the subgradient, so ``theta + d @ (-B)(x - x_hat)`` under-estimates
    the scenario cost at any other x. Infeasible scenarios yield the analogous
    cut from the phase-1 violation.
    """
    blk = form.scenario_rows(s) if rows is None else rows
    model = scenario_lp(form, s, x_hat, blk)
    res = solve_lp(model, form.options.backend, want_ray=True)
    n = form.first.n
    if res.status is Status.OPTIMAL:
        beta = -_bt_dot(blk, res.duals, n)
        alpha = res.objective - beta @ x_hat
        return SubResult(s, True, res.objective, res.x,
                         BendersCut(OPTIMALITY, s, alpha, beta, iteration, res.duals))
    if res.status is Status.INFEASIBLE and res.ray is not None:
        beta = -_bt_dot(blk, res.ray, n)
        alpha = res.infeasibility - beta @ x_hat
        return SubResult(s, False, np.inf, None, BendersCut(FEASIBILITY, s, alpha, beta, iteration, res.ray))
    raise InfeasibleUc(f"scenario {s} LP failed: {res.status.value} {res.message}")


@dataclass
class MasterLayout:
    x: np.ndarray
    z: np.ndarray
    eta: np.ndarray


def build_master(form: UcFormulation, cuts: list[BendersCut], eps: float,
                 capacity_cut: bool = True, dispatch_copy: bool = True,
                 full: frozenset[int] = frozenset(), rows: _RowCache | None = None) -> tuple[LinearModel, MasterLayout]:
    """Master MILP over (x, z, eta) with the given cuts.

    With ``dispatch_copy`` the master also carries one copy of the scenario
    constraints that do not involve DFs (everything but line limits). The
    cheapest active scenario's dispatch satisfies them, and since active
    scenarios hold at least 1 - eps of the weight, the copy's cost times
    1 - eps bounds the expected cost from below. Scenarios in ``full``
    enter with their complete block, exactly as in the extensive form.
    """
    S, w = form.n_scenarios, form.weights
    m = LinearModel("min", "benders_master")
    lb1, ub1 = form.first_stage_bounds()
    x = m.add_vars(form.first.n, lb1, ub1, integer=True, obj=form.first_stage_costs(), name="x")
    z = m.add_vars(S, 0.0, (w <= eps + 1e-12).astype(float), integer=True, name="z")
    eta = m.add_vars(S, 0.0, np.inf, obj=w, name="eta")
    fb = form.first_stage_rows()
    m.add_rows(fb.b_rows, x[fb.b_cols], fb.b_vals, fb.senses, fb.rhs)
    if capacity_cut:
        cb = form.capacity_cut_rows()
        m.add_rows(cb.b_rows, x[cb.b_cols], cb.b_vals, cb.senses, cb.rhs)
    m.add_row(z, w, LE, eps)
    if dispatch_copy:
        lb2, ub2 = form.second_stage_bounds()
        y = m.add_vars(form.second.n, lb2, ub2, name="ybar")
        cb = form.common_rows()
        m.add_rows(np.concatenate([cb.a_rows, cb.b_rows]), np.concatenate([y[cb.a_cols], x[cb.b_cols]]),
                   np.concatenate([cb.a_vals, cb.b_vals]), cb.senses, cb.rhs)
        f = form.second_stage_costs()
        fy = np.flatnonzero(f)
        # active scenarios carry at least 1 - eps of the weight
        m.add_row(np.r_[eta, y[fy]], np.r_[w, -(1.0 - eps) * f[fy]], GE, 0.0)

    # McCormick auxiliaries w = x_i * z_s for the cuts and the perspective blocks
    rows = rows or _RowCache(form)
    skippable = w <= eps + 1e-12
    # cuts of scenarios held in full are implied by their blocks
    cuts = [c for c in cuts if c.scenario not in full]
    keys = [(c.scenario, int(i)) for c in cuts for i in np.flatnonzero(c.beta)]
    if form.options.skip_form == "perspective":
        keys += [k for s in full if skippable[s] for k in product_keys(s, rows[s])]
    aux = add_products(m, x, z, keys)
    for s in sorted(full):
        add_scenario_block(m, form, s, rows[s], x, eta[s], z[s] if skippable[s] else None, aux)

    for c in cuts:
        nz = np.flatnonzero(c.beta)
        cols = [x[nz], [aux[(c.scenario, int(i))] for i in nz], [z[c.scenario]]]
        vals = [c.beta[nz], -c.beta[nz], [-c.alpha]]
        if c.kind == OPTIMALITY:
            cols.append([eta[c.scenario]])
            vals.append([-1.0])
        m.add_row(np.concatenate(cols).astype(int), np.concatenate(vals), LE, -c.alpha)
    return m, MasterLayout(x, z, eta)


@dataclass
class Incumbent:
    x: np.ndarray
    z: np.ndarray
    ys: list
    thetas: np.ndarray
    value: float


def _incumbent_from(form: UcFormulation, x_hat: np.ndarray, subs: dict[int, SubResult], eps: float,
                    z: np.ndarray | None = None) -> Incumbent | None:
    """Incumbent at x_hat; without z, skip infeasible scenarios first, then the costliest."""
    S, w = form.n_scenarios, form.weights
    if z is None:
        if len(subs) < S:
            return None
        z = np.zeros(S)
        budget = eps + 1e-12
        for s in range(S):
            if not subs[s].feasible:
                z[s] = 1
                budget -= w[s]
        if budget < 0:
            return None
        for s in sorted((s for s in range(S) if subs[s].feasible), key=lambda s: -w[s] * subs[s].theta):
            if w[s] <= budget:
                z[s] = 1
                budget -= w[s]
    active = np.flatnonzero(z < 0.5)
    if any(s not in subs or not subs[s].feasible for s in active):
        return None
    thetas = np.zeros(S)
    for s in active:
        thetas[s] = subs[s].theta
    value = float(form.first_stage_costs() @ x_hat + w @ thetas)
    ys = [subs[s].y if z[s] < 0.5 else None for s in range(S)]
    return Incumbent(x_hat.copy(), z.copy(), ys, thetas, value)


def warm_start(form: UcFormulation, eps: float, cfg: BendersConfig = BendersConfig(),
               rows: _RowCache | None = None) -> tuple[list[BendersCut], Incumbent | None]:
    """Seed cuts and an incumbent from an extensive form on a few scenarios."""
    rows = rows or _RowCache(form)
    k = min(form.n_scenarios, cfg.seed_scenarios)
    seed = UcFormulation(form.case, form.scenarios.subset(np.arange(k)), form.sf, form.options)
    try:
        sol = solve_extensive(seed, eps)
    except InfeasibleUc:
        log.info("warm start seed infeasible; cold start")
        return [], None
    x_hat = solution_first_stage_vector(form, sol)
    subs = {s: solve_subproblem(form, s, x_hat, rows[s], 0) for s in range(form.n_scenarios)}
    return [r.cut for r in subs.values()], _incumbent_from(form, x_hat, subs, eps)


@dataclass
class BendersResult:
    solution: UcSolution | None
    state: BendersState


def run_benders(form: UcFormulation, eps: float, cfg: BendersConfig = BendersConfig()) -> BendersResult:
    """Multi-cut Benders loop; returns the incumbent that attains the upper bound."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    t_start = time.perf_counter()
    rows = _RowCache(form)
    state = BendersState(status="Running")
    best: Incumbent | None = None
    full: set[int] = set()
    if cfg.warm_start:
        cuts, best = warm_start(form, eps, cfg, rows)
        state.cuts.extend(cuts)
        if best is not None:
            state.ub = best.value
        if cfg.keep_seed_scenarios:
            full.update(range(min(form.n_scenarios, cfg.seed_scenarios)))

    for k in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        state.iter = k
        master, lay = build_master(form, state.cuts, eps, cfg.capacity_cut, cfg.dispatch_copy,
                                   frozenset(full), rows)
        res = solve_milp(master, cfg.master_gap, cfg.master_time_limit, form.options.backend)
        if res.x is None:
            state.status = "Infeasible"
            raise InfeasibleUc(f"Benders master {res.status.value}: {res.message}")
        state.lb = max(state.lb, min(res.dual_bound, res.objective))
        x_hat = np.rint(res.x[lay.x])
        z_hat = np.rint(res.x[lay.z])
        state.x_hat, state.z_hat = x_hat, z_hat
        active = np.flatnonzero(z_hat < 0.5)
        subs = {}
        for s in active:
            subs[int(s)] = solve_subproblem(form, int(s), x_hat, rows[int(s)], k)
        state.cuts.extend(r.cut for r in subs.values())
        if cfg.promote_infeasible:
            full.update(s for s, r in subs.items() if not r.feasible)
        cand = _incumbent_from(form, x_hat, subs, eps, z_hat)
        if cand is not None and cand.value < state.ub:
            state.ub, best = cand.value, cand
        state.history.append(IterRecord(k, state.lb, state.ub, state.gap, len(active), len(subs),
                                        1000 * (time.perf_counter() - t0)))
        log.info("benders iter %d lb %.4f ub %.4f gap %.2e", k, state.lb, state.ub, state.gap)
        if state.gap <= cfg.gap_tol:
            state.status = "Converged"
            break
        if cfg.time_limit is not None and time.perf_counter() - t_start > cfg.time_limit:
            state.status = "NotConverged"
            break
    else:
        state.status = "NotConverged"

    if best is None:
        return BendersResult(None, state)
    sol = assemble_solution(form, best.x, best.ys, best.z, best.thetas, best.value, eps,
                            "Optimal" if state.status == "Converged" else state.status, state.gap)
    sol.meta = {"method": "benders", "iterations": state.iter, "lb": state.lb, "ub": state.ub,
                "cuts": len(state.cuts), "scenarios_in_master": sorted(full)}
    return BendersResult(sol, state)
