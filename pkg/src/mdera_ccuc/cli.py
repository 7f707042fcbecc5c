"""Command-line pipeline: datagen, fit, sample, solve, simulate and report.

Every subcommand reads an optional JSON config whose keys match the long
flag names (with underscores); flags given on the command line win.
Exit codes: 0 success, 2 usage error, 1 computational failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .benders import BendersConfig, run_benders
from .bhmm.em import EmConfig
from .bhmm.grouping import DfDataset, GroupingConfig
from .bhmm.model import fit_bhmm, load_models, save_models
from .bhmm.sampling import SamplingError
from .cases import BUILTIN, builtin_case
from .dispatch_sim import STRATEGIES, DispatchError, RtedConfig, df_estimate, generate_df_history, simulate
from .network import CaseError, NetworkCase, compute_shift_factors, load_case
from .profiles import load_history, operating_day
from .scenarios import ScenarioSet, sample_scenarios
from .ucmodel import InfeasibleUc, UcFormulation, UcOptions, UcSolution, solve_extensive, solve_ncuc

log = logging.getLogger("mdera_ccuc")

MODES = ("c1", "c2", "c3")
METHODS = ("benders", "extensive")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    case: str = "toy"
    out: str = "run"
    seed: int = 0
    eps: list[float] = field(default_factory=lambda: [0.05])
    scenarios: int = 50
    mode: str = "c3"
    strategy: list[str] = field(default_factory=lambda: list(STRATEGIES))
    model: str | None = None
    df_history: str | None = None
    days: int = 7
    method: str = "extensive"
    gap: float = 1e-4
    sample_mode: str = "independent"
    load_noise: float = 0.01
    solution: str | None = None
    loadshed_penalty: float = 5000.0
    sd_penalty: float = 1000.0
    backend: str = "highs"

    def validate(self) -> None:
        if any(not 0.0 <= e < 1.0 for e in self.eps):
            raise UsageError("every eps must lie in [0, 1)")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}")
        bad = [s for s in self.strategy if s not in STRATEGIES]
        if bad:
            raise UsageError(f"unknown strategies {bad}")
        if self.scenarios < 1:
            raise UsageError("need at least one scenario")
        if self.days < 1:
            raise UsageError("history needs at least one day")
        if self.method not in METHODS:
            raise UsageError(f"method must be one of {METHODS}")
        if not 0.0 < self.gap < 1.0:
            raise UsageError("gap must lie in (0, 1)")


# --- helpers --------------------------------------------------------------------

def _load_case(spec: str) -> NetworkCase:
    if spec in BUILTIN:
        return builtin_case(spec)
    p = Path(spec)
    if not p.is_file():
        raise UsageError(f"case {spec!r} is neither a bundled case {BUILTIN} nor a file")
    return load_case(p)


def _need_file(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing {what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} {path} not found")
    return p


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _eps_tag(eps: float) -> str:
    return f"{100 * eps:g}pct"


def tag_for(mode: str, eps: float | None = None) -> str:
    return mode if mode != "c3" or eps is None else f"{mode}_{_eps_tag(eps)}"


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(rows: list[dict], path: Path) -> None:
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _model_path(cfg: RunConfig) -> Path:
    return _need_file(cfg.model or str(Path(cfg.out) / "bhmm.json"), "BHMM model (--model)")


def _history_path(cfg: RunConfig) -> Path:
    return _need_file(cfg.df_history or str(Path(cfg.out) / "df_history.csv"), "DF history (--df-history)")


# --- commands ------------------------------------------------------------------------

def cmd_datagen(cfg: RunConfig) -> list[Path]:
    """Synthetic multi-day history -> DF records CSV (plus a scatter plot)."""
    from .plotting import plot_df_scatter

    case = _load_case(cfg.case)
    out = _out(cfg)
    loads = load_history(case.loads, cfg.days, cfg.seed, noise=cfg.load_noise)
    data = generate_df_history(case, loads, seed=cfg.seed)
    path = out / "df_history.csv"
    data.to_csv(path)
    plot_df_scatter(data.values, out / "df_history.svg", f"{len(data)} DF records")
    log.info("wrote %d DF records to %s", len(data), path)
    return [path]


def cmd_fit(cfg: RunConfig) -> list[Path]:
    """DF history CSV -> fitted BHMM per M-DERA (JSON)."""
    data = DfDataset.from_csv(_history_path(cfg))
    if len(data) == 0:
        raise UsageError("DF history is empty")
    out = _out(cfg)
    em = EmConfig(rng_seed=cfg.seed)
    models = [fit_bhmm(data.for_mdera(a), GroupingConfig(), em, mdera=int(a)) for a in np.unique(data.mdera)]
    path = out / "bhmm.json"
    save_models(models, path)
    log.info("fitted %d model(s) to %s", len(models), path)
    return [path]


def _scenarios(cfg: RunConfig, case: NetworkCase) -> ScenarioSet:
    models = load_models(_model_path(cfg))
    if len(models) != len(case.mderas):
        raise UsageError(f"model file holds {len(models)} models for {len(case.mderas)} M-DERAs")
    return sample_scenarios(models, cfg.scenarios, case.horizon, cfg.seed, cfg.sample_mode)


def cmd_sample(cfg: RunConfig) -> list[Path]:
    """Fitted BHMM -> DF scenario CSV."""
    case = _load_case(cfg.case)
    sc = _scenarios(cfg, case)
    path = _out(cfg) / "scenarios.csv"
    sc.to_csv(path)
    return [path]


def _solve_one(cfg: RunConfig, case: NetworkCase, sf, eps: float, sc: ScenarioSet | None, out: Path) -> list[Path]:
    from .plotting import plot_benders

    opts = UcOptions(gap_tol=cfg.gap, backend=cfg.backend)
    tag = tag_for(cfg.mode, eps)
    written = []
    if cfg.mode == "c1":
        sol = solve_ncuc(case, df_estimate("uniform", case), sf, opts)
    elif cfg.mode == "c2":
        hist = DfDataset.from_csv(_history_path(cfg))
        sol = solve_ncuc(case, df_estimate("historical_mean", case, history=hist), sf, opts)
    else:
        form = UcFormulation(case, sc, sf, opts)
        if cfg.method == "extensive":
            sol = solve_extensive(form, eps)
        else:
            res = run_benders(form, eps, BendersConfig(gap_tol=cfg.gap))
            if res.solution is None:
                raise InfeasibleUc(f"Benders found no feasible plan ({res.state.status})")
            sol = res.solution
            res.state.write_log(out / f"benders_{tag}.csv")
            res.state.dump_cuts(out / f"cuts_{tag}.json")
            plot_benders([asdict(h) for h in res.state.history], out / f"benders_{tag}.svg")
            written += [out / f"benders_{tag}.csv", out / f"cuts_{tag}.json"]
    sol.meta = dict(sol.meta, mode=cfg.mode, case=case.name, seed=cfg.seed, scenarios=sol.weights.size)
    path = out / f"solution_{tag}.json"
    sol.save(path)
    log.info("%s objective %.2f -> %s", tag, sol.objective, path)
    return [path] + written


def cmd_solve(cfg: RunConfig) -> list[Path]:
    """UC plan for the simulated day: NCUC (c1, c2) or CCUC per eps (c3)."""
    base = _load_case(cfg.case)
    case, _ = operating_day(base, cfg.seed, cfg.load_noise)
    sf = compute_shift_factors(case)
    out = _out(cfg)
    sc = _scenarios(cfg, case) if cfg.mode == "c3" else None
    if sc is not None:
        sc.to_csv(out / "scenarios.csv")
    written = []
    for eps in (cfg.eps if cfg.mode == "c3" else [0.0]):
        written += _solve_one(cfg, case, sf, eps, sc, out)
    return written


def _rted_df(cfg: RunConfig, case: NetworkCase) -> RtedConfig:
    if cfg.mode == "c1":
        df = df_estimate("uniform", case)
        src = "uniform"
    elif cfg.mode == "c2":
        df = df_estimate("historical_mean", case, history=DfDataset.from_csv(_history_path(cfg)))
        src = "historical_mean"
    else:
        df = df_estimate("bhmm_mean", case, models=load_models(_model_path(cfg)))
        src = "bhmm_mean"
    return RtedConfig(df, src, loadshed_penalty=cfg.loadshed_penalty)


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    """RTED plus self-dispatch of each strategy for every solved plan of the mode."""
    from .plotting import plot_loading

    base = _load_case(cfg.case)
    case, load5 = operating_day(base, cfg.seed, cfg.load_noise)
    sf = compute_shift_factors(case)
    out = _out(cfg)
    rcfg = _rted_df(cfg, case)
    tags = [tag_for(cfg.mode, e) for e in cfg.eps] if cfg.mode == "c3" else [cfg.mode]
    written = []
    for tag in tags:
        sol_path = _need_file(cfg.solution if cfg.solution and len(tags) == 1 else str(out / f"solution_{tag}.json"),
                              "solution file")
        sol = UcSolution.load(sol_path)
        _, reports = simulate(case, sol.x, load5, rcfg, cfg.strategy, cfg.sd_penalty, sf)
        rows = []
        for st, rep in reports.items():
            row = {"case": cfg.mode, "eps": sol.eps, **rep.summary(), "uc_cost": sol.objective}
            rows.append(row)
            rep.write_loading_csv(out / f"loading_{tag}_{st}.csv", [l.id for l in case.lines])
            written.append(out / f"loading_{tag}_{st}.csv")
        _write_rows(rows, out / f"eval_{tag}.csv")
        written.append(out / f"eval_{tag}.csv")
        worst = int(np.argmax(np.max([r.loading.max(axis=0) for r in reports.values()], axis=0)))
        plot_loading({st: r.loading for st, r in reports.items()}, worst, out / f"loading_{tag}.svg",
                     f"{tag}: line {case.lines[worst].id}")
    return written


_COST_COLS = ("generation_cost", "ls_cost", "sd_cost", "total_cost")


def cmd_report(cfg: RunConfig) -> list[Path]:
    """Consolidate eval_*.csv files into case, eps and overloading tables."""
    from .plotting import plot_cost_bars

    out = _out(cfg)
    wanted = [tag_for("c1"), tag_for("c2")] + [tag_for("c3", e) for e in cfg.eps]
    rows = []
    for tag in wanted:
        p = out / f"eval_{tag}.csv"
        if not p.is_file():
            log.warning("missing %s; skipped", p.name)
            continue
        rows += _read_rows(p)
    if not rows:
        raise UsageError(f"no evaluation files found in {out}")
    fmt = lambda v: repr(round(float(v), 6))  # noqa: E731
    cases = [{"case": r["case"].upper(), "eps": r["eps"], "strategy": r["strategy"].upper(),
              **{c: fmt(r[c]) for c in _COST_COLS}} for r in rows]
    eps_rows = [{"eps": f"{100 * float(r['eps']):g}%", "strategy": r["strategy"].upper(),
                 "uc_cost": fmt(r["uc_cost"]), **{c: fmt(r[c]) for c in _COST_COLS}}
                for r in rows if r["case"] == "c3"]
    over = [{"case": r["case"].upper(), "eps": f"{100 * float(r['eps']):g}%", "strategy": r["strategy"].upper(),
             "overload_intervals": r["overload_intervals"], "avg_overload_pct": fmt(100 * float(r["avg_overload"]))}
            for r in rows]
    written = []
    for name, table in (("table_cases.csv", cases), ("table_eps.csv", eps_rows), ("table_overload.csv", over)):
        _write_rows(table, out / name)
        written.append(out / name)
    labels = [f"{r['case']} {r['strategy']}" + (f" {r['eps']}" if r["case"] == "C3" else "") for r in cases]
    plot_cost_bars(labels, {"total": [float(r["total_cost"]) for r in cases]}, out / "report_costs.svg")
    return written


COMMANDS = {"datagen": cmd_datagen, "fit": cmd_fit, "sample": cmd_sample, "solve": cmd_solve,
            "simulate": cmd_simulate, "report": cmd_report}


# --- argument handling ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdera-ccuc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        s.add_argument("--config", help="JSON file with default values for any option")
        s.add_argument("--case", help=f"bundled case {BUILTIN} or a case JSON path")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--eps", type=float, nargs="+", help="tolerance level(s) in [0, 1)")
        s.add_argument("--scenarios", type=int, help="number of sampled DF scenarios")
        s.add_argument("--mode", choices=MODES, help="c1 uniform DF, c2 historical mean, c3 BHMM CCUC")
        s.add_argument("--strategy", nargs="+", choices=STRATEGIES)
        s.add_argument("--model", help="fitted BHMM JSON")
        s.add_argument("--df-history", help="DF history CSV")
        s.add_argument("--days", type=int, help="days of synthetic history")
        s.add_argument("--method", choices=METHODS, help="CCUC solution method")
        s.add_argument("--gap", type=float, help="relative optimality gap")
        s.add_argument("--solution", help="solution JSON to simulate")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if isinstance(values.get("eps"), (int, float)):
        values["eps"] = [values["eps"]]
    if isinstance(values.get("strategy"), str):
        values["strategy"] = [values["strategy"]]
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        for p in COMMANDS[args.command](cfg):
            print(p)
    except (UsageError, CaseError, KeyError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleUc, DispatchError, SamplingError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
