"""Chance-constrained unit commitment with uncertain DER distribution factors.

Multi-node DER aggregations (M-DERAs) bid as one entity, but their line
impact depends on how the aggregate output splits among DERs (the DF
vector). This package fits a bounded hetero-dimensional mixture model to DF
history, samples DF scenarios, solves the scenario CCUC (extensive form or
Benders) and evaluates plans in a 5-minute RTED with M-DERA self-dispatch.
"""
from .benders import BendersConfig, BendersResult, run_benders
from .cases import BUILTIN, builtin_case, rts24_case, toy_case
from .dispatch_sim import (
    EvalReport, RtedConfig, RtedResult, df_estimate, evaluate, generate_df_history, run_rted, self_dispatch,
    simulate,
)
from .network import (
    Bus, CaseError, Der, Generator, Line, MDera, NetworkCase, compute_df, compute_shift_factors, load_case,
    mdera_sensitivities, save_case,
)
from .scenarios import ScenarioSet, sample_scenarios
from .ucmodel import (
    InfeasibleUc, UcFormulation, UcOptions, UcSolution, build_ccuc_extensive, build_ncuc, check_chance_constraint,
    solve_extensive, solve_ncuc,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN", "BendersConfig", "BendersResult", "Bus", "CaseError", "Der", "EvalReport", "Generator",
    "InfeasibleUc", "Line", "MDera", "NetworkCase", "RtedConfig", "RtedResult", "ScenarioSet", "UcFormulation",
    "UcOptions", "UcSolution", "build_ccuc_extensive", "build_ncuc", "builtin_case", "check_chance_constraint",
    "compute_df", "compute_shift_factors", "df_estimate", "evaluate", "generate_df_history", "load_case",
    "mdera_sensitivities", "rts24_case", "run_benders", "run_rted", "sample_scenarios", "save_case",
    "self_dispatch", "simulate", "solve_extensive", "solve_ncuc", "toy_case",
]
