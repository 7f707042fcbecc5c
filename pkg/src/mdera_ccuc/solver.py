"""Thin LP/MILP layer so model builders never touch a specific solver.

Models are assembled row by row into a :class:`LinearModel` and solved through
a backend looked up by key. The bundled backend is HiGHS via SciPy.

Duals are reported as the sensitivity of the *reported* objective to each
row's right-hand side, whatever the row sense or objective sense. For an
infeasible LP the result carries a Farkas-type certificate ``ray`` taken from
a phase-1 problem (minimize total row violation): any right-hand side ``b'``
admitting a feasible point must satisfy
``infeasibility + ray @ (b' - b) <= 0``.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

LE, EQ, GE = -1, 0, 1
_SENSES = {"<=": LE, "<": LE, "==": EQ, "=": EQ, ">=": GE, ">": GE, LE: LE, EQ: EQ, GE: GE}


class SolverError(RuntimeError):
    pass


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    LIMIT = "Limit"


@dataclass
class SolveResult:
    status: Status
    objective: float = float("nan")
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    ray: np.ndarray | None = None
    infeasibility: float = 0.0
    dual_bound: float = float("nan")
    wall_time: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class LinearModel:
    """Sparse linear model: variables with bounds/integrality, rows with a sense and rhs."""

    def __init__(self, sense: str = "min", name: str = "model"):
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be 'min' or 'max', got {sense!r}")
        self.name = name
        self.sense = sense
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._int: list[np.ndarray] = []
        self._obj: list[np.ndarray] = []
        self._names: list[tuple[int, str]] = []
        self.n_vars = 0
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._senses: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self.n_rows = 0
        self.obj_offset = 0.0
        self._cache = None

    # --- building --------------------------------------------------------

    def add_vars(self, n: int, lb=0.0, ub=np.inf, integer=False, obj=0.0, name: str | None = None) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + n)
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
        if np.any(lb > ub):
            raise ValueError("variable lower bound above upper bound")
        self._lb.append(lb)
        self._ub.append(ub)
        self._int.append(np.full(n, bool(integer)))
        self._obj.append(np.broadcast_to(np.asarray(obj, dtype=float), (n,)).copy())
        if name:
            self._names.append((self.n_vars, name))
        self.n_vars += n
        self._cache = None
        return idx

    def add_binaries(self, n: int, obj=0.0, name: str | None = None) -> np.ndarray:
        return self.add_vars(n, 0.0, 1.0, integer=True, obj=obj, name=name)

    def add_rows(self, rows, cols, vals, senses, rhs) -> np.ndarray:
        """Add a batch of rows from COO triplets; ``rows`` index the batch (0..m-1)."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        m = rhs.size
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if rows.size and (rows.min() < 0 or rows.max() >= m):
            raise ValueError("row index outside batch")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ValueError("column index refers to an unknown variable")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(rhs)):
            raise ValueError("non-finite coefficient or rhs")
        if isinstance(senses, (str, int)):
            senses = [senses] * m
        sense_codes = np.array([_SENSES[s] for s in senses], dtype=np.int8)
        self._rows.append(rows + self.n_rows)
        self._cols.append(cols)
        self._vals.append(vals)
        self._senses.append(sense_codes)
        self._rhs.append(rhs)
        idx = np.arange(self.n_rows, self.n_rows + m)
        self.n_rows += m
        self._cache = None
        return idx

    def add_row(self, cols, vals, sense, rhs) -> int:
        cols = np.atleast_1d(np.asarray(cols))
        return int(self.add_rows(np.zeros(cols.size, dtype=int), cols, vals, sense, [rhs])[0])

    def set_objective(self, cols, vals, offset: float = 0.0) -> None:
        c = self.objective_vector()
        c[:] = 0.0
        np.add.at(c, np.asarray(cols, dtype=int), np.asarray(vals, dtype=float))
        self._obj = [c]
        self.obj_offset = offset
        self._cache = None

    # --- views ---------------------------------------------------------

    def objective_vector(self) -> np.ndarray:
        return np.concatenate(self._obj) if self._obj else np.zeros(0)

    def arrays(self):
        """(A csr, senses, rhs, lb, ub, c, integrality)."""
        if self._cache is None:
            cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dtype=dt)
            A = sp.csr_matrix(
                (cat(self._vals, float), (cat(self._rows, np.int64), cat(self._cols, np.int64))),
                shape=(self.n_rows, self.n_vars),
            )
            self._cache = (
                A,
                cat(self._senses, np.int8),
                cat(self._rhs, float),
                cat(self._lb, float),
                cat(self._ub, float),
                cat(self._obj, float),
                cat(self._int, bool),
            )
        return self._cache

    @property
    def is_mip(self) -> bool:
        return bool(self.arrays()[6].any())

    def var_name(self, j: int) -> str:
        base, label = 0, "x"
        for start, name in self._names:
            if start <= j:
                base, label = start, name
        return f"{label}_{j - base}" if label != "x" else f"x_{j}"

    def write_lp(self, path) -> None:
        """CPLEX-LP text export for debugging."""
        A, senses, rhs, lb, ub, c, integ = self.arrays()
        num = lambda v: np.format_float_positional(float(v), precision=12, unique=False, fractional=False, trim="-")
        term = lambda coef, j: f"{'-' if coef < 0 else '+'} {num(abs(coef))} {self.var_name(j)}"
        lines = ["\\ " + self.name, "Minimize" if self.sense == "min" else "Maximize", " obj: "]
        lines[-1] += " ".join(term(c[j], j) for j in np.flatnonzero(c)) or "0"
        lines.append("Subject To")
        op = {LE: "<=", EQ: "=", GE: ">="}
        for i in range(A.shape[0]):
            row = A.getrow(i)
            body = " ".join(term(v, j) for j, v in zip(row.indices, row.data)) or "0 x_0"
            lines.append(f" r{i}: {body} {op[int(senses[i])]} {num(rhs[i])}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lo = "-inf" if np.isinf(lb[j]) else num(lb[j])
            hi = "+inf" if np.isinf(ub[j]) else num(ub[j])
            lines.append(f" {lo} <= {self.var_name(j)} <= {hi}")
        gen = [self.var_name(j) for j in np.flatnonzero(integ)]
        if gen:
            lines.append("General")
            lines.append(" " + " ".join(gen))
        lines.append("End")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


# --- HiGHS backend (SciPy) -----------------------------------------------

def _split_rows(A, senses, rhs):
    le = senses == LE
    ge = senses == GE
    eq = senses == EQ
    ub_rows = np.flatnonzero(le | ge)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    A_ub = sp.diags(sign) @ A[ub_rows] if ub_rows.size else None
    b_ub = sign * rhs[ub_rows] if ub_rows.size else None
    eq_rows = np.flatnonzero(eq)
    A_eq = A[eq_rows] if eq_rows.size else None
    b_eq = rhs[eq_rows] if eq_rows.size else None
    return ub_rows, sign, A_ub, b_ub, eq_rows, A_eq, b_eq


def _bounds(lb, ub):
    return np.column_stack([np.where(np.isinf(lb), None, lb), np.where(np.isinf(ub), None, ub)])


class HighsBackend:
    name = "highs"

    def solve_lp(self, model: LinearModel, want_ray: bool = True) -> SolveResult:
        A, senses, rhs, lb, ub, c, _ = model.arrays()
        flip = -1.0 if model.sense == "max" else 1.0
        ub_rows, sign, A_ub, b_ub, eq_rows, A_eq, b_eq = _split_rows(A, senses, rhs)
        t0 = time.perf_counter()
        res = linprog(flip * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=_bounds(lb, ub), method="highs")
        wall = time.perf_counter() - t0
        if res.status == 0:
            duals = np.zeros(model.n_rows)
            if ub_rows.size:
                duals[ub_rows] = sign * res.ineqlin.marginals
            if eq_rows.size:
                duals[eq_rows] = res.eqlin.marginals
            return SolveResult(Status.OPTIMAL, flip * res.fun + model.obj_offset, np.asarray(res.x),
                               flip * duals, dual_bound=flip * res.fun + model.obj_offset,
                               wall_time=wall, message=res.message)
        if res.status == 2:
            out = SolveResult(Status.INFEASIBLE, wall_time=wall, message=res.message)
            if want_ray:
                out.infeasibility, out.ray = phase_one(A, senses, rhs, lb, ub)
                out.wall_time = time.perf_counter() - t0
            return out
        if res.status == 3:
            return SolveResult(Status.UNBOUNDED, -flip * np.inf, wall_time=wall, message=res.message)
        return SolveResult(Status.LIMIT, wall_time=wall, message=res.message)

    def solve_milp(self, model: LinearModel, gap_tol: float = 1e-6, time_limit: float | None = None) -> SolveResult:
        A, senses, rhs, lb, ub, c, integ = model.arrays()
        flip = -1.0 if model.sense == "max" else 1.0
        lo = np.where(senses == LE, -np.inf, rhs)
        hi = np.where(senses == GE, np.inf, rhs)
        cons = [LinearConstraint(A, lo, hi)] if model.n_rows else []
        opts = {"mip_rel_gap": gap_tol, "disp": False}
        if time_limit is not None:
            opts["time_limit"] = float(time_limit)
        t0 = time.perf_counter()
        res = milp(flip * c, integrality=integ.astype(int), bounds=Bounds(lb, ub), constraints=cons, options=opts)
        wall = time.perf_counter() - t0
        dual_bound = getattr(res, "mip_dual_bound", None)
        if dual_bound is None or not np.isfinite(dual_bound):
            dual_bound = res.fun if res.fun is not None else np.nan
        if res.status == 0 and res.x is not None:
            x = np.asarray(res.x)
            x[integ] = np.round(x[integ])
            return SolveResult(Status.OPTIMAL, flip * res.fun + model.obj_offset, x,
                               dual_bound=flip * dual_bound + model.obj_offset, wall_time=wall, message=res.message)
        if res.status == 2:
            return SolveResult(Status.INFEASIBLE, wall_time=wall, message=res.message)
        if res.status == 3:
            return SolveResult(Status.UNBOUNDED, -flip * np.inf, wall_time=wall, message=res.message)
        out = SolveResult(Status.LIMIT, wall_time=wall, message=res.message)
        if res.x is not None:
            out.x = np.asarray(res.x)
            out.objective = flip * res.fun + model.obj_offset
            out.dual_bound = flip * dual_bound + model.obj_offset
        return out


def phase_one(A, senses, rhs, lb, ub):
    """Minimize total row violation; return (violation, dual vector over rows).

    The duals are subgradients of the violation w.r.t. each rhs, so they give
    a feasibility cut for any other rhs.
    """
    m, n = A.shape
    le = senses == LE
    ge = senses == GE
    eq = senses == EQ
    # artificials: one per inequality row, two per equality row
    rows_eq = np.flatnonzero(eq)
    a_rows = np.concatenate([np.flatnonzero(le | ge), rows_eq, rows_eq])
    a_vals = np.concatenate([np.where(le, -1.0, 1.0)[le | ge], np.ones(rows_eq.size), -np.ones(rows_eq.size)])
    k = n + a_rows.size
    a_cols = np.arange(n, k)
    n_art = k - n
    art = sp.csr_matrix((a_vals, (a_rows, a_cols)), shape=(m, k))
    A1 = sp.hstack([A, sp.csr_matrix((m, n_art))]).tocsr() + art
    c1 = np.concatenate([np.zeros(n), np.ones(n_art)])
    lb1 = np.concatenate([lb, np.zeros(n_art)])
    ub1 = np.concatenate([ub, np.full(n_art, np.inf)])
    ub_rows, sign, A_ub, b_ub, eq_rows, A_eq, b_eq = _split_rows(A1, senses, rhs)
    res = linprog(c1, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=_bounds(lb1, ub1), method="highs")
    if res.status != 0:
        raise SolverError(f"phase-1 LP failed: {res.message}")
    duals = np.zeros(m)
    if ub_rows.size:
        duals[ub_rows] = sign * res.ineqlin.marginals
    if eq_rows.size:
        duals[eq_rows] = res.eqlin.marginals
    return float(res.fun), duals


BACKENDS = {"highs": HighsBackend()}


def get_backend(key: str = "highs"):
    try:
        return BACKENDS[key]
    except KeyError:
        raise SolverError(f"unknown solver backend {key!r}; available: {sorted(BACKENDS)}") from None


def solve_lp(model: LinearModel, backend: str = "highs", want_ray: bool = True) -> SolveResult:
    if model.is_mip:
        raise SolverError("solve_lp called on a model with integer variables")
    return get_backend(backend).solve_lp(model, want_ray=want_ray)


def solve_milp(model: LinearModel, gap_tol: float = 1e-6, time_limit: float | None = None,
               backend: str = "highs") -> SolveResult:
    if not model.is_mip:
        return get_backend(backend).solve_lp(model, want_ray=False)
    return get_backend(backend).solve_milp(model, gap_tol=gap_tol, time_limit=time_limit)
