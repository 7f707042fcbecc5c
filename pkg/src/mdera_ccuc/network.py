"""Power-system case data, DC shift factors and DF-based sensitivity aggregation."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class CaseError(ValueError):
    """Inconsistent or physically invalid case data."""


class DisconnectedNetwork(CaseError):
    pass


class ZeroAggregateOutput(ValueError):
    """DF is undefined when the aggregation produces nothing."""


# aggregates at or below this are treated as zero output
MIN_AGGREGATE_MW = 1e-6


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    capacity: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise CaseError(f"line {self.id}: from_bus == to_bus")
        if self.reactance <= 0 or self.capacity <= 0:
            raise CaseError(f"line {self.id}: reactance and capacity must be > 0")


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    pmin: float
    pmax: float
    ramp_up: float
    ramp_down: float
    min_on: int
    min_off: int
    startup_cost: float
    shutdown_cost: float
    cost_segments: tuple[tuple[float, float], ...]
    sr_limit: float = 0.0
    nr_limit: float = 0.0
    quick_start: bool = False
    # hours online (>0) or offline (<0) before the first period
    initial_hours: int = -1000
    initial_power: float = 0.0

    def __post_init__(self):
        if not 0 <= self.pmin <= self.pmax:
            raise CaseError(f"generator {self.id}: need 0 <= pmin <= pmax")
        slopes = [k for k, _ in self.cost_segments]
        if not self.cost_segments or any(b < a - 1e-12 for a, b in zip(slopes, slopes[1:])):
            raise CaseError(f"generator {self.id}: cost segments must have non-decreasing slopes")

    @property
    def initially_on(self) -> bool:
        return self.initial_hours > 0


@dataclass(frozen=True)
class Der:
    id: int
    bus: int
    pmax: float
    marginal_cost: float

    def __post_init__(self):
        if self.pmax < 0:
            raise CaseError(f"DER {self.id}: pmax must be >= 0")


@dataclass(frozen=True)
class MDera:
    id: int
    ders: tuple[Der, ...]
    pmax: float
    ramp_up: float
    ramp_down: float
    cost_segments: tuple[tuple[float, float], ...]
    initial_power: float = 0.0

    def __post_init__(self):
        if not self.ders:
            raise CaseError(f"M-DERA {self.id}: needs at least one DER")

    @property
    def der_buses(self) -> np.ndarray:
        return np.array([d.bus for d in self.ders], dtype=int)

    @property
    def size(self) -> int:
        return len(self.ders)


@dataclass
class NetworkCase:
    """Static data of one UC instance.

    ``loads`` is a (bus x period) MW matrix; ``sr_req``/``nr_req`` are per-period
    system reserve requirements.
    """

    name: str
    buses: list[Bus]
    lines: list[Line]
    generators: list[Generator]
    mderas: list[MDera]
    loads: np.ndarray
    sr_req: np.ndarray
    nr_req: np.ndarray
    period_minutes: int = 60
    mva_base: float = 100.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.loads = np.atleast_2d(np.asarray(self.loads, dtype=float))
        T = self.loads.shape[1]
        self.sr_req = _per_period(self.sr_req, T, "sr_req")
        self.nr_req = _per_period(self.nr_req, T, "nr_req")
        ids = sorted(b.id for b in self.buses)
        if ids != list(range(len(self.buses))):
            raise CaseError("bus ids must be dense 0..N-1")
        self.buses = sorted(self.buses, key=lambda b: b.id)
        if not any(b.is_slack for b in self.buses):
            raise CaseError("no slack bus flagged")
        if self.loads.shape[0] != len(self.buses):
            raise CaseError("load matrix must have one row per bus")
        if np.any(self.loads < 0) or np.any(self.sr_req < 0) or np.any(self.nr_req < 0):
            raise CaseError("loads and reserve requirements must be non-negative")
        n = len(self.buses)
        for obj in [*self.lines, *self.generators, *(d for a in self.mderas for d in a.ders)]:
            for b in (getattr(obj, "bus", None), getattr(obj, "from_bus", None), getattr(obj, "to_bus", None)):
                if b is not None and not 0 <= b < n:
                    raise CaseError(f"{type(obj).__name__} {obj.id}: bus {b} out of range")

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def horizon(self) -> int:
        return self.loads.shape[1]

    @property
    def slack(self) -> int:
        # first flagged bus is the reference
        return next(b.id for b in self.buses if b.is_slack)

    def with_loads(self, loads, sr_req=None, nr_req=None, period_minutes=None) -> "NetworkCase":
        loads = np.asarray(loads, dtype=float)
        T = loads.shape[1]
        return NetworkCase(
            name=self.name,
            buses=list(self.buses),
            lines=list(self.lines),
            generators=list(self.generators),
            mderas=list(self.mderas),
            loads=loads,
            sr_req=sr_req if sr_req is not None else _stretch(self.sr_req, T),
            nr_req=nr_req if nr_req is not None else _stretch(self.nr_req, T),
            period_minutes=period_minutes or self.period_minutes,
            mva_base=self.mva_base,
            meta=dict(self.meta),
        )

    # --- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "meta": self.meta,
            "mva_base": self.mva_base,
            "period_minutes": self.period_minutes,
            "buses": [asdict(b) for b in self.buses],
            "lines": [asdict(l) for l in self.lines],
            "generators": [
                {**asdict(g), "cost_segments": [list(s) for s in g.cost_segments]}
                for g in self.generators
            ],
            "mderas": [
                {
                    "id": a.id,
                    "pmax": a.pmax,
                    "ramp_up": a.ramp_up,
                    "ramp_down": a.ramp_down,
                    "initial_power": a.initial_power,
                    "cost_segments": [list(s) for s in a.cost_segments],
                    "ders": [asdict(d) for d in a.ders],
                }
                for a in self.mderas
            ],
            "loads": [{"bus": n, "mw": [float(v) for v in row]} for n, row in enumerate(self.loads)],
            "reserves": {"sr": self.sr_req.tolist(), "nr": self.nr_req.tolist()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkCase":
        buses = [Bus(**b) for b in doc["buses"]]
        n = len(buses)
        load_rows = doc["loads"]
        T = max(len(r["mw"]) for r in load_rows) if load_rows else len(doc["reserves"]["sr"])
        loads = np.zeros((n, T))
        for row in load_rows:
            loads[row["bus"], :] = row["mw"]
        gens = []
        for g in doc["generators"]:
            g = dict(g)
            g["cost_segments"] = tuple(tuple(map(float, s)) for s in g["cost_segments"])
            gens.append(Generator(**g))
        mderas = []
        for a in doc["mderas"]:
            a = dict(a)
            a["ders"] = tuple(Der(**d) for d in a["ders"])
            a["cost_segments"] = tuple(tuple(map(float, s)) for s in a["cost_segments"])
            mderas.append(MDera(**a))
        return cls(
            name=doc.get("name", "case"),
            buses=buses,
            lines=[Line(**l) for l in doc["lines"]],
            generators=gens,
            mderas=mderas,
            loads=loads,
            sr_req=np.asarray(doc["reserves"]["sr"], dtype=float),
            nr_req=np.asarray(doc["reserves"]["nr"], dtype=float),
            period_minutes=doc.get("period_minutes", 60),
            mva_base=doc.get("mva_base", 100.0),
            meta=doc.get("meta", {}),
        )


def _per_period(values, T, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(T, float(arr))
    if arr.shape != (T,):
        raise CaseError(f"{name} must have one entry per period ({T})")
    return arr


def _stretch(req: np.ndarray, T: int) -> np.ndarray:
    if req.size == T:
        return req.copy()
    if T % req.size == 0:
        return np.repeat(req, T // req.size)
    return np.resize(req, T)


def load_case(path) -> NetworkCase:
    with open(path, encoding="utf-8") as fh:
        return NetworkCase.from_dict(json.load(fh))


def save_case(case: NetworkCase, path) -> None:
    Path(path).write_text(json.dumps(case.to_dict(), indent=1) + "\n", encoding="utf-8")


def read_loads_csv(path, n_buses: int) -> np.ndarray:
    """Read ``node,period,mw`` rows into a (bus x period) matrix."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append((int(row["node"]), int(row["period"]), float(row["mw"])))
    if not entries:
        raise CaseError(f"{path}: no load rows")
    T = max(p for _, p, _ in entries) + 1
    loads = np.zeros((n_buses, T))
    for n, p, mw in entries:
        loads[n, p] = mw
    return loads


def write_loads_csv(loads: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "period", "mw"])
        for n in range(loads.shape[0]):
            for t in range(loads.shape[1]):
                w.writerow([n, t, repr(float(loads[n, t]))])


# --- shift factors -------------------------------------------------------

def compute_shift_factors(case: NetworkCase) -> np.ndarray:
    """DC injection shift factors, shape (line, bus), relative to the slack bus.

    Entry (l, n) is the MW flow on line l (positive from_bus -> to_bus) per MW
    injected at n and withdrawn at the slack.
    """
    n = case.n_buses
    lines = case.lines
    if not lines:
        return np.zeros((0, n))
    fr = np.array([l.from_bus for l in lines])
    to = np.array([l.to_bus for l in lines])
    b = 1.0 / np.array([l.reactance for l in lines])

    adj = coo_matrix((np.ones(len(lines)), (fr, to)), shape=(n, n))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise DisconnectedNetwork(f"network has {n_comp} islands")

    inc = np.zeros((len(lines), n))
    inc[np.arange(len(lines)), fr] = 1.0
    inc[np.arange(len(lines)), to] = -1.0
    bbus = inc.T @ (b[:, None] * inc)

    keep = np.array([i for i in range(n) if i != case.slack])
    try:
        theta = np.linalg.solve(bbus[np.ix_(keep, keep)], np.eye(len(keep)))
    except np.linalg.LinAlgError as exc:
        raise CaseError("reduced susceptance matrix is singular") from exc

    sf = np.zeros((len(lines), n))
    sf[:, keep] = (b[:, None] * inc[:, keep]) @ theta
    return sf


def compute_df(der_outputs, aggregate: float) -> np.ndarray:
    """Distribution factors of the DERs under one aggregation."""
    out = np.asarray(der_outputs, dtype=float)
    if aggregate <= MIN_AGGREGATE_MW:
        raise ZeroAggregateOutput(f"aggregate output {aggregate} MW")
    if abs(out.sum() - aggregate) > 1e-6:
        raise ValueError(f"DER outputs sum to {out.sum()}, expected {aggregate}")
    df = np.clip(out / aggregate, 0.0, 1.0)
    return df / df.sum()


def aggregate_sensitivity(df, sf: np.ndarray, der_buses, line: int) -> float:
    """DF-weighted sum of the shift factors of the DER buses on one line."""
    df = np.asarray(df, dtype=float)
    der_buses = np.asarray(der_buses, dtype=int)
    if df.shape != der_buses.shape:
        raise ValueError(f"{df.size} DFs for {der_buses.size} DER buses")
    return float(df @ sf[line, der_buses])


def mdera_sensitivities(df, sf: np.ndarray, der_buses) -> np.ndarray:
    """Aggregated sensitivity of one M-DERA to every line (vector over lines)."""
    df = np.asarray(df, dtype=float)
    return sf[:, np.asarray(der_buses, dtype=int)] @ df
