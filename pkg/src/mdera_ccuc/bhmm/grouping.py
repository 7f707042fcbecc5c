"""DF records, HFC/HPC grouping and per-hyperplane dimension reduction."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DfDataset:
    """DF vectors of one or more M-DERAs; ``values`` is (records x D)."""

    values: np.ndarray
    periods: np.ndarray
    mdera: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        n = self.values.shape[0]
        self.periods = np.broadcast_to(np.asarray(self.periods, dtype=int), (n,)).copy()
        self.mdera = np.broadcast_to(np.asarray(self.mdera, dtype=int), (n,)).copy()

    def __len__(self):
        return self.values.shape[0]

    def for_mdera(self, mdera_id: int) -> "DfDataset":
        keep = self.mdera == mdera_id
        return DfDataset(self.values[keep], self.periods[keep], self.mdera[keep])

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def to_csv(self, path) -> None:
        D = self.values.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["mdera_id", "period"] + [f"df_{d + 1}" for d in range(D)])
            for a, t, row in zip(self.mdera, self.periods, self.values):
                w.writerow([int(a), int(t)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "DfDataset":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            cols = [i for i, h in enumerate(header) if h.startswith("df_")]
            for r in reader:
                if not r:
                    continue
                vals = [float(r[i]) for i in cols if i < len(r) and r[i] != ""]
                rows.append((int(r[0]), int(r[1]), vals))
        if not rows:
            raise ValueError(f"{path}: no DF records")
        D = len(rows[0][2])
        if any(len(v) != D for _, _, v in rows):
            raise ValueError(f"{path}: mixed dimensions; split per M-DERA first")
        return cls(np.array([v for *_, v in rows]), [t for _, t, _ in rows], [a for a, _, _ in rows])


@dataclass(frozen=True)
class GroupingConfig:
    high_freq_threshold: int | None = None  # None -> max(2, ceil(0.01 N))
    identity_tolerance: float = 1e-9
    zero_tolerance: float = 1e-6

    def threshold_for(self, n: int) -> int:
        f = self.high_freq_threshold
        if f is None:
            f = max(2, math.ceil(0.01 * n))
        if f < 2:
            raise ValueError("high-frequency threshold must be >= 2")
        return f


@dataclass
class Hfc:
    point: np.ndarray
    count: int
    weight: float


@dataclass
class Grouping:
    hfcs: list[Hfc]
    members: dict[int, np.ndarray]  # HPC index h -> record indices
    n_records: int
    dimension: int
    hfc_members: list[np.ndarray] = field(default_factory=list)

    def hpc_weight(self, h: int) -> float:
        return self.members[h].size / self.n_records


def validate_records(values: np.ndarray, tol: float = 1e-9) -> None:
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("empty DF dataset")
    if np.any(np.abs(values.sum(axis=1) - 1.0) > tol):
        raise ValueError("DF records must sum to 1")
    if np.any(values < -tol) or np.any(values > 1 + tol):
        raise ValueError("DF values must lie in [0, 1]")


def zero_set_of(h: int, D: int) -> tuple[int, ...]:
    """Dimensions whose binary digit in ``h`` is zero (digit d <-> dimension d)."""
    return tuple(d for d in range(D) if not (h >> d) & 1)


def pattern_index(values: np.ndarray, zero_tolerance: float = 1e-6) -> np.ndarray:
    """HPC index of each record: bit d set iff DF_d is nonzero."""
    nz = np.atleast_2d(values) > zero_tolerance
    return (nz * (1 << np.arange(nz.shape[1]))).sum(axis=1)


def group_records(values, cfg: GroupingConfig = GroupingConfig()) -> Grouping:
    """Split records into high-frequency points and zero-pattern hyperplane groups."""
    if isinstance(values, DfDataset):
        values = values.values
    values = np.atleast_2d(np.asarray(values, dtype=float))
    validate_records(values)
    N, D = values.shape
    f = cfg.threshold_for(N)

    keys = np.round(values / cfg.identity_tolerance).astype(np.int64)
    _, first, inverse, counts = np.unique(keys, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    remaining = np.ones(N, dtype=bool)
    hfcs, hfc_members = [], []
    for u in np.flatnonzero(counts >= f):
        idx = np.flatnonzero(inverse == u)
        hfcs.append(Hfc(values[first[u]].copy(), int(counts[u]), counts[u] / N))
        hfc_members.append(idx)
        remaining[idx] = False

    rest = np.flatnonzero(remaining)
    h_of = pattern_index(values[rest], cfg.zero_tolerance)
    members = {int(h): rest[h_of == h] for h in np.unique(h_of)}
    return Grouping(hfcs, members, N, D, hfc_members)


def free_dims(zero_set, D: int) -> list[int]:
    zs = set(zero_set)
    return [d for d in range(D) if d not in zs]


def reduce_dimension(records, zero_set, D: int | None = None):
    """Drop the zero dimensions and the highest-index free one.

    Returns ``(reduced, dropped_dim)``; ``reduced`` has shape (n, D - |zero_set| - 1),
    which is zero columns when only one dimension is free.
    """
    records = np.atleast_2d(np.asarray(records, dtype=float))
    D = records.shape[1] if D is None else D
    free = free_dims(zero_set, D)
    if not free:
        raise ValueError("a DF record cannot be zero in every dimension")
    return records[:, free[:-1]], free[-1]


def lift(reduced, zero_set, dropped_dim: int, D: int) -> np.ndarray:
    reduced = np.atleast_2d(np.asarray(reduced, dtype=float))
    free = free_dims(zero_set, D)
    out = np.zeros((reduced.shape[0], D))
    out[:, free[:-1]] = reduced
    out[:, dropped_dim] = 1.0 - reduced.sum(axis=1)
    return out
