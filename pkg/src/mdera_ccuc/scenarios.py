"""DF scenario sets feeding the chance-constrained UC."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bhmm.model import Bhmm
from .bhmm.sampling import sample_df
from .network import NetworkCase

MODES = ("independent", "constant")


@dataclass
class ScenarioSet:
    """``dfs[a]`` is an (S, T, D_a) array of DF vectors for M-DERA ``a``."""

    dfs: list[np.ndarray]
    weights: np.ndarray

    def __post_init__(self):
        self.dfs = [np.asarray(d, dtype=float) for d in self.dfs]
        self.weights = np.asarray(self.weights, dtype=float)
        S = self.weights.size
        for d in self.dfs:
            if d.ndim != 3 or d.shape[0] != S:
                raise ValueError("each DF array must be (scenarios, periods, ders)")
            if np.any(np.abs(d.sum(axis=2) - 1.0) > 1e-9) or np.any(d < 0):
                raise ValueError("scenario DFs must lie on the simplex")
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("scenario weights must lie on the simplex")

    @property
    def n_scenarios(self) -> int:
        return self.weights.size

    @property
    def horizon(self) -> int:
        return self.dfs[0].shape[1] if self.dfs else 0

    def subset(self, idx) -> "ScenarioSet":
        idx = np.asarray(idx, dtype=int)
        w = self.weights[idx]
        return ScenarioSet([d[idx] for d in self.dfs], w / w.sum())

    def sensitivities(self, case: NetworkCase, sf: np.ndarray) -> list[np.ndarray]:
        """Per M-DERA (S, T, L) aggregated line sensitivities."""
        return [d @ sf[:, m.der_buses].T for d, m in zip(self.dfs, case.mderas)]

    @classmethod
    def fixed(cls, dfs: list[np.ndarray], horizon: int) -> "ScenarioSet":
        """One scenario holding each M-DERA's DF (a vector or a (T, D) array)."""
        out = []
        for d in dfs:
            d = np.asarray(d, dtype=float)
            out.append(np.broadcast_to(d if d.ndim == 2 else d[None, :], (horizon, d.shape[-1]))[None].copy())
        return cls(out, np.ones(1))

    @classmethod
    def uniform(cls, case: NetworkCase, horizon: int | None = None) -> "ScenarioSet":
        T = case.horizon if horizon is None else horizon
        return cls.fixed([np.full(m.size, 1.0 / m.size) for m in case.mderas], T)

    def to_csv(self, path) -> None:
        Dmax = max((d.shape[2] for d in self.dfs), default=0)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# weights: " + " ".join(repr(float(w)) for w in self.weights) + "\n")
            w = csv.writer(fh)
            w.writerow(["scenario", "mdera_id", "period"] + [f"df_{k + 1}" for k in range(Dmax)])
            for s in range(self.n_scenarios):
                for a, d in enumerate(self.dfs):
                    for t in range(d.shape[1]):
                        vals = [repr(float(v)) for v in d[s, t]]
                        w.writerow([s, a, t] + vals + [""] * (Dmax - len(vals)))

    @classmethod
    def from_csv(cls, path) -> "ScenarioSet":
        with open(path, newline="", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# weights:"):
                raise ValueError(f"{path}: missing weights header")
            weights = np.array([float(v) for v in first.split(":", 1)[1].split()])
            rows = list(csv.reader(fh))[1:]
        S = weights.size
        entries: dict[int, dict] = {}
        for r in rows:
            if not r:
                continue
            s, a, t = int(r[0]), int(r[1]), int(r[2])
            entries.setdefault(a, {})[(s, t)] = [float(v) for v in r[3:] if v != ""]
        dfs = []
        for a in sorted(entries):
            e = entries[a]
            T = 1 + max(t for _, t in e)
            D = len(next(iter(e.values())))
            arr = np.zeros((S, T, D))
            for (s, t), v in e.items():
                arr[s, t] = v
            dfs.append(arr)
        return cls(dfs, weights)


def sample_scenarios(models: list[Bhmm], count: int, horizon: int, seed: int = 0,
                     mode: str = "independent", proposal: str = "auto") -> ScenarioSet:
    """Draw ``count`` equally weighted scenarios, one fitted model per M-DERA.

    In ``independent`` mode each (M-DERA, period) draw is separate; ``constant``
    holds one draw per M-DERA over the whole horizon.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if count < 1 or horizon < 1:
        raise ValueError("need at least one scenario and one period")
    rng = np.random.default_rng(seed)
    dfs = []
    for m in models:
        if mode == "independent":
            d, _ = sample_df(m, count * horizon, rng, proposal)
            dfs.append(d.reshape(count, horizon, m.dimension))
        else:
            d, _ = sample_df(m, count, rng, proposal)
            dfs.append(np.repeat(d[:, None, :], horizon, axis=1))
    return ScenarioSet(dfs, np.full(count, 1.0 / count))

