"""The bounded hetero-dimensional mixture: HFC atoms plus per-hyperplane mixtures."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .em import EmConfig, select_component_count
from .ggd import Ggdc, ReducedSimplex, mixture_logpdf, sample_unbounded
from .grouping import (DfDataset, Grouping, GroupingConfig, Hfc, group_records, lift,
                       pattern_index, reduce_dimension, zero_set_of)

FORMAT_VERSION = 1


@dataclass
class Hpc:
    """Records sharing one zero pattern.

    Fitted HPCs carry a mixture over the reduced simplex. HPCs that cannot be
    fitted (a single free dimension, or too few records) keep their records as
    equally weighted atoms instead.
    """

    zero_set: tuple[int, ...]
    dropped_dim: int
    dimension: int
    weight: float
    mixture: list[Ggdc] = field(default_factory=list)
    log_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atoms: np.ndarray | None = None  # reduced coordinates of stored records
    reduced_mean: np.ndarray | None = None
    n_records: int = 0
    loglik: float | None = None
    iterations: int = 0

    @property
    def reduced_dim(self) -> int:
        return self.dimension - len(self.zero_set) - 1

    @property
    def region(self) -> ReducedSimplex:
        return ReducedSimplex(self.reduced_dim)

    @property
    def is_fitted(self) -> bool:
        return bool(self.mixture)

    @property
    def index(self) -> int:
        zs = set(self.zero_set)
        return sum(1 << d for d in range(self.dimension) if d not in zs)

    def lift(self, reduced) -> np.ndarray:
        return lift(reduced, self.zero_set, self.dropped_dim, self.dimension)

    def logpdf_reduced(self, r) -> np.ndarray:
        return mixture_logpdf(r, self.mixture, self.region, self.log_norms)

    def to_dict(self) -> dict:
        return {
            "zero_set": list(self.zero_set),
            "dropped_dim": self.dropped_dim,
            "weight": self.weight,
            "n_records": self.n_records,
            "ggdcs": [g.to_dict() for g in self.mixture],
            "log_norms": [float(v) for v in self.log_norms],
            "atoms": None if self.atoms is None else self.atoms.tolist(),
            "reduced_mean": None if self.reduced_mean is None else self.reduced_mean.tolist(),
            "loglik": self.loglik,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict, dimension: int) -> "Hpc":
        atoms = d.get("atoms")
        mean = d.get("reduced_mean")
        return cls(
            tuple(d["zero_set"]), d["dropped_dim"], dimension, d["weight"],
            [Ggdc.from_dict(g) for g in d.get("ggdcs", [])],
            np.asarray(d.get("log_norms", []), dtype=float),
            None if atoms is None else np.asarray(atoms, dtype=float).reshape(len(atoms), -1),
            None if mean is None else np.asarray(mean, dtype=float),
            d.get("n_records", 0), d.get("loglik"), d.get("iterations", 0),
        )


@dataclass
class PdfValue:
    kind: str  # "mass", "density" or "zero"
    value: float


@dataclass
class Bhmm:
    dimension: int
    hfcs: list[Hfc]
    hpcs: list[Hpc]
    mdera: int = 0
    n_records: int = 0
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    meta: dict = field(default_factory=dict)

    @property
    def component_weights(self) -> np.ndarray:
        """HFC weights followed by HPC weights."""
        return np.array([h.weight for h in self.hfcs] + [h.weight for h in self.hpcs])

    def hpc_for(self, h: int) -> Hpc | None:
        for hpc in self.hpcs:
            if hpc.index == h:
                return hpc
        return None

    def to_dict(self) -> dict:
        return {
            "mdera": self.mdera,
            "dimension": self.dimension,
            "n_records": self.n_records,
            "grouping": {
                "high_freq_threshold": self.grouping.high_freq_threshold,
                "identity_tolerance": self.grouping.identity_tolerance,
                "zero_tolerance": self.grouping.zero_tolerance,
            },
            "hfcs": [{"point": h.point.tolist(), "count": h.count, "weight": h.weight} for h in self.hfcs],
            "hpcs": [h.to_dict() for h in self.hpcs],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Bhmm":
        D = d["dimension"]
        return cls(
            D,
            [Hfc(np.asarray(h["point"], dtype=float), h["count"], h["weight"]) for h in d["hfcs"]],
            [Hpc.from_dict(h, D) for h in d["hpcs"]],
            d.get("mdera", 0), d.get("n_records", 0),
            GroupingConfig(**d.get("grouping", {})), d.get("meta", {}),
        )


# exact draws per component for the stored normalizers and means
NORM_DRAWS = 1 << 17


def refine_components(mixture: list[Ggdc], region: ReducedSimplex, fallback_log_norms, seed: int,
                      draws: int = NORM_DRAWS) -> tuple[np.ndarray, np.ndarray]:
    """Normalizers and truncated mean from exact draws of each unbounded component.

    The normalizer of a component is the probability that its unbounded law
    lands in the region, so the inside fraction of exact draws estimates it
    with relative error ~ 1/sqrt(draws) however narrow the component is. The
    uniform integration sample used by EM cannot resolve very narrow
    components. A component with no draw inside keeps its EM normalizer.
    """
    rng = np.random.default_rng(seed)
    log_norms = np.array(fallback_log_norms, dtype=float)
    mean = np.zeros(region.dim)
    for j, g in enumerate(mixture):
        X = sample_unbounded(g, draws, rng)
        inside = X[region.contains(X)]
        if len(inside):
            log_norms[j] = math.log(len(inside) / draws)
            mean += g.weight * inside.mean(axis=0)
        else:
            mean += g.weight * g.mean
    return log_norms, mean


def fit_hpc(reduced: np.ndarray, zero_set, dropped_dim: int, D: int, weight: float,
            cfg: EmConfig, min_records: int) -> Hpc:
    n, K = reduced.shape
    hpc = Hpc(tuple(zero_set), dropped_dim, D, weight, n_records=n)
    if K == 0 or n < min_records:
        hpc.atoms = reduced.copy()
        hpc.reduced_mean = reduced.mean(axis=0)
        return hpc
    _, fit = select_component_count(reduced, cfg)
    hpc.mixture = fit.mixture
    hpc.log_norms, hpc.reduced_mean = refine_components(fit.mixture, fit.region, fit.log_norms, cfg.rng_seed)
    hpc.loglik = float(mixture_logpdf(reduced, fit.mixture, fit.region, hpc.log_norms).sum())
    hpc.iterations = fit.n_iter
    return hpc


def fit_bhmm(data, grouping_cfg: GroupingConfig = GroupingConfig(), em_cfg: EmConfig = EmConfig(),
             mdera: int = 0, min_records: int = 5) -> Bhmm:
    """Group DF records of one M-DERA and fit a mixture per hyperplane group."""
    values = data.values if isinstance(data, DfDataset) else np.atleast_2d(np.asarray(data, dtype=float))
    grouping: Grouping = group_records(values, grouping_cfg)
    N, D = values.shape
    hpcs = []
    for h in sorted(grouping.members):
        zs = zero_set_of(h, D)
        reduced, dropped = reduce_dimension(values[grouping.members[h]], zs, D)
        hpcs.append(fit_hpc(reduced, zs, dropped, D, grouping.hpc_weight(h), em_cfg, min_records))
    meta = {"seed": em_cfg.rng_seed, "mc_sample_count": em_cfg.mc_sample_count,
            "format_version": FORMAT_VERSION}
    return Bhmm(D, grouping.hfcs, hpcs, mdera, N, grouping_cfg, meta)


def bhmm_pdf(x, model: Bhmm) -> PdfValue:
    """Probability mass at an atom, or weighted density on the matching hyperplane."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dimension:
        raise ValueError(f"expected a {model.dimension}-dimensional DF vector")
    if abs(x.sum() - 1.0) > 1e-9 or np.any(x < -1e-9):
        raise ValueError("DF vector is off the simplex")
    tol = model.grouping.identity_tolerance
    for hfc in model.hfcs:
        if np.all(np.abs(x - hfc.point) <= tol):
            return PdfValue("mass", hfc.weight)
    hpc = model.hpc_for(int(pattern_index(x, model.grouping.zero_tolerance)[0]))
    if hpc is None:
        return PdfValue("zero", 0.0)
    r, _ = reduce_dimension(x, hpc.zero_set, model.dimension)
    if not hpc.is_fitted:
        hits = np.all(np.abs(hpc.atoms - r) <= tol, axis=1).sum() if hpc.atoms.shape[1] else hpc.atoms.shape[0]
        return PdfValue("mass", hpc.weight * hits / max(len(hpc.atoms), 1)) if hits else PdfValue("zero", 0.0)
    return PdfValue("density", hpc.weight * math.exp(float(hpc.logpdf_reduced(r)[0])))


def bhmm_mean(model: Bhmm) -> np.ndarray:
    """Expected DF vector: weighted HFC points plus lifted HPC means."""
    out = np.zeros(model.dimension)
    for hfc in model.hfcs:
        out += hfc.weight * hfc.point
    for hpc in model.hpcs:
        out += hpc.weight * hpc.lift(hpc.reduced_mean)[0]
    return out / out.sum()


def save_models(models: list[Bhmm], path) -> None:
    doc = {"format_version": FORMAT_VERSION, "models": [m.to_dict() for m in models]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_models(path) -> list[Bhmm]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [Bhmm.from_dict(m) for m in doc["models"]]
