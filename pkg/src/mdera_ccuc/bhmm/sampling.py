"""Drawing DF vectors from a fitted BHMM."""
from __future__ import annotations

import logging

import numpy as np

from .em import EmConfig, integration_sample
from .ggd import sample_unbounded
from .model import Bhmm, Hpc

log = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-4
ENVELOPE_FACTOR = 1.2
_BATCH = 4096


class SamplingError(RuntimeError):
    pass


def envelope(hpc: Hpc, samples: np.ndarray) -> float:
    """1.2 x the largest mixture density seen on the samples and at interior means."""
    pts = [samples] + [g.mean[None, :] for g in hpc.mixture if hpc.region.contains(g.mean)[0]]
    return ENVELOPE_FACTOR * float(np.exp(hpc.logpdf_reduced(np.vstack(pts))).max())


def _valid(hpc: Hpc, cand: np.ndarray, zero_tol: float) -> np.ndarray:
    """Lifted candidates must stay nonzero on every free dimension."""
    full = hpc.lift(cand)
    free = [d for d in range(hpc.dimension) if d not in set(hpc.zero_set)]
    return np.all(full[:, free] > zero_tol, axis=1)


def rejection_sample(hpc: Hpc, n: int, rng: np.random.Generator, samples: np.ndarray,
                     zero_tol: float = 1e-6, max_restarts: int = 20) -> np.ndarray:
    """Uniform-envelope rejection sampling on the reduced simplex."""
    region = hpc.region
    M = envelope(hpc, samples)
    for _ in range(max_restarts):
        out, accepted, tried = [], 0, 0
        restart = False
        while accepted < n:
            cand = region.uniform(_BATCH, rng)
            dens = np.exp(hpc.logpdf_reduced(cand))
            u = rng.random(_BATCH)
            tried += _BATCH
            if np.any(dens > M):
                M *= 2.0
                restart = True
                break
            keep = (u * M < dens) & _valid(hpc, cand, zero_tol)
            out.append(cand[keep])
            accepted += int(keep.sum())
            if tried >= 100_000 and accepted / tried < MIN_ACCEPTANCE:
                raise SamplingError(
                    f"acceptance rate {accepted / tried:.2e} below {MIN_ACCEPTANCE:g} for HPC "
                    f"{hpc.zero_set} (envelope {M:.3g}); try proposal='component'")
        if not restart:
            return np.vstack(out)[:n]
    raise SamplingError("envelope kept growing; density is unbounded on the region")


def component_sample(hpc: Hpc, n: int, rng: np.random.Generator, zero_tol: float = 1e-6) -> np.ndarray:
    """Exact alternative: pick a component, draw it untruncated and keep draws inside the region."""
    counts = rng.multinomial(n, [g.weight for g in hpc.mixture])
    out = []
    for g, k in zip(hpc.mixture, counts):
        got, need, tried = [], int(k), 0
        while need > 0:
            m = max(256, 2 * need)
            s = sample_unbounded(g, m, rng)
            tried += m
            ok = hpc.region.contains(s) & _valid(hpc, s, zero_tol)
            take = s[ok][:need]
            got.append(take)
            need -= len(take)
            if tried >= 100_000 and sum(len(x) for x in got) / tried < MIN_ACCEPTANCE:
                raise SamplingError(f"component mass inside region too small for HPC {hpc.zero_set}")
        if got:
            out.append(np.vstack(got))
    res = np.vstack(out) if out else np.zeros((0, hpc.reduced_dim))
    return res[rng.permutation(len(res))]


def sample_hpc(hpc: Hpc, n: int, rng: np.random.Generator, samples: np.ndarray | None = None,
               proposal: str = "auto", zero_tol: float = 1e-6) -> np.ndarray:
    """n full-dimension DF vectors from one hyperplane component."""
    if n == 0:
        return np.zeros((0, hpc.dimension))
    if not hpc.is_fitted:
        pick = rng.integers(0, len(hpc.atoms), n)
        return hpc.lift(hpc.atoms[pick])
    if samples is None:
        samples = integration_sample(hpc.region, EmConfig())
    if proposal == "auto":
        rate = 1.0 / (hpc.region.volume * envelope(hpc, samples))
        proposal = "uniform" if rate >= 1e-3 else "component"
    if proposal == "uniform":
        red = rejection_sample(hpc, n, rng, samples, zero_tol)
    elif proposal == "component":
        red = component_sample(hpc, n, rng, zero_tol)
    else:
        raise ValueError(f"unknown proposal {proposal!r}")
    full = hpc.lift(red)
    full[:, list(hpc.zero_set)] = 0.0
    return full


def sample_df(model: Bhmm, n: int, rng: np.random.Generator, proposal: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Draw n DF vectors; also returns the selected component index per draw.

    Components are numbered HFCs first, then HPCs, in model order.
    """
    w = model.component_weights
    comp = rng.choice(len(w), size=n, p=w / w.sum())
    out = np.zeros((n, model.dimension))
    nh = len(model.hfcs)
    for i, hfc in enumerate(model.hfcs):
        out[comp == i] = hfc.point
    for k, hpc in enumerate(model.hpcs):
        idx = np.flatnonzero(comp == nh + k)
        if idx.size:
            out[idx] = sample_hpc(hpc, idx.size, rng, proposal=proposal,
                                  zero_tol=model.grouping.zero_tolerance)
    # exact simplex: renormalize away rounding in the dropped coordinate
    out = np.clip(out, 0.0, None)
    out /= out.sum(axis=1, keepdims=True)
    return out, comp
