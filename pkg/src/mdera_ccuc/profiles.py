"""Synthetic 5-minute load series built around an hourly profile."""
from __future__ import annotations

import numpy as np

from .network import NetworkCase

INTERVALS_PER_HOUR = 12


def load_5min(hourly: np.ndarray, rng: np.random.Generator, noise: float = 0.01, ar: float = 0.95,
              nodal_noise: float = 0.005) -> np.ndarray:
    """Interpolate hourly nodal loads (N, T) to (N, 12 T) and add AR(1) fluctuations.

    The system-wide AR(1) term scales every node alike; a small independent
    nodal term breaks the perfect correlation. Loads stay non-negative.
    """
    hourly = np.asarray(hourly, dtype=float)
    N, T = hourly.shape
    K = T * INTERVALS_PER_HOUR
    t_hour = np.arange(T) + 0.5
    t_int = (np.arange(K) + 0.5) / INTERVALS_PER_HOUR
    base = np.vstack([np.interp(t_int, t_hour, row) for row in hourly])
    e = np.empty(K)
    e[0] = rng.normal(0.0, noise)
    shock = rng.normal(0.0, noise * np.sqrt(1.0 - ar * ar), K)
    for k in range(1, K):
        e[k] = ar * e[k - 1] + shock[k]
    scale = 1.0 + e[None, :] + rng.normal(0.0, nodal_noise, (N, K))
    return np.clip(base * scale, 0.0, None)


def hourly_average(load5: np.ndarray, per_hour: int = INTERVALS_PER_HOUR) -> np.ndarray:
    """(N, K) interval loads to (N, K / per_hour) hourly means."""
    N, K = load5.shape
    if K % per_hour:
        raise ValueError(f"{K} intervals do not fill whole hours")
    return load5.reshape(N, K // per_hour, per_hour).mean(axis=2)


def load_history(hourly: np.ndarray, days: int, seed: int = 0, day_sd: float = 0.05,
                 noise: float = 0.01) -> np.ndarray:
    """``days`` consecutive 5-minute days, each with a random overall level."""
    if days < 1:
        raise ValueError("history needs at least one day")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(days):
        level = 1.0 + rng.normal(0.0, day_sd)
        out.append(load_5min(np.asarray(hourly) * level, rng, noise))
    return np.hstack(out)


def case_for_loads(case: NetworkCase, hourly: np.ndarray) -> NetworkCase:
    """Case with new hourly loads; reserve requirements keep their share of load."""
    hourly = np.asarray(hourly, dtype=float)
    if hourly.shape != case.loads.shape:
        raise ValueError(f"loads {hourly.shape} do not match the case {case.loads.shape}")
    scale = hourly.sum(axis=0) / np.maximum(case.loads.sum(axis=0), 1e-12)
    return case.with_loads(hourly, case.sr_req * scale, case.nr_req * scale)


def operating_day(case: NetworkCase, seed: int = 0, noise: float = 0.01) -> tuple[NetworkCase, np.ndarray]:
    """The simulated day: its 5-minute loads and the case holding their hourly means."""
    load5 = load_5min(case.loads, np.random.default_rng(seed), noise)
    return case_for_loads(case, hourly_average(load5)), load5
