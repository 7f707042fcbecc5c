"""Bundled test systems.

The toy system is small enough for exhaustive checks. The 24-bus skeleton
follows the usual RTS-24 topology with parallel circuits merged; generator,
cost and DER parameters are synthetic.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .network import Bus, Der, Generator, Line, MDera, NetworkCase, load_case

# hourly load shape, fraction of peak
DAILY_SHAPE = np.array([
    0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95,
    0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96, 0.91, 0.83, 0.73, 0.63,
])

BUILTIN = ("toy", "rts24")


def toy_case(horizon: int = 24, peak: float = 150.0) -> NetworkCase:
    """4 buses, 3 generators and one 3-DER M-DERA behind a tight corridor."""
    buses = [Bus(0, True), Bus(1), Bus(2), Bus(3)]
    lines = [
        Line(0, 0, 1, 0.10, 55.0),
        Line(1, 1, 2, 0.10, 200.0),
        Line(2, 2, 3, 0.10, 200.0),
        Line(3, 3, 0, 0.10, 200.0),
        Line(4, 0, 2, 0.20, 200.0),
    ]
    gens = [
        Generator(0, 0, 20.0, 130.0, 60.0, 60.0, 3, 2, 200.0, 20.0, ((12.0, 100.0), (16.0, -160.0)),
                  sr_limit=40.0, initial_hours=8, initial_power=80.0),
        Generator(1, 2, 10.0, 60.0, 40.0, 40.0, 2, 2, 120.0, 10.0, ((24.0, 60.0),),
                  sr_limit=30.0),
        Generator(2, 3, 5.0, 40.0, 40.0, 40.0, 1, 1, 40.0, 0.0, ((45.0, 20.0),),
                  sr_limit=40.0, nr_limit=40.0, quick_start=True),
    ]
    ders = (Der(0, 1, 15.0, 20.0), Der(1, 2, 15.0, 14.0), Der(2, 3, 15.0, 8.0))
    mderas = [MDera(0, ders, 40.0, 40.0, 40.0, ((18.0, 0.0),))]
    shape = np.resize(DAILY_SHAPE, horizon)
    split = np.array([0.0, 0.55, 0.15, 0.30])
    loads = np.outer(split, shape * peak)
    total = loads.sum(axis=0)
    return NetworkCase("toy", buses, lines, gens, mderas, loads, 0.05 * total, 0.03 * total,
                       meta={"synthetic": True})


# (from, to, reactance pu, rating MW); 1-based buses, parallel circuits merged
_RTS_LINES = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175), (2, 4, 0.1267, 175),
    (2, 6, 0.1920, 175), (3, 9, 0.1190, 175), (3, 24, 0.0839, 400), (4, 9, 0.1037, 175),
    (5, 10, 0.0883, 175), (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400), (10, 11, 0.0839, 400),
    (10, 12, 0.0839, 400), (11, 13, 0.0476, 500), (11, 14, 0.0418, 500), (12, 13, 0.0476, 500),
    (12, 23, 0.0966, 500), (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0245, 1000), (15, 24, 0.0519, 500), (16, 17, 0.0259, 500), (16, 19, 0.0231, 500),
    (17, 18, 0.0144, 500), (17, 22, 0.1053, 500), (18, 21, 0.0130, 1000), (19, 20, 0.0198, 1000),
    (20, 23, 0.0108, 1000), (21, 22, 0.0678, 500),
]

# bus, pmin, pmax, ramp, min_on, min_off, startup, segments, quick_start
_RTS_GENS = [
    (1, 60, 192, 120, 3, 2, 1500, ((18.0, 200.0), (21.0, 0.0)), False),
    (2, 60, 192, 120, 3, 2, 1500, ((18.5, 200.0), (21.5, 0.0)), False),
    (7, 100, 300, 150, 4, 3, 3000, ((25.0, 400.0), (28.0, 0.0)), False),
    (13, 200, 591, 240, 5, 4, 5000, ((22.0, 600.0), (25.0, 0.0)), False),
    (15, 12, 60, 60, 1, 1, 200, ((40.0, 50.0),), True),
    (15, 55, 155, 90, 4, 3, 1800, ((14.0, 150.0), (16.0, 0.0)), False),
    (16, 55, 155, 90, 4, 3, 1800, ((14.5, 150.0), (16.5, 0.0)), False),
    (18, 100, 400, 200, 8, 8, 8000, ((6.0, 300.0), (7.0, 0.0)), False),
    (21, 100, 400, 200, 8, 8, 8000, ((6.2, 300.0), (7.2, 0.0)), False),
    (22, 50, 300, 300, 1, 1, 100, ((3.0, 0.0),), False),
    (23, 70, 310, 150, 5, 4, 3500, ((13.0, 300.0), (15.0, 0.0)), False),
    (23, 100, 350, 160, 5, 4, 4000, ((16.0, 300.0), (18.0, 0.0)), False),
]

_RTS_LOADS = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195,
              13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128}

# lines tightened so the M-DERA's location matters (synthetic)
_RTS_TIGHT = {(11, 13): 180.0, (12, 13): 180.0, (19, 20): 200.0}


def rts24_case(horizon: int = 24, load_scale: float = 0.9) -> NetworkCase:
    """24-bus skeleton with one 4-DER M-DERA spanning N11, N12, N19 and N20."""
    buses = [Bus(i, i == 12) for i in range(24)]  # slack at N13
    lines = []
    for k, (f, t, x, cap) in enumerate(_RTS_LINES):
        lines.append(Line(k, f - 1, t - 1, x, _RTS_TIGHT.get((f, t), float(cap))))
    gens = []
    for k, (b, pmin, pmax, ramp, ton, toff, su, seg, qs) in enumerate(_RTS_GENS):
        base = not qs and k in (7, 8, 9, 3)
        gens.append(Generator(k, b - 1, float(pmin), float(pmax), float(ramp), float(ramp), ton, toff,
                              float(su), 0.1 * su, seg, sr_limit=0.4 * pmax, nr_limit=pmax if qs else 0.0,
                              quick_start=qs, initial_hours=24 if base else -24,
                              initial_power=float(0.6 * pmax) if base else 0.0))
    ders = (Der(0, 10, 60.0, 12.0), Der(1, 11, 60.0, 15.0), Der(2, 18, 60.0, 9.0), Der(3, 19, 60.0, 18.0))
    mderas = [MDera(0, ders, 200.0, 100.0, 100.0, ((20.0, 0.0),))]
    peak = np.zeros(24)
    for b, mw in _RTS_LOADS.items():
        peak[b - 1] = mw * load_scale
    loads = np.outer(peak, np.resize(DAILY_SHAPE, horizon))
    total = loads.sum(axis=0)
    meta = {"synthetic": True,
            "note": "RTS-24 topology; generator, cost, rating and DER values are synthetic"}
    return NetworkCase("rts24", buses, lines, gens, mderas, loads, 0.05 * total, 0.03 * total, meta=meta)


def builtin_case(name: str) -> NetworkCase:
    """Load a bundled case file by name ("toy" or "rts24")."""
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin case {name!r}; choose from {BUILTIN}")
    with resources.as_file(resources.files("mdera_ccuc") / "data" / f"{name}.json") as p:
        return load_case(p)
