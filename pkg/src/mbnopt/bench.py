"""Sequential-loading baselines: kSP-FF and FF-kSP.

The network is loaded with fixed-size demand units, pair by pair in a
randomized proportional round-robin, until the first unit that cannot be
carried. A unit is served from the residual capacity of the pair's already
established lightpaths when possible; otherwise exactly one new lightpath
is opened for it:

* kSP-FF scans all wavelengths for the best-ranked route before moving to
  the next route;
* FF-kSP scans all routes on the lowest wavelength before moving to the
  next wavelength.

The unit size defaults to the smallest positive entry of the capacity
matrix, so any lightpath that can be opened covers at least one unit.
Each trial is an independent, seed-parameterized pure function.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .lp import INF
from .models import Instance, Pair
from .topology import Link

STRATEGIES = ("ksp-ff", "ff-ksp")


def normalize_strategy(name: str) -> str:
    canon = name.strip().lower()
    if canon not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
    return canon


@dataclass(frozen=True)
class Lightpath:
    source: str
    destination: str
    route_index: int
    wavelength: int  # 1-based grid index
    band: str
    capacity: float


@dataclass
class BenchResult:
    strategy: str
    seed: int
    throughput: float
    unit: float
    steps: int
    lightpaths: List[Lightpath]
    loaded: Dict[Pair, float]


@dataclass
class LoadingState:
    """Occupancy grid plus per-pair residual capacity bookkeeping."""

    instance: Instance
    link_index: Dict[Link, int] = field(init=False)
    occupancy: np.ndarray = field(init=False)  # [link, wavelength] bool
    lightpaths: List[Lightpath] = field(init=False)
    pool: Dict[Pair, float] = field(init=False)
    loaded: Dict[Pair, float] = field(init=False)

    def __post_init__(self):
        links = self.instance.topology.links
        self.link_index = {link: i for i, link in enumerate(links)}
        self.occupancy = np.zeros((len(links), self.instance.wavelengths), dtype=bool)
        self.lightpaths = []
        self.pool = {}
        self.loaded = {}

    def place(self, s: str, d: str, k: int, w: int, link_rows: np.ndarray, capacity: float):
        if self.occupancy[link_rows, w - 1].any():
            raise RuntimeError(f"wavelength {w} double-booked")  # defensive
        self.occupancy[link_rows, w - 1] = True
        band = self.instance.grid.band_of(w)
        self.lightpaths.append(Lightpath(s, d, k, w, band, capacity))
        self.pool[(s, d)] = self.pool.get((s, d), 0.0) + capacity


def demand_order(pairs: Sequence[Pair], weights: Dict[Pair, float], seed: int) -> Iterator[Pair]:
    """Infinite emission stream: shuffled rounds, frequency proportional to weight.

    Each round emits pairs in a freshly drawn random order; a pair appears
    in the round with multiplicity proportional to its demand share (one
    copy each under a uniform profile).
    """
    active = [p for p in pairs if weights.get(p, 0.0) > 0]
    if not active:
        return
    rng = random.Random(seed)
    min_share = min(weights[p] for p in active)
    credit = {p: 0.0 for p in active}
    while True:
        emission: List[Pair] = []
        for p in active:
            credit[p] += weights[p] / min_share
            copies = int(credit[p])
            credit[p] -= copies
            emission.extend([p] * copies)
        rng.shuffle(emission)
        yield from emission


class _RouteTables:
    """Per-pair precomputed link rows and per-wavelength capacity vectors."""

    def __init__(self, instance: Instance, state: LoadingState):
        grid = instance.grid
        self.by_pair: Dict[Pair, List[Tuple[int, np.ndarray, np.ndarray]]] = {}
        for pair, routes in instance.routes.items():
            entries = []
            for route in routes:
                rows = np.array([state.link_index[l] for l in route.link_sequence])
                if instance.mode == "RWA":
                    cap = instance.capacity.get(pair[0], pair[1], route.route_index, "C")
                    cap_w = np.full(grid.channel_count, cap)
                else:
                    cap_w = np.zeros(grid.channel_count)
                    for band, rng in grid.band_partition.items():
                        cap = instance.capacity.get(pair[0], pair[1], route.route_index, band)
                        cap_w[rng.start : rng.stop] = cap
                entries.append((route.route_index, rows, cap_w))
            self.by_pair[pair] = entries


def _try_establish(state: LoadingState, tables: _RouteTables, pair: Pair, strategy: str) -> bool:
    """Open one lightpath for the pair, or report failure."""
    entries = tables.by_pair.get(pair, [])
    if not entries or state.occupancy.shape[1] == 0:
        return False
    feasible = []
    for k, rows, cap_w in entries:
        free = ~state.occupancy[rows].any(axis=0)
        feasible.append(free & (cap_w > 0))
    F = np.array(feasible)  # [route, wavelength]
    if strategy == "ksp-ff":
        flat = F.reshape(-1)  # route-major: all wavelengths of route 1 first
    else:
        flat = F.T.reshape(-1)  # wavelength-major: all routes on wavelength 1 first
    hit = int(np.argmax(flat))
    if not flat[hit]:
        return False
    if strategy == "ksp-ff":
        ki, wi = divmod(hit, F.shape[1])
    else:
        wi, ki = divmod(hit, F.shape[0])
    k, rows, cap_w = entries[ki]
    state.place(pair[0], pair[1], k, wi + 1, rows, float(cap_w[wi]))
    return True


def sequential_load(
    instance: Instance,
    strategy: str,
    seed: int,
    unit: Optional[float] = None,
) -> BenchResult:
    """Load demand units until the first blocking; return the throughput.

    Every carried unit counts toward the throughput; the unit that blocks
    does not. A finite transceiver budget on the instance caps the number
    of lightpaths that may be opened.
    """
    strategy = normalize_strategy(strategy)
    if unit is None:
        unit = instance.capacity.min_positive()
    if unit <= 0:
        raise ValueError("loading unit must be positive")
    state = LoadingState(instance)
    tables = _RouteTables(instance, state)
    pairs = instance.demand_pairs()
    steps = 0
    for pair in demand_order(pairs, instance.demand, seed):
        residual = state.pool.get(pair, 0.0) - state.loaded.get(pair, 0.0)
        if residual < unit - 1e-9:
            if instance.transceivers != INF and len(state.lightpaths) >= instance.transceivers:
                break
            if not _try_establish(state, tables, pair, strategy):
                break
        state.loaded[pair] = state.loaded.get(pair, 0.0) + unit
        steps += 1
    return BenchResult(
        strategy=strategy,
        seed=seed,
        throughput=steps * unit,
        unit=unit,
        steps=steps,
        lightpaths=state.lightpaths,
        loaded=dict(state.loaded),
    )


def check_loading_feasibility(instance: Instance, result: BenchResult) -> None:
    """Independent validity scan of a finished trial; raises on violation."""
    seen = set()
    pool: Dict[Pair, float] = {}
    for lp in result.lightpaths:
        route = instance.route((lp.source, lp.destination, lp.route_index))
        for link in route.link_sequence:
            key = (link, lp.wavelength)
            if key in seen:
                raise AssertionError(f"(link, wavelength) double-booked: {key}")
            seen.add(key)
        if instance.grid.band_of(lp.wavelength) != lp.band:
            raise AssertionError(f"lightpath band tag mismatch on wavelength {lp.wavelength}")
        pool[(lp.source, lp.destination)] = pool.get((lp.source, lp.destination), 0.0) + lp.capacity
    if instance.transceivers != INF and len(result.lightpaths) > instance.transceivers:
        raise AssertionError("transceiver budget exceeded")
    for pair, amount in result.loaded.items():
        if amount > pool.get(pair, 0.0) + 1e-6:
            raise AssertionError(f"pair {pair} loaded beyond its established capacity")
    recomputed = sum(result.loaded.values())
    if abs(recomputed - result.throughput) > 1e-6 * max(1.0, abs(result.throughput)):
        raise AssertionError("reported throughput does not match the loaded amounts")


def write_trials_csv(path, results: Sequence[BenchResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "strategy", "throughput_bps", "lightpaths", "steps"])
        for r in sorted(results, key=lambda r: (r.strategy, r.seed)):
            writer.writerow([r.seed, r.strategy, f"{r.throughput:.6g}", len(r.lightpaths), r.steps])
