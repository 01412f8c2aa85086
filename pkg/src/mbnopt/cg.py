"""Column generation for route, wavelength, and band assignment.

The loop alternates between the relaxed master problem over the current
column pool and a pricing step that searches for a wavelength configuration
with positive reduced cost:

    reduced cost = sum over member paths of (pair dual * path capacity)
                   - lightpath count * transceiver dual
                   - wavelength-budget dual (of the column's band)

Pricing is a maximum-weight independent set over candidate paths (conflict
= shared link). The default pricer is the greedy descending-weight scan;
an exact pricer based on the branch-and-bound kernel is available for
small instances and as a test oracle. With bands differentiated, one
subproblem runs per band and the best candidate wins.

After convergence (or a cap), the master is re-solved with integer counts
and used wavelength indices are packed contiguously per configuration.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bench import Lightpath, sequential_load
from .lp import INF, LE, LinearProgram, LpSolution, SolveOptions, solve_lp, solve_milp
from .models import (
    Instance,
    Pair,
    PathRef,
    RmpRows,
    WavelengthConfiguration,
    build_rmp,
)

PRICING_METHODS = ("greedy", "exact")


@dataclass
class CgOptions:
    epsilon: float = 1e-6  # reduced-cost admission threshold
    max_columns: int = 2000
    pricing_time_limit: float = 60.0  # seconds, whole pricing loop
    pricing: str = "greedy"
    multi_column: bool = False  # admit every positive band candidate per round
    integer_gap: float = 0.01
    integer_time_limit: Optional[float] = 10.0
    init_seed: int = 0

    def __post_init__(self):
        if self.pricing not in PRICING_METHODS:
            raise ValueError(f"pricing must be one of {PRICING_METHODS}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class DualPrices:
    """Dual values of the master rows, keyed the way pricing consumes them.

    Values are in the master's scaled capacity unit (``scale`` bit/s);
    pricing divides path capacities by the same scale, so reduced costs are
    O(1) and the admission threshold acts as a relative guard.
    """

    sigma: Dict[Pair, float]  # demand-capacity rows
    sigma_a: float  # transceiver row (0 when the budget is infinite)
    sigma_w: Dict[Optional[str], float]  # wavelength rows, keyed by band tag
    scale: float = 1.0

    @classmethod
    def from_solution(cls, solution: LpSolution, rows: RmpRows) -> "DualPrices":
        duals = solution.duals

        def clip(v: float) -> float:
            return max(0.0, float(v))

        sigma = {pair: clip(duals[i]) for pair, i in rows.demand.items()}
        sigma_a = clip(duals[rows.transceivers]) if rows.transceivers is not None else 0.0
        sigma_w = {band: clip(duals[i]) for band, i in rows.wavelengths.items()}
        return cls(sigma=sigma, sigma_a=sigma_a, sigma_w=sigma_w, scale=rows.scale)


def initialize_columns(instance: Instance, seed: int = 0) -> List[WavelengthConfiguration]:
    """Seed the pool from a kSP-FF sequential load of the instance.

    Each wavelength used by the loader contributes its routed path set as
    one column (clash-free by construction), tagged with the band the
    wavelength sits in when bands are differentiated. The pool is capped at
    |V|(|V|-1) columns, or the wavelength count when that is smaller.
    """
    loaded = sequential_load(instance, "ksp-ff", seed)
    by_wavelength: Dict[int, List[PathRef]] = {}
    for lp in loaded.lightpaths:
        by_wavelength.setdefault(lp.wavelength, []).append((lp.source, lp.destination, lp.route_index))
    pool: List[WavelengthConfiguration] = []
    seen = set()
    n = len(instance.topology.nodes)
    cap = min(n * (n - 1), instance.wavelengths)
    for w in sorted(by_wavelength):
        band = instance.grid.band_of(w) if instance.mode == "RWBA" else None
        column = WavelengthConfiguration.create(instance, by_wavelength[w], band)
        if column.key in seen:
            continue
        seen.add(column.key)
        pool.append(column)
        if len(pool) >= cap:
            break
    return pool


def _path_weights(instance: Instance, duals: DualPrices, band: Optional[str]) -> List[Tuple[float, int, PathRef]]:
    """(weight, span_total, ref) per candidate path of every demand pair."""
    out = []
    for pair in instance.demand_pairs():
        sigma = duals.sigma.get(pair, 0.0)
        for route in instance.routes[pair]:
            ref = (pair[0], pair[1], route.route_index)
            weight = sigma * instance.path_capacity(ref, band) / duals.scale - duals.sigma_a
            out.append((weight, route.span_total, ref))
    return out


def greedy_configuration(
    instance: Instance, duals: DualPrices, band: Optional[str]
) -> Tuple[Optional[WavelengthConfiguration], float]:
    """Greedy max-weight independent set over candidate paths.

    Paths are taken in descending weight order (ties: shorter route first,
    then lexicographic reference), skipping any that clash with an already
    chosen path, stopping as soon as the next weight is zero or negative.
    """
    weights = _path_weights(instance, duals, band)
    weights.sort(key=lambda t: (-t[0], t[1], t[2]))
    chosen: List[PathRef] = []
    used_links: set = set()
    total = 0.0
    for weight, _, ref in weights:
        if weight <= 0:
            break
        links = set(instance.route(ref).link_sequence)
        if used_links & links:
            continue
        chosen.append(ref)
        used_links |= links
        total += weight
    sigma_w = duals.sigma_w.get(band, 0.0)
    if not chosen:
        return None, -sigma_w
    return WavelengthConfiguration.create(instance, chosen, band), total - sigma_w


def exact_configuration(
    instance: Instance, duals: DualPrices, band: Optional[str]
) -> Tuple[Optional[WavelengthConfiguration], float]:
    """Exact max-weight independent set pricing via the MILP kernel.

    Exponential in the worst case; intended for small instances and as the
    oracle the greedy pricer is tested against.
    """
    weights = [(w, ref) for w, _, ref in _path_weights(instance, duals, band) if w > 0]
    sigma_w = duals.sigma_w.get(band, 0.0)
    if not weights:
        return None, -sigma_w
    program = LinearProgram(name="pricing-mwis")
    per_link: Dict[tuple, Dict[int, float]] = {}
    for w, ref in weights:
        j = program.add_var(obj=w, lb=0.0, ub=1.0, integer=True)
        for link in instance.route(ref).link_sequence:
            per_link.setdefault(link, {})[j] = 1.0
    for link, coeffs in sorted(per_link.items()):
        if len(coeffs) > 1:
            program.add_row(coeffs, LE, 1.0)
    solution = solve_milp(program, SolveOptions(relative_gap=0.0))
    chosen = [ref for j, (w, ref) in enumerate(weights) if solution.x[j] > 0.5]
    if not chosen:
        return None, -sigma_w
    return WavelengthConfiguration.create(instance, chosen, band), solution.objective - sigma_w


def _price_band(instance, duals, band, method):
    pricer = greedy_configuration if method == "greedy" else exact_configuration
    return pricer(instance, duals, band)


def price_rwa(
    duals: DualPrices, instance: Instance, method: str = "greedy"
) -> Tuple[Optional[WavelengthConfiguration], float]:
    """Price one colorless configuration (no band differentiation)."""
    return _price_band(instance, duals, None, method)


def price_rwba(
    duals: DualPrices, instance: Instance, method: str = "greedy"
) -> Tuple[Optional[WavelengthConfiguration], float]:
    """Run one pricing subproblem per band; return the best candidate.

    Ties between bands resolve in U, L, C order.
    """
    best: Tuple[Optional[WavelengthConfiguration], float] = (None, -INF)
    for band in instance.bands():
        column, rc = _price_band(instance, duals, band, method)
        if rc > best[1]:
            best = (column, rc)
    return best


def price_all_bands(
    duals: DualPrices, instance: Instance, method: str = "greedy"
) -> List[Tuple[Optional[WavelengthConfiguration], float]]:
    return [_price_band(instance, duals, band, method) for band in instance.bands()]


@dataclass(frozen=True)
class WavelengthAssignment:
    wavelength: int  # 1-based grid index
    band: str
    column: int  # pool index

    def lightpaths(self, columns: Sequence[WavelengthConfiguration], instance: Instance) -> List[Lightpath]:
        column = columns[self.column]
        out = []
        for s, d, k in column.paths:
            out.append(
                Lightpath(s, d, k, self.wavelength, self.band, instance.path_capacity((s, d, k), column.band))
            )
        return out


def pack_wavelengths(
    z_values: Sequence[int],
    columns: Sequence[WavelengthConfiguration],
    instance: Instance,
) -> List[WavelengthAssignment]:
    """Assign contiguous wavelength indices to the used configurations.

    Identical configurations occupy a contiguous index run; runs are laid
    out in descending use count (ties by pool order). With bands
    differentiated every run stays inside its band's index range.
    """
    if len(z_values) != len(columns):
        raise ValueError("one count per column required")
    assignments: List[WavelengthAssignment] = []
    for band in instance.bands():
        used = [(int(round(z)), c) for c, z in enumerate(z_values) if columns[c].band == band and round(z) >= 1]
        budget = instance.band_budget(band)
        total = sum(z for z, _ in used)
        if total > budget:
            raise ValueError(f"wavelength budget exceeded for band {band!r}: {total} > {budget}")
        if band is None:
            next_index = 1
        else:
            next_index = instance.grid.band_index_range(band)[0]
        for count, c in sorted(used, key=lambda t: (-t[0], t[1])):
            for _ in range(count):
                w = next_index
                next_index += 1
                assignments.append(WavelengthAssignment(w, instance.grid.band_of(w), c))
    return assignments


def decode_throughput(instance: Instance, lightpaths: Sequence[Lightpath]) -> float:
    """Throughput implied by a lightpath set under the demand profile.

    The scale at which every pair's demand is covered by its assigned
    capacity: min over pairs of (assigned capacity / demand share).
    """
    totals: Dict[Pair, float] = {}
    for lp in lightpaths:
        totals[(lp.source, lp.destination)] = totals.get((lp.source, lp.destination), 0.0) + lp.capacity
    th = INF
    for pair in instance.demand_pairs():
        th = min(th, totals.get(pair, 0.0) / instance.demand[pair])
    return 0.0 if th == INF else th


def validate_assignment(instance: Instance, assignments: Sequence[WavelengthAssignment], columns: Sequence[WavelengthConfiguration]) -> None:
    """End-to-end feasibility scan; raises AssertionError on any violation."""
    seen_w = set()
    seen_link_w = set()
    lightpath_count = 0
    for a in assignments:
        if a.wavelength in seen_w:
            raise AssertionError(f"wavelength {a.wavelength} assigned twice")
        seen_w.add(a.wavelength)
        if not 1 <= a.wavelength <= instance.wavelengths:
            raise AssertionError(f"wavelength {a.wavelength} outside the grid")
        column = columns[a.column]
        if column.band is not None:
            first, last = instance.grid.band_index_range(column.band)
            if not first <= a.wavelength <= last:
                raise AssertionError(
                    f"wavelength {a.wavelength} outside band {column.band} range {first}..{last}"
                )
        lightpath_count += column.transceivers
        for ref in column.paths:
            for link in instance.route(ref).link_sequence:
                key = (link, a.wavelength)
                if key in seen_link_w:
                    raise AssertionError(f"(link, wavelength) double-booked: {key}")
                seen_link_w.add(key)
    if instance.transceivers != INF and lightpath_count > instance.transceivers:
        raise AssertionError("transceiver budget exceeded")


def _rounded_incumbent(instance, pool, relaxed_x, scale):
    """Floor the relaxed counts, then greedily top up the bottleneck pair.

    Always feasible (budget rows have nonnegative coefficients), so it
    seeds the integer search with a working incumbent.
    """
    z = [int(relaxed_x[1 + c]) for c in range(len(pool))]
    budget_left = {band: instance.band_budget(band) for band in instance.bands()}
    lightpaths = 0
    for c, column in enumerate(pool):
        budget_left[column.band] -= z[c]
        lightpaths += column.transceivers * z[c]
    pairs = instance.demand_pairs()

    def ratios(counts):
        totals = {p: 0.0 for p in pairs}
        for c, column in enumerate(pool):
            if counts[c]:
                for p, cap in column.pair_capacity.items():
                    if p in totals:
                        totals[p] += cap * counts[c]
        return {p: totals[p] / instance.demand[p] for p in pairs}

    for _ in range(instance.wavelengths):
        by_pair = ratios(z)
        bottleneck = min(pairs, key=lambda p: (by_pair[p], p))
        best_c, best_gain = None, 0.0
        for c, column in enumerate(pool):
            if budget_left[column.band] < 1:
                continue
            if instance.transceivers != INF and lightpaths + column.transceivers > instance.transceivers:
                continue
            gain = column.pair_capacity.get(bottleneck, 0.0)
            if gain > best_gain:
                best_gain, best_c = gain, c
        if best_c is None:
            break
        z[best_c] += 1
        budget_left[pool[best_c].band] -= 1
        lightpaths += pool[best_c].transceivers
    th = min(ratios(z)[p] for p in pairs) if pairs else 0.0
    return np.array([th / scale] + [float(v) for v in z])


@dataclass
class CgReport:
    """Everything a column-generation run produced, phase by phase."""

    mode: str
    iterations: int
    bound_trajectory: List[float]
    relaxed_objective: float
    integer_objective: Optional[float]
    integer_status: str
    integer_gap: float
    pool_size: int
    columns: List[WavelengthConfiguration]
    z_values: List[int]
    assignments: List[WavelengthAssignment]
    capped: bool
    wall_init: float
    wall_pricing: float
    wall_integer: float
    wall_packing: float

    @property
    def wall_total(self) -> float:
        return self.wall_init + self.wall_pricing + self.wall_integer + self.wall_packing

    def lightpaths(self, instance: Instance) -> List[Lightpath]:
        out: List[Lightpath] = []
        for a in self.assignments:
            out.extend(a.lightpaths(self.columns, instance))
        return out

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "iterations": self.iterations,
            "bound_trajectory": self.bound_trajectory,
            "relaxed_objective": self.relaxed_objective,
            "integer_objective": self.integer_objective,
            "integer_status": self.integer_status,
            "integer_gap": self.integer_gap,
            "pool_size": self.pool_size,
            "capped": self.capped,
            "wall_time": {
                "init": self.wall_init,
                "pricing": self.wall_pricing,
                "integer": self.wall_integer,
                "packing": self.wall_packing,
                "total": self.wall_total,
            },
            "columns": [
                {"band": c.band, "paths": [list(p) for p in c.paths], "uses": z}
                for c, z in zip(self.columns, self.z_values)
            ],
            "assignments": [
                {"wavelength": a.wavelength, "band": a.band, "column": a.column} for a in self.assignments
            ],
        }
        return json.dumps(doc, indent=2)

    def write_assignment_csv(self, path, instance: Instance) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["wavelength_index", "band", "s", "d", "k"])
            for a in sorted(self.assignments, key=lambda a: a.wavelength):
                for s, d, k in self.columns[a.column].paths:
                    writer.writerow([a.wavelength, a.band, s, d, k])


def run_cg(
    instance: Instance,
    options: Optional[CgOptions] = None,
    seed_columns: Optional[Sequence[WavelengthConfiguration]] = None,
) -> CgReport:
    """Full column-generation pass: seed, price to convergence, integerize, pack.

    ``seed_columns`` adds extra starting columns (path sets are re-costed
    against this instance), which keeps a sweep over growing capacity
    matrices monotone. The loop admits columns while the pricer finds
    reduced cost above ``options.epsilon``; a duplicate candidate or an
    exhausted cap also ends it (``capped`` flags the latter).
    """
    options = options or CgOptions()
    t0 = time.perf_counter()
    pool = initialize_columns(instance, options.init_seed)
    keys = {c.key for c in pool}
    if seed_columns:
        for column in seed_columns:
            rebuilt = WavelengthConfiguration.create(instance, column.paths, column.band)
            if rebuilt.key not in keys:
                keys.add(rebuilt.key)
                pool.append(rebuilt)
    wall_init = time.perf_counter() - t0

    price = price_rwa if instance.mode == "RWA" else price_rwba
    trajectory: List[float] = []
    capped = False
    basis = None
    t1 = time.perf_counter()
    iterations = 0
    while True:
        iterations += 1
        program, rows = build_rmp(instance, pool, "relaxed")
        solution = solve_lp(program, warm_basis=basis)
        if not solution.is_optimal:
            raise RuntimeError(f"relaxed master came back {solution.status}")
        basis = solution.basis
        trajectory.append(solution.objective * rows.scale)
        duals = DualPrices.from_solution(solution, rows)

        if options.multi_column and instance.mode == "RWBA":
            candidates = price_all_bands(duals, instance, options.pricing)
        else:
            candidates = [price(duals, instance, options.pricing)]
        admitted = 0
        for column, reduced_cost in candidates:
            if column is not None and reduced_cost > options.epsilon and column.key not in keys:
                keys.add(column.key)
                pool.append(column)
                admitted += 1
        if admitted == 0:
            break
        if len(pool) >= options.max_columns or time.perf_counter() - t1 > options.pricing_time_limit:
            capped = True
            break
    relaxed_objective = trajectory[-1]
    wall_pricing = time.perf_counter() - t1

    t2 = time.perf_counter()
    int_program, int_rows = build_rmp(instance, pool, "integer")
    warm = _rounded_incumbent(instance, pool, solution.x, int_rows.scale)
    int_solution = solve_milp(
        int_program,
        SolveOptions(relative_gap=options.integer_gap, time_limit=options.integer_time_limit),
        initial_solution=warm,
    )
    wall_integer = time.perf_counter() - t2

    t3 = time.perf_counter()
    if int_solution.x is not None:
        z_values = [int(round(int_solution.x[1 + c])) for c in range(len(pool))]
        integer_objective = int_solution.objective * int_rows.scale
    else:
        z_values = [0] * len(pool)
        integer_objective = None
    assignments = pack_wavelengths(z_values, pool, instance)
    wall_packing = time.perf_counter() - t3

    return CgReport(
        mode=instance.mode,
        iterations=iterations,
        bound_trajectory=trajectory,
        relaxed_objective=relaxed_objective,
        integer_objective=integer_objective,
        integer_status=int_solution.status,
        integer_gap=int_solution.relative_gap if int_solution.x is not None else INF,
        pool_size=len(pool),
        columns=pool,
        z_values=z_values,
        assignments=assignments,
        capped=capped,
        wall_init=wall_init,
        wall_pricing=wall_pricing,
        wall_integer=wall_integer,
        wall_packing=wall_packing,
    )
