"""Optimization model builders: exact path-formulation ILP and master LPs.

Translates a problem instance into LinearProgram records with labeled rows
so dual prices can be read back by name. Three builders:

* ``build_ilp``     -- binary route-and-wavelength assignment over every
                       (pair, route, wavelength) triple; exact but grows
                       linearly in the wavelength count.
* ``build_rmp``     -- restricted master over wavelength configurations
                       (columns), with one wavelength budget row (no band
                       differentiation) or one per band.

The demand scale variable is inlined: each demand row reads
``share * TH - sum(capacity * usage) <= 0``, which keeps the row count at
one per traffic pair plus the budget rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .lp import EQ, GE, INF, LE, LinearProgram
from .phy import BANDS, CapacityMatrix, ChannelGrid, PhyConfig, build_grid, capacity_matrix
from .topology import CandidateRoute, Link, NetworkTopology, candidate_routes

Pair = Tuple[str, str]
PathRef = Tuple[str, str, int]  # (source, destination, route rank)


class ModelSizeError(ValueError):
    """ILP would exceed the configured variable-count cap."""


def uniform_demand(topology: NetworkTopology) -> Dict[Pair, float]:
    pairs = topology.pairs()
    return {pair: 1.0 / len(pairs) for pair in pairs}


@dataclass(frozen=True)
class Instance:
    """One solvable problem: network, routes, capacities, demand, budgets."""

    topology: NetworkTopology
    routes: Dict[Pair, List[CandidateRoute]]
    capacity: CapacityMatrix
    demand: Dict[Pair, float]
    grid: ChannelGrid
    mode: str  # "RWA" | "RWBA"
    transceivers: float = INF  # lightpath budget; INF disables the row

    def __post_init__(self):
        total = sum(self.demand.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"demand profile must sum to 1, got {total}")
        if any(v < 0 for v in self.demand.values()):
            raise ValueError("demand shares must be nonnegative")
        if self.mode not in ("RWA", "RWBA"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.transceivers != INF and self.transceivers < 1:
            raise ValueError("transceiver budget must be >= 1 or infinite")

    @property
    def wavelengths(self) -> int:
        return self.grid.channel_count

    def demand_pairs(self) -> List[Pair]:
        """Pairs with positive demand, in deterministic order."""
        return sorted(p for p, share in self.demand.items() if share > 0)

    def route(self, ref: PathRef) -> CandidateRoute:
        s, d, k = ref
        route_list = self.routes.get((s, d))
        if route_list is None or not 1 <= k <= len(route_list):
            raise KeyError(f"unknown route {ref}")
        return route_list[k - 1]

    def path_capacity(self, ref: PathRef, band: Optional[str]) -> float:
        s, d, k = ref
        return self.capacity.get(s, d, k, band if band is not None else "C")

    def bands(self) -> Tuple[Optional[str], ...]:
        """Band tags a column may take in this mode."""
        return BANDS if self.mode == "RWBA" else (None,)

    def band_budget(self, band: Optional[str]) -> int:
        if band is None:
            return self.grid.channel_count
        return self.grid.band_size(band)

    def to_json(self, topology_ref: str) -> str:
        budgets = (
            {b: self.grid.band_size(b) for b in BANDS}
            if self.mode == "RWBA"
            else self.grid.channel_count
        )
        doc = {
            "topology": topology_ref,
            "k_routes": max((len(r) for r in self.routes.values()), default=0),
            "mode": self.mode,
            "transceivers": "inf" if self.transceivers == INF else self.transceivers,
            "baud": self.grid.baud_rate,
            "wavelengths": budgets,
            "demand": {f"{s}->{d}": share for (s, d), share in sorted(self.demand.items())},
        }
        return json.dumps(doc, indent=2)


def make_instance(
    topology: NetworkTopology,
    k_routes: int,
    baud_rate: float,
    mode: str,
    phy_config: Optional[PhyConfig] = None,
    transceivers: float = INF,
    formats_allowed: Optional[int] = None,
    demand: Optional[Dict[Pair, float]] = None,
    total_bandwidth: float = 15e12,
) -> Instance:
    """Assemble a solvable instance: routes, grid, band specs, capacities."""
    phy_config = phy_config or PhyConfig()
    demand = demand if demand is not None else uniform_demand(topology)
    pairs = sorted(p for p, share in demand.items() if share > 0)
    routes = candidate_routes(topology, k_routes, pairs)
    grid = build_grid(baud_rate, total_bandwidth)
    specs = phy_config.band_specs(grid, mode)
    capacity = capacity_matrix(routes, specs, grid, phy_config.modulations, mode, formats_allowed)
    return Instance(
        topology=topology,
        routes=routes,
        capacity=capacity,
        demand=demand,
        grid=grid,
        mode=mode,
        transceivers=transceivers,
    )


@dataclass(frozen=True)
class WavelengthConfiguration:
    """A clash-free set of routed paths sharing one (colorless) wavelength.

    The column-generation decision unit: usable any number of times across
    the spectrum. ``band`` pins the column to one optical band when bands
    are differentiated, else None. ``pair_capacity`` caches the capacity the
    column provides each traffic pair; ``transceivers`` is the lightpath
    count.
    """

    paths: Tuple[PathRef, ...]
    band: Optional[str]
    pair_capacity: Dict[Pair, float] = field(compare=False)
    transceivers: int = 0

    @property
    def key(self) -> tuple:
        """Canonical identity for pool deduplication."""
        return (self.band, self.paths)

    @classmethod
    def create(cls, instance: Instance, paths: Sequence[PathRef], band: Optional[str]) -> "WavelengthConfiguration":
        if (band is None) != (instance.mode == "RWA"):
            raise ValueError("column band tag must match the instance mode")
        if band is not None and band not in BANDS:
            raise ValueError(f"unknown band {band!r}")
        paths = tuple(sorted(paths))
        if not paths:
            raise ValueError("a wavelength configuration must hold at least one path")
        used_links: set = set()
        pair_capacity: Dict[Pair, float] = {}
        for ref in paths:
            route = instance.route(ref)
            links = set(route.link_sequence)
            if used_links & links:
                raise ValueError(f"paths clash on links {sorted(used_links & links)}")
            used_links |= links
            s, d, _ = ref
            pair_capacity[(s, d)] = pair_capacity.get((s, d), 0.0) + instance.path_capacity(ref, band)
        return cls(paths=paths, band=band, pair_capacity=pair_capacity, transceivers=len(paths))

    def links(self, instance: Instance) -> set:
        out: set = set()
        for ref in self.paths:
            out |= set(instance.route(ref).link_sequence)
        return out


def capacity_scale(instance: Instance) -> float:
    """Normalization constant for model coefficients.

    Capacities enter the LPs divided by this scale so the solver works on
    O(1) numbers regardless of the baud rate; objectives come back in the
    same scaled unit and are multiplied by it when reported.
    """
    best = 0.0
    for s, d in instance.demand_pairs():
        for route in instance.routes[(s, d)]:
            for band in instance.bands():
                best = max(best, instance.path_capacity((s, d, route.route_index), band))
    return best if best > 0 else 1.0


@dataclass
class IlpLayout:
    """Variable map of a built ILP, for decoding solutions."""

    th: int
    delta: Dict[Tuple[str, str, int, int], int]  # (s, d, k, w) -> column
    pair_capacity_var: Dict[Pair, int]
    scale: float  # objective and T variables are in units of this (bit/s)


def build_ilp(instance: Instance, variable_cap: int = 200_000) -> Tuple[LinearProgram, IlpLayout]:
    """Exact assignment model: one binary per (pair, route, wavelength).

    Refuses to build when the binary count would exceed ``variable_cap``;
    large wavelength counts make this formulation explode, which is the
    regime the column formulation exists for.
    """
    pairs = instance.demand_pairs()
    W = instance.wavelengths
    n_delta = sum(len(instance.routes[p]) for p in pairs) * W
    if n_delta > variable_cap:
        raise ModelSizeError(
            f"ILP needs {n_delta} binary variables, above the cap of {variable_cap}"
        )

    scale = capacity_scale(instance)
    program = LinearProgram(name=f"ilp-{instance.mode}")
    th = program.add_var(obj=1.0, label="TH")
    delta: Dict[Tuple[str, str, int, int], int] = {}
    per_link_w: Dict[Tuple[Link, int], Dict[int, float]] = {}
    total_coeffs: Dict[int, float] = {}

    cap_var: Dict[Pair, int] = {}
    for s, d in pairs:
        cap_var[(s, d)] = program.add_var(obj=0.0, label=f"T[{s},{d}]")

    for s, d in pairs:
        for route in instance.routes[(s, d)]:
            k = route.route_index
            for w in range(1, W + 1):
                j = program.add_var(obj=0.0, lb=0.0, ub=1.0, integer=True, label=f"d[{s},{d},{k},{w}]")
                delta[(s, d, k, w)] = j
                total_coeffs[j] = 1.0
                for link in route.link_sequence:
                    per_link_w.setdefault((link, w), {})[j] = 1.0

    for s, d in pairs:
        defn = {cap_var[(s, d)]: 1.0}
        for route in instance.routes[(s, d)]:
            k = route.route_index
            for w in range(1, W + 1):
                cap = instance.capacity.get(s, d, k, instance.grid.band_of(w))
                if cap > 0:
                    defn[delta[(s, d, k, w)]] = -cap / scale
        program.add_row(defn, EQ, 0.0, label=f"capacity[{s},{d}]")
        program.add_row({th: instance.demand[(s, d)], cap_var[(s, d)]: -1.0}, LE, 0.0, label=f"demand[{s},{d}]")

    for (link, w), coeffs in sorted(per_link_w.items()):
        program.add_row(coeffs, LE, 1.0, label=f"clash[{link[0]}-{link[1]},{w}]")

    if instance.transceivers != INF:
        program.add_row(total_coeffs, LE, float(instance.transceivers), label="transceivers")

    return program, IlpLayout(th=th, delta=delta, pair_capacity_var=cap_var, scale=scale)


@dataclass
class RmpRows:
    """Row index map of a master problem, for reading duals by name."""

    demand: Dict[Pair, int]
    transceivers: Optional[int]
    wavelengths: Dict[Optional[str], int]  # {None: row} or one row per band
    scale: float = 1.0  # objective unit in bit/s


def build_rmp(
    instance: Instance,
    columns: Sequence[WavelengthConfiguration],
    integrality: str = "relaxed",
) -> Tuple[LinearProgram, RmpRows]:
    """Master problem over the given column pool.

    One variable per column counts how many wavelengths carry that
    configuration. ``integrality`` is "relaxed" (pricing iterations) or
    "integer" (finalization).
    """
    if integrality not in ("relaxed", "integer"):
        raise ValueError(f"integrality must be 'relaxed' or 'integer', got {integrality!r}")
    scale = capacity_scale(instance)
    program = LinearProgram(name=f"rmp-{instance.mode}-{integrality}")
    th = program.add_var(obj=1.0, label="TH")
    z: List[int] = []
    for c, column in enumerate(columns):
        if instance.mode == "RWBA" and column.band is None:
            raise ValueError(f"column {c} lacks a band tag in RWBA mode")
        if instance.mode == "RWA" and column.band is not None:
            raise ValueError(f"column {c} carries a band tag in RWA mode")
        for ref in column.paths:
            instance.route(ref)  # raises KeyError on unknown route
        z.append(program.add_var(obj=0.0, integer=(integrality == "integer"), label=f"z[{c}]"))

    demand_rows: Dict[Pair, int] = {}
    for s, d in instance.demand_pairs():
        coeffs: Dict[int, float] = {th: instance.demand[(s, d)]}
        for c, column in enumerate(columns):
            cap = column.pair_capacity.get((s, d), 0.0)
            if cap > 0:
                coeffs[z[c]] = -cap / scale
        demand_rows[(s, d)] = program.add_row(coeffs, LE, 0.0, label=f"demand[{s},{d}]")

    transceiver_row = None
    if instance.transceivers != INF:
        coeffs = {z[c]: float(col.transceivers) for c, col in enumerate(columns)}
        transceiver_row = program.add_row(coeffs, LE, float(instance.transceivers), label="transceivers")

    wavelength_rows: Dict[Optional[str], int] = {}
    for band in instance.bands():
        coeffs = {z[c]: 1.0 for c, col in enumerate(columns) if col.band == band}
        label = "wavelengths" if band is None else f"wavelengths[{band}]"
        wavelength_rows[band] = program.add_row(coeffs, LE, float(instance.band_budget(band)), label=label)

    return program, RmpRows(
        demand=demand_rows, transceivers=transceiver_row, wavelengths=wavelength_rows, scale=scale
    )
