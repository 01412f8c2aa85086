"""Optical network graph, topology file ingestion, and candidate routes.

A topology is an undirected graph whose links carry a span count (number of
amplified fiber sections). Candidate routes between node pairs are loopless
k-shortest paths by total span count, computed with Yen's algorithm.
"""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

Link = Tuple[str, str]


class TopologyError(ValueError):
    """Raised for malformed or inconsistent topology input."""


def _norm_link(u: str, v: str) -> Link:
    """Canonical (sorted) endpoint pair for an undirected link."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected optical network with per-link span counts.

    Each link models a bidirectional fiber pair carrying identical spectrum
    in both directions, so a single occupancy state per link suffices.
    Immutable after construction; safe to share across workers.
    """

    name: str
    nodes: Tuple[str, ...]
    span_count: Dict[Link, int] = field(compare=False)

    def __post_init__(self):
        seen = set()
        adjacency: Dict[str, set] = {n: set() for n in self.nodes}
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("duplicate node identifiers")
        for (u, v), spans in self.span_count.items():
            if u == v:
                raise TopologyError(f"self-loop on node {u!r}")
            if (u, v) != _norm_link(u, v):
                raise TopologyError(f"link {u!r},{v!r} not in canonical order")
            if u not in adjacency or v not in adjacency:
                raise TopologyError(f"link references unknown node: ({u!r}, {v!r})")
            if (u, v) in seen:
                raise TopologyError(f"duplicate link ({u!r}, {v!r})")
            if not isinstance(spans, int) or spans < 1:
                raise TopologyError(f"link ({u!r}, {v!r}) has nonpositive span count {spans!r}")
            seen.add((u, v))
            adjacency[u].add(v)
            adjacency[v].add(u)
        object.__setattr__(self, "_adjacency", {n: tuple(sorted(a)) for n, a in adjacency.items()})
        if self.nodes and not self._is_connected():
            raise TopologyError("graph is not connected")

    def _is_connected(self) -> bool:
        start = self.nodes[0]
        seen = {start}
        stack = [start]
        while stack:
            for nbr in self._adjacency[stack.pop()]:
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        return len(seen) == len(self.nodes)

    @property
    def links(self) -> List[Link]:
        return sorted(self.span_count)

    def neighbors(self, node: str) -> Tuple[str, ...]:
        return self._adjacency[node]

    def spans(self, u: str, v: str) -> int:
        return self.span_count[_norm_link(u, v)]

    def has_link(self, u: str, v: str) -> bool:
        return _norm_link(u, v) in self.span_count

    def pairs(self) -> List[Tuple[str, str]]:
        """All ordered (source, destination) node pairs."""
        return [(s, d) for s in self.nodes for d in self.nodes if s != d]


@dataclass(frozen=True)
class CandidateRoute:
    """One ranked loopless route between an ordered node pair.

    ``route_index`` is 1-based rank by nondecreasing total span count;
    ``node_sequence`` starts at the source and ends at the destination.
    """

    source: str
    destination: str
    route_index: int
    node_sequence: Tuple[str, ...]
    span_total: int

    @property
    def link_sequence(self) -> Tuple[Link, ...]:
        ns = self.node_sequence
        return tuple(_norm_link(a, b) for a, b in zip(ns, ns[1:]))

    def uses_link(self, u: str, v: str) -> bool:
        return _norm_link(u, v) in set(self.link_sequence)


def route_uses_link(route: CandidateRoute, link: Link) -> bool:
    """True if the route traverses the (undirected) link."""
    return route.uses_link(*link)


def load_topology(path, fmt: Optional[str] = None) -> NetworkTopology:
    """Load a topology from a CSV edge list or a JSON document.

    CSV format: header ``u,v,spans``, one undirected link per row.
    JSON format: ``{name, nodes: [...], links: [{u, v, spans}]}``.
    ``fmt`` is inferred from the file suffix when not given.
    """
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "json":
        return _load_json(path)
    raise TopologyError(f"unknown topology format {fmt!r}")


def _load_csv(path: Path) -> NetworkTopology:
    span_count: Dict[Link, int] = {}
    nodes: List[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["u", "v", "spans"]:
            raise TopologyError(f"{path}: expected header 'u,v,spans'")
        for row in reader:
            u, v = row["u"].strip(), row["v"].strip()
            try:
                spans = int(row["spans"])
            except (TypeError, ValueError):
                raise TopologyError(f"{path}: bad span count {row['spans']!r}") from None
            _add_link(span_count, nodes, u, v, spans)
    return NetworkTopology(name=path.stem, nodes=tuple(nodes), span_count=span_count)


def _load_json(path: Path) -> NetworkTopology:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        nodes = [str(n) for n in doc["nodes"]]
        raw_links = doc["links"]
        name = str(doc.get("name", path.stem))
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"{path}: missing field {exc}") from None
    span_count: Dict[Link, int] = {}
    declared = list(nodes)
    for entry in raw_links:
        u, v = str(entry["u"]), str(entry["v"])
        spans = entry["spans"]
        if not isinstance(spans, int):
            raise TopologyError(f"{path}: span count must be an integer, got {spans!r}")
        _add_link(span_count, declared, u, v, spans)
    if set(declared) != set(nodes):
        raise TopologyError(f"{path}: links reference nodes not in the node list")
    return NetworkTopology(name=name, nodes=tuple(nodes), span_count=span_count)


def _add_link(span_count: Dict[Link, int], nodes: List[str], u: str, v: str, spans: int):
    if u == v:
        raise TopologyError(f"self-loop on node {u!r}")
    key = _norm_link(u, v)
    if key in span_count:
        raise TopologyError(f"duplicate link ({u!r}, {v!r})")
    span_count[key] = spans
    for n in (u, v):
        if n not in nodes:
            nodes.append(n)


def _dijkstra(
    topology: NetworkTopology,
    source: str,
    target: str,
    removed_nodes: frozenset,
    removed_links: frozenset,
) -> Optional[Tuple[int, Tuple[str, ...]]]:
    """Shortest path by span count, with lexicographic node-sequence tie-break.

    The heap entries carry the candidate node sequence so equal-cost paths
    pop in lexicographic order, which makes Yen's ranking deterministic.
    """
    if source in removed_nodes:
        return None
    heap = [(0, (source,))]
    best: Dict[str, int] = {}
    while heap:
        cost, seq = heapq.heappop(heap)
        node = seq[-1]
        if node == target:
            return cost, seq
        if best.get(node, cost + 1) <= cost:
            continue
        best[node] = cost
        for nbr in topology.neighbors(node):
            if nbr in removed_nodes or nbr in seq:
                continue
            if _norm_link(node, nbr) in removed_links:
                continue
            heapq.heappush(heap, (cost + topology.spans(node, nbr), seq + (nbr,)))
    return None


def yen_k_shortest(topology: NetworkTopology, source: str, destination: str, k: int) -> List[CandidateRoute]:
    """Up to ``k`` loopless shortest routes by total span count, ranked.

    Ties in total span count are broken lexicographically on the node
    sequence, so output is deterministic. Returns fewer than ``k`` routes
    when the graph has fewer simple paths.
    """
    if source == destination:
        raise ValueError("source and destination must differ")
    for n in (source, destination):
        if n not in topology.nodes:
            raise ValueError(f"unknown node {n!r}")
    if k < 1:
        raise ValueError("k must be >= 1")

    first = _dijkstra(topology, source, destination, frozenset(), frozenset())
    if first is None:
        return []
    accepted: List[Tuple[int, Tuple[str, ...]]] = [first]
    candidates: List[Tuple[int, Tuple[str, ...]]] = []

    while len(accepted) < k:
        _, prev_seq = accepted[-1]
        for i in range(len(prev_seq) - 1):
            spur_node = prev_seq[i]
            root = prev_seq[: i + 1]
            root_cost = sum(topology.spans(a, b) for a, b in zip(root, root[1:]))
            removed_links = set()
            for _, seq in accepted:
                if seq[: i + 1] == root and len(seq) > i + 1:
                    removed_links.add(_norm_link(seq[i], seq[i + 1]))
            removed_nodes = frozenset(root[:-1])
            spur = _dijkstra(topology, spur_node, destination, removed_nodes, frozenset(removed_links))
            if spur is None:
                continue
            spur_cost, spur_seq = spur
            total = (root_cost + spur_cost, root[:-1] + spur_seq)
            if total not in candidates and total not in accepted:
                heapq.heappush(candidates, total)
        if not candidates:
            break
        accepted.append(heapq.heappop(candidates))

    return [
        CandidateRoute(
            source=source,
            destination=destination,
            route_index=rank + 1,
            node_sequence=seq,
            span_total=cost,
        )
        for rank, (cost, seq) in enumerate(accepted)
    ]


def candidate_routes(topology: NetworkTopology, k: int, pairs: Optional[Iterable[Tuple[str, str]]] = None) -> Dict[Tuple[str, str], List[CandidateRoute]]:
    """Yen routes for every ordered pair (or the given pairs)."""
    if pairs is None:
        pairs = topology.pairs()
    return {(s, d): yen_k_shortest(topology, s, d, k) for s, d in pairs}
