import random
from pathlib import Path

import pytest

from mbnopt.topology import NetworkTopology

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


def random_topology(rng: random.Random, n_nodes: int, max_spans: int = 6) -> NetworkTopology:
    """Connected random graph: spanning tree plus a few chords."""
    nodes = tuple(str(i) for i in range(1, n_nodes + 1))
    links = {}
    order = list(nodes)
    rng.shuffle(order)
    for i in range(1, len(order)):
        a, b = order[i], order[rng.randrange(i)]
        links[tuple(sorted((a, b)))] = rng.randint(1, max_spans)
    for _ in range(rng.randint(0, n_nodes)):
        a, b = rng.sample(nodes, 2)
        links.setdefault(tuple(sorted((a, b))), rng.randint(1, max_spans))
    return NetworkTopology(name="random", nodes=nodes, span_count=links)
