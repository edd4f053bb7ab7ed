import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cacheroute.model import DemandModel, NetworkInstance, Request  # noqa: E402


def line_instance(weight=5.0, capacity=1.0, cache=(0, 0), rate=1.0, catalog=1):
    """Two nodes s=0, u=1; item 0 lives at node 1; one request from node 0."""
    inst = NetworkInstance(2, [(0, 1), (1, 0)], [weight, weight], [capacity, capacity], catalog,
                           [{1}] * catalog, list(cache))
    dem = DemandModel((Request(0, 0, rate),), (((0, 1),),))
    return inst, dem


def diamond_instance(capacity=10.0, rate=1.0, weights=None, cache=(0, 0, 0, 0), catalog=1):
    """Node 0 requests item 0 from node 3 over 0-1-3 or 0-2-3."""
    edges = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)]
    w = weights if weights is not None else [1.0] * len(edges)
    cap = capacity if np.ndim(capacity) else [capacity] * len(edges)
    inst = NetworkInstance(4, edges, w, cap, catalog, [{3}] * catalog, list(cache))
    dem = DemandModel((Request(0, 0, rate),), (((0, 1, 3), (0, 2, 3)),))
    return inst, dem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
