"""Infeasibility metrics over edges that carry traffic."""
from __future__ import annotations

import numpy as np

from .objective import ObjectiveContext, edge_flows

INF_SENTINEL = 1e6


def compute_inf(ctx: ObjectiveContext, y) -> tuple[float, float]:
    """Average and maximum capacity-normalized positive overflow.

    Only edges with nonzero flow count.  An active edge with zero capacity
    yields the sentinel for both values.
    """
    flows = edge_flows(ctx, y)
    active = flows > 0
    if not active.any():
        return 0.0, 0.0
    mu = ctx.instance.capacities[active]
    over = np.maximum(flows[active] - mu, 0.0)
    if np.any((mu == 0) & (over > 0)):
        return INF_SENTINEL, INF_SENTINEL
    ratio = np.divide(over, mu, out=np.zeros_like(over), where=mu > 0)
    return float(ratio.mean()), float(ratio.max())
