"""Gauss-Legendre quadrature helpers used across the package."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


@lru_cache(maxsize=64)
def _gl_reference(n: int):
    x, w = roots_legendre(n)
    return x, w


def gl_nodes(a: float, b: float, n: int):
    """Nodes and weights integrating over [a, b] with an n-point rule."""
    x, w = _gl_reference(int(n))
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return mid + half * x, half * w


def gl_panels(a: float, b: float, n_panels: int, nodes_per_panel: int):
    """Composite rule: n_panels equal panels, each with a Gauss-Legendre rule."""
    edges = np.linspace(a, b, n_panels + 1)
    xs = []
    ws = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gl_nodes(lo, hi, nodes_per_panel)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
