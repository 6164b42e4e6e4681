"""Shared generators for randomized tests.

Everything here is deterministic given the numpy Generator passed in, so
seeded tests reproduce bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from coherelab.network import LaplacianMatrix, laplacian_from_edges
from coherelab.rational import RationalTF


def random_connected_laplacian(rng: np.random.Generator, n: int,
                               extra_edges: int | None = None,
                               weight_range: tuple[float, float] = (0.5, 2.0)) -> LaplacianMatrix:
    """Random spanning tree plus extra chords; always connected."""
    lo, hi = weight_range
    edges = []
    order = rng.permutation(n)
    for idx in range(1, n):
        attach = order[rng.integers(0, idx)]
        edges.append((int(order[idx]), int(attach), float(rng.uniform(lo, hi))))
    if extra_edges is None:
        extra_edges = n // 2
    tries = 0
    present = {(min(i, j), max(i, j)) for i, j, _ in edges}
    while extra_edges > 0 and tries < 50 * n:
        tries += 1
        i, j = rng.integers(0, n, size=2)
        key = (min(int(i), int(j)), max(int(i), int(j)))
        if i == j or key in present:
            continue
        present.add(key)
        edges.append((key[0], key[1], float(rng.uniform(lo, hi))))
        extra_edges -= 1
    return laplacian_from_edges(n, edges)


def random_first_order_tf(rng: np.random.Generator,
                          biproper_fraction: float = 0.5) -> RationalTF:
    """Stable first-order transfer function with moderate coefficients."""
    pole = float(rng.uniform(0.5, 3.0))
    gain = float(rng.uniform(0.5, 2.0))
    if rng.uniform() < biproper_fraction:
        zero = float(rng.uniform(0.5, 3.0))
        return RationalTF([gain * zero, gain], [pole, 1.0])
    return RationalTF([gain], [pole, 1.0])


def random_second_order_tf(rng: np.random.Generator) -> RationalTF:
    """Stable second-order transfer function with distinct real poles."""
    p1 = float(rng.uniform(0.5, 2.0))
    p2 = float(rng.uniform(2.5, 4.0))
    zero = float(rng.uniform(0.5, 3.0))
    gain = float(rng.uniform(0.5, 2.0))
    return RationalTF([gain * zero, gain], [p1 * p2, p1 + p2, 1.0])


def generic_probe_point(rng: np.random.Generator) -> complex:
    """Point in the right half-plane away from the test families' poles."""
    return complex(float(rng.uniform(0.3, 1.2)), float(rng.uniform(0.3, 2.5)))
