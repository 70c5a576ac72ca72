"""Homogeneous Poisson point processes on a disc."""
from __future__ import annotations

import math

import numpy as np


def uniform_disc(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_hppp(density: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Points of an HPPP with ``density`` per unit area on the disc of ``radius``.

    Returns an (n, 2) array; n ~ Poisson(density * pi * radius^2).
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    if density == 0:
        return np.empty((0, 2))
    n = rng.poisson(density * math.pi * radius**2)
    return uniform_disc(n, radius, rng)
