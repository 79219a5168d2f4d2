"""Shared oracles and helpers.

The oracles here are deliberately dumb: explicit loops, no FFT, no reuse
of the code under test.  Slow is fine at oracle sizes.
"""

from __future__ import annotations

import numpy as np
import pytest

from evolenia.engine import Seed, SimConfig


def naive_convolve(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct toroidal convolution, kernel centered at the origin pixel."""
    w, h = field.shape
    out = np.zeros((w, h), dtype=np.float64)
    for x in range(w):
        for y in range(h):
            acc = 0.0
            for u in range(w):
                for v in range(h):
                    acc += kernel[u, v] * field[(x - u) % w, (y - v) % h]
            out[x, y] = acc
    return out


def open_disk_points(radius: float) -> list[tuple[int, int]]:
    """Integer lattice points with distance strictly below radius."""
    r = int(np.ceil(radius))
    pts = []
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            if dx * dx + dy * dy < radius * radius:
                pts.append((dx, dy))
    return pts


def small_config(**overrides) -> SimConfig:
    """A config small enough for fast tests; callers override what they probe."""
    base = dict(
        width=48,
        height=48,
        kernel_radius=6,
        n_rings=12,
        oxygen_radius=6,
        mutation_half_size=4,
        rng_seed=0,
    )
    base.update(overrides)
    cfg = SimConfig(**base)
    cfg.validate()
    return cfg


def friendly_genotype(rng: np.random.Generator, n_kernels: int = 15) -> np.ndarray:
    """A genotype whose genes all clear the aliveness threshold comfortably."""
    return rng.uniform(0.2, 0.9, size=(9, n_kernels))


def blob_seed(rng: np.random.Generator, config: SimConfig, side: int = 17) -> Seed:
    pheno = rng.uniform(0.3, 0.9, size=(config.n_channels, side, side)).astype(np.float32)
    geno = friendly_genotype(rng, config.n_kernels)
    return Seed(pheno, geno, (config.width // 2, config.height // 2))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
