"""Continuous cellular automaton with per-pixel genomes.

The phenospace (visible creature matter) and the genospace (a stack of
normalized gene layers, one value per kernel parameter per pixel) evolve
together on the same toroidal grid.  Creature dynamics follow smooth
kernel convolutions and Gaussian growth; genes spread by local averaging
wherever matter lives, mutate in random patches, and are penalized in
overcrowded regions.  Everything downstream of a seed and an rng seed is
deterministic.
"""

from .engine import Engine, SimConfig, WorldState
from .fields import ConfigError
from .genome import GeneSchema, KernelWiring

__all__ = [
    "Engine",
    "SimConfig",
    "WorldState",
    "ConfigError",
    "GeneSchema",
    "KernelWiring",
]

__version__ = "0.1.0"
