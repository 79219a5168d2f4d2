"""Simulation engine: configuration, world state, and the step loop.

One step runs a fixed phase sequence: environment walls, gene diffusion,
ring convolutions, per-pixel potentials, alpha (aliveness), gene erasure
outside alpha, overcrowding area, growth update, mutation, penalization.
Every random draw comes from the state's own generator, so two engines
with equal config and seeds produce bitwise equal histories.
"""

from __future__ import annotations

import json
import time
import warnings
from collections import deque
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .evolution import (
    ALPHA_MODES,
    EventRecord,
    WallSet,
    _disk_sum,
    alpha_mask,
    apply_penalty,
    apply_walls,
    diffuse,
    mutate,
    penalty_mask,
)
from .dynamics import combine_potentials, convolve_rings, growth_fields, growth_update
from .fields import ConfigError, DiskKernel, disk_kernel
from .genome import N_PARAMS, GeneSchema, KernelWiring, build_ring_bank

PHASES = (
    "environment",
    "diffuse",
    "convolve_rings",
    "potentials",
    "alpha",
    "mask_genes",
    "penalty_area",
    "growth",
    "mutate",
    "penalize",
)

GROWTH_FORMS = ("bipolar", "unipolar")


class EngineFaultError(RuntimeError):
    """Raised when the state goes non-finite; carries the failing step."""


@dataclass
class SimConfig:
    """Everything needed to reproduce a run, minus the seeds and the rng state."""

    width: int = 512
    height: int = 1024
    n_channels: int = 3
    n_kernels: int = 15
    kernel_radius: int = 12
    n_rings: int = 24
    epsilon: float = 0.01
    dt: float = 0.1
    growth_form: str = "bipolar"
    alpha_mode: str = "all"
    mutation_rate: float = 1.0
    penalization_rate: float = 0.2
    mutation_half_size: int = 10
    delta_max: float = 0.05
    diffusion_radius: int = 2
    oxygen_radius: int = 12
    penalty_threshold: float = 0.75
    rng_seed: int = 0
    event_log_size: int = 4096
    check_finite: bool = True
    schema: GeneSchema = field(default_factory=GeneSchema.default)
    wiring: KernelWiring = field(default_factory=KernelWiring.default)
    walls: WallSet = field(default_factory=WallSet)

    def validate(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ConfigError(f"grid {self.width}x{self.height} is too small")
        if self.n_channels < 1:
            raise ConfigError("need at least one channel")
        if self.n_kernels != self.wiring.n_kernels:
            raise ConfigError(
                f"n_kernels={self.n_kernels} but wiring defines {self.wiring.n_kernels}"
            )
        self.wiring.validate(self.n_channels)
        if self.kernel_radius < 1 or self.n_rings < 1:
            raise ConfigError("kernel radius and ring count must be >= 1")
        if 2 * self.kernel_radius + 1 > min(self.width, self.height):
            raise ConfigError(f"kernel radius {self.kernel_radius} does not fit the grid")
        if self.diffusion_radius < 0 or self.oxygen_radius < 1:
            raise ConfigError("bad diffusion or oxygen radius")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.mutation_rate < 0.0 or self.penalization_rate < 0.0:
            raise ConfigError("rates must be >= 0")
        if self.delta_max <= 0.0:
            raise ConfigError(f"delta_max must be > 0, got {self.delta_max}")
        if self.mutation_half_size < 0:
            raise ConfigError("mutation box half size must be >= 0")
        if not (0.0 < self.penalty_threshold < 1.0):
            raise ConfigError(f"penalty threshold must lie in (0, 1), got {self.penalty_threshold}")
        if self.growth_form not in GROWTH_FORMS:
            raise ConfigError(f"growth form must be one of {GROWTH_FORMS}")
        if self.alpha_mode not in ALPHA_MODES:
            raise ConfigError(f"alpha mode must be one of {ALPHA_MODES}")
        if self.event_log_size < 1:
            raise ConfigError("event log size must be >= 1")
        self.walls.normalized(self.width, self.height)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = self.schema.to_dict()
        d["wiring"] = self.wiring.to_dict()
        d["walls"] = self.walls.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "schema" in kwargs:
            kwargs["schema"] = GeneSchema.from_dict(kwargs["schema"])
        if "wiring" in kwargs:
            kwargs["wiring"] = KernelWiring.from_dict(kwargs["wiring"])
        if "walls" in kwargs:
            kwargs["walls"] = WallSet.from_dict(kwargs["walls"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class Seed:
    """A creature to paste at world creation: patch, genotype, center position."""

    phenotype: np.ndarray
    genotype: np.ndarray
    position: tuple[int, int]


@dataclass
class PatternSample:
    """A creature lifted out of the world: disk-masked patches plus a summary.

    ``averaged_genotype`` is the mean genotype over sampled pixels whose
    genes are all above the engine's epsilon, or None if no pixel qualifies.
    """

    phenotype: np.ndarray
    genotype: np.ndarray
    averaged_genotype: Optional[np.ndarray]
    center: tuple[int, int]
    radius: int


@dataclass
class WorldState:
    """Mutable simulation state; everything the snapshot format persists."""

    step: int
    A: np.ndarray
    P: np.ndarray
    rng: np.random.Generator
    events: deque
    alpha_fraction: float = 0.0
    mutations: int = 0
    penalizations: int = 0


def _toroidal_slab(center: int, extent: int, size: int) -> np.ndarray:
    return (np.arange(extent) + center - extent // 2) % size


class Engine:
    """Owns one world and advances it; the single writer of its state."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.bank = build_ring_bank(config.kernel_radius, config.n_rings, config.width, config.height)
        self.diffusion_disk = disk_kernel(config.diffusion_radius, config.width, config.height)
        self.oxygen_disk = disk_kernel(config.oxygen_radius, config.width, config.height)
        self.state: Optional[WorldState] = None
        self._seeds: list[Seed] = []
        self._durations: deque = deque(maxlen=32)

    # ---------------------------------------------------------------- world

    def blank_state(self, rng_seed: Optional[int] = None) -> WorldState:
        cfg = self.config
        return WorldState(
            step=0,
            A=np.zeros((cfg.n_channels, cfg.width, cfg.height), dtype=np.float32),
            P=np.zeros((N_PARAMS, cfg.n_kernels, cfg.width, cfg.height), dtype=np.float32),
            rng=np.random.default_rng(cfg.rng_seed if rng_seed is None else rng_seed),
            events=deque(maxlen=cfg.event_log_size),
        )

    def seed_world(self, seeds: list[Seed], rng_seed: Optional[int] = None) -> None:
        """Create a fresh world with the given creatures pasted into it.

        Each seed's phenotype patch is written around its center position,
        and its genotype vector fills the genome wherever the patch support,
        dilated by the diffusion radius, reaches.  Overlapping seeds warn;
        the later seed wins.
        """
        cfg = self.config
        st = self.blank_state(rng_seed)
        painted = np.zeros((cfg.width, cfg.height), dtype=bool)
        for n, seed in enumerate(seeds):
            pheno = np.asarray(seed.phenotype, dtype=np.float32)
            geno = np.asarray(seed.genotype, dtype=np.float64)
            if pheno.ndim != 3 or pheno.shape[0] != cfg.n_channels:
                raise ConfigError(f"seed {n}: phenotype shape {pheno.shape} wants ({cfg.n_channels}, w, h)")
            if geno.shape != (N_PARAMS, cfg.n_kernels):
                raise ConfigError(f"seed {n}: genotype shape {geno.shape} wants ({N_PARAMS}, {cfg.n_kernels})")
            if pheno.min() < 0.0 or pheno.max() > 1.0 or geno.min() < 0.0 or geno.max() > 1.0:
                raise ConfigError(f"seed {n}: values must lie in [0, 1]")
            if pheno.shape[1] > cfg.width or pheno.shape[2] > cfg.height:
                raise ConfigError(f"seed {n}: patch {pheno.shape[1:]} exceeds the grid")
            cx, cy = int(seed.position[0]) % cfg.width, int(seed.position[1]) % cfg.height
            box = np.ix_(_toroidal_slab(cx, pheno.shape[1], cfg.width), _toroidal_slab(cy, pheno.shape[2], cfg.height))
            support = np.zeros((cfg.width, cfg.height), dtype=np.float32)
            support[box] = (pheno.sum(axis=0) > 0.0).astype(np.float32)
            grown = _disk_sum(support[None], self.diffusion_disk)[0] > 0.5
            if painted[box].any() or (painted & grown).any():
                warnings.warn(f"seed {n} overlaps an earlier seed; later seed wins", RuntimeWarning)
            st.A[(slice(None),) + box] = pheno
            st.P[:, :, grown] = geno.astype(np.float32)[:, :, None]
            painted[box] = True
            painted |= grown
        self.state = st
        self._seeds = list(seeds)
        self._durations.clear()

    def restart(self, rng_seed: Optional[int] = None) -> None:
        """Rebuild the world from the recorded seed list."""
        if not self._seeds:
            raise ConfigError("engine has no recorded seeds to restart from")
        self.seed_world(self._seeds, rng_seed)

    # ----------------------------------------------------------------- step

    def step(self, phase_hook: Optional[Callable[[str], None]] = None) -> None:
        """Advance one step through the fixed phase sequence."""
        st = self.state
        if st is None:
            raise ConfigError("engine has no world; call seed_world first")
        cfg = self.config
        mark = phase_hook if phase_hook is not None else _noop
        t0 = time.perf_counter()

        mark("environment")
        apply_walls(st.A, st.P, cfg.walls)

        mark("diffuse")
        st.P = diffuse(st.P, self.diffusion_disk, cfg.epsilon)

        mark("convolve_rings")
        ring_convs = convolve_rings(st.A, self.bank)

        mark("potentials")
        potentials = combine_potentials(ring_convs, st.P, cfg.schema, cfg.wiring, self.bank)
        del ring_convs

        mark("alpha")
        growth = growth_fields(potentials, st.P, cfg.schema, cfg.growth_form)
        del potentials
        alive = alpha_mask(growth, st.P, cfg.epsilon, cfg.alpha_mode)
        st.alpha_fraction = float(alive.mean())

        mark("mask_genes")
        st.P *= alive

        mark("penalty_area")
        pen = None
        if cfg.penalization_rate > 0.0:
            pen = penalty_mask(growth, self.oxygen_disk, cfg.epsilon, cfg.penalty_threshold)

        mark("growth")
        st.A = growth_update(st.A, growth, cfg.wiring, cfg.dt)
        del growth

        mark("mutate")
        ev = mutate(
            st.P, alive, st.rng, st.step, cfg.mutation_rate, cfg.mutation_half_size, cfg.delta_max
        )
        if ev is not None:
            st.events.append(ev)
            st.mutations += 1

        mark("penalize")
        if pen is not None:
            ev = apply_penalty(
                st.P, pen, alive, st.rng, st.step, cfg.penalization_rate, cfg.delta_max
            )
            if ev is not None:
                st.events.append(ev)
                st.penalizations += 1

        st.step += 1
        if cfg.check_finite:
            bad_a = int(np.count_nonzero(~np.isfinite(st.A)))
            bad_p = int(np.count_nonzero(~np.isfinite(st.P)))
            if bad_a or bad_p:
                raise EngineFaultError(
                    f"non-finite state after step {st.step}: "
                    f"{bad_a} phenotype values, {bad_p} gene values"
                )
        self._durations.append(time.perf_counter() - t0)

    def run(self, n_steps: int, on_step: Optional[Callable[["Engine"], None]] = None) -> None:
        for _ in range(n_steps):
            self.step()
            if on_step is not None:
                on_step(self)

    # ----------------------------------------------------------- observables

    def stats(self) -> dict:
        """Instantaneous observables; cheap enough to call every step."""
        st = self.state
        if st is None:
            raise ConfigError("engine has no world")
        occupied = st.A.sum(axis=0, dtype=np.float64) > self.config.epsilon
        sps = 0.0
        if self._durations:
            sps = len(self._durations) / sum(self._durations)
        return {
            "step": st.step,
            "mass": [float(st.A[c].sum(dtype=np.float64)) for c in range(st.A.shape[0])],
            "occupied_fraction": float(occupied.mean()),
            "alpha_fraction": st.alpha_fraction,
            "mutations": st.mutations,
            "penalizations": st.penalizations,
            "steps_per_sec": sps,
        }

    def sample_pattern(self, x: int, y: int, radius: int) -> PatternSample:
        """Lift the creature under (x, y) out of the world (the dropper).

        Returns disk-masked square patches of side ``2 * radius + 1`` and the
        averaged genotype over fully alive pixels inside the disk.
        """
        st = self.state
        if st is None:
            raise ConfigError("engine has no world")
        if radius < 0 or 2 * radius + 1 > min(self.config.width, self.config.height):
            raise ConfigError(f"sample radius {radius} does not fit the grid")
        cfg = self.config
        x, y = int(x) % cfg.width, int(y) % cfg.height
        n = 2 * radius + 1
        box = np.ix_(_toroidal_slab(x, n, cfg.width), _toroidal_slab(y, n, cfg.height))
        ax = np.arange(n) - radius
        disk = (ax[:, None] ** 2 + ax[None, :] ** 2) <= radius * radius
        pheno = st.A[(slice(None),) + box] * disk
        geno = st.P[(slice(None), slice(None)) + box] * disk
        alive = disk & np.all(geno > cfg.epsilon, axis=(0, 1))
        averaged = None
        if alive.any():
            averaged = geno[:, :, alive].mean(axis=2, dtype=np.float64)
        return PatternSample(pheno.astype(np.float32), geno.astype(np.float32), averaged, (x, y), radius)

    def paste_pattern(self, sample: PatternSample, x: int, y: int) -> None:
        """Stamp a sampled creature back into the world, disk-masked."""
        st = self.state
        if st is None:
            raise ConfigError("engine has no world")
        cfg = self.config
        n = sample.phenotype.shape[-1]
        if sample.phenotype.shape != (cfg.n_channels, n, n) or sample.genotype.shape != (
            N_PARAMS,
            cfg.n_kernels,
            n,
            n,
        ):
            raise ConfigError("sample shape does not match this world")
        box = np.ix_(_toroidal_slab(int(x) % cfg.width, n, cfg.width), _toroidal_slab(int(y) % cfg.height, n, cfg.height))
        ax = np.arange(n) - sample.radius
        disk = (ax[:, None] ** 2 + ax[None, :] ** 2) <= sample.radius**2
        a_box = st.A[(slice(None),) + box]
        st.A[(slice(None),) + box] = np.where(disk, sample.phenotype, a_box)
        p_box = st.P[(slice(None), slice(None)) + box]
        st.P[(slice(None), slice(None)) + box] = np.where(disk, sample.genotype, p_box)

    # ------------------------------------------------------------- commands

    def set_mutation_rate(self, rate: float) -> None:
        if rate < 0.0:
            raise ConfigError(f"mutation rate must be >= 0, got {rate}")
        self.config.mutation_rate = float(rate)

    def set_penalization_rate(self, rate: float) -> None:
        if rate < 0.0:
            raise ConfigError(f"penalization rate must be >= 0, got {rate}")
        self.config.penalization_rate = float(rate)

    def set_walls(self, enabled: bool, rects: Optional[list[tuple[int, int, int, int]]] = None) -> None:
        walls = WallSet(list(rects) if rects is not None else self.config.walls.rects, bool(enabled))
        walls.normalized(self.config.width, self.config.height)
        self.config.walls = walls

    # ------------------------------------------------------------ snapshots

    def save_snapshot(self, path) -> None:
        from . import worldio

        worldio.save_snapshot(path, self.config, self.state)

    @classmethod
    def from_snapshot(cls, path) -> "Engine":
        from . import worldio

        config, state = worldio.load_snapshot(path)
        engine = cls(config)
        engine.state = state
        return engine


def _noop(_: str) -> None:
    return None
