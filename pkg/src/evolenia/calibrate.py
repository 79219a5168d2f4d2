"""Calibration of the ring decomposition against exact kernels.

The ring bank approximates every possible kernel profile with a fixed
set of annuli.  These helpers measure how far the recombined kernel of a
random genotype sits from the exact one, and whether the decomposition
keeps the grid's quarter-turn symmetry.  The shipped tolerance that the
test suite enforces was recorded with this code.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .fields import quarter_turn
from .genome import (
    GeneSchema,
    RingKernelBank,
    build_ring_bank,
    cast_kernel,
    ring_recombined_kernel,
)

CALIBRATION_RESOURCE = "calibration.json"


def ring_error(shape_genes: np.ndarray, schema: GeneSchema, bank: RingKernelBank) -> float:
    """Relative L2 distance between the recombined and the exact kernel."""
    approx = ring_recombined_kernel(shape_genes, schema, bank)
    exact = cast_kernel(shape_genes, schema, bank.radius, bank.width, bank.height)
    return float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))


def sample_shape_genes(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=6)


def run_calibration(
    n_samples: int = 100,
    rng_seed: int = 104,
    radius: int = 12,
    n_ring: int = 24,
    schema: GeneSchema | None = None,
) -> dict:
    """Measure ring-approximation errors over random genotypes.

    Returns the error distribution plus the worst rotation asymmetry of
    the recombined kernels (which must be zero: rings are built from the
    wrapped distance grid, so a quarter turn permutes pixels exactly).
    """
    if schema is None:
        schema = GeneSchema.default()
    side = 2 * radius + 8
    bank = build_ring_bank(radius, n_ring, side, side)
    rng = np.random.default_rng(rng_seed)
    errors = []
    aniso = 0.0
    for i in range(n_samples):
        genes = sample_shape_genes(rng)
        errors.append(ring_error(genes, schema, bank))
        if i % 10 == 0:
            k = ring_recombined_kernel(genes, schema, bank)
            aniso = max(aniso, float(np.abs(k - quarter_turn(k)).max()))
    errs = np.array(errors)
    return {
        "samples": int(n_samples),
        "rng_seed": int(rng_seed),
        "radius": int(radius),
        "n_ring": int(n_ring),
        "mean": float(errs.mean()),
        "median": float(np.median(errs)),
        "p95": float(np.percentile(errs, 95)),
        "max": float(errs.max()),
        "rotation_asymmetry_max": aniso,
    }


def load_recorded_calibration() -> dict:
    """The calibration measurements and tolerances shipped with the package."""
    text = resources.files("evolenia").joinpath("data", CALIBRATION_RESOURCE).read_text("utf-8")
    return json.loads(text)


def run_equivalence(genotype_seed: int, side: int = 128, steps: int = 100) -> float:
    """Worst one-step gap between the engine and the dense reference dynamics.

    The whole genospace holds one random genotype, evolution is switched
    off (alpha forced full, rates zero, walls off), and each step the
    float64 reference advances from the engine's own predecessor state.
    Free-running trajectories of a chaotic map drift to O(1) no matter how
    good the approximation, so the per-step gap is what measures the ring
    decomposition; the shipped tolerance bounds it.
    """
    from .dynamics import make_reference_kernels, reference_step
    from .engine import Engine, SimConfig
    from .genome import N_PARAMS

    cfg = SimConfig(
        width=side,
        height=side,
        alpha_mode="full",
        mutation_rate=0.0,
        penalization_rate=0.0,
        rng_seed=0,
    )
    rng = np.random.default_rng(genotype_seed)
    genotype = rng.uniform(0.2, 0.9, size=(N_PARAMS, cfg.n_kernels))
    a0 = rng.uniform(0.0, 1.0, size=(cfg.n_channels, side, side)).astype(np.float32)

    eng = Engine(cfg)
    st = eng.blank_state()
    st.A[:] = a0
    st.P[:] = genotype.astype(np.float32)[:, :, None, None]
    eng.state = st

    ref = make_reference_kernels(genotype, cfg.schema, cfg.wiring, cfg.kernel_radius, side, side)
    worst = 0.0
    for _ in range(steps):
        before = eng.state.A.astype(np.float64)
        eng.step()
        oracle = reference_step(before, ref, cfg.dt, cfg.growth_form)
        worst = max(worst, float(np.abs(eng.state.A.astype(np.float64) - oracle).max()))
    return worst
