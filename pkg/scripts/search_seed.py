"""Search for a starter creature worth shipping as the default seed.

Draws random kernel shapes, then tunes each candidate's growth genes to
the potentials its own blob actually produces: growth centers sit on the
measured per-kernel potential inside the blob, widths stay generous, and
amplitudes stay strong.  Candidates then face the full default dynamics
(mutation and penalization on) and are kept only if every channel is
still alive and occupancy stays strictly between empty and half-full for
the whole evaluation.  The winner is written to src/evolenia/data/ as a
portable pattern file.  Deterministic given --rng-seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from evolenia.dynamics import combine_potentials, convolve_rings
from evolenia.engine import Engine, PatternSample, Seed, SimConfig
from evolenia.fields import wrapped_distance_grid
from evolenia.genome import GROWTH_H, GROWTH_M, GROWTH_S, N_PARAMS, PARAM_INDEX
from evolenia.worldio import save_pattern


def blob_phenotype(rng: np.random.Generator, side: int, radius: float, n_channels: int) -> np.ndarray:
    """Soft noisy disk, per channel, values safely inside (0, 1)."""
    d = np.roll(wrapped_distance_grid(side, side), (side // 2, side // 2), axis=(0, 1))
    envelope = np.clip(1.0 - d / radius, 0.0, 1.0) ** 0.5
    pheno = np.empty((n_channels, side, side), dtype=np.float32)
    for c in range(n_channels):
        noise = rng.uniform(0.35, 0.95, size=(side, side))
        pheno[c] = (envelope * noise).astype(np.float32)
    return pheno


def tuned_genotype(rng: np.random.Generator, cfg: SimConfig, pheno: np.ndarray, world: int,
                   m_scale: float, s_lo: float, s_hi: float,
                   h_lo: float, h_hi: float) -> np.ndarray:
    """Random kernel shapes with growth genes tuned to the blob's potentials.

    ``m_scale`` places each growth center relative to the measured interior
    potential: 1.0 sits on it (strong growth, tends to explode), lower
    values park the interior above the growth window so the blob
    self-limits.  ``s_lo``/``s_hi`` bound the normalized growth width.
    """
    g = rng.uniform(0.15, 0.85, size=(N_PARAMS, cfg.n_kernels))
    g[GROWTH_S] = rng.uniform(s_lo, s_hi, size=cfg.n_kernels)
    g[GROWTH_H] = rng.uniform(h_lo, h_hi, size=cfg.n_kernels)

    probe_cfg = SimConfig(width=world, height=world, rng_seed=0,
                          mutation_rate=0.0, penalization_rate=0.0)
    eng = Engine(probe_cfg)
    eng.seed_world([Seed(pheno, g, (world // 2, world // 2))])
    st = eng.state
    rings = convolve_rings(st.A, eng.bank)
    pots = combine_potentials(rings, st.P, probe_cfg.schema, probe_cfg.wiring, eng.bank)
    core = st.A.sum(axis=0) > 0.5

    lo, hi = cfg.schema.ranges[PARAM_INDEX["m"]]
    for k in range(cfg.n_kernels):
        u = float(pots[k][core].mean()) * m_scale
        g[GROWTH_M, k] = np.clip((u - lo) / (hi - lo), 0.05, 0.95)
    return g


def evaluate(genotype: np.ndarray, pheno: np.ndarray, steps: int, world: int,
             rng_seed: int) -> tuple[bool, str, list[float]]:
    """Run one candidate under full default rates; judge its trajectory."""
    cfg = SimConfig(width=world, height=world, rng_seed=rng_seed)
    eng = Engine(cfg)
    eng.seed_world([Seed(pheno, genotype, (world // 2, world // 2))])
    history = []
    for t in range(steps):
        eng.step()
        s = eng.stats()
        occ = s["occupied_fraction"]
        if t % 20 == 19 or t == steps - 1:
            history.append(occ)
        if occ <= 0.0:
            return False, f"vanished at step {t + 1}", history
        if occ > 0.5:
            return False, f"overflowed at step {t + 1}", history
        if min(s["mass"]) <= 0.0:
            return False, f"lost a channel at step {t + 1}", history
    return True, "alive, all channels", history


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rng-seed", type=int, default=11)
    ap.add_argument("--max-candidates", type=int, default=24)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--prescreen", type=int, default=150, help="cheap first-pass step count")
    ap.add_argument("--world", type=int, default=256)
    ap.add_argument("--patch-side", type=int, default=33)
    ap.add_argument("--m-scale", type=float, default=0.92)
    ap.add_argument("--s-lo", type=float, default=0.1)
    ap.add_argument("--s-hi", type=float, default=0.2)
    ap.add_argument("--h-lo", type=float, default=0.15)
    ap.add_argument("--h-hi", type=float, default=0.3)
    ap.add_argument("--out", default="src/evolenia/data/primordium.json")
    args = ap.parse_args()

    rng = np.random.default_rng(args.rng_seed)
    cfg = SimConfig()
    for i in range(args.max_candidates):
        pheno = blob_phenotype(rng, args.patch_side, args.patch_side / 2 - 1, cfg.n_channels)
        genotype = tuned_genotype(rng, cfg, pheno, args.world, args.m_scale, args.s_lo, args.s_hi,
                                   args.h_lo, args.h_hi)
        t0 = time.perf_counter()
        ok, verdict, history = evaluate(genotype, pheno, args.prescreen, args.world, rng_seed=0)
        if ok and args.steps > args.prescreen:
            ok, verdict, history = evaluate(genotype, pheno, args.steps, args.world, rng_seed=0)
        dt = time.perf_counter() - t0
        trail = " ".join(f"{v:.3f}" for v in history[-5:])
        print(f"candidate {i:3d}: {verdict:<40} ({dt:5.1f}s)  occupancy ...{trail}", flush=True)
        if not ok:
            continue

        side = pheno.shape[-1]
        inside = pheno.sum(axis=0) > 0.0
        geno_patch = np.zeros((N_PARAMS, cfg.n_kernels, side, side), dtype=np.float32)
        geno_patch[:, :, inside] = genotype.astype(np.float32)[:, :, None]
        sample = PatternSample(
            phenotype=pheno,
            genotype=geno_patch,
            averaged_genotype=genotype.astype(np.float64),
            center=(side // 2, side // 2),
            radius=side // 2,
        )
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_pattern(out, sample, cfg.schema)
        decoded = cfg.schema.decode_genotype(genotype)
        print(f"\nwrote {out}")
        print(f"  growth centers m: {np.round(decoded[PARAM_INDEX['m']], 3)}")
        print(f"  growth widths  s: {np.round(decoded[PARAM_INDEX['s']], 3)}")
        print(f"  amplitudes     h: {np.round(decoded[PARAM_INDEX['h']], 3)}")
        return 0

    print("no candidate survived; loosen the prior or raise --max-candidates", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
