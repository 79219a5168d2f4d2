"""End-to-end acceptance gate.

One test per shipped guarantee, each ending in a printed PASS line with
the measured numbers (visible with -s or on failure).  These restate the
module-level properties as the package's contract: spectral convolution
against a naive oracle, ring-decomposition quality, equivalence with the
dense reference dynamics, evolutionary-operator fixtures, bitwise
determinism and persistence, state sanity under heavy mutation, a
throughput report, and a smoke run of the shipped starter pattern.
"""

import json
import time
from importlib import resources

import numpy as np
import pytest

from evolenia.calibrate import load_recorded_calibration, run_calibration, run_equivalence
from evolenia.engine import Engine, Seed, SimConfig
from evolenia.evolution import apply_penalty, diffuse, mutate, penalty_mask
from evolenia.fields import convolve_periodic, disk_kernel, forward_spectrum
from evolenia.gateway import run_with_schedule
from evolenia.genome import GROWTH_M, GROWTH_S, N_PARAMS
from evolenia.worldio import load_pattern, save_snapshot

from conftest import blob_seed, naive_convolve, small_config


def report(line: str) -> None:
    print(f"[ACCEPTANCE] {line}")


# ------------------------------------------------------------ 1. convolution


def test_spectral_convolution_matches_naive_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        w, h = int(rng.integers(2, 17)), int(rng.integers(2, 17))
        field = rng.uniform(-1.0, 1.0, size=(w, h))
        kernel = rng.uniform(-1.0, 1.0, size=(w, h))
        got = convolve_periodic(field, forward_spectrum(kernel))
        want = naive_convolve(field, kernel)
        worst = max(worst, float(np.abs(got - want).max()))
    assert worst <= 1e-6
    report(f"spectral vs naive convolution: PASS (200 pairs up to 16x16, max abs error {worst:.2e} <= 1e-6)")


# ------------------------------------------------------- 2. ring calibration


def test_ring_decomposition_calibration():
    rep = run_calibration(n_samples=100, rng_seed=104, radius=12, n_ring=24)
    assert rep["mean"] <= 0.05, f"mean relative L2 error {rep['mean']:.4f} exceeds 5%"
    assert rep["median"] <= 0.05, f"median relative L2 error {rep['median']:.4f} exceeds 5%"
    assert rep["rotation_asymmetry_max"] == 0.0
    report(
        "ring calibration: PASS (100 genotypes at R=12, 24 rings; relative L2 error "
        f"mean {rep['mean']:.4f}, median {rep['median']:.4f}, p95 {rep['p95']:.4f}, "
        f"max {rep['max']:.4f}; mean and median <= 0.05; quarter-turn asymmetry exactly 0)"
    )


# ------------------------------------------------------------ 3. equivalence


def test_uniform_genospace_equivalence():
    rec = load_recorded_calibration()["equivalence"]
    divergence = run_equivalence(rec["genotype_seeds"][0], rec["side"], rec["steps"])
    assert divergence <= rec["tolerance"], (
        f"per-step divergence {divergence:.3e} exceeds recorded tolerance {rec['tolerance']:.3e}"
    )
    report(
        f"uniform-genospace equivalence: PASS ({rec['steps']} steps at {rec['side']}x{rec['side']}, "
        f"alpha full, rates zero; max per-step divergence {divergence:.3e} <= recorded {rec['tolerance']:.3e})"
    )


# ------------------------------------------------------ 4. operator fixtures


def test_operator_fixtures():
    disk = disk_kernel(2, 16, 16)

    # diffusion: isolated pixel spreads its value over the disk, exactly
    layer = np.zeros((1, 1, 16, 16), dtype=np.float32)
    layer[0, 0, 8, 8] = 0.75
    spread = diffuse(layer, disk, 0.01)[0, 0]
    points = {(int((8 + dx) % 16), int((8 + dy) % 16)) for dx, dy in disk.offsets}
    for x in range(16):
        for y in range(16):
            want = 0.75 if (x, y) in points else 0.0
            assert spread[x, y] == np.float32(want)

    # diffusion: a half-plane of ones stays exactly one on it and fills inward
    half = np.zeros((1, 1, 16, 16), dtype=np.float32)
    half[0, 0, :8] = 1.0
    blurred = diffuse(half, disk, 0.01)[0, 0]
    assert np.all(blurred[:10] == np.float32(1.0))
    assert np.all(blurred[10:14] == np.float32(0.0))
    assert np.all(blurred[14:] == np.float32(1.0))  # wraps across the torus

    # penalty mask against a naive two-stage blur oracle
    oxy = disk_kernel(3, 24, 24)

    def naive_pen(growth):
        occupied = (np.abs(growth).sum(axis=0) > 0.01).astype(np.float64)
        avail = naive_convolve(1.0 - occupied, oxy.field) / oxy.area
        starved = naive_convolve(1.0 - np.clip(avail, 0.0, 1.0), oxy.field) / oxy.area
        return starved > 0.75

    empty_growth = np.zeros((2, 24, 24))
    assert not penalty_mask(empty_growth, oxy, 0.01, 0.75).any()  # oxygen everywhere
    full_growth = np.full((2, 24, 24), 0.5)
    assert penalty_mask(full_growth, oxy, 0.01, 0.75).all()  # starved everywhere
    disk_growth = np.zeros((2, 24, 24))
    for dx, dy in disk_kernel(6, 24, 24).offsets:
        disk_growth[:, (12 + dx) % 24, (12 + dy) % 24] = 0.5
    got = penalty_mask(disk_growth, oxy, 0.01, 0.75)
    assert np.array_equal(got, naive_pen(disk_growth))
    assert got[12, 12] and not got[0, 0]

    # mutation: lands exactly on box-intersect-alpha, one layer, clipped
    genome = np.full((N_PARAMS, 2, 16, 16), 0.4, dtype=np.float32)
    alpha = np.zeros((16, 16), dtype=bool)
    alpha[4:12, 4:12] = True
    rng = np.random.default_rng(3)
    before = genome.copy()
    ev = mutate(genome, alpha, rng, step=0, rate=2.0, half_size=3, delta_max=0.05)
    assert ev is not None and ev.kind == "mutation"
    changed = np.argwhere(genome != before)
    assert len(changed) == ev.region_pixels > 0
    assert {(p, k) for p, k, _, _ in changed} == {(ev.param, ev.kernel)}
    for p, k, x, y in changed:
        assert alpha[x, y]
        assert abs(x - ev.center[0]) % 16 in (*range(4), *range(13, 16))
        want = np.clip(before[p, k, x, y] + np.float32(2.0 * ev.delta), 0.0, 1.0)
        assert genome[p, k, x, y] == np.float32(want)

    # penalization: growth center moves up or growth width moves down
    for seed in range(8):
        genome = np.full((N_PARAMS, 2, 16, 16), 0.5, dtype=np.float32)
        pen = np.zeros((16, 16), dtype=bool)
        pen[0:6] = True
        before = genome.copy()
        ev = apply_penalty(genome, pen, alpha, np.random.default_rng(seed), step=0, rate=1.0, delta_max=0.05)
        assert ev is not None and ev.kind == "penalization"
        assert ev.param in (GROWTH_M, GROWTH_S)
        diff = genome - before
        region = pen & alpha
        assert (diff[ev.param, ev.kernel] != 0).sum() == region.sum() == ev.region_pixels
        if ev.param == GROWTH_M:
            assert ev.delta > 0 and np.all(diff[ev.param, ev.kernel][region] > 0)
        else:
            assert ev.delta < 0 and np.all(diff[ev.param, ev.kernel][region] < 0)

    report(
        "operator fixtures: PASS (diffusion isolated-pixel and half-plane exact; penalty mask "
        "empty/full/disk equals the naive blur oracle; mutation and penalization land exactly "
        "on their regions with the right signs)"
    )


# --------------------------------------------- 5. determinism and persistence


def test_determinism_and_persistence(tmp_path):
    def fresh():
        rng = np.random.default_rng(42)
        cfg = small_config(width=64, height=64, rng_seed=9)
        eng = Engine(cfg)
        eng.seed_world([blob_seed(rng, cfg)])
        return eng

    # dual run, 1000 steps, bitwise
    a, b = fresh(), fresh()
    a.run(1000)
    b.run(1000)
    assert np.array_equal(a.state.A, b.state.A)
    assert np.array_equal(a.state.P, b.state.P)
    assert a.state.rng.bit_generator.state == b.state.rng.bit_generator.state

    # snapshot fork, bitwise
    c = fresh()
    c.run(40)
    snap = tmp_path / "fork.snap"
    save_snapshot(snap, c.config, c.state)
    c.run(40)
    d = Engine.from_snapshot(snap)
    d.run(40)
    assert np.array_equal(c.state.A, d.state.A)
    assert np.array_equal(c.state.P, d.state.P)

    # steered run replayed from its schedule, bitwise
    schedule = [
        {"step": 5, "command": {"cmd": "set_rates", "mutation_rate": 3.0}},
        {"step": 12, "command": {"cmd": "set_walls", "enabled": True, "rects": [[8, 8, 10, 6]]}},
        {"step": 20, "command": {"cmd": "set_rates", "mutation_rate": 1.0, "penalization_rate": 0.0}},
    ]
    e, f = fresh(), fresh()
    run_with_schedule(e, schedule, 30)
    run_with_schedule(f, schedule, 30)
    assert np.array_equal(e.state.A, f.state.A)
    assert np.array_equal(e.state.P, f.state.P)
    assert e.state.rng.bit_generator.state == f.state.rng.bit_generator.state

    report(
        "determinism and persistence: PASS (1000-step dual run bitwise equal; snapshot fork "
        "bitwise equal; steered schedule replay bitwise equal)"
    )


# --------------------------------------------------------- 6. bounds, sanity


def test_bounds_under_heavy_mutation_fuzz():
    rng = np.random.default_rng(6)
    cfg = SimConfig(width=128, height=128, mutation_rate=5.0, penalization_rate=0.2, rng_seed=17)
    eng = Engine(cfg)
    eng.seed_world([blob_seed(rng, cfg)])
    n_steps = 10_000
    for t in range(n_steps):
        eng.step()  # raises EngineFaultError on any non-finite value
        st = eng.state
        assert 0.0 <= float(st.A.min()) and float(st.A.max()) <= 1.0, f"phenotype out of bounds at step {t + 1}"
        assert 0.0 <= float(st.P.min()) and float(st.P.max()) <= 1.0, f"genes out of bounds at step {t + 1}"
    s = eng.stats()
    report(
        f"bounds and sanity: PASS ({n_steps} steps at 128x128 with mutation rate 5.0, penalization 0.2; "
        f"A and P stayed in [0,1] and finite every step; final occupancy {s['occupied_fraction']:.3f}, "
        f"{s['mutations']} mutations, {s['penalizations']} penalizations)"
    )


# ------------------------------------------------------ 7. throughput report


def _shipped_seed(cfg: SimConfig) -> Seed:
    with resources.as_file(resources.files("evolenia").joinpath("data", "primordium.json")) as p:
        sample, _ = load_pattern(p)
    return Seed(sample.phenotype, np.clip(sample.averaged_genotype, 0.0, 1.0), (cfg.width // 2, cfg.height // 2))


def _measure_steps_per_sec(width: int, height: int, steps: int) -> float:
    cfg = SimConfig(width=width, height=height, rng_seed=0)
    eng = Engine(cfg)
    eng.seed_world([_shipped_seed(cfg)])
    eng.run(2)
    t0 = time.perf_counter()
    eng.run(steps)
    return steps / (time.perf_counter() - t0)

def test_throughput_report():
    sps_small = _measure_steps_per_sec(256, 256, 6)
    sps_full = _measure_steps_per_sec(512, 1024, 2)
    verdict = "meets" if sps_full >= 20.0 else "does not meet"
    report(
        f"throughput (report only, nothing asserted): {sps_small:.2f} steps/s at 256x256, "
        f"{sps_full:.2f} steps/s at 512x1024 on one CPU core; {verdict} the 20 steps/s "
        "real-time target, which assumed GPU-class hardware"
    )


# ------------------------------------------------------------ 8. starter run


def test_shipped_seed_smoke_run():
    cfg = SimConfig(width=256, height=256, rng_seed=0)
    eng = Engine(cfg)
    eng.seed_world([_shipped_seed(cfg)])
    occupancies = []
    for t in range(200):
        eng.step()
        occ = eng.stats()["occupied_fraction"]
        occupancies.append(occ)
        assert occ > 0.0, f"world went empty at step {t + 1}"
        assert occ <= 0.5, f"world overflowed 50% at step {t + 1}"
    masses = eng.stats()["mass"]
    report(
        "shipped starter pattern: PASS (200 steps at 256x256 under default rates; occupancy "
        f"{occupancies[0]:.3f} -> {occupancies[-1]:.3f}, never empty, never above 50%; "
        f"final channel masses {[round(m, 1) for m in masses]})"
    )
