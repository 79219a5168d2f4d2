import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evolenia.evolution import (
    EventRecord,
    WallSet,
    alpha_mask,
    apply_penalty,
    apply_walls,
    diffuse,
    mutate,
    penalty_mask,
    toroidal_box,
)
from evolenia.fields import ConfigError, disk_kernel
from evolenia.genome import GROWTH_M, GROWTH_S

from conftest import naive_convolve


# -------------------------------------------------------------------- alpha


def test_alpha_modes():
    u = np.zeros((2, 2, 2), dtype=np.float32)
    p = np.zeros((3, 2, 2, 2), dtype=np.float32)
    u[:, 0, 0] = [0.5, -0.5]
    p[:, :, 0, 0] = 0.5
    u[:, 0, 1] = [0.5, 0.004]  # one weak growth layer
    p[:, :, 0, 1] = 0.5
    u[:, 1, 0] = [0.5, 0.5]
    p[:, :, 1, 0] = [[0.5], [0.005], [0.5]]  # one weak gene

    assert alpha_mask(u, p, 0.01, "all").tolist() == [[True, False], [False, False]]
    assert alpha_mask(u, p, 0.01, "sum").tolist() == [[True, True], [True, False]]
    assert alpha_mask(u, p, 0.01, "full").all()
    with pytest.raises(ConfigError):
        alpha_mask(u, p, 0.01, "most")


# ------------------------------------------------------------------ diffuse


def test_diffuse_isolated_pixel():
    disk = disk_kernel(2, 16, 16)
    p = np.zeros((1, 1, 16, 16), dtype=np.float32)
    p[0, 0, 8, 8] = 0.75
    out = diffuse(p, disk, 0.01)
    dist2 = (np.arange(16)[:, None] - 8) ** 2 + (np.arange(16)[None, :] - 8) ** 2
    inside = dist2 <= 4
    # the lone carrier is the only support pixel, so every reached pixel
    # averages exactly one value
    assert np.all(out[0, 0][inside] == np.float32(0.75))
    assert np.all(out[0, 0][~inside] == 0.0)


def test_diffuse_half_plane():
    disk = disk_kernel(2, 16, 16)
    p = np.zeros((1, 1, 16, 16), dtype=np.float32)
    p[0, 0, :, :8] = 1.0
    out = diffuse(p, disk, 0.01)[0, 0]
    # uniform values average to themselves wherever any support is reached
    assert np.all(out[:, :10] == 1.0)
    assert np.all(out[:, 10:14] == 0.0)
    assert np.all(out[:, 14:] == 1.0)  # the plane wraps around


def test_diffuse_matches_naive_average(rng):
    disk = disk_kernel(2, 9, 9)
    p = rng.uniform(0.0, 1.0, (1, 1, 9, 9)).astype(np.float32)
    p[0, 0][rng.uniform(size=(9, 9)) < 0.5] = 0.0
    eps = 0.01
    out = diffuse(p, disk, eps)[0, 0]
    num = naive_convolve(p[0, 0].astype(np.float64), disk.field)
    den = naive_convolve((p[0, 0] > eps).astype(np.float64), disk.field)
    want = np.where(den > 0.5, num / np.maximum(den, 1.0), 0.0)
    assert np.abs(out - want).max() <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_diffuse_support_and_bounds(seed):
    r = np.random.default_rng(seed)
    disk = disk_kernel(2, 12, 12)
    p = r.uniform(0.0, 1.0, (2, 3, 12, 12)).astype(np.float32)
    p[p < 0.6] = 0.0
    eps = 0.01
    out = diffuse(p, disk, eps)
    assert out.min() >= 0.0 and out.max() <= 1.0
    dil = naive_convolve(np.any(p > eps, axis=(0, 1)).astype(np.float64), disk.field) > 0.5
    carried = np.any(out > 0.0, axis=(0, 1))
    assert not np.any(carried & ~dil)  # support grows by at most the disk radius


# ------------------------------------------------------------------- mutate


def test_toroidal_box_wraps():
    box = toroidal_box(0, 7, 1, 8, 8)
    sub = np.zeros((8, 8))
    sub[box] = 1.0
    assert sub.sum() == 9
    assert sub[7, 7] == 1.0 and sub[1, 0] == 1.0


def test_mutate_exact_region_and_sign():
    rng = np.random.default_rng(5)
    p = np.full((9, 15, 32, 32), 0.5, dtype=np.float32)
    alpha = np.zeros((32, 32), dtype=bool)
    alpha[10:30, 5:25] = True
    before = p.copy()
    ev = mutate(p, alpha, rng, step=7, rate=2.0, half_size=4, delta_max=0.05)
    assert ev is not None and ev.kind == "mutation" and ev.step == 7
    x0, y0 = ev.center
    box = toroidal_box(x0, y0, 4, 32, 32)
    region = np.zeros((32, 32), dtype=bool)
    region[box] = True
    region &= alpha
    assert ev.region_pixels == int(region.sum())
    changed = p != before
    layers = np.argwhere(changed.reshape(9, 15, -1).any(axis=2))
    assert layers.tolist() == [[ev.param, ev.kernel]]
    layer_changed = changed[ev.param, ev.kernel]
    expected = np.clip(before[ev.param, ev.kernel] + np.float32(2.0 * ev.delta), 0.0, 1.0)
    assert np.array_equal(p[ev.param, ev.kernel][region], expected[region])
    assert not layer_changed[~region].any()
    # starting from 0.5, a nonzero delta must actually move the region
    assert layer_changed[region].all()
    assert abs(ev.delta) <= 0.05 and ev.delta != 0.0
    assert ev.half_size == 4


def test_mutate_clips_to_bounds():
    rng = np.random.default_rng(0)
    alpha = np.ones((16, 16), dtype=bool)
    hi = np.ones((9, 15, 16, 16), dtype=np.float32)
    for _ in range(20):
        mutate(hi, alpha, rng, 0, rate=100.0, half_size=3, delta_max=0.05)
    assert hi.min() >= 0.0 and hi.max() <= 1.0


def test_mutate_miss_consumes_rng_identically():
    p1 = np.full((9, 15, 16, 16), 0.5, dtype=np.float32)
    p2 = p1.copy()
    r1 = np.random.default_rng(3)
    r2 = np.random.default_rng(3)
    ev = mutate(p1, np.zeros((16, 16), dtype=bool), r1, 0, 1.0, 2, 0.05)
    assert ev is None
    assert np.array_equal(p1, np.full_like(p1, 0.5))
    mutate(p2, np.ones((16, 16), dtype=bool), r2, 0, 1.0, 2, 0.05)
    assert r1.bit_generator.state == r2.bit_generator.state


def test_mutate_rate_zero_is_inert():
    p = np.full((9, 15, 8, 8), 0.5, dtype=np.float32)
    rng = np.random.default_rng(1)
    state = rng.bit_generator.state
    assert mutate(p, np.ones((8, 8), bool), rng, 0, 0.0, 2, 0.05) is None
    assert rng.bit_generator.state == state
    with pytest.raises(ConfigError):
        mutate(p, np.ones((8, 8), bool), rng, 0, -1.0, 2, 0.05)


# ------------------------------------------------------------ penalization


def test_penalty_mask_empty_and_full():
    disk = disk_kernel(3, 24, 24)
    quiet = np.zeros((15, 24, 24), dtype=np.float32)
    assert not penalty_mask(quiet, disk, 0.01, 0.75).any()
    packed = np.full((15, 24, 24), 0.5, dtype=np.float32)
    assert penalty_mask(packed, disk, 0.01, 0.75).all()


def test_penalty_mask_disk_matches_naive_oracle(rng):
    side = 24
    disk = disk_kernel(3, side, side)
    u = np.zeros((15, side, side), dtype=np.float32)
    blob = (np.arange(side)[:, None] - 12) ** 2 + (np.arange(side)[None, :] - 12) ** 2 <= 36
    u[:, blob] = 0.4
    got = penalty_mask(u, disk, 0.01, 0.75)

    occupied = (np.abs(u).sum(axis=0) > 0.01).astype(np.float64)
    avail = naive_convolve(1.0 - occupied, disk.field) / disk.area
    starved = naive_convolve(1.0 - np.clip(avail, 0.0, 1.0), disk.field) / disk.area
    want = starved > 0.75
    assert np.array_equal(got, want)
    assert want[12, 12] and not want[0, 0]  # crowded core marked, far field not


def test_apply_penalty_direction_and_region():
    pen = np.zeros((16, 16), dtype=bool)
    pen[2:9, 3:8] = True
    alpha = np.zeros((16, 16), dtype=bool)
    alpha[4:16, 0:16] = True
    region = pen & alpha

    seen = set()
    for seed in range(12):
        p = np.full((9, 15, 16, 16), 0.5, dtype=np.float32)
        before = p.copy()
        rng = np.random.default_rng(seed)
        ev = apply_penalty(p, pen, alpha, rng, step=3, rate=0.5, delta_max=0.05)
        assert ev is not None and ev.kind == "penalization"
        assert ev.region_pixels == int(region.sum())
        assert 0.0 < abs(ev.delta) <= 0.05
        changed = p != before
        layers = np.argwhere(changed.reshape(9, 15, -1).any(axis=2))
        assert layers.tolist() == [[ev.param, ev.kernel]]
        assert not changed[ev.param, ev.kernel][~region].any()
        if ev.param == GROWTH_M:
            assert ev.delta > 0  # growth center pushed up
            assert np.all(p[GROWTH_M, ev.kernel][region] > 0.5)
        else:
            assert ev.param == GROWTH_S and ev.delta < 0  # growth width pulled down
            assert np.all(p[GROWTH_S, ev.kernel][region] < 0.5)
        seen.add(ev.param)
    assert seen == {GROWTH_M, GROWTH_S}  # both directions occur


def test_apply_penalty_misses_and_rate_zero():
    p = np.full((9, 15, 8, 8), 0.5, dtype=np.float32)
    rng = np.random.default_rng(2)
    state = rng.bit_generator.state
    assert apply_penalty(p, np.zeros((8, 8), bool), np.ones((8, 8), bool), rng, 0, 0.0, 0.05) is None
    assert rng.bit_generator.state == state  # rate 0 leaves the stream alone
    ev = apply_penalty(p, np.zeros((8, 8), bool), np.ones((8, 8), bool), rng, 0, 0.5, 0.05)
    assert ev is None
    assert rng.bit_generator.state != state  # a real attempt consumed draws
    assert np.all(p == 0.5)


# -------------------------------------------------------------------- walls


def test_walls_zero_both_spaces():
    a = np.ones((3, 16, 16), dtype=np.float32)
    p = np.ones((9, 15, 16, 16), dtype=np.float32)
    walls = WallSet([(2, 3, 4, 5)], enabled=True)
    apply_walls(a, p, walls)
    assert np.all(a[:, 2:6, 3:8] == 0.0)
    assert np.all(p[:, :, 2:6, 3:8] == 0.0)
    assert a.sum() == 3 * (256 - 20)


def test_walls_disabled_is_noop():
    a = np.ones((3, 8, 8), dtype=np.float32)
    p = np.ones((9, 15, 8, 8), dtype=np.float32)
    apply_walls(a, p, WallSet([(1, 1, 2, 2)], enabled=False))
    assert np.all(a == 1.0) and np.all(p == 1.0)


def test_walls_normalization():
    walls = WallSet([(-6, 21, 2, 2)], enabled=True)
    assert walls.normalized(16, 16) == [(10, 5, 2, 2)]
    with pytest.raises(ConfigError):
        WallSet([(15, 0, 4, 4)], enabled=True).normalized(16, 16)
    with pytest.raises(ConfigError):
        WallSet([(0, 0, 0, 2)], enabled=True).normalized(16, 16)


# ------------------------------------------------------------------- events


def test_event_record_round_trip():
    ev = EventRecord(9, "mutation", 2, 11, -0.031, 44, center=(5, 6), half_size=10)
    assert EventRecord.from_dict(ev.to_dict()) == ev
    pv = EventRecord(10, "penalization", GROWTH_S, 3, -0.04, 120)
    assert EventRecord.from_dict(pv.to_dict()) == pv
