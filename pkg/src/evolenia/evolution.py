"""Evolutionary operators acting on the genospace.

Genes spread by local averaging under living matter, mutate in random
rectangles, and drift toward death (growth center up or growth width
down) wherever the neighborhood is overcrowded.  All randomness flows
through one numpy Generator owned by the engine, so runs replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numba
import numpy as np

from .fields import ConfigError, DiskKernel, convolve_periodic
from .genome import GROWTH_M, GROWTH_S

ALPHA_MODES = ("all", "sum", "full")


@dataclass(frozen=True)
class EventRecord:
    """One recorded evolutionary event, enough to audit or replay it.

    ``param`` and ``kernel`` index the affected gene layer; ``delta`` is the
    raw draw before the rate multiplier; ``region_pixels`` counts the pixels
    actually written.  Mutations carry their box center and half size,
    penalizations leave them unset.
    """

    step: int
    kind: str  # "mutation" or "penalization"
    param: int
    kernel: int
    delta: float
    region_pixels: int
    center: Optional[tuple[int, int]] = None
    half_size: Optional[int] = None

    def to_dict(self) -> dict:
        d = {
            "step": self.step,
            "kind": self.kind,
            "param": self.param,
            "kernel": self.kernel,
            "delta": self.delta,
            "region_pixels": self.region_pixels,
        }
        if self.center is not None:
            d["center"] = list(self.center)
            d["half_size"] = self.half_size
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        center = tuple(d["center"]) if "center" in d else None
        return cls(
            step=int(d["step"]),
            kind=str(d["kind"]),
            param=int(d["param"]),
            kernel=int(d["kernel"]),
            delta=float(d["delta"]),
            region_pixels=int(d["region_pixels"]),
            center=center,
            half_size=int(d["half_size"]) if center is not None else None,
        )


def alpha_mask(growth: np.ndarray, genome: np.ndarray, epsilon: float, mode: str = "all") -> np.ndarray:
    """Pixels considered alive, where genes may persist and events may land.

    ``all`` requires every growth magnitude and every gene to exceed
    ``epsilon``; ``sum`` requires the two sums to; ``full`` marks everything
    alive (a diagnostic mode that disables gene erasure).
    """
    w, h = growth.shape[-2:]
    if mode == "full":
        return np.ones((w, h), dtype=bool)
    flat_p = genome.reshape(-1, w, h)
    if mode == "all":
        return np.all(np.abs(growth) > epsilon, axis=0) & np.all(flat_p > epsilon, axis=0)
    if mode == "sum":
        return (np.abs(growth).sum(axis=0, dtype=np.float64) > epsilon) & (
            flat_p.sum(axis=0, dtype=np.float64) > epsilon
        )
    raise ConfigError(f"unknown alpha mode: {mode!r}")


def _disk_row_halfwidths(disk: DiskKernel) -> np.ndarray:
    """Max |dx| per dy row of the disk, indexed dy = -radius..radius."""
    r = disk.radius
    hw = np.zeros(2 * r + 1, dtype=np.int64)
    for dx, dy in disk.offsets:
        i = dy + r
        if abs(dx) > hw[i]:
            hw[i] = abs(dx)
    return hw


def _disk_sum(stack: np.ndarray, disk: DiskKernel) -> np.ndarray:
    """Sum of each pixel's disk neighborhood, exact (no FFT noise).

    Builds cumulative row sums S_w = sum over |dx| <= w of the x-shifted
    stack, then combines the row widths the disk prescribes per dy.
    """
    r = disk.radius
    hw = _disk_row_halfwidths(disk)
    row = stack
    rows_by_width = {0: stack}
    for wdt in range(1, r + 1):
        row = row + np.roll(stack, wdt, axis=-2) + np.roll(stack, -wdt, axis=-2)
        rows_by_width[wdt] = row
    out = np.zeros_like(stack)
    for dy in range(-r, r + 1):
        out += np.roll(rows_by_width[int(hw[dy + r])], dy, axis=-1)
    return out


@numba.njit(cache=True)
def _diffuse_stack(stack, out, halfwidths, epsilon):  # pragma: no cover - compiled
    # Streams one output row at a time: x-window sums per width class are
    # rebuilt from rows that are still cache-hot, so no stack-sized
    # temporaries exist and each plane is read and written once.
    n_layers, width, height = stack.shape
    radius = (halfwidths.size - 1) // 2
    eps = np.float32(epsilon)
    sums = np.empty((radius + 1, height), dtype=np.float32)
    counts = np.empty((radius + 1, height), dtype=np.float32)
    num = np.empty(height, dtype=np.float32)
    den = np.empty(height, dtype=np.float32)
    for layer in range(n_layers):
        plane = stack[layer]
        for x in range(width):
            row = plane[x]
            for y in range(height):
                v = row[y]
                sums[0, y] = v
                counts[0, y] = np.float32(1.0) if v > eps else np.float32(0.0)
            for c in range(1, radius + 1):
                above = plane[(x + c) % width]
                below = plane[(x - c) % width]
                for y in range(height):
                    va = above[y]
                    vb = below[y]
                    sums[c, y] = sums[c - 1, y] + va + vb
                    cnt = counts[c - 1, y]
                    if va > eps:
                        cnt += np.float32(1.0)
                    if vb > eps:
                        cnt += np.float32(1.0)
                    counts[c, y] = cnt
            for y in range(height):
                num[y] = np.float32(0.0)
                den[y] = np.float32(0.0)
            for dy in range(-radius, radius + 1):
                c = halfwidths[dy + radius]
                shift = dy % height
                for y in range(height - shift):
                    num[y] += sums[c, y + shift]
                    den[y] += counts[c, y + shift]
                for y in range(height - shift, height):
                    num[y] += sums[c, y + shift - height]
                    den[y] += counts[c, y + shift - height]
            orow = out[layer, x]
            for y in range(height):
                if den[y] > np.float32(0.5):
                    v = num[y] / den[y]
                    if v < np.float32(0.0):
                        v = np.float32(0.0)
                    elif v > np.float32(1.0):
                        v = np.float32(1.0)
                    orow[y] = v
                else:
                    orow[y] = np.float32(0.0)


def diffuse(genome: np.ndarray, disk: DiskKernel, epsilon: float) -> np.ndarray:
    """Spread genes by disk-averaging over their own support.

    Each gene layer is replaced by (sum of the layer over the disk) divided
    by (count of pixels in the disk where that layer exceeds ``epsilon``).
    Pixels whose whole neighborhood is empty stay exactly zero, so support
    only grows by the disk radius per step.  Result is float32 in [0, 1].
    """
    flat = np.ascontiguousarray(genome, dtype=np.float32).reshape(
        -1, genome.shape[-2], genome.shape[-1]
    )
    out = np.empty(flat.shape, dtype=np.float32)
    _diffuse_stack(flat, out, _disk_row_halfwidths(disk), float(epsilon))
    return out.reshape(genome.shape)


def toroidal_box(center_x: int, center_y: int, half_size: int, width: int, height: int):
    """Index arrays of the (2s+1)^2 box around a center, wrapped at edges."""
    xs = (np.arange(center_x - half_size, center_x + half_size + 1)) % width
    ys = (np.arange(center_y - half_size, center_y + half_size + 1)) % height
    return np.ix_(xs, ys)


def mutate(
    genome: np.ndarray,
    alpha: np.ndarray,
    rng: np.random.Generator,
    step: int,
    rate: float,
    half_size: int,
    delta_max: float,
) -> Optional[EventRecord]:
    """One random mutation attempt; updates ``genome`` in place.

    Draws a gene layer, a box center, and a signed delta, then adds
    ``rate * delta`` to the layer inside the box wherever ``alpha`` is set,
    clipping to [0, 1].  Returns the event, or None when the rate is zero,
    the box misses all living pixels, or the delta draw is exactly zero.
    The rng is advanced identically whether or not the attempt lands.
    """
    if rate < 0.0:
        raise ConfigError(f"mutation rate must be >= 0, got {rate}")
    if rate == 0.0:
        return None
    n_p, n_k, w, h = genome.shape
    p = int(rng.integers(n_p))
    k = int(rng.integers(n_k))
    x0 = int(rng.integers(w))
    y0 = int(rng.integers(h))
    delta = float(rng.uniform(-delta_max, delta_max))
    if delta == 0.0:
        return None
    box = toroidal_box(x0, y0, half_size, w, h)
    hit = alpha[box]
    n_hit = int(hit.sum())
    if n_hit == 0:
        return None
    layer = genome[p, k]
    patch = layer[box]
    layer[box] = np.where(hit, np.clip(patch + np.float32(rate * delta), 0.0, 1.0), patch)
    return EventRecord(step, "mutation", p, k, delta, n_hit, center=(x0, y0), half_size=half_size)


def penalty_mask(
    growth: np.ndarray, oxygen_disk: DiskKernel, epsilon: float, threshold: float
) -> np.ndarray:
    """Overcrowded pixels: those starved through a two-stage disk blur.

    Availability is the disk average of emptiness (no growth activity);
    starvation is the disk average of unavailability.  Pixels whose
    starvation exceeds ``threshold`` are marked.
    """
    w, h = growth.shape[-2:]
    occupied = (np.abs(growth).sum(axis=0, dtype=np.float64) > epsilon).astype(np.float64)
    avail = convolve_periodic(1.0 - occupied, oxygen_disk.spectrum) / oxygen_disk.area
    np.clip(avail, 0.0, 1.0, out=avail)
    starved = convolve_periodic(1.0 - avail, oxygen_disk.spectrum) / oxygen_disk.area
    return starved > threshold


def apply_penalty(
    genome: np.ndarray,
    pen: np.ndarray,
    alpha: np.ndarray,
    rng: np.random.Generator,
    step: int,
    rate: float,
    delta_max: float,
) -> Optional[EventRecord]:
    """One penalization attempt on overcrowded living pixels; in place.

    Picks one kernel and either pushes its growth center up or its growth
    width down (each by a draw in (0, delta_max], scaled by ``rate``) over
    ``pen & alpha``.  Both directions make survival harder.  Returns the
    event or None; the rng advances identically either way.
    """
    if rate < 0.0:
        raise ConfigError(f"penalization rate must be >= 0, got {rate}")
    if rate == 0.0:
        return None
    n_p, n_k = genome.shape[:2]
    raise_center = bool(rng.integers(2))
    k = int(rng.integers(n_k))
    magnitude = delta_max - float(rng.uniform(0.0, delta_max))
    region = pen & alpha
    n_hit = int(region.sum())
    if n_hit == 0:
        return None
    p = GROWTH_M if raise_center else GROWTH_S
    delta = magnitude if raise_center else -magnitude
    layer = genome[p, k]
    layer[region] = np.clip(layer[region] + np.float32(rate * delta), 0.0, 1.0)
    return EventRecord(step, "penalization", p, k, delta, n_hit)


@dataclass
class WallSet:
    """Axis-aligned rectangles cleared to zero in both spaces each step.

    Rectangles are ``(x, y, width, height)`` with the origin wrapped into
    the grid; each must then fit without crossing the edge.
    """

    rects: list[tuple[int, int, int, int]] = dc_field(default_factory=list)
    enabled: bool = False

    def normalized(self, width: int, height: int) -> list[tuple[int, int, int, int]]:
        out = []
        for x, y, rw, rh in self.rects:
            if rw < 1 or rh < 1:
                raise ConfigError(f"wall rectangle has empty extent: {(x, y, rw, rh)}")
            x, y = int(x) % width, int(y) % height
            if x + rw > width or y + rh > height:
                raise ConfigError(f"wall rectangle {(x, y, rw, rh)} crosses the grid edge")
            out.append((x, y, int(rw), int(rh)))
        return out

    def to_dict(self) -> dict:
        return {"rects": [list(r) for r in self.rects], "enabled": self.enabled}

    @classmethod
    def from_dict(cls, d: dict) -> "WallSet":
        return cls([tuple(int(v) for v in r) for r in d.get("rects", [])], bool(d.get("enabled", False)))


def apply_walls(a: np.ndarray, genome: np.ndarray, walls: WallSet) -> None:
    """Zero phenotype and genome inside every enabled wall rectangle; in place."""
    if not walls.enabled or not walls.rects:
        return
    w, h = a.shape[-2:]
    for x, y, rw, rh in walls.normalized(w, h):
        a[..., x : x + rw, y : y + rh] = 0.0
        genome[..., x : x + rw, y : y + rh] = 0.0
