"""Gene encoding and kernel construction.

A genotype is 9 normalized genes per kernel: two radial Gaussian bumps
(center, width, amplitude twice over) shaping the kernel profile, plus the
growth mapping's center, width, and amplitude.  Genes live in [0, 1] and
decode affinely into physical ranges held by a schema, so one mutation
scale applies to every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ConfigError, wrapped_distance_grid

PARAM_NAMES = ("r1", "w1", "b1", "r2", "w2", "b2", "m", "s", "h")
PARAM_INDEX = {name: i for i, name in enumerate(PARAM_NAMES)}
N_PARAMS = len(PARAM_NAMES)

# Indices of the kernel-shape genes versus the growth genes.
SHAPE_SLICE = slice(0, 6)
GROWTH_M, GROWTH_S, GROWTH_H = PARAM_INDEX["m"], PARAM_INDEX["s"], PARAM_INDEX["h"]

_DEFAULT_RANGES = {
    "r1": (0.0, 1.0),
    "w1": (0.01, 0.5),
    "b1": (0.0, 1.0),
    "r2": (0.0, 1.0),
    "w2": (0.01, 0.5),
    "b2": (0.0, 1.0),
    "m": (0.05, 0.5),
    "s": (0.001, 0.2),
    "h": (0.0, 1.0),
}


class DegenerateKernelError(ValueError):
    """Raised when a genotype yields an all-zero kernel that cannot be normalized."""


@dataclass
class GeneSchema:
    """Affine decode ranges, one ``(lo, hi)`` pair per gene in PARAM_NAMES order."""

    ranges: tuple[tuple[float, float], ...]
    _lows: np.ndarray = field(init=False, repr=False, compare=False)
    _spans: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.ranges) != N_PARAMS:
            raise ConfigError(f"schema needs {N_PARAMS} ranges, got {len(self.ranges)}")
        for name, (lo, hi) in zip(PARAM_NAMES, self.ranges):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigError(f"bad range for gene {name}: ({lo}, {hi})")
            if name in ("w1", "w2", "s") and lo <= 0.0:
                raise ConfigError(f"width gene {name} must decode strictly positive, lo={lo}")
        self._lows = np.array([lo for lo, _ in self.ranges], dtype=np.float64)
        self._spans = np.array([hi - lo for lo, hi in self.ranges], dtype=np.float64)

    @classmethod
    def default(cls) -> "GeneSchema":
        return cls(tuple(_DEFAULT_RANGES[name] for name in PARAM_NAMES))

    @property
    def lows(self) -> np.ndarray:
        return self._lows

    @property
    def spans(self) -> np.ndarray:
        return self._spans

    def decode(self, values: np.ndarray | float, param: int | str):
        """Map normalized gene values of one parameter into physical units."""
        i = PARAM_INDEX[param] if isinstance(param, str) else int(param)
        return self._lows[i] + np.asarray(values, dtype=np.float64) * self._spans[i]

    def decode_genotype(self, genes: np.ndarray) -> np.ndarray:
        """Decode a ``(9, ...)`` normalized gene array along its first axis."""
        genes = np.asarray(genes, dtype=np.float64)
        if genes.shape[0] != N_PARAMS:
            raise ConfigError(f"genotype must have {N_PARAMS} leading entries, got {genes.shape}")
        shape = (N_PARAMS,) + (1,) * (genes.ndim - 1)
        return self._lows.reshape(shape) + genes * self._spans.reshape(shape)

    def to_dict(self) -> dict:
        return {name: list(pair) for name, pair in zip(PARAM_NAMES, self.ranges)}

    @classmethod
    def from_dict(cls, data: dict) -> "GeneSchema":
        missing = [name for name in PARAM_NAMES if name not in data]
        if missing:
            raise ConfigError(f"schema dict missing genes: {missing}")
        return cls(tuple((float(data[name][0]), float(data[name][1])) for name in PARAM_NAMES))


@dataclass
class KernelWiring:
    """Source and target channel of every kernel.

    Kernel ``k`` reads channel ``source[k]`` and its growth lands on channel
    ``target[k]``.  The default layout gives each channel ``n_self`` kernels
    onto itself, then each unordered channel pair ``n_cross`` kernels split
    evenly between the two directions.
    """

    source: tuple[int, ...]
    target: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.source) != len(self.target) or not self.source:
            raise ConfigError("wiring needs equal, non-empty source and target lists")

    @property
    def n_kernels(self) -> int:
        return len(self.source)

    @property
    def n_channels(self) -> int:
        return max(max(self.source), max(self.target)) + 1

    @classmethod
    def default(cls, n_channels: int = 3, n_self: int = 3, n_cross: int = 2) -> "KernelWiring":
        if n_channels < 1 or n_self < 0 or n_cross < 0:
            raise ConfigError("wiring counts must be positive")
        if n_channels > 1 and n_cross % 2 != 0:
            raise ConfigError(f"cross kernels per pair must be even, got {n_cross}")
        source = []
        target = []
        for c in range(n_channels):
            source += [c] * n_self
            target += [c] * n_self
        for i in range(n_channels):
            for j in range(i + 1, n_channels):
                for _ in range(n_cross // 2):
                    source += [i, j]
                    target += [j, i]
        return cls(tuple(source), tuple(target))

    def validate(self, n_channels: int) -> None:
        for k, (s, t) in enumerate(zip(self.source, self.target)):
            if not (0 <= s < n_channels and 0 <= t < n_channels):
                raise ConfigError(f"kernel {k} wires channels ({s}, {t}) outside 0..{n_channels - 1}")

    def to_dict(self) -> dict:
        return {"source": list(self.source), "target": list(self.target)}

    @classmethod
    def from_dict(cls, data: dict) -> "KernelWiring":
        return cls(tuple(int(v) for v in data["source"]), tuple(int(v) for v in data["target"]))


def gaussian_bump(x: np.ndarray | float, center: float, width: float, amplitude: float):
    """``amplitude * exp(-(x - center)^2 / (2 width^2))``, the shape primitive."""
    x = np.asarray(x, dtype=np.float64)
    return amplitude * np.exp(-((x - center) ** 2) / (2.0 * width * width))


def growth_value(
    potential: np.ndarray | float,
    center: float,
    width: float,
    amplitude: float,
    form: str = "bipolar",
):
    """Growth response to a potential value.

    ``bipolar`` rescales the Gaussian to [-amplitude, +amplitude] so matter
    decays wherever the potential is far from the center; ``unipolar`` keeps
    the plain non-negative bump.
    """
    g = np.exp(-((np.asarray(potential, dtype=np.float64) - center) ** 2) / (2.0 * width * width))
    if form == "bipolar":
        return amplitude * (2.0 * g - 1.0)
    if form == "unipolar":
        return amplitude * g
    raise ConfigError(f"unknown growth form: {form!r}")


def shell_weights(shape_genes: np.ndarray, schema: GeneSchema, n_ring: int) -> np.ndarray:
    """Per-ring kernel weights for one genotype.

    ``shape_genes`` holds the six normalized shape genes (r1, w1, b1, r2,
    w2, b2).  Ring ``r`` is weighted by the two decoded bumps sampled at
    ``r / n_ring``, so ring index n_ring corresponds to the kernel radius.
    """
    g = np.asarray(shape_genes, dtype=np.float64)
    if g.shape != (6,):
        raise ConfigError(f"expected 6 shape genes, got shape {g.shape}")
    r1, w1, b1 = schema.decode(g[0], "r1"), schema.decode(g[1], "w1"), schema.decode(g[2], "b1")
    r2, w2, b2 = schema.decode(g[3], "r2"), schema.decode(g[4], "w2"), schema.decode(g[5], "b2")
    xs = np.arange(n_ring, dtype=np.float64) / n_ring
    return gaussian_bump(xs, r1, w1, b1) + gaussian_bump(xs, r2, w2, b2)


@dataclass(frozen=True)
class RingKernelBank:
    """Annular indicator kernels partitioning the disk of the kernel radius.

    Every pixel with wrapped distance strictly below ``radius`` belongs to
    exactly one ring; a genotype's kernel is a weighted sum of the rings.
    ``masks`` is ``(n_ring, width, height)`` float32, ``spectra`` the
    matching complex64 transforms, ``areas`` the per-ring pixel counts, and
    ``sample_points`` the normalized radii ``r / n_ring`` the ring weights
    are sampled at.
    """

    radius: int
    n_ring: int
    width: int
    height: int
    masks: np.ndarray
    spectra: np.ndarray
    areas: np.ndarray
    sample_points: np.ndarray


def ring_index_grid(radius: int, n_ring: int, width: int, height: int) -> np.ndarray:
    """Ring assignment per pixel: nearest sample index, or -1 outside the disk.

    A pixel at wrapped distance d joins the ring whose sample radius
    ``r * radius / n_ring`` is closest to d (ties round outward), clamped to
    the last ring.  Membership requires d < radius strictly.
    """
    dist = wrapped_distance_grid(width, height)
    idx = np.floor(dist * n_ring / radius + 0.5).astype(np.int64)
    idx = np.minimum(idx, n_ring - 1)
    idx[dist >= radius] = -1
    return idx


def build_ring_bank(radius: int, n_ring: int, width: int, height: int) -> RingKernelBank:
    """Precompute the ring kernels and their transforms for a grid size."""
    import scipy.fft

    if radius < 1 or n_ring < 1:
        raise ConfigError(f"radius and ring count must be >= 1, got {radius}, {n_ring}")
    if 2 * radius + 1 > min(width, height):
        raise ConfigError(f"kernel radius {radius} does not fit a {width}x{height} grid")
    idx = ring_index_grid(radius, n_ring, width, height)
    masks = np.zeros((n_ring, width, height), dtype=np.float32)
    for r in range(n_ring):
        masks[r] = idx == r
    areas = masks.sum(axis=(1, 2), dtype=np.float64)
    spectra = scipy.fft.rfft2(masks, axes=(-2, -1)).astype(np.complex64)
    xs = np.arange(n_ring, dtype=np.float64) / n_ring
    return RingKernelBank(int(radius), int(n_ring), int(width), int(height), masks, spectra, areas, xs)


def cast_kernel(
    shape_genes: np.ndarray, schema: GeneSchema, radius: int, width: int, height: int
) -> np.ndarray:
    """Exact unit-sum kernel for one genotype, bypassing the ring decomposition.

    Evaluates the two bumps at every pixel's own ``distance / radius``
    inside the open disk.  This is the continuous profile the ring bank
    approximates, used for calibration and for reference dynamics.

    Raises:
        DegenerateKernelError: if the profile sums to zero (both amplitudes
            vanish) so no normalization exists.
    """
    g = np.asarray(shape_genes, dtype=np.float64)
    dist = wrapped_distance_grid(width, height)
    inside = dist < radius
    x = dist / radius
    r1, w1, b1 = schema.decode(g[0], "r1"), schema.decode(g[1], "w1"), schema.decode(g[2], "b1")
    r2, w2, b2 = schema.decode(g[3], "r2"), schema.decode(g[4], "w2"), schema.decode(g[5], "b2")
    profile = (gaussian_bump(x, r1, w1, b1) + gaussian_bump(x, r2, w2, b2)) * inside
    total = profile.sum()
    if total < 1e-12:
        raise DegenerateKernelError("kernel profile sums to zero, cannot normalize")
    return profile / total


def ring_recombined_kernel(shape_genes: np.ndarray, schema: GeneSchema, bank: RingKernelBank) -> np.ndarray:
    """Unit-sum kernel a uniform genotype produces through the ring bank."""
    w = shell_weights(np.asarray(shape_genes, dtype=np.float64), schema, bank.n_ring)
    total = float(w @ bank.areas)
    if total < 1e-12:
        raise DegenerateKernelError("ring weights sum to zero, cannot normalize")
    return np.tensordot(w, bank.masks.astype(np.float64), axes=(0, 0)) / total
