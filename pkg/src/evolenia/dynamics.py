"""Phenospace dynamics: ring convolutions, per-pixel kernels, growth.

The expensive trick lives here.  Instead of one convolution per pixel
(every pixel carries its own kernel genes), the kernel disk is cut into
thin rings, each ring is convolved once per channel, and every pixel
recombines the ring responses with weights decoded from its own genome.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.fft

from .fields import ConfigError
from .genome import (
    GROWTH_H,
    GROWTH_M,
    GROWTH_S,
    GeneSchema,
    KernelWiring,
    RingKernelBank,
    cast_kernel,
    growth_value,
)


def convolve_rings(a: np.ndarray, bank: RingKernelBank) -> np.ndarray:
    """Convolve every channel with every ring kernel in one batched FFT.

    ``a`` is ``(channels, width, height)`` float32; the result is
    ``(n_ring, channels, width, height)`` float32.
    """
    if a.shape[-2:] != (bank.width, bank.height):
        raise ConfigError(f"field shape {a.shape} does not match bank grid")
    fa = scipy.fft.rfft2(a, axes=(-2, -1))  # complex64 for float32 input
    prod = bank.spectra[:, None] * fa[None, :]
    return scipy.fft.irfft2(prod, s=(bank.width, bank.height), axes=(-2, -1))


@numba.njit(cache=True)
def _recombine(ring_convs, genome, lows, spans, sources, areas, xs, out):  # pragma: no cover
    n_ring, n_c, w, h = ring_convs.shape
    n_k = out.shape[0]
    r1d = np.empty(h, np.float64)
    q1 = np.empty(h, np.float64)
    b1d = np.empty(h, np.float64)
    r2d = np.empty(h, np.float64)
    q2 = np.empty(h, np.float64)
    b2d = np.empty(h, np.float64)
    num = np.empty(h, np.float64)
    den = np.empty(h, np.float64)
    for k in range(n_k):
        src = sources[k]
        for x in range(w):
            live = False
            for y in range(h):
                b1d[y] = lows[2] + genome[2, k, x, y] * spans[2]
                b2d[y] = lows[5] + genome[5, k, x, y] * spans[5]
                if b1d[y] != 0.0 or b2d[y] != 0.0:
                    live = True
            if not live:
                for y in range(h):
                    out[k, x, y] = 0.0
                continue
            for y in range(h):
                r1d[y] = lows[0] + genome[0, k, x, y] * spans[0]
                wd = lows[1] + genome[1, k, x, y] * spans[1]
                q1[y] = 0.5 / (wd * wd)
                r2d[y] = lows[3] + genome[3, k, x, y] * spans[3]
                wd = lows[4] + genome[4, k, x, y] * spans[4]
                q2[y] = 0.5 / (wd * wd)
                num[y] = 0.0
                den[y] = 0.0
            for r in range(n_ring):
                xr = xs[r]
                area = areas[r]
                for y in range(h):
                    if b1d[y] != 0.0 or b2d[y] != 0.0:
                        d1 = xr - r1d[y]
                        d2 = xr - r2d[y]
                        wgt = b1d[y] * np.exp(-d1 * d1 * q1[y]) + b2d[y] * np.exp(-d2 * d2 * q2[y])
                        num[y] += wgt * ring_convs[r, src, x, y]
                        den[y] += wgt * area
            for y in range(h):
                if den[y] > 1e-9:
                    v = num[y] / den[y]
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                    out[k, x, y] = v
                else:
                    out[k, x, y] = 0.0


def combine_potentials(
    ring_convs: np.ndarray,
    genome: np.ndarray,
    schema: GeneSchema,
    wiring: KernelWiring,
    bank: RingKernelBank,
) -> np.ndarray:
    """Per-pixel kernel responses, normalized and clamped to [0, 1].

    Each pixel weights the ring responses of its source channel by its own
    decoded bump profile and divides by the same weighting of the ring
    areas, so a kernel reading a uniform field of value v reports v.
    Pixels whose total weight is zero (or negative, under exotic schemas)
    report 0.
    """
    n_ring, n_c, w, h = ring_convs.shape
    out = np.empty((wiring.n_kernels, w, h), dtype=np.float32)
    _recombine(
        np.ascontiguousarray(ring_convs, dtype=np.float32),
        np.ascontiguousarray(genome, dtype=np.float32),
        schema.lows,
        schema.spans,
        np.asarray(wiring.source, dtype=np.int64),
        bank.areas,
        bank.sample_points,
        out,
    )
    return out


def growth_fields(potentials: np.ndarray, genome: np.ndarray, schema: GeneSchema, form: str) -> np.ndarray:
    """Growth stack: each kernel's potential through its pixel's growth genes."""
    m = schema.decode(genome[GROWTH_M], "m")
    s = schema.decode(genome[GROWTH_S], "s")
    hh = schema.decode(genome[GROWTH_H], "h")
    g = np.exp(-((potentials.astype(np.float64) - m) ** 2) / (2.0 * s * s))
    if form == "bipolar":
        u = hh * (2.0 * g - 1.0)
    elif form == "unipolar":
        u = hh * g
    else:
        raise ConfigError(f"unknown growth form: {form!r}")
    return u.astype(np.float32)


def growth_update(a: np.ndarray, growth: np.ndarray, wiring: KernelWiring, dt: float) -> np.ndarray:
    """Apply one incremental update: each channel gains dt times its summed growth."""
    acc = np.zeros(a.shape, dtype=np.float64)
    for k, tgt in enumerate(wiring.target):
        acc[tgt] += growth[k]
    return np.clip(a.astype(np.float64) + dt * acc, 0.0, 1.0).astype(np.float32)


@dataclass(frozen=True)
class ReferenceKernels:
    """Dense unit-sum kernels for one global genotype, for reference stepping."""

    spectra: np.ndarray
    decoded: np.ndarray
    wiring: KernelWiring
    width: int
    height: int


def make_reference_kernels(
    genotype: np.ndarray,
    schema: GeneSchema,
    wiring: KernelWiring,
    radius: int,
    width: int,
    height: int,
) -> ReferenceKernels:
    """Build exact kernels from a ``(9, n_kernels)`` genotype, one per kernel."""
    genotype = np.asarray(genotype, dtype=np.float64)
    if genotype.shape != (9, wiring.n_kernels):
        raise ConfigError(f"genotype shape {genotype.shape} does not match wiring")
    spectra = np.empty((wiring.n_kernels, width, height // 2 + 1), dtype=np.complex128)
    for k in range(wiring.n_kernels):
        kern = cast_kernel(genotype[:6, k], schema, radius, width, height)
        spectra[k] = scipy.fft.rfft2(kern)
    return ReferenceKernels(spectra, schema.decode_genotype(genotype), wiring, width, height)


def reference_step(a: np.ndarray, ref: ReferenceKernels, dt: float, form: str) -> np.ndarray:
    """One update with spatially uniform kernels and growth genes.

    This is the classic dense dynamics: potentials are plain convolutions
    with unit-sum kernels, growth uses one global (m, s, h) per kernel.
    Float64 throughout; the per-pixel engine must match it when the whole
    genospace holds the same genotype, up to ring discretization error.
    """
    a64 = a.astype(np.float64)
    fa = scipy.fft.rfft2(a64, axes=(-2, -1))
    acc = np.zeros_like(a64)
    for k in range(ref.wiring.n_kernels):
        pot = scipy.fft.irfft2(fa[ref.wiring.source[k]] * ref.spectra[k], s=(ref.width, ref.height))
        u = growth_value(pot, ref.decoded[GROWTH_M, k], ref.decoded[GROWTH_S, k], ref.decoded[GROWTH_H, k], form)
        acc[ref.wiring.target[k]] += u
    return np.clip(a64 + dt * acc, 0.0, 1.0)
