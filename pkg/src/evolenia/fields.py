"""Toroidal scalar fields: FFT convolution, thresholds, disk kernels.

Grids are numpy arrays indexed ``[x, y]`` with shape ``(width, height)``.
Stacked variants carry leading axes, e.g. ``(channels, width, height)``.
All convolutions are circular (the world wraps in both directions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft


class ConfigError(ValueError):
    """Raised when a parameter value or combination is unusable."""


@dataclass(frozen=True)
class Spectrum2D:
    """Precomputed real-FFT of a kernel field, bound to its grid size.

    ``data`` has shape ``(width, height // 2 + 1)`` as produced by
    ``scipy.fft.rfft2``; convolving is a pointwise product against the
    transform of the other operand.
    """

    width: int
    height: int
    data: np.ndarray


def forward_spectrum(field: np.ndarray) -> Spectrum2D:
    """Transform a single ``(width, height)`` field for later convolution."""
    if field.ndim != 2:
        raise ConfigError(f"expected a 2-d field, got shape {field.shape}")
    w, h = field.shape
    return Spectrum2D(w, h, scipy.fft.rfft2(field.astype(np.float64)))


def convolve_periodic(field: np.ndarray, kernel: Spectrum2D) -> np.ndarray:
    """Circular convolution of ``field`` with a prepared kernel spectrum.

    Computes in float64 regardless of the input dtype and returns float64.
    The kernel field is taken as centered at the origin pixel (0, 0) with
    its negative-offset half wrapped to the far edges.

    Raises:
        ConfigError: if the field shape does not match the spectrum's grid.
    """
    if field.shape[-2:] != (kernel.width, kernel.height):
        raise ConfigError(
            f"field shape {field.shape[-2:]} does not match kernel grid "
            f"({kernel.width}, {kernel.height})"
        )
    fa = scipy.fft.rfft2(field.astype(np.float64), axes=(-2, -1))
    return scipy.fft.irfft2(fa * kernel.data, s=(kernel.width, kernel.height), axes=(-2, -1))


def threshold_masks(stack: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean occupancy views of a stacked field at threshold ``epsilon``.

    ``stack`` is ``(..., width, height)``; leading axes are the layers.

    Returns:
        ``(all_mask, sum_mask, same_mask)`` where ``all_mask[x, y]`` is true
        when every layer exceeds ``epsilon`` at that pixel, ``sum_mask`` when
        the sum over layers exceeds it, and ``same_mask`` keeps the input
        shape with a per-entry comparison.
    """
    if stack.ndim < 2:
        raise ConfigError(f"expected at least 2 dims, got shape {stack.shape}")
    flat = stack.reshape(-1, stack.shape[-2], stack.shape[-1])
    same = stack > epsilon
    all_mask = np.all(flat > epsilon, axis=0)
    sum_mask = flat.sum(axis=0, dtype=np.float64) > epsilon
    return all_mask, sum_mask, same


def quarter_turn(field: np.ndarray) -> np.ndarray:
    """Rotate a square toroidal field 90 degrees about the origin pixel.

    Maps value at (x, y) to (-y, x) with wrapping, the symmetry an
    origin-centered kernel must have exactly.
    """
    if field.shape[-2] != field.shape[-1]:
        raise ConfigError(f"quarter turn needs a square grid, got {field.shape}")
    return np.roll(field.swapaxes(-2, -1)[..., ::-1, :], 1, axis=-2)


def wrapped_distance_grid(width: int, height: int) -> np.ndarray:
    """Euclidean distance of each pixel to the origin on the torus.

    Offsets along each axis take the shorter way around, so the grid is
    symmetric under wrapping and suits origin-centered kernels.
    """
    dx = np.minimum(np.arange(width), width - np.arange(width)).astype(np.float64)
    dy = np.minimum(np.arange(height), height - np.arange(height)).astype(np.float64)
    return np.sqrt(dx[:, None] ** 2 + dy[None, :] ** 2)


@dataclass(frozen=True)
class DiskKernel:
    """Indicator of a wrapped disk: pixels with distance <= radius.

    ``field`` is the 0/1 indicator on the grid, ``spectrum`` its transform,
    ``area`` the pixel count, and ``offsets`` the ``(n, 2)`` integer offsets
    of member pixels relative to the center.
    """

    radius: int
    field: np.ndarray
    spectrum: Spectrum2D
    area: float
    offsets: np.ndarray


def disk_offsets(radius: int) -> np.ndarray:
    """Integer offsets ``(dx, dy)`` with ``dx**2 + dy**2 <= radius**2``."""
    r = int(radius)
    axis = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(axis, axis, indexing="ij")
    keep = dx * dx + dy * dy <= r * r
    return np.stack([dx[keep], dy[keep]], axis=1)


def disk_kernel(radius: int, width: int, height: int) -> DiskKernel:
    """Build a wrapped disk indicator kernel centered on the origin pixel.

    Radius 0 degenerates to the single origin pixel.  The disk must fit in
    the grid without self-overlap when wrapped.
    """
    if radius < 0:
        raise ConfigError(f"disk radius must be >= 0, got {radius}")
    if 2 * radius + 1 > min(width, height):
        raise ConfigError(
            f"disk of radius {radius} does not fit a {width}x{height} grid"
        )
    dist = wrapped_distance_grid(width, height)
    field = (dist <= radius).astype(np.float64)
    offsets = disk_offsets(radius)
    area = float(field.sum())
    if area != float(len(offsets)):  # wrap overlap would double-count pixels
        raise ConfigError(f"disk radius {radius} overlaps itself on {width}x{height}")
    return DiskKernel(int(radius), field, forward_spectrum(field), area, offsets)
