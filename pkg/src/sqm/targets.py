"""Test-target and synthetic-scene generation.

The dead-leaves target stacks occluding disks whose radii follow a
power-law density (pdf ~ r^-3 by default), which reproduces the roughly
1/u^2 radial power spectrum of average natural scenes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GenerationError
from .image import PlanarImage


@dataclass(frozen=True)
class DeadLeavesParams:
    r_min: float = 1.5
    r_max: float | None = None  # None: half the short image side
    exponent: float = 3.0
    gray_lo: float = 0.05
    gray_hi: float = 0.95
    seed: int = 0
    max_disks: int = 2_000_000

    def __post_init__(self):
        if self.r_min < 1.0:
            raise GenerationError("minimum disk radius must be >= 1 pixel")
        if self.exponent <= 1.0:
            raise GenerationError("radius density exponent must exceed 1")
        if not 0.0 <= self.gray_lo < self.gray_hi <= 1.0:
            raise GenerationError("gray-level range must be ordered within [0, 1]")


def _power_law_radius(u: np.ndarray, r_min: float, r_max: float, a: float) -> np.ndarray:
    # inverse CDF of pdf ~ r^-a on [r_min, r_max]
    lo, hi = r_min ** (1.0 - a), r_max ** (1.0 - a)
    return (lo + u * (hi - lo)) ** (1.0 / (1.0 - a))


def generate_dead_leaves(params: DeadLeavesParams, size: int) -> PlanarImage:
    """Occluding-disk target; newest disk paints over older ones until every
    pixel has been covered at least once. Deterministic per seed."""
    r_max = params.r_max if params.r_max is not None else size / 2.0
    if r_max <= params.r_min:
        raise GenerationError(f"radius range [{params.r_min}, {r_max}] is empty")
    if r_max > size / 2.0:
        raise GenerationError("maximum disk radius exceeds half the image side")
    rng = np.random.default_rng(params.seed)
    img = np.zeros((size, size))
    covered = np.zeros((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    remaining = size * size
    for _ in range(params.max_disks):
        r = float(_power_law_radius(rng.random(), params.r_min, r_max, params.exponent))
        cx = rng.random() * size
        cy = rng.random() * size
        g = rng.uniform(params.gray_lo, params.gray_hi)
        x0, x1 = max(0, int(cx - r - 1)), min(size, int(cx + r + 2))
        y0, y1 = max(0, int(cy - r - 1)), min(size, int(cy + r + 2))
        if x0 >= x1 or y0 >= y1:
            continue
        disk = ((xx[y0:y1, x0:x1] - cx) ** 2 + (yy[y0:y1, x0:x1] - cy) ** 2) <= r * r
        img[y0:y1, x0:x1][disk] = g
        fresh = disk & ~covered[y0:y1, x0:x1]
        if fresh.any():
            covered[y0:y1, x0:x1] |= disk
            remaining -= int(np.count_nonzero(fresh))
            if remaining == 0:
                return PlanarImage(img)
    raise GenerationError(
        f"coverage not reached after {params.max_disks} disks; widen the radius range")


def generate_uniform_patch(level: float, size: int, channels: int = 1) -> PlanarImage:
    """Constant target at the given linear intensity."""
    if not 0.0 <= level <= 1.0:
        raise GenerationError(f"patch level {level} outside [0, 1]")
    shape = (size, size) if channels == 1 else (size, size, 3)
    return PlanarImage(np.full(shape, float(level)))


SCENE_KINDS = ("leaves", "blobs", "bars", "rings", "checks")


def make_scene(kind: str, size: int, seed: int = 0) -> PlanarImage:
    """Deterministic 3-channel pictorial stand-in scenes, mean-matched near 0.5.

    These exercise content-aware processing with differing structure:
    occluding disks, smooth random blobs, oriented bars, concentric rings,
    and a perturbed checkerboard.
    """
    if kind not in SCENE_KINDS:
        raise GenerationError(f"unknown scene kind {kind!r}; choose from {SCENE_KINDS}")
    rng = np.random.default_rng([SCENE_KINDS.index(kind), seed])

    def smooth_field(scale: float) -> np.ndarray:
        f = ndimage.gaussian_filter(rng.standard_normal((size, size)), size / scale,
                                    mode="wrap")
        return f / (6.0 * f.std()) + 0.5

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    if kind == "leaves":
        base = generate_dead_leaves(DeadLeavesParams(seed=seed + 17), size).data
    elif kind == "blobs":
        base = smooth_field(24.0)
    elif kind == "bars":
        angle = 0.6 + 0.2 * seed
        phase = np.cos(2 * np.pi * (xx * np.cos(angle) + yy * np.sin(angle)) * 9.0)
        base = 0.5 + 0.3 * np.sign(phase) * np.abs(phase) ** 0.5
    elif kind == "rings":
        r = np.hypot(xx - 0.5, yy - 0.5)
        base = 0.5 + 0.35 * np.cos(2 * np.pi * r * 14.0 + seed)
    else:  # checks
        n = 12
        base = ((np.floor(xx * n) + np.floor(yy * n)) % 2) * 0.6 + 0.2
        base = ndimage.gaussian_filter(base, 1.0, mode="wrap")
    if kind in ("bars", "rings", "checks"):
        # periodic patterns are spectrally sparse; mix in a smooth broadband
        # field so the scenes carry natural-image-like low-frequency power
        base = 0.6 * base + 0.4 * smooth_field(12.0)

    base = np.clip(base, 0.02, 0.98)
    base += 0.5 - base.mean()  # mean-match so photon noise levels align
    base = np.clip(base, 0.0, 1.0)
    # mild per-channel tinting keeps the scene colorful but near neutral
    tint = 1.0 + 0.08 * rng.standard_normal(3)
    rgbs = [np.clip(base * t, 0.0, 1.0) for t in tint]
    return PlanarImage(np.stack(rgbs, axis=2))
