"""Simulated camera capture pipelines producing the replicate sets every
measurement consumes.

Both pipelines share the front end: Gaussian lens blur, photon (Poisson)
noise with saturation electron count snr^2, additive read/dark noise,
per-channel noise scaling (R, G, B) = (2, 1, 3.3), gain, noise-floor
subtraction, soft-knee highlight recovery, and RGGB sampling. They differ
in the ISP back end: the linear pipeline uses gradient-corrected linear
demosaic, Gaussian denoise and unsharp-mask sharpen; the non-linear one
uses gradient-directed demosaic, bilateral denoise and guided-filter
sharpening. Denoise and sharpen are opacity-blended with their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import isp
from .errors import ConfigError, PipelineFault, ShapeMismatchError
from .image import PlanarImage
from .spectral import Provenance, ReplicateSet

STAGES = ("pre-denoise", "post-denoise", "post-sharpen")

CHANNEL_NOISE_SCALE = (2.0, 1.0, 3.3)

# Tuned filter opacities (percent) per pipeline/stage at each saturation SNR.
OPACITY_TABLE = {
    ("linear", "denoise"): {10: 85.0, 20: 83.0, 40: 82.0, 80: 80.0},
    ("linear", "sharpen"): {10: 60.0, 20: 60.0, 40: 55.0, 80: 55.0},
    ("non-linear", "denoise"): {10: 87.0, 20: 86.0, 40: 86.0, 80: 85.0},
    ("non-linear", "sharpen"): {10: 60.0, 20: 70.0, 40: 65.0, 80: 60.0},
}


def table_opacity(kind: str, stage: str, snr: float) -> float:
    table = OPACITY_TABLE[(kind, stage)]
    if snr in table:
        return table[snr]
    # nearest tabulated SNR on a log axis for untabulated levels
    finite = sorted(table)
    if math.isinf(snr):
        return table[finite[-1]]
    key = min(finite, key=lambda s: abs(math.log(snr) - math.log(s)))
    return table[key]


@dataclass(frozen=True)
class PipelineConfig:
    """Capture and ISP parameters; defaults follow the tuned tables."""

    kind: str = "linear"  # linear | non-linear
    snr: float = 80.0  # linear SNR at saturation; inf disables photon noise
    lens_sigma: float = 1.0  # px
    read_sigma: float | None = None  # saturation-relative; None: 0.4 / snr
    channel_noise_scale: tuple[float, float, float] = CHANNEL_NOISE_SCALE
    gain: float = 1.0
    black_level: float = 0.0
    highlight_knee: float = 0.98
    enable_cfa: bool = True
    denoise_opacity: float | None = None  # percent; None: tuned table
    sharpen_opacity: float | None = None
    denoise_sigma: float = 1.0  # linear pipeline Gaussian
    bilateral_sigma_spatial: float = 1.6
    bilateral_sigma_range: float | None = None  # None: noise-adaptive 1/snr
    usm_amount: float = 1.0
    usm_radius: float = 1.0
    guided_amount: float = 1.2
    guided_radius: int = 2
    guided_eps: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "non-linear"):
            raise ConfigError(f"pipeline kind must be linear or non-linear, got {self.kind!r}")
        if not self.snr > 0:
            raise ConfigError("snr must be positive")
        if self.lens_sigma < 0:
            raise ConfigError("lens blur sigma cannot be negative")
        for name in ("denoise_opacity", "sharpen_opacity"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 100.0:
                raise ConfigError(f"{name} must lie in [0, 100], got {v}")

    @property
    def read_sigma_effective(self) -> float:
        if self.read_sigma is not None:
            return self.read_sigma
        return 0.0 if math.isinf(self.snr) else 0.4 / self.snr

    @property
    def range_sigma_effective(self) -> float:
        if self.bilateral_sigma_range is not None:
            return self.bilateral_sigma_range
        if math.isinf(self.snr):
            return 0.02
        return float(np.clip(1.0 / self.snr, 0.02, 0.25))

    def opacity(self, stage: str) -> float:
        override = self.denoise_opacity if stage == "denoise" else self.sharpen_opacity
        return override if override is not None else table_opacity(self.kind, stage, self.snr)


@dataclass(frozen=True)
class StageOutput:
    stage: str
    image: PlanarImage


@dataclass(frozen=True)
class CaptureResult:
    """Three ISP stage outputs plus the raw planes tests poke at."""

    stages: tuple[StageOutput, ...]
    mosaic: np.ndarray | None  # RGGB samples after raw-domain corrections
    raw: np.ndarray  # 3-channel noisy image before CFA sampling

    def image(self, stage: str) -> PlanarImage:
        for s in self.stages:
            if s.stage == stage:
                return s.image
        raise KeyError(stage)


def blend(filtered: PlanarImage, unfiltered: PlanarImage, opacity: float) -> PlanarImage:
    """Opacity mix: o = (P/100) * filtered + ((100-P)/100) * unfiltered."""
    if filtered.data.shape != unfiltered.data.shape:
        raise ShapeMismatchError("blend inputs differ in shape")
    if not 0.0 <= opacity <= 100.0:
        raise ConfigError(f"opacity must lie in [0, 100], got {opacity}")
    p = opacity / 100.0
    return filtered.with_data(p * filtered.data + (1.0 - p) * unfiltered.data)


def _check_finite(arr: np.ndarray, stage: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise PipelineFault(stage)


def _soft_knee(img: np.ndarray, knee: float) -> np.ndarray:
    if knee >= 1.0:
        return img
    over = img > knee
    out = img.copy()
    out[over] = knee + (1.0 - knee) * np.tanh((img[over] - knee) / (1.0 - knee))
    return out


def simulate_capture(scene: PlanarImage, cfg: PipelineConfig,
                     rng: np.random.Generator | None = None) -> CaptureResult:
    """Run one capture through the configured pipeline.

    The scene must be linear in [0, 1]; single-channel scenes are treated
    as neutral gray. Differences between calls come only from the noise
    draws of ``rng`` (default: a generator seeded from the config).
    """
    scene.require_linear("simulate_capture")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    data = scene.data if scene.channels == 3 else np.repeat(scene.data[:, :, None], 3, axis=2)

    if cfg.lens_sigma > 0:
        blurred = np.stack([ndimage.gaussian_filter(data[:, :, c], cfg.lens_sigma, mode="wrap")
                            for c in range(3)], axis=2)
    else:
        blurred = data
    _check_finite(blurred, "lens-blur")

    if math.isinf(cfg.snr):
        noisy = blurred * 1.0
    else:
        n_sat = cfg.snr ** 2  # saturation electron count: shot-noise-limited SNR
        electrons = blurred * n_sat
        shot = rng.poisson(np.clip(electrons, 0.0, None)).astype(np.float64)
        read = rng.normal(0.0, cfg.read_sigma_effective * n_sat, size=electrons.shape)
        noise = shot + read - electrons
        scale = np.asarray(cfg.channel_noise_scale)[None, None, :]
        noisy = (electrons + scale * noise) / n_sat
    _check_finite(noisy, "sensor-noise")

    raw = noisy * cfg.gain
    if cfg.black_level > 0:
        raw = np.clip(raw - cfg.black_level, 0.0, None)
    raw = _soft_knee(raw, cfg.highlight_knee)
    _check_finite(raw, "raw-corrections")

    if cfg.enable_cfa:
        mosaic = isp.bayer_mosaic(raw)
        if cfg.kind == "linear":
            demosaiced = isp.demosaic_linear(mosaic)
        else:
            demosaiced = isp.demosaic_gradient(mosaic)
    else:
        mosaic = None
        demosaiced = raw
    _check_finite(demosaiced, "demosaic")

    pre = PlanarImage(demosaiced, encoding="linear")

    if cfg.kind == "linear":
        dn_full = isp.denoise_gaussian(pre.data, cfg.denoise_sigma)
    else:
        dn_full = isp.denoise_bilateral(pre.data, cfg.bilateral_sigma_spatial,
                                        cfg.range_sigma_effective)
    _check_finite(dn_full, "denoise")
    post_dn = blend(PlanarImage(dn_full), pre, cfg.opacity("denoise"))

    if cfg.kind == "linear":
        sh_full = isp.sharpen_unsharp(post_dn.data, cfg.usm_amount, cfg.usm_radius)
    else:
        sh_full = isp.sharpen_guided(post_dn.data, cfg.guided_amount,
                                     cfg.guided_radius, cfg.guided_eps)
    _check_finite(sh_full, "sharpen")
    post_sh = blend(PlanarImage(sh_full), post_dn, cfg.opacity("sharpen"))

    stages = (StageOutput("pre-denoise", pre),
              StageOutput("post-denoise", post_dn),
              StageOutput("post-sharpen", post_sh))
    return CaptureResult(stages=stages, mosaic=mosaic, raw=raw)


def generate_replicates(scene: PlanarImage, cfg: PipelineConfig, n: int = 10,
                        target_type: str = "pictorial",
                        scene_id: str = "") -> dict[str, ReplicateSet]:
    """n independent captures differing only in noise draws, bundled per stage.

    Replicate streams are spawned from the config seed, so the result is
    bit-identical for one (scene, cfg, n) regardless of scheduling.
    """
    if n < 2:
        raise ConfigError(f"replicate count must be >= 2, got {n}")
    streams = np.random.SeedSequence(cfg.seed).spawn(n)
    captures = [simulate_capture(scene, cfg, np.random.default_rng(s)) for s in streams]
    out = {}
    for stage in STAGES:
        prov = Provenance(target_type=target_type, scene_id=scene_id,
                          pipeline_id=cfg.kind, snr=cfg.snr, stage=stage)
        out[stage] = ReplicateSet(tuple(c.image(stage) for c in captures), prov)
    return out
