"""Contrast sensitivity models, display model, and image-to-visual frequency
conversion.

Two published parametric CSFs are provided. The luminance- and field-size-
aware model follows Barten's square-root-integral formulation:

    S(u) = a(u) * u * exp(-b*u) * sqrt(1 + c*exp(b*u))
    a(u) = 540 * (1 + 0.7/L)^-0.2 / (1 + 12 / (w * (1 + u/3)^2))
    b    = 0.3 * (1 + 100/L)^0.15,   c = 0.06

with L the adaptation luminance in cd/m^2 and w the angular field size in
degrees. The frequency-only model is the Movshon-style three-parameter fit
used for luminance filtering in color-difference workflows:

    S(u) = 75 * u^0.8 * exp(-0.2*u)

Contextual (masking-aware) sensitivity models are supported only through a
plug-in interface; none is built in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import DomainError
from .spectral import Spectrum1D

# Retinal internal-noise spectral density magnitude from Barten's physical
# model; default for the visual noise floor in the information metrics.
# Set to 0 to study the noise-free-observer limit.
DEFAULT_VISUAL_NOISE = 3e-8


@dataclass(frozen=True)
class ViewingEnvironment:
    """Display and geometry description joining image and visual frequencies."""

    distance_cm: float = 60.0
    pixel_pitch_mm: float = 0.27
    white_luminance: float = 120.0  # cd/m^2
    display_gamma: float = 2.2
    cutoff_cpd: float | None = None  # None: display Nyquist
    display_nps: Spectrum1D | None = None

    def __post_init__(self):
        if self.distance_cm <= 0 or self.pixel_pitch_mm <= 0:
            raise DomainError("viewing distance and pixel pitch must be positive")
        if self.white_luminance <= 0 or self.display_gamma <= 0:
            raise DomainError("luminance and display gamma must be positive")

    @property
    def pixels_per_degree(self) -> float:
        # one degree subtends 2*d*tan(0.5 deg) on the display plane
        return 2.0 * (self.distance_cm * 10.0) * math.tan(math.radians(0.5)) / self.pixel_pitch_mm

    @property
    def nyquist_cpd(self) -> float:
        return 0.5 * self.pixels_per_degree

    @property
    def u_max(self) -> float:
        return self.cutoff_cpd if self.cutoff_cpd is not None else self.nyquist_cpd

    def angular_size_deg(self, side_px: int) -> float:
        return side_px / self.pixels_per_degree

    def to_cpd(self, spectrum: Spectrum1D) -> Spectrum1D:
        """Relabel a cycles/pixel curve in cycles/degree."""
        if spectrum.unit == "cycles/degree":
            return spectrum
        return spectrum.scaled_frequencies(self.pixels_per_degree, "cycles/degree")


def cpd_from_cpp(u: float | np.ndarray, env: ViewingEnvironment) -> float | np.ndarray:
    """Convert cycles/pixel to cycles/degree under the viewing geometry."""
    return u * env.pixels_per_degree


def cpp_from_cpd(u: float | np.ndarray, env: ViewingEnvironment) -> float | np.ndarray:
    """Inverse conversion: cycles/degree back to cycles/pixel."""
    return u / env.pixels_per_degree


def sample_csf(csf, grid: np.ndarray, kind: str | None = None) -> Spectrum1D:
    """Evaluate a sensitivity function onto an exportable curve (cy/deg)."""
    grid = np.asarray(grid, dtype=np.float64)
    vals = np.asarray(csf(grid), dtype=np.float64)
    return Spectrum1D(grid, vals, unit="cycles/degree", normalization="sensitivity",
                      variant=kind or getattr(csf, "kind", None))


def _check_frequency(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise DomainError("spatial frequency must be non-negative")
    return u


def barten_csf(u, env: ViewingEnvironment, field_size_deg: float = 13.2):
    """Luminance CSF accounting for frequency, adaptation luminance and
    angular field size."""
    u = _check_frequency(u)
    lum = env.white_luminance
    b = 0.3 * (1.0 + 100.0 / lum) ** 0.15
    a = 540.0 * (1.0 + 0.7 / lum) ** -0.2 / (1.0 + 12.0 / (field_size_deg * (1.0 + u / 3.0) ** 2))
    # guard the exponential against overflow far beyond any visible frequency
    bu = np.minimum(b * u, 700.0)
    s = a * u * np.exp(-bu) * np.sqrt(1.0 + 0.06 * np.exp(bu))
    return s if s.ndim else float(s)


def jf_csf(u):
    """Frequency-only band-pass luminance CSF (three-parameter fit)."""
    u = _check_frequency(u)
    s = 75.0 * u ** 0.8 * np.exp(-0.2 * u)
    return s if s.ndim else float(s)


def display_mtf(u, env: ViewingEnvironment):
    """Full-pixel-aperture display MTF: |sinc| reaching 2/pi at Nyquist."""
    u = np.asarray(u, dtype=np.float64)
    m = np.abs(np.sinc(u / (2.0 * env.nyquist_cpd)))
    return m if m.ndim else float(m)


class SensitivityFunction(Protocol):
    """Anything mapping frequency in cycles/degree to sensitivity."""

    def __call__(self, u):
        ...


@dataclass(frozen=True)
class BartenCsf:
    """Callable Barten CSF bound to a viewing environment."""

    env: ViewingEnvironment
    field_size_deg: float = 13.2
    kind: str = "barten"

    def __call__(self, u):
        return barten_csf(u, self.env, self.field_size_deg)


@dataclass(frozen=True)
class JohnsonFairchildCsf:
    """Callable frequency-only luminance CSF."""

    kind: str = "johnson-fairchild"

    def __call__(self, u):
        return jf_csf(u)


@dataclass(frozen=True)
class ContextualCsf:
    """Plug-in contextual sensitivity: a user model of (u, scene power
    spectrum) bound to one scene's spectrum. No model ships built in."""

    model: Callable[[np.ndarray, Spectrum1D], np.ndarray]
    scene_ps: Spectrum1D
    kind: str = "contextual"

    def __call__(self, u):
        u = _check_frequency(u)
        return self.model(u, self.scene_ps)


def normalize_csf(csf: np.ndarray, reference: np.ndarray,
                  frequencies: np.ndarray) -> np.ndarray:
    """Scale a sampled CSF so its trapezoidal area matches the reference's."""
    csf = np.asarray(csf, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if csf.shape != reference.shape or csf.shape != np.shape(frequencies):
        raise DomainError("normalize_csf needs both CSFs sampled on one grid")
    area = np.trapezoid(csf, frequencies)
    ref_area = np.trapezoid(reference, frequencies)
    if area <= 0:
        raise DomainError("cannot normalize a zero-area CSF")
    return csf * (ref_area / area)


def normalized(csf: SensitivityFunction, reference: SensitivityFunction,
               grid: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap ``csf`` scaled so its area on ``grid`` equals the reference's."""
    grid = np.asarray(grid, dtype=np.float64)
    area = np.trapezoid(np.asarray(csf(grid), dtype=np.float64), grid)
    ref_area = np.trapezoid(np.asarray(reference(grid), dtype=np.float64), grid)
    if area <= 0:
        raise DomainError("cannot normalize a zero-area CSF")
    scale = ref_area / area

    def scaled(u):
        return np.asarray(csf(u), dtype=np.float64) * scale

    return scaled
