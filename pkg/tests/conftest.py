import numpy as np
import pytest

from sqm.image import PlanarImage
from sqm.spectral import Spectrum1D
from sqm.vision import ViewingEnvironment


@pytest.fixture
def env():
    return ViewingEnvironment()


@pytest.fixture
def far_env():
    # Nyquist so high the display MTF is 1 to machine precision over any
    # measured band; used by identity-display algebra tests
    return ViewingEnvironment(distance_cm=1e9, display_gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def flat_spectrum(value: float, n: int = 32, lo: float = 0.01, hi: float = 0.45,
                  unit: str = "cycles/pixel", variant: str | None = None) -> Spectrum1D:
    f = np.linspace(lo, hi, n)
    return Spectrum1D(f, np.full(n, float(value)), unit=unit, variant=variant)


def gray_image(value: float, size: int = 32, channels: int = 1) -> PlanarImage:
    shape = (size, size) if channels == 1 else (size, size, 3)
    return PlanarImage(np.full(shape, float(value)))
