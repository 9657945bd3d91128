"""Image containers, luminance conversion, scene preparation, windowing and raster I/O.

All processing happens in linear relative intensity, working range [0, 1]
(values may transiently exceed it inside filters). Images are immutable:
the backing array is marked read-only and every operation returns a new
:class:`PlanarImage`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as _PILImage

from .errors import DimensionError, EncodingError, ShapeMismatchError

# Rec.709 / sRGB primaries: relative luminance weights for linear RGB.
LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])

SQMRAW_MAGIC = b"SQMR"


@dataclass(frozen=True)
class PlanarImage:
    """Single- or tri-channel floating point raster.

    ``data`` is (H, W) for one channel or (H, W, 3) for color, float64.
    ``encoding`` is ``"linear"`` or ``"srgb"``; spectral and simulator
    operations require linear input.
    """

    data: np.ndarray
    encoding: str = "linear"
    bit_depth: int | None = None
    pixel_pitch_mm: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise DimensionError(f"expected (H, W) or (H, W, 3) samples, got {arr.shape}")
        if self.encoding not in ("linear", "srgb"):
            raise EncodingError(f"unknown encoding tag {self.encoding!r}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def with_data(self, data: np.ndarray, **meta) -> "PlanarImage":
        """New image with replaced samples, inheriting metadata."""
        kw = dict(encoding=self.encoding, bit_depth=self.bit_depth,
                  pixel_pitch_mm=self.pixel_pitch_mm)
        kw.update(meta)
        return PlanarImage(data, **kw)

    def require_linear(self, op: str) -> None:
        if self.encoding != "linear":
            raise EncodingError(f"{op} requires linear-encoded input, got {self.encoding!r}")

    def require_min_size(self, n: int = 8) -> None:
        if self.width < n or self.height < n:
            raise DimensionError(f"image {self.width}x{self.height} below the {n}x{n} minimum")


@dataclass(frozen=True)
class WindowSpec:
    """Separable raised-cosine (Tukey) edge fade.

    ``taper`` is the fraction of each edge that ramps; ``pedestal`` is the
    value the edges fade toward (None selects the image mean at apply time).
    """

    taper: float = 0.125
    pedestal: float | None = None

    def __post_init__(self):
        if not 0.0 < self.taper <= 0.5:
            raise ValueError(f"taper fraction must be in (0, 0.5], got {self.taper}")
        if self.pedestal is not None and not 0.0 <= self.pedestal <= 1.0:
            raise ValueError(f"pedestal must lie in [0, 1], got {self.pedestal}")


def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1 / 2.4) - 0.055)


def to_luminance(img: PlanarImage) -> PlanarImage:
    """Collapse linear RGB to relative luminance; identity on 1-channel input."""
    img.require_linear("to_luminance")
    if img.channels == 1:
        return img
    y = img.data @ LUMA_WEIGHTS
    return img.with_data(y)


def prepare_scene(img: PlanarImage, side: int, intermediate: int | None = None) -> PlanarImage:
    """Bicubic-downsize so the short dimension equals ``intermediate or side``,
    then center-crop to ``side`` x ``side``."""
    target_short = intermediate or side
    if target_short < side:
        raise DimensionError(f"intermediate {target_short} smaller than crop side {side}")
    if min(img.width, img.height) < side:
        raise DimensionError(
            f"image {img.width}x{img.height} cannot yield a {side}x{side} crop")

    data = img.data
    short = min(img.width, img.height)
    if short > target_short:
        scale = target_short / short
        new_w = max(side, int(round(img.width * scale)))
        new_h = max(side, int(round(img.height * scale)))
        data = _resize_bicubic(data, new_w, new_h)

    h, w = data.shape[:2]
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    data = data[y0:y0 + side, x0:x0 + side]
    return img.with_data(data)


def _resize_bicubic(data: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Per-channel Pillow bicubic resize on float32 planes."""
    def one(plane):
        im = _PILImage.fromarray(plane.astype(np.float32), mode="F")
        return np.asarray(im.resize((new_w, new_h), _PILImage.BICUBIC), dtype=np.float64)

    if data.ndim == 2:
        return one(data)
    return np.stack([one(data[:, :, c]) for c in range(data.shape[2])], axis=2)


def window_weights(height: int, width: int, taper: float) -> np.ndarray:
    """Separable Tukey weight field: 0 at the border, 1 on the interior plateau."""
    def axis(n):
        t = max(1, int(round(taper * n)))
        w = np.ones(n)
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(t) / t))
        w[:t] = ramp
        w[-t:] = ramp[::-1]
        return w

    return np.outer(axis(height), axis(width))


def window_power_gain(height: int, width: int, taper: float) -> float:
    """Mean squared window weight; divides windowed power spectra so white
    noise keeps its calibrated level."""
    w = window_weights(height, width, taper)
    return float(np.mean(w * w))


def window(img: PlanarImage, spec: WindowSpec) -> PlanarImage:
    """Fade the image edges toward the pedestal with a separable Tukey ramp."""
    img.require_linear("window")
    if img.channels != 1:
        raise DimensionError("window expects a 1-channel image")
    pedestal = float(img.data.mean()) if spec.pedestal is None else spec.pedestal
    w = window_weights(img.height, img.width, spec.taper)
    out = pedestal + w * (img.data - pedestal)
    return img.with_data(out)


# ---------------------------------------------------------------------------
# Raster I/O
# ---------------------------------------------------------------------------

def write_sqmraw(img: PlanarImage, path: str | Path) -> None:
    """Raw float32 planar dump: magic, u32 w/h/c, little-endian samples.

    Lossless at float32, so replicate sets round-trip bit-exactly.
    """
    path = Path(path)
    c = img.channels
    planes = img.data[None, :, :] if c == 1 else np.moveaxis(img.data, 2, 0)
    with open(path, "wb") as fh:
        fh.write(SQMRAW_MAGIC)
        fh.write(struct.pack("<III", img.width, img.height, c))
        fh.write(np.ascontiguousarray(planes, dtype="<f4").tobytes())


def read_sqmraw(path: str | Path) -> PlanarImage:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SQMRAW_MAGIC:
            raise ShapeMismatchError(f"{path}: bad magic {magic!r}")
        w, h, c = struct.unpack("<III", fh.read(12))
        if c not in (1, 3):
            raise DimensionError(f"{path}: channel count {c} not in {{1, 3}}")
        n = w * h * c
        buf = np.frombuffer(fh.read(4 * n), dtype="<f4")
        if buf.size != n:
            raise ShapeMismatchError(f"{path}: truncated payload")
    planes = buf.reshape(c, h, w)
    data = planes[0] if c == 1 else np.moveaxis(planes, 0, 2)
    return PlanarImage(data, encoding="linear", bit_depth=None)


def load_raster(path: str | Path, assume_linear: bool = False) -> PlanarImage:
    """Load 8/16-bit PNG/TIFF (or .sqmraw) scaled to [0, 1].

    File images are treated as sRGB-encoded and linearized unless
    ``assume_linear`` is set.
    """
    path = Path(path)
    if path.suffix.lower() == ".sqmraw":
        return read_sqmraw(path)
    im = _PILImage.open(path)
    if im.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(im, dtype=np.float64) / 65535.0
        depth = 16
    else:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB") if ("A" in im.mode or im.mode == "P") else im.convert("L")
        arr = np.asarray(im, dtype=np.float64) / 255.0
        depth = 8
    if arr.ndim == 3 and arr.shape[2] > 3:
        arr = arr[:, :, :3]
    if assume_linear:
        return PlanarImage(arr, encoding="linear", bit_depth=depth)
    return PlanarImage(srgb_to_linear(arr), encoding="linear", bit_depth=depth)


def save_raster(img: PlanarImage, path: str | Path, bit_depth: int = 8) -> None:
    """Write PNG/TIFF with sRGB encoding applied, or .sqmraw untouched."""
    path = Path(path)
    if path.suffix.lower() == ".sqmraw":
        write_sqmraw(img, path)
        return
    data = img.data if img.encoding == "srgb" else linear_to_srgb(img.data)
    if bit_depth == 16:
        if img.channels != 1:
            raise EncodingError("16-bit save supports 1-channel images only")
        arr = np.clip(np.round(data * 65535.0), 0, 65535).astype(np.uint16)
        _PILImage.fromarray(arr).save(path)
    else:
        arr = np.clip(np.round(data * 255.0), 0, 255).astype(np.uint8)
        _PILImage.fromarray(arr).save(path)
