"""Discrete Fourier power spectra, rotational averaging, and replicate-based
noise measures.

Normalization: a 2D power spectrum is |DFT|^2 / (M*N), so the bins of a
white-noise field of variance sigma^2 average to sigma^2 and Parseval reads
sum(bins) = M*N*mean(image^2). Windowed estimates are additionally divided
by the window's mean squared weight to keep that calibration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DimensionError, ShapeMismatchError, UsageError)
from .image import PlanarImage, WindowSpec, to_luminance, window_power_gain, window_weights

POWER_NORM = "dft2/mn"

# NPS variant tags (noise measure parameter table)
NPS_UNIFORM = "uniform-patch"
NPS_DEAD_LEAVES = "dead-leaves-spd"
NPS_PICTORIAL = "pictorial-spd"
NPS_MEAN_PICTORIAL = "mean-pictorial-spd"

_TARGET_FOR_VARIANT = {
    NPS_UNIFORM: "uniform",
    NPS_DEAD_LEAVES: "dead-leaves",
    NPS_PICTORIAL: "pictorial",
}


@dataclass(frozen=True)
class Spectrum2D:
    """Power per 2D frequency bin; axes in cycles/pixel, range (-0.5, 0.5]."""

    values: np.ndarray
    u: np.ndarray
    v: np.ndarray
    normalization: str = POWER_NORM

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if np.any(vals < 0):
            raise ValueError("power spectrum contains negative bins")
        object.__setattr__(self, "values", vals)

    @property
    def radius(self) -> np.ndarray:
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        return np.hypot(uu, vv)


@dataclass(frozen=True)
class Spectrum1D:
    """Values against strictly increasing spatial frequency, DC excluded.

    ``weights`` carries annulus sample counts when the curve came from a
    rotational average; it is what power-weighted integrals should use.
    """

    frequencies: np.ndarray
    values: np.ndarray
    unit: str = "cycles/pixel"
    normalization: str = POWER_NORM
    variant: str | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if f.shape != v.shape:
            raise ShapeMismatchError("frequency and value arrays differ in length")
        if f.size and (np.any(np.diff(f) <= 0) or f[0] <= 0):
            raise ValueError("frequencies must be strictly increasing and positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite spectrum values")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != f.shape:
                raise ShapeMismatchError("weights length differs from frequencies")
            object.__setattr__(self, "weights", w)

    def same_grid(self, other: "Spectrum1D", tol: float = 1e-12) -> bool:
        return (self.frequencies.shape == other.frequencies.shape
                and np.allclose(self.frequencies, other.frequencies, atol=tol, rtol=0))

    def resampled(self, frequencies: np.ndarray) -> "Spectrum1D":
        vals = np.interp(frequencies, self.frequencies, self.values)
        return Spectrum1D(frequencies, vals, unit=self.unit,
                          normalization=self.normalization, variant=self.variant)

    def scaled_frequencies(self, factor: float, unit: str) -> "Spectrum1D":
        return Spectrum1D(self.frequencies * factor, self.values, unit=unit,
                          normalization=self.normalization, variant=self.variant,
                          weights=self.weights)


@dataclass(frozen=True)
class Provenance:
    """Where a replicate set came from; drives NPS/MTF variant tagging."""

    target_type: str  # uniform | dead-leaves | pictorial
    scene_id: str = ""
    pipeline_id: str = ""
    snr: float | None = None
    stage: str | None = None


@dataclass(frozen=True)
class ReplicateSet:
    """Ordered captures of the same scene differing only in noise draws."""

    replicates: tuple[PlanarImage, ...]
    provenance: Provenance

    def __post_init__(self):
        reps = tuple(self.replicates)
        if len(reps) < 2:
            raise UsageError("a replicate set needs n >= 2 captures")
        h, w, c = reps[0].height, reps[0].width, reps[0].channels
        enc = reps[0].encoding
        for r in reps[1:]:
            if (r.height, r.width, r.channels) != (h, w, c):
                raise ShapeMismatchError("replicates differ in dimensions")
            if r.encoding != enc:
                raise ShapeMismatchError("replicates differ in encoding")
        object.__setattr__(self, "replicates", reps)

    @property
    def n(self) -> int:
        return len(self.replicates)

    def mean_image(self) -> PlanarImage:
        acc = np.mean([r.data for r in self.replicates], axis=0)
        return self.replicates[0].with_data(acc)


@dataclass(frozen=True)
class NoiseImage:
    """Signed intensity differences g_k - mean(g); spatial mean removed."""

    data: np.ndarray
    n_replicates: int
    bias_correct: bool = True

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64))


def power_spectrum_2d(img: PlanarImage, subtract_mean: bool = True) -> Spectrum2D:
    """|DFT|^2 / (M*N) of a 1-channel linear image.

    The DC bin is reported (zero when the mean is subtracted) but excluded
    from every downstream average.
    """
    img.require_linear("power_spectrum_2d")
    if img.channels != 1:
        raise DimensionError("power_spectrum_2d expects a 1-channel image")
    img.require_min_size(8)
    data = img.data - img.data.mean() if subtract_mean else img.data
    h, w = data.shape
    p = np.abs(np.fft.fft2(data)) ** 2 / (h * w)
    return Spectrum2D(p, _freq_axis(h), _freq_axis(w))


def _freq_axis(n: int) -> np.ndarray:
    f = np.fft.fftfreq(n)
    # report the Nyquist bin as +0.5 so axes live in (-0.5, 0.5]
    f[f == -0.5] = 0.5
    return f


def rotational_average(sp: Spectrum2D, bins: int = 64) -> Spectrum1D:
    """Annular mean over radial frequency r = sqrt(u^2 + v^2).

    Bin width is 0.5/bins cycles/pixel; DC is excluded; empty annuli are
    dropped; frequencies sit at annulus centers.
    """
    if bins < 4:
        raise UsageError(f"need at least 4 radial bins, got {bins}")
    r = sp.radius.ravel()
    p = sp.values.ravel()
    width = 0.5 / bins
    idx = np.floor(r / width).astype(np.int64)
    idx[r >= 0.5] = bins - 1  # the exact Nyquist ring joins the last annulus
    keep = (r > 0) & (r <= 0.5)  # drop DC and the r > 0.5 corners
    sums = np.bincount(idx[keep], weights=p[keep], minlength=bins)
    counts = np.bincount(idx[keep], minlength=bins)
    nonempty = counts > 0
    centers = (np.arange(bins) + 0.5) * width
    return Spectrum1D(centers[nonempty], sums[nonempty] / counts[nonempty],
                      unit="cycles/pixel", normalization=sp.normalization,
                      weights=counts[nonempty].astype(np.float64))


def noise_images(reps: ReplicateSet, bias_correct: bool = True) -> list[NoiseImage]:
    """Per-replicate luminance noise images I_k = g_k - mean(g).

    Each image also has its residual spatial mean removed, so the zero-mean
    invariant holds exactly; the consuming NPS estimate applies the
    n/(n-1) small-sample correction when ``bias_correct`` is set.
    """
    lum = [to_luminance(r).data for r in reps.replicates]
    gbar = np.mean(lum, axis=0)
    out = []
    for g in lum:
        i = g - gbar
        i -= i.mean()
        out.append(NoiseImage(i, n_replicates=reps.n, bias_correct=bias_correct))
    return out


def windowed_power_spectrum(data: np.ndarray, taper: float, pedestal: float | None = None,
                            subtract_mean: bool = True) -> Spectrum2D:
    """Power spectrum of a windowed field, compensated by the window's
    mean squared weight so absolute power stays calibrated."""
    h, w = data.shape
    if h < 8 or w < 8:
        raise DimensionError(f"image {w}x{h} below the 8x8 minimum")
    ped = float(data.mean()) if pedestal is None else pedestal
    wts = window_weights(h, w, taper)
    faded = ped + wts * (data - ped)
    if subtract_mean:
        faded = faded - faded.mean()
    gain = window_power_gain(h, w, taper)
    p = np.abs(np.fft.fft2(faded)) ** 2 / (h * w) / gain
    return Spectrum2D(p, _freq_axis(h), _freq_axis(w))


def measure_nps(reps: ReplicateSet, variant: str,
                window_spec: WindowSpec = WindowSpec(),
                bins: int = 64, bias_correct: bool = True) -> Spectrum1D:
    """Scene-and-process-dependent NPS of a replicate set.

    Noise images are windowed (pedestal 0), transformed, rotationally
    averaged, then averaged over replicates with the n/(n-1) correction.
    The replicate provenance must match the requested variant: the variants
    differ only by their input target.
    """
    expected = _TARGET_FOR_VARIANT.get(variant)
    if expected is None:
        raise UsageError(f"unknown NPS variant {variant!r}")
    if reps.provenance.target_type != expected:
        raise UsageError(
            f"variant {variant!r} needs {expected!r} replicates, "
            f"got {reps.provenance.target_type!r}")

    imgs = noise_images(reps, bias_correct=bias_correct)
    acc = None
    for ni in imgs:
        sp = windowed_power_spectrum(ni.data, window_spec.taper, pedestal=0.0)
        acc = sp.values if acc is None else acc + sp.values
    mean_p = acc / reps.n
    if bias_correct:
        mean_p = mean_p * reps.n / (reps.n - 1)
    sp2 = Spectrum2D(mean_p, _freq_axis(reps.replicates[0].height),
                     _freq_axis(reps.replicates[0].width))
    curve = rotational_average(sp2, bins=bins)
    return Spectrum1D(curve.frequencies, curve.values, unit=curve.unit,
                      normalization=curve.normalization, variant=variant,
                      weights=curve.weights)


def scene_power_spectrum(img: PlanarImage, window_spec: WindowSpec = WindowSpec(),
                         bins: int = 64, variant: str | None = None) -> Spectrum1D:
    """Windowed 1D power spectrum of a scene or target (luminance)."""
    lum = to_luminance(img)
    lum.require_min_size(8)
    sp = windowed_power_spectrum(lum.data, window_spec.taper, pedestal=None)
    curve = rotational_average(sp, bins=bins)
    return Spectrum1D(curve.frequencies, curve.values, unit=curve.unit,
                      normalization=curve.normalization, variant=variant,
                      weights=curve.weights)


def mean_curves(curves: list[Spectrum1D], variant: str | None = None) -> Spectrum1D:
    """Pointwise arithmetic mean, resampling onto the first curve's grid
    when the grids differ."""
    if not curves:
        raise UsageError("cannot average an empty list of curves")
    base = curves[0]
    vals = [base.values]
    for c in curves[1:]:
        vals.append(c.values if c.same_grid(base) else c.resampled(base.frequencies).values)
    mean_v = np.mean(vals, axis=0)
    return Spectrum1D(base.frequencies, mean_v, unit=base.unit,
                      normalization=base.normalization,
                      variant=variant or base.variant, weights=base.weights)


def mean_pictorial_nps(curves: list[Spectrum1D]) -> Spectrum1D:
    """Average of pictorial-image SPD-NPS curves over a scene set."""
    return mean_curves(curves, variant=NPS_MEAN_PICTORIAL)


def integrated_power(curve: Spectrum1D) -> float:
    """Annulus-weighted mean of a power curve: the variance estimate its
    2D spectrum implies (DC excluded)."""
    if curve.weights is None:
        return float(np.mean(curve.values))
    return float(np.sum(curve.values * curve.weights) / np.sum(curve.weights))


# ---------------------------------------------------------------------------
# Curve serialization: CSV with the fixed header, JSON mirror
# ---------------------------------------------------------------------------

CURVE_CSV_HEADER = ["frequency_cpp", "value", "unit", "variant", "normalization"]


def write_curve_csv(curve: Spectrum1D, path: str | Path,
                    extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_CSV_HEADER + sorted(extra))
        for f, v in zip(curve.frequencies, curve.values):
            row = [repr(float(f)), repr(float(v)), curve.unit,
                   curve.variant or "", curve.normalization]
            row += [repr(extra[k]) if isinstance(extra[k], float) else str(extra[k])
                    for k in sorted(extra)]
            w.writerow(row)


def read_curve_csv(path: str | Path) -> Spectrum1D:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: empty curve file")
    f = np.array([float(r["frequency_cpp"]) for r in rows])
    v = np.array([float(r["value"]) for r in rows])
    first = rows[0]
    return Spectrum1D(f, v, unit=first["unit"],
                      normalization=first["normalization"],
                      variant=first["variant"] or None)


def write_curve_json(curve: Spectrum1D, path: str | Path,
                     extra: dict | None = None) -> None:
    doc = {
        "frequency_cpp": [float(x) for x in curve.frequencies],
        "value": [float(x) for x in curve.values],
        "unit": curve.unit,
        "variant": curve.variant,
        "normalization": curve.normalization,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_curve_json(path: str | Path) -> Spectrum1D:
    doc = json.loads(Path(path).read_text())
    return Spectrum1D(np.asarray(doc["frequency_cpp"], dtype=np.float64),
                      np.asarray(doc["value"], dtype=np.float64),
                      unit=doc["unit"], normalization=doc["normalization"],
                      variant=doc.get("variant"))
