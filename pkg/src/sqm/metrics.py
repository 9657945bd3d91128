"""Perceptual quality metrics built on measured system spectra.

Five scores are provided: perceived information capacity (log-SNR integral),
square-root integral with noise, an acutance + visual-noise quality-loss
combination, and the log / visual-log noise-equivalent-quanta metrics.
All frequency integrals with du/u weighting run as trapezoids in ln u from
the first measured bin u1, which is reported with every score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, DomainError, ShapeMismatchError
from .spectral import NoiseImage, ReplicateSet, Spectrum1D, noise_images
from .sysperf import MtfCurve, NeqCurve
from .vision import DEFAULT_VISUAL_NOISE, ViewingEnvironment, display_mtf

NPS_VARIANTS = ("uniform-patch", "dead-leaves-spd", "pictorial-spd", "mean-pictorial-spd")
MTF_VARIANTS = ("direct-dead-leaves", "dead-leaves-spd", "pictorial-spd",
                "mean-pictorial-spd", "analytic")
CSF_CHOICES = ("barten", "johnson-fairchild", "contextual", "none")

# Quality loss at which the combined-score scale is anchored: the rating of
# the unprocessed input scenes on the ruler scale.
REFERENCE_SQS2 = 23.0

MINKOWSKI_C1 = 2.0
MINKOWSKI_C2 = 16.9


@dataclass(frozen=True)
class MetricCalibration:
    """Gain/offset mapping raw metric output onto the rating scale."""

    k1: float = 1.0
    k2: float = 0.0
    target_mean: float | None = None

    def __post_init__(self):
        if self.k1 <= 0:
            raise CalibrationError(f"calibration gain must be positive, got {self.k1}")

    def apply(self, raw: float) -> float:
        return self.k1 * raw + self.k2


@dataclass(frozen=True)
class VariantDescriptor:
    """Which measurement/CSF permutation produced a score."""

    nps_variant: str = "pictorial-spd"
    mtf_variant: str = "dead-leaves-spd"
    csf: str = "barten"
    pipeline: str = ""

    def __post_init__(self):
        if self.nps_variant not in NPS_VARIANTS:
            raise DomainError(f"unknown NPS variant {self.nps_variant!r}")
        if self.mtf_variant not in MTF_VARIANTS:
            raise DomainError(f"unknown MTF variant {self.mtf_variant!r}")
        if self.csf not in CSF_CHOICES:
            raise DomainError(f"unknown CSF choice {self.csf!r}")


@dataclass(frozen=True)
class MetricScore:
    metric: str
    score: float
    k1: float = 1.0
    k2: float = 0.0
    u1: float | None = None
    variant: VariantDescriptor | None = None


@dataclass(frozen=True)
class QualityLoss:
    """Per-attribute perceptual losses in JND units plus combination constants."""

    losses: tuple[float, ...]
    ql_max: float | None = None
    c1: float = MINKOWSKI_C1
    c2: float = MINKOWSKI_C2

    def __post_init__(self):
        object.__setattr__(self, "losses", tuple(float(x) for x in self.losses))
        if any(x < 0 for x in self.losses):
            raise DomainError("quality losses must be non-negative")

    @property
    def combined(self) -> float:
        return minkowski_combine(self.losses, self.ql_max, self.c1, self.c2)


@dataclass(frozen=True)
class DisplayedSpectra:
    """Signal and noise power as shown on the display, in cycles/degree."""

    frequencies: np.ndarray  # cycles/degree, strictly increasing
    signal: np.ndarray
    noise: np.ndarray
    u_max: float

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        s = np.asarray(self.signal, dtype=np.float64)
        n = np.asarray(self.noise, dtype=np.float64)
        if not (f.shape == s.shape == n.shape):
            raise ShapeMismatchError("displayed spectra arrays differ in length")
        if np.any(s < 0) or np.any(n < 0):
            raise DomainError("displayed spectra must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "noise", n)

    @property
    def u1(self) -> float:
        return float(self.frequencies[0])


def displayed_spectra(scene_ps: Spectrum1D, mtf: MtfCurve, nps: Spectrum1D,
                      env: ViewingEnvironment,
                      inverse_display_on_signal: bool = False) -> DisplayedSpectra:
    """Push scene power and system noise through the display model.

    signal = PS_scene * MTF^2 * gamma^2 * MTF_disp^2
    noise  = NPS * gamma^2 * MTF_disp^2 + NPS_disp

    ``inverse_display_on_signal`` divides the signal by MTF_disp^2 instead,
    for comparison against the alternative reading of the signal path.
    """
    if not (scene_ps.same_grid(mtf.spectrum) and scene_ps.same_grid(nps)):
        raise ShapeMismatchError("scene PS, MTF and NPS must share a frequency grid")
    f_cpd = (scene_ps.frequencies if scene_ps.unit == "cycles/degree"
             else scene_ps.frequencies * env.pixels_per_degree)
    md2 = display_mtf(f_cpd, env) ** 2
    g2 = env.display_gamma ** 2
    sig = scene_ps.values * mtf.values ** 2 * g2
    sig = sig / np.maximum(md2, 1e-300) if inverse_display_on_signal else sig * md2
    noi = nps.values * g2 * md2
    if env.display_nps is not None:
        noi = noi + env.display_nps.resampled(f_cpd).values
    return DisplayedSpectra(f_cpd, sig, noi, u_max=env.u_max)


def _ln_trapezoid(u: np.ndarray, y: np.ndarray, u_max: float) -> float:
    """Trapezoid of y d(ln u) over [u[0], u_max], interpolating the last panel."""
    if u_max <= u[0]:
        return 0.0
    inside = u <= u_max
    uu, yy = u[inside], y[inside]
    if uu[-1] < u_max and inside.sum() < u.size:
        j = inside.sum()  # first index beyond u_max
        x0, x1 = math.log(u[j - 1]), math.log(u[j])
        t = (math.log(u_max) - x0) / (x1 - x0)
        uu = np.append(uu, u_max)
        yy = np.append(yy, y[j - 1] + t * (y[j] - y[j - 1]))
    return float(np.trapezoid(yy, np.log(uu)))


def _snr_ratio(ds: DisplayedSpectra, csf, nps_visual: float) -> np.ndarray:
    """SNR integrand over the bins the integral will touch (u <= u_max plus
    the interpolation neighbor)."""
    n_used = int(np.count_nonzero(ds.frequencies <= ds.u_max))
    n_used = min(n_used + 1, ds.frequencies.size)
    u = ds.frequencies[:n_used]
    csf_vals = np.asarray(csf(u), dtype=np.float64)
    denom = ds.noise[:n_used] * csf_vals ** 2 + nps_visual
    if np.any(denom <= 0):
        raise DomainError("filtered noise plus visual noise vanishes on a used bin")
    return ds.signal[:n_used] * csf_vals ** 2 / denom


def pic(ds: DisplayedSpectra, csf, nps_visual: float = DEFAULT_VISUAL_NOISE,
        cal: MetricCalibration = MetricCalibration(),
        variant: VariantDescriptor | None = None) -> MetricScore:
    """Perceived information capacity: k1 * sqrt(int ln(1 + SNR(u)) du/u) + k2."""
    ratio = _snr_ratio(ds, csf, nps_visual)
    integrand = np.log1p(ratio)
    val = _ln_trapezoid(ds.frequencies[:ratio.size], integrand, ds.u_max)
    return MetricScore("pic", cal.apply(math.sqrt(val)), cal.k1, cal.k2,
                       u1=ds.u1, variant=variant)


def sqrin(ds: DisplayedSpectra, csf, nps_visual: float = DEFAULT_VISUAL_NOISE,
          cal: MetricCalibration = MetricCalibration(),
          variant: VariantDescriptor | None = None) -> MetricScore:
    """Square-root integral with noise: k1/ln2 * int SNR(u)^0.25 du/u + k2."""
    ratio = _snr_ratio(ds, csf, nps_visual)
    integrand = ratio ** 0.25
    val = _ln_trapezoid(ds.frequencies[:ratio.size], integrand, ds.u_max) / math.log(2.0)
    return MetricScore("sqrin", cal.apply(val), cal.k1, cal.k2,
                       u1=ds.u1, variant=variant)


def csf_area(csf, upper: float = 80.0, points: int = 8001) -> float:
    """Trapezoidal area of a CSF on [0, upper]; the tail past 80 cy/deg is
    below 0.1% for the built-in models."""
    grid = np.linspace(0.0, upper, points)
    area = float(np.trapezoid(np.asarray(csf(grid), dtype=np.float64), grid))
    if area <= 0:
        raise DomainError("CSF area must be positive")
    return area


def acutance(mtf_system: MtfCurve, env: ViewingEnvironment, csf,
             u_max: float | None = None) -> float:
    """CSF-weighted fraction of ideal transfer:

    Q_T = int_0^{u_max} MTF_sys * MTF_disp * CSF du / int_0^inf CSF du
    """
    u = mtf_system.frequencies
    if mtf_system.spectrum.unit != "cycles/degree":
        u = u * env.pixels_per_degree
    u_max = env.u_max if u_max is None else u_max
    csf_vals = np.asarray(csf(u), dtype=np.float64)
    integrand = mtf_system.values * display_mtf(u, env) * csf_vals
    # close the panel down to DC; both built-in CSFs vanish there
    u_full = np.concatenate(([0.0], u))
    y_full = np.concatenate(([float(csf(0.0)) * mtf_system.values[0]], integrand))
    inside = u_full <= u_max
    uu, yy = u_full[inside], y_full[inside]
    if uu[-1] < u_max and inside.sum() < u_full.size:
        j = inside.sum()
        t = (u_max - u_full[j - 1]) / (u_full[j] - u_full[j - 1])
        uu = np.append(uu, u_max)
        yy = np.append(yy, y_full[j - 1] + t * (y_full[j] - y_full[j - 1]))
    num = float(np.trapezoid(yy, uu))
    return num / csf_area(csf)


def texture_quality_loss(mtf_system: MtfCurve, env: ViewingEnvironment, csf,
                         mapping=None) -> float:
    """Acutance deficit against a transparent capture system, mapped to JNDs.

    The default mapping is the identity; rank statistics stay meaningful
    either way, absolute JND scaling requires a fitted mapping.
    """
    ideal = MtfCurve(Spectrum1D(mtf_system.frequencies,
                                np.ones_like(mtf_system.values),
                                unit=mtf_system.spectrum.unit,
                                normalization="transfer", variant="analytic"),
                     variant="analytic")
    deficit = max(0.0, acutance(ideal, env, csf) - acutance(mtf_system, env, csf))
    return mapping(deficit) if mapping is not None else deficit


def _lightness(y: np.ndarray) -> np.ndarray:
    """CIE L* of relative luminance (white point scaled to 1)."""
    y = np.clip(y, 0.0, None)
    thresh = (6.0 / 29.0) ** 3
    f = np.where(y > thresh, np.cbrt(y), y / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    return 116.0 * f - 16.0


def visual_noise_omega(noise: NoiseImage | ReplicateSet, env: ViewingEnvironment,
                       csf_lum, mean_level: float | None = None,
                       w_l: float = 1.0, highpass_rings: int = 2,
                       unit_peak_filter: bool = True) -> float:
    """Scalar visual noise: CSF-and-display filtered noise field variance in
    lightness units, log-compressed.

    omega = w_l * log10(1 + var(L*))

    The filter is CSF_lum(u) * MTF_disp(u) * highpass(u) applied in the
    frequency domain; the high-pass zeroes the lowest ``highpass_rings``
    radial bins. Chromatic channels are an extension point, the default
    path is luminance-only.
    """
    if isinstance(noise, ReplicateSet):
        noise.replicates[0].require_linear("visual_noise_omega")
        if mean_level is None:
            mean_level = float(np.mean(noise.mean_image().data))
        fields = noise_images(noise)
    else:
        fields = [noise]
        if mean_level is None:
            mean_level = 0.5

    first = fields[0].data
    h, w = first.shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    r_cpp = np.hypot(fy, fx)
    r_cpd = r_cpp * env.pixels_per_degree
    csf_vals = np.asarray(csf_lum(r_cpd.ravel()), dtype=np.float64).reshape(r_cpd.shape)
    if unit_peak_filter:
        peak = csf_vals.max()
        if peak > 0:
            csf_vals = csf_vals / peak
    filt = csf_vals * display_mtf(r_cpd, env)
    ring = 1.0 / max(h, w)
    filt[r_cpp < highpass_rings * ring] = 0.0

    variances = []
    for ni in fields:
        if ni.data.shape != (h, w):
            raise ShapeMismatchError("noise fields differ in shape")
        filtered = np.fft.ifft2(np.fft.fft2(ni.data) * filt).real
        lstar = _lightness(mean_level + filtered)
        variances.append(float(np.var(lstar)))
    var = float(np.mean(variances))
    n = fields[0].n_replicates if isinstance(fields[0], NoiseImage) else len(fields)
    if getattr(fields[0], "bias_correct", False) and n >= 2:
        var *= n / (n - 1)
    return w_l * math.log10(1.0 + var)


def minkowski_combine(losses, ql_max: float | None = None,
                      c1: float = MINKOWSKI_C1, c2: float = MINKOWSKI_C2) -> float:
    """Pool attribute quality losses: (sum QL_i^n)^(1/n) with
    n = 1 + c1*tanh(QL_max/c2)."""
    arr = np.asarray(losses, dtype=np.float64)
    if np.any(arr < 0):
        raise DomainError("quality losses must be non-negative")
    if ql_max is None:
        ql_max = float(arr.max()) if arr.size else 0.0
    if ql_max < 0:
        raise DomainError("maximum quality loss must be non-negative")
    n = 1.0 + c1 * math.tanh(ql_max / c2)
    if not arr.size:
        return 0.0
    return float(np.sum(arr ** n) ** (1.0 / n))


def cpiq_score(texture_ql: float, noise_ql: float, ql_max: float | None = None,
               reference: float = REFERENCE_SQS2,
               variant: VariantDescriptor | None = None) -> MetricScore:
    """Combined-loss score: reference rating minus the pooled quality loss."""
    combined = minkowski_combine([texture_ql, noise_ql], ql_max)
    return MetricScore("cpiq", reference - combined, variant=variant)


def _neq_integral(neq: NeqCurve, env: ViewingEnvironment, weight_csf=None,
                  u_max: float | None = None) -> tuple[float, float]:
    u = neq.frequencies
    if neq.spectrum.unit != "cycles/degree":
        u = u * env.pixels_per_degree
    if u.size == 0:
        raise DomainError("NEQ curve has no usable bins")
    integrand = display_mtf(u, env) ** 2 * neq.values
    if weight_csf is not None:
        integrand = integrand * np.asarray(weight_csf(u), dtype=np.float64) ** 2
    u_max = env.u_max if u_max is None else u_max
    return _ln_trapezoid(u, integrand, u_max), float(u[0])


def log_neq(neq: NeqCurve, env: ViewingEnvironment,
            cal: MetricCalibration = MetricCalibration(),
            u_max: float | None = None,
            variant: VariantDescriptor | None = None) -> MetricScore:
    """k1 * log10( int MTF_disp^2 NEQ du/u ) + k2."""
    integral, u1 = _neq_integral(neq, env, None, u_max)
    if integral <= 0:
        raise DomainError("NEQ integral is non-positive; degenerate system")
    return MetricScore("log-neq", cal.apply(math.log10(integral)), cal.k1, cal.k2,
                       u1=u1, variant=variant)


def visual_log_neq(neq: NeqCurve, env: ViewingEnvironment, csf,
                   cal: MetricCalibration = MetricCalibration(),
                   u_max: float | None = None,
                   variant: VariantDescriptor | None = None) -> MetricScore:
    """k1 * log10( int CSF^2 MTF_disp^2 NEQ du/u ) + k2."""
    integral, u1 = _neq_integral(neq, env, csf, u_max)
    if integral <= 0:
        raise DomainError("weighted NEQ integral is non-positive")
    return MetricScore("visual-log-neq", cal.apply(math.log10(integral)),
                       cal.k1, cal.k2, u1=u1, variant=variant)


def calibrate_k1(raw_scores, target_mean: float) -> MetricCalibration:
    """Gain so the mean raw score at the reference condition hits the target.

    Raw scores must have been produced with k1 = 1, k2 = 0.
    """
    arr = np.asarray(list(raw_scores), dtype=np.float64)
    if arr.size == 0:
        raise CalibrationError("no raw scores to calibrate against")
    mean = float(arr.mean())
    if mean == 0.0:
        raise CalibrationError("raw score mean is zero; cannot scale")
    k1 = target_mean / mean
    if k1 <= 0:
        raise CalibrationError(
            f"calibration gain {k1:.4g} not positive; raw scores and target disagree in sign")
    return MetricCalibration(k1=k1, k2=0.0, target_mean=target_mean)
