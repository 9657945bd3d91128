"""MTF measurement from power-spectrum pairs and NEQ computation.

The direct method divides noise-subtracted output power by input power and
takes the square root. Which named measure results depends on the inputs:
a dead-leaves pair with a uniform-patch NPS gives the classic direct
measure, scene-derived pairs with matching replicate-based NPS give the
scene-and-process-dependent ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import DegenerateInputError, DomainError, ShapeMismatchError, UsageError
from .image import PlanarImage, WindowSpec, to_luminance
from .spectral import ReplicateSet, Spectrum1D

# MTF variant tags (resolution measure parameter table)
MTF_DIRECT_DEAD_LEAVES = "direct-dead-leaves"
MTF_DEAD_LEAVES = "dead-leaves-spd"
MTF_PICTORIAL = "pictorial-spd"
MTF_MEAN_PICTORIAL = "mean-pictorial-spd"
MTF_ANALYTIC = "analytic"

_VARIANT_TABLE = {
    ("dead-leaves", spectral.NPS_UNIFORM): MTF_DIRECT_DEAD_LEAVES,
    ("dead-leaves", spectral.NPS_DEAD_LEAVES): MTF_DEAD_LEAVES,
    ("pictorial", spectral.NPS_PICTORIAL): MTF_PICTORIAL,
}


@dataclass(frozen=True)
class MtfCurve:
    """Dimensionless transfer magnitude; sharpening may push values above 1."""

    spectrum: Spectrum1D
    variant: str
    clamp_count: int = 0

    def __post_init__(self):
        v = self.spectrum.values
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("MTF values must be finite and non-negative")
        low = float(np.mean(v[:3])) if v.size >= 3 else float(np.mean(v))
        if not 0.5 <= low <= 1.5:
            warnings.warn(
                f"MTF low-frequency limit {low:.3f} outside [0.5, 1.5]; "
                "check input spectra", stacklevel=2)

    @property
    def frequencies(self) -> np.ndarray:
        return self.spectrum.frequencies

    @property
    def values(self) -> np.ndarray:
        return self.spectrum.values


@dataclass(frozen=True)
class NeqCurve:
    """Noise-equivalent-quanta curve with the mean linear signal it used."""

    spectrum: Spectrum1D
    mu_a: float
    excluded_bins: int = 0

    @property
    def frequencies(self) -> np.ndarray:
        return self.spectrum.frequencies

    @property
    def values(self) -> np.ndarray:
        return self.spectrum.values


@dataclass(frozen=True)
class SpectraPair:
    """Input/output power spectra plus the NPS used for noise subtraction."""

    ps_input: Spectrum1D
    ps_output: Spectrum1D
    nps: Spectrum1D
    input_kind: str  # dead-leaves | pictorial

    def __post_init__(self):
        if not (self.ps_input.same_grid(self.ps_output)
                and self.ps_input.same_grid(self.nps)):
            raise ShapeMismatchError("spectra pair members must share one frequency grid")


@dataclass(frozen=True)
class SystemCharacterization:
    """Bundle of measured curves for one (scene, pipeline, snr, stage) cell."""

    nps: Spectrum1D
    mtf: MtfCurve
    neq: NeqCurve
    mu_a: float
    provenance: dict


def output_power_spectrum(reps: ReplicateSet, window_spec: WindowSpec = WindowSpec(),
                          bins: int = 64) -> Spectrum1D:
    """Mean windowed power spectrum of the replicate luminances."""
    curves = [spectral.scene_power_spectrum(r, window_spec, bins) for r in reps.replicates]
    return spectral.mean_curves(curves)


def spectra_pair(input_img: PlanarImage, reps: ReplicateSet, nps: Spectrum1D,
                 input_kind: str, window_spec: WindowSpec = WindowSpec(),
                 bins: int = 64) -> SpectraPair:
    """Assemble the spectra for the direct MTF method on one measurement grid."""
    ps_in = spectral.scene_power_spectrum(input_img, window_spec, bins)
    ps_out = output_power_spectrum(reps, window_spec, bins)
    return SpectraPair(ps_in, ps_out, nps, input_kind)


def measure_mtf(pair: SpectraPair, variant: str | None = None) -> MtfCurve:
    """MTF(u) = sqrt(max(0, PS_out(u) - NPS(u)) / PS_in(u)).

    Bins where noise exceeds the output power clamp to zero and are counted.
    The variant tag is derived from the pair's provenance unless supplied.
    """
    ps_in = pair.ps_input.values
    bad = np.nonzero(ps_in <= 0)[0]
    if bad.size:
        f = pair.ps_input.frequencies[bad[0]]
        raise DegenerateInputError(
            f"input power spectrum not positive at bin {bad[0]} (u = {f:.4g})")
    if variant is None:
        key = (pair.input_kind, pair.nps.variant)
        variant = _VARIANT_TABLE.get(key)
        if variant is None:
            raise UsageError(
                f"no defined MTF measure for input {pair.input_kind!r} "
                f"with NPS variant {pair.nps.variant!r}")
    num = pair.ps_output.values - pair.nps.values
    clamped = int(np.count_nonzero(num < 0))
    mtf = np.sqrt(np.clip(num, 0.0, None) / ps_in)
    sp = Spectrum1D(pair.ps_input.frequencies, mtf, unit=pair.ps_input.unit,
                    normalization="transfer", variant=variant,
                    weights=pair.ps_input.weights)
    return MtfCurve(sp, variant=variant, clamp_count=clamped)


def mean_pictorial_mtf(curves: list[MtfCurve]) -> MtfCurve:
    """Average pictorial-image SPD-MTFs across a scene set."""
    if not curves:
        raise UsageError("cannot average an empty list of MTF curves")
    mean_sp = spectral.mean_curves([c.spectrum for c in curves],
                                   variant=MTF_MEAN_PICTORIAL)
    return MtfCurve(mean_sp, variant=MTF_MEAN_PICTORIAL,
                    clamp_count=sum(c.clamp_count for c in curves))


def mean_signal(reps: ReplicateSet) -> float:
    """Mean linear signal mu_A: luminance mean of the mean replicate image."""
    return float(to_luminance(reps.mean_image()).data.mean())


def characterize(input_img: PlanarImage, reps: ReplicateSet, nps_variant: str,
                 input_kind: str, window_spec: WindowSpec = WindowSpec(),
                 bins: int = 64) -> SystemCharacterization:
    """Full single-cell characterization: SPD-NPS, SPD-MTF, NEQ and mu_A
    from one target and its replicate captures."""
    nps_curve = spectral.measure_nps(reps, nps_variant, window_spec, bins)
    pair = spectra_pair(input_img, reps, nps_curve, input_kind, window_spec, bins)
    mtf_curve = measure_mtf(pair)
    mu = mean_signal(reps)
    neq_curve = neq(mtf_curve, nps_curve, mu)
    prov = reps.provenance
    return SystemCharacterization(
        nps=nps_curve, mtf=mtf_curve, neq=neq_curve, mu_a=mu,
        provenance={"target_type": prov.target_type, "scene_id": prov.scene_id,
                    "pipeline_id": prov.pipeline_id, "snr": prov.snr,
                    "stage": prov.stage, "replicates": reps.n})


def neq(mtf: MtfCurve, nps: Spectrum1D, mean_signal: float) -> NeqCurve:
    """NEQ(u) = MTF^2(u) * mu_A^2 / NPS(u).

    Bins with zero noise power but nonzero MTF have no defined quotient;
    they are dropped and counted. Zero MTF forces NEQ to zero regardless.
    """
    if mean_signal <= 0:
        raise DomainError(f"mean linear signal must be positive, got {mean_signal}")
    if not mtf.spectrum.same_grid(nps):
        raise ShapeMismatchError("MTF and NPS are on different frequency grids")
    m = mtf.values
    p = nps.values
    undefined = (p == 0) & (m > 0)
    keep = ~undefined
    vals = np.zeros_like(m)
    ok = keep & (p > 0)
    vals[ok] = m[ok] ** 2 * mean_signal ** 2 / p[ok]
    sp = Spectrum1D(mtf.frequencies[keep], vals[keep], unit=nps.unit,
                    normalization="neq", variant=mtf.variant)
    return NeqCurve(sp, mu_a=mean_signal, excluded_bins=int(np.count_nonzero(undefined)))
