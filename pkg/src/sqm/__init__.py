"""Scene-dependent spatial quality toolkit.

Measures scene-and-process-dependent noise power spectra, modulation
transfer functions and noise-equivalent quanta from replicate captures,
simulates linear and content-aware camera pipelines to generate those
replicates, computes perceptual quality metric scores from the measured
curves, and benchmarks metric variants against quality ratings.
"""

from .image import PlanarImage, WindowSpec, load_raster, prepare_scene, read_sqmraw, \
    save_raster, to_luminance, window, write_sqmraw
from .spectral import (NoiseImage, Provenance, ReplicateSet, Spectrum1D, Spectrum2D,
                       mean_pictorial_nps, measure_nps, noise_images, power_spectrum_2d,
                       rotational_average, scene_power_spectrum)
from .sysperf import (MtfCurve, NeqCurve, SpectraPair, SystemCharacterization,
                      characterize, mean_pictorial_mtf, measure_mtf, neq)
from .vision import (BartenCsf, ContextualCsf, JohnsonFairchildCsf, ViewingEnvironment,
                     barten_csf, cpd_from_cpp, cpp_from_cpd, display_mtf, jf_csf,
                     normalize_csf, sample_csf)
from .metrics import (DisplayedSpectra, MetricCalibration, MetricScore, QualityLoss,
                      VariantDescriptor, acutance, calibrate_k1, cpiq_score,
                      displayed_spectra, log_neq, minkowski_combine, pic, sqrin,
                      visual_log_neq, visual_noise_omega)
from .targets import DeadLeavesParams, generate_dead_leaves, generate_uniform_patch, make_scene
from .simulator import (CaptureResult, PipelineConfig, StageOutput, blend,
                        generate_replicates, simulate_capture)
from .harness import (BenchmarkReport, RatingsTable, SweepConfig, benchmark, mae,
                      rmse, run_variant_sweep, srocc, synthetic_ratings)

__version__ = "0.1.0"
