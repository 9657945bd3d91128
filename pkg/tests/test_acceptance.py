"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured figure (run with -s to see them inline).
"""

import math
import time

import numpy as np
import pytest
from scipy import ndimage

from sqm.harness import (SweepConfig, image_id, mae, rmse, run_variant_sweep, srocc)
from sqm.image import PlanarImage
from sqm.metrics import (MINKOWSKI_C1, MINKOWSKI_C2, DisplayedSpectra,
                         MetricCalibration, calibrate_k1, log_neq, minkowski_combine,
                         pic, sqrin)
from sqm.spectral import (NPS_DEAD_LEAVES, NPS_PICTORIAL, NPS_UNIFORM, Provenance,
                          ReplicateSet, Spectrum1D, integrated_power, measure_nps,
                          power_spectrum_2d, rotational_average)
from sqm.simulator import PipelineConfig, generate_replicates
from sqm.sysperf import MtfCurve, NeqCurve, measure_mtf, neq, spectra_pair
from sqm.targets import DeadLeavesParams, generate_dead_leaves, make_scene
from sqm.vision import ViewingEnvironment

SNRS = (10.0, 20.0, 40.0, 80.0)
SCENES = ("leaves", "blobs", "bars", "rings", "checks")


@pytest.fixture(scope="module")
def desk_sweep():
    """Criterion-8 sweep: 5 scenes, both pipelines, 4 SNRs, 256 px, n=10."""
    cfg = SweepConfig(size=256, replicates=10, seed=0, scenes=SCENES,
                      nps_variants=(NPS_PICTORIAL,), mtf_variants=("dead-leaves-spd",),
                      csfs=("barten",))
    t0 = time.time()
    result = run_variant_sweep(cfg)
    return cfg, result, time.time() - t0


def test_criterion_01_spectral_correctness():
    t0 = time.time()
    sigma, size, fields = 0.05, 512, 50
    rng = np.random.default_rng(101)
    acc = None
    for _ in range(fields):
        img = PlanarImage(rng.normal(0.5, sigma, (size, size)))
        sp = power_spectrum_2d(img)
        acc = sp.values if acc is None else acc + sp.values
    f = np.fft.fftfreq(size)
    f[f == -0.5] = 0.5
    from sqm.spectral import Spectrum2D
    curve = rotational_average(Spectrum2D(acc / fields, f, f))
    dev = np.max(np.abs(curve.values / sigma ** 2 - 1.0))
    assert dev <= 0.05, f"per-bin deviation {dev:.3%} exceeds 5%"

    data = rng.random((size, size))
    sp = power_spectrum_2d(PlanarImage(data), subtract_mean=False)
    parseval = abs(np.sum(sp.values) / (size * size * np.mean(data ** 2)) - 1.0)
    assert parseval < 1e-9
    elapsed = time.time() - t0
    assert elapsed < 10.0
    print(f"\nPASS criterion 1: NPS flat to {dev:.2%} (<=5%), Parseval "
          f"{parseval:.1e} (<1e-9), {elapsed:.1f}s (<10s)")


def test_criterion_02_replicate_estimator():
    t0 = time.time()
    sigma, n, trials, size = 0.05, 10, 100, 128
    rng = np.random.default_rng(202)
    estimates = []
    for _ in range(trials):
        reps = ReplicateSet(tuple(PlanarImage(rng.normal(0.4, sigma, (size, size)))
                                  for _ in range(n)),
                            Provenance(target_type="uniform"))
        estimates.append(integrated_power(measure_nps(reps, NPS_UNIFORM)))
    err = abs(np.mean(estimates) / sigma ** 2 - 1.0)
    elapsed = time.time() - t0
    assert err <= 0.02, f"integrated SPD-NPS off by {err:.3%}"
    assert elapsed < 30.0
    print(f"\nPASS criterion 2: bias-corrected integral within {err:.2%} (<=2%), "
          f"{elapsed:.1f}s (<30s)")


def test_criterion_03_mtf_recovery():
    t0 = time.time()
    size, sigma_psf, n, snr = 512, 1.5, 10, 40.0
    target = generate_dead_leaves(DeadLeavesParams(seed=11), size)
    blurred = ndimage.gaussian_filter(target.data, sigma_psf, mode="wrap")
    rng = np.random.default_rng(303)
    sigma_noise = target.data.mean() / snr
    reps = ReplicateSet(tuple(PlanarImage(blurred + rng.normal(0, sigma_noise,
                                                               blurred.shape))
                              for _ in range(n)),
                        Provenance(target_type="dead-leaves"))
    nps = measure_nps(reps, NPS_DEAD_LEAVES)
    mtf = measure_mtf(spectra_pair(target, reps, nps, "dead-leaves"))
    assert np.all(np.isfinite(mtf.values)), "NaN in measured MTF"
    f = mtf.frequencies
    ref = np.exp(-2 * np.pi ** 2 * sigma_psf ** 2 * f ** 2)
    sel = (f > 0) & (f <= 0.35)
    rms = float(np.sqrt(np.mean((mtf.values[sel] - ref[sel]) ** 2)))
    elapsed = time.time() - t0
    assert rms <= 0.03, f"MTF RMS error {rms:.4f} exceeds 0.03"
    assert elapsed < 20.0
    print(f"\nPASS criterion 3: MTF RMS {rms:.4f} (<=0.03), clamps "
          f"{mtf.clamp_count}, no NaN, {elapsed:.1f}s (<20s)")


def test_criterion_04_neq_algebra():
    f = np.linspace(0.01, 0.45, 32)
    m, p = 0.6, 2.5e-4
    mtf = MtfCurve(Spectrum1D(f, np.ones_like(f), variant="analytic"),
                   variant="analytic")
    curve = neq(mtf, Spectrum1D(f, np.full_like(f, p)), m)
    np.testing.assert_array_equal(curve.values, m * m / p)

    rng = np.random.default_rng(404)
    vals = np.clip(np.exp(-4 * f) + 0.1 * rng.random(f.size), 0.01, None)
    nps_vals = 1e-4 * (1 + rng.random(f.size))
    mtf2 = MtfCurve(Spectrum1D(f, vals, variant="analytic"), variant="analytic")
    c = 3.7
    a = neq(mtf2, Spectrum1D(f, nps_vals), 0.5)
    b = neq(mtf2, Spectrum1D(f, c * c * nps_vals), c * 0.5)
    rel = np.max(np.abs(a.values - b.values) / a.values)
    assert rel < 1e-9
    print(f"\nPASS criterion 4: NEQ == mu^2/p exactly, rescaling invariance {rel:.1e} (<1e-9)")


def test_criterion_05_metric_closed_forms():
    u1, umax, n = 0.4, 16.0, 128
    f = np.linspace(u1, umax, n)
    env_far = ViewingEnvironment(distance_cm=1e9, display_gamma=1.0)

    def const_csf(v):
        return lambda u: np.full_like(np.asarray(u, dtype=float), v)

    c, kappa, nvis, noise = 4.0, 2.0, 1e-3, 0.05
    s = c * (noise + nvis / kappa ** 2)
    ds = DisplayedSpectra(f, np.full(n, s), np.full(n, noise), umax)
    got = pic(ds, const_csf(kappa), nvis).score
    want = math.sqrt(math.log(1 + c) * math.log(umax / u1))
    err_pic = abs(got / want - 1)
    assert err_pic <= 1e-3

    c2 = 16.0
    s2 = c2 * (noise + nvis / kappa ** 2)
    ds2 = DisplayedSpectra(f, np.full(n, s2), np.full(n, noise), umax)
    got2 = sqrin(ds2, const_csf(kappa), nvis).score
    want2 = (c2 ** 0.25) * math.log(umax / u1) / math.log(2.0)
    err_sqrin = abs(got2 / want2 - 1)
    assert err_sqrin <= 1e-3

    q = 321.0
    curve = NeqCurve(Spectrum1D(f, np.full(n, q), unit="cycles/degree",
                                variant="analytic"), mu_a=0.5)
    got3 = log_neq(curve, env_far, MetricCalibration(k1=2.0, k2=0.5), u_max=umax).score
    want3 = 2.0 * math.log10(q * math.log(umax / u1)) + 0.5
    err_log = abs(got3 / want3 - 1)
    assert err_log <= 1e-3
    print(f"\nPASS criterion 5: closed-form errors pic {err_pic:.1e}, "
          f"sqrin {err_sqrin:.1e}, log-neq {err_log:.1e} (all <=0.1%)")


def test_criterion_06_minkowski_combiner():
    assert (MINKOWSKI_C1, MINKOWSKI_C2) == (2.0, 16.9)
    assert minkowski_combine([1.5, 2.5, 3.0], ql_max=0.0) == pytest.approx(7.0, rel=1e-12)
    for qmax in (0.0, 5.0, 40.0):
        assert minkowski_combine([6.2], ql_max=qmax) == pytest.approx(6.2, rel=1e-12)
    rng = np.random.default_rng(606)
    for _ in range(1000):
        losses = rng.uniform(0.0, 30.0, rng.integers(1, 7))
        qlm = minkowski_combine(losses)
        assert np.max(losses) - 1e-9 <= qlm <= np.sum(losses) + 1e-9
    print("\nPASS criterion 6: c1=2, c2=16.9; sum reduction, single-attribute "
          "identity, bounds over 1000 random vectors")


def test_criterion_07_calibration_postcondition(desk_sweep):
    rng = np.random.default_rng(707)
    raws = rng.uniform(3.0, 21.0, 64)
    target = 23.0
    cal = calibrate_k1(raws, target)
    assert cal.k2 == 0.0
    direct = abs(np.mean(cal.k1 * raws) - target)
    assert direct < 1e-9

    cfg, result, _ = desk_sweep
    lookup = result.ratings.lookup()
    worst = 0.0
    for metric in ("pic", "sqrin", "log-neq", "visual-log-neq"):
        sel = [r for r in result.scores
               if r.metric == metric and r.snr == 80.0 and r.stage == "pre-denoise"]
        target_m = np.mean([lookup[r.image_id] for r in sel])
        worst = max(worst, abs(np.mean([r.score for r in sel]) - target_m))
    assert worst < 1e-9
    print(f"\nPASS criterion 7: calibrated reference means match targets "
          f"(worst {worst:.1e} < 1e-9)")


def test_criterion_08_end_to_end_ordering(desk_sweep):
    cfg, result, elapsed = desk_sweep
    assert elapsed < 300.0, f"sweep took {elapsed:.0f}s"
    by_key = {}
    for r in result.scores:
        by_key[(r.metric, r.pipeline, r.image_id)] = r.score
    checked = 0
    for metric in cfg.metrics:
        for pipe in cfg.pipelines:
            for scene in cfg.scenes:
                for stage in cfg.stages:
                    seq = [by_key[(metric, pipe, image_id(scene, pipe, snr, stage))]
                           for snr in SNRS]
                    assert all(a < b for a, b in zip(seq, seq[1:])), (
                        f"{metric}/{pipe}/{scene}/{stage}: {seq}")
                    assert srocc(seq, list(SNRS)) == pytest.approx(1.0)
                    checked += 1
    print(f"\nPASS criterion 8: {checked} (metric,pipeline,scene,stage) series "
          f"strictly increasing in SNR, SROCC=1.0, sweep {elapsed:.0f}s (<300s)")


def test_criterion_09_scene_dependency_direction():
    size, n, snr, stage = 256, 6, 40.0, "post-denoise"
    variances = {}
    for kind in ("linear", "non-linear"):
        curves = []
        for i, sid in enumerate(SCENES):
            img = make_scene(sid, size, seed=0)
            cfg = PipelineConfig(kind=kind, snr=snr, seed=900 + i)
            reps = generate_replicates(img, cfg, n, target_type="pictorial")[stage]
            curves.append(measure_nps(reps, NPS_PICTORIAL).values)
        variances[kind] = float(np.mean(np.var(np.array(curves), axis=0)))
    assert variances["non-linear"] > variances["linear"], variances
    ratio = variances["non-linear"] / variances["linear"]
    print(f"\nPASS criterion 9: between-scene NPS variance non-linear/linear "
          f"= {ratio:.1f}x (> 1)")


def test_criterion_10_benchmark_statistics():
    assert mae([1.0, 3.0, 5.0], [2.0, 2.0, 5.0]) == pytest.approx(2.0 / 3.0)
    assert rmse([1.0, 3.0, 5.0], [2.0, 2.0, 5.0]) == pytest.approx(math.sqrt(2.0 / 3.0))
    assert srocc([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5)
    assert srocc([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    rng = np.random.default_rng(1010)
    ratings = rng.uniform(5.0, 25.0, 40)
    scores = ratings + 2.0
    assert mae(scores, ratings) == pytest.approx(2.0)
    print("\nPASS criterion 10: hand-computed MAE/RMSE/SROCC reproduced; "
          "offset-by-2 data gives MAE 2 by construction")


def test_criterion_11_determinism_audit(tmp_path):
    import json
    from sqm.cli import main

    sim_cfg = {"scene": "builtin:checks", "size": 64, "replicates": 3,
               "scene_id": "checks", "pipeline": {"kind": "non-linear", "snr": 20.0}}
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(sim_cfg))
    sim_out = tmp_path / "sim"
    assert main(["--config", str(cfg_path), "--out-dir", str(sim_out), "--seed", "5",
                 "simulate"]) == 0
    pairs = []
    for tag in ("a", "b"):
        mdir = tmp_path / f"meas_{tag}"
        src = str(cfg_path if tag == "a" else sim_out / "manifest.json")
        assert main(["--config", src, "--out-dir", str(mdir), "measure",
                     "--replicates", str(sim_out)]) == 0
        sdir = tmp_path / f"score_{tag}"
        assert main(["--out-dir", str(sdir), "score",
                     "--replicates", str(sim_out)]) == 0
        pairs.append((mdir, sdir))
    (m1, s1), (m2, s2) = pairs
    names = [p.name for p in m1.glob("*.csv")]
    assert names
    for nm in names:
        assert (m1 / nm).read_bytes() == (m2 / nm).read_bytes()
    assert (s1 / "scores.csv").read_bytes() == (s2 / "scores.csv").read_bytes()

    sweep_cfg = {"sweep": {"size": 64, "replicates": 3, "scenes": ["blobs"],
                           "snrs": [20.0], "stages": ["pre-denoise"],
                           "metrics": ["log-neq"], "nps_variants": ["pictorial-spd"],
                           "mtf_variants": ["dead-leaves-spd"]}}
    sw_path = tmp_path / "sweep.json"
    sw_path.write_text(json.dumps(sweep_cfg))
    first = tmp_path / "sw1"
    assert main(["--config", str(sw_path), "--out-dir", str(first), "sweep"]) == 0
    second = tmp_path / "sw2"
    assert main(["--config", str(first / "manifest.json"), "--out-dir", str(second),
                 "sweep"]) == 0
    for nm in ("scores.csv", "report.csv", "ratings.csv"):
        assert (first / nm).read_bytes() == (second / nm).read_bytes()
    print("\nPASS criterion 11: manifest re-runs reproduce bit-identical CSVs "
          "(measure, score, sweep)")
