"""Benchmark statistics, ratings handling, and the variant sweep that
characterizes simulated systems and scores every metric permutation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from . import metrics as mx
from . import spectral, sysperf
from .errors import ConfigError, ShapeMismatchError, SqmError, UsageError
from .image import PlanarImage, WindowSpec
from .simulator import STAGES, PipelineConfig, generate_replicates
from .targets import DeadLeavesParams, generate_dead_leaves, generate_uniform_patch, make_scene
from .vision import BartenCsf, JohnsonFairchildCsf, ViewingEnvironment, normalized


# ---------------------------------------------------------------------------
# Error statistics
# ---------------------------------------------------------------------------

def _paired(scores, ratings) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(list(scores), dtype=np.float64)
    r = np.asarray(list(ratings), dtype=np.float64)
    if s.shape != r.shape:
        raise ShapeMismatchError("scores and ratings differ in length")
    if s.size == 0:
        raise UsageError("need at least one score/rating pair")
    return s, r


def mae(scores, ratings) -> float:
    """Mean absolute deviation from the ideal unit-gain, zero-offset line."""
    s, r = _paired(scores, ratings)
    return float(np.mean(np.abs(s - r)))


def rmse(scores, ratings) -> float:
    s, r = _paired(scores, ratings)
    return float(np.sqrt(np.mean((s - r) ** 2)))


def srocc(scores, ratings) -> float | None:
    """Spearman rank correlation with average ranks for ties; None when a
    side is constant (undefined)."""
    s, r = _paired(scores, ratings)
    if np.all(s == s[0]) or np.all(r == r[0]):
        return None
    rs = scipy_stats.rankdata(s)
    rr = scipy_stats.rankdata(r)
    rs = rs - rs.mean()
    rr = rr - rr.mean()
    return float(np.sum(rs * rr) / math.sqrt(np.sum(rs ** 2) * np.sum(rr ** 2)))


# ---------------------------------------------------------------------------
# Ratings
# ---------------------------------------------------------------------------

RATINGS_HEADER = ["image_id", "scene_id", "pipeline", "snr", "stage",
                  "rating_sqs2", "stderr"]


@dataclass(frozen=True)
class RatingRow:
    image_id: str
    scene_id: str
    pipeline: str
    snr: float
    stage: str
    rating: float
    stderr: float = 0.0


@dataclass
class RatingsTable:
    rows: list[RatingRow] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for r in self.rows:
            if not math.isfinite(r.rating):
                raise UsageError(f"non-finite rating for {r.image_id}")
            key = (r.image_id, r.stage)
            if key in seen:
                raise UsageError(f"duplicate rating row for {key}")
            seen.add(key)

    def lookup(self) -> dict[str, float]:
        return {r.image_id: r.rating for r in self.rows}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RATINGS_HEADER)
            for r in self.rows:
                w.writerow([r.image_id, r.scene_id, r.pipeline, repr(r.snr),
                            r.stage, repr(r.rating), repr(r.stderr)])

    @classmethod
    def read_csv(cls, path: str | Path) -> "RatingsTable":
        with open(path, newline="") as fh:
            rows = [RatingRow(r["image_id"], r["scene_id"], r["pipeline"],
                              float(r["snr"]), r["stage"],
                              float(r["rating_sqs2"]), float(r["stderr"] or 0.0))
                    for r in csv.DictReader(fh)]
        return cls(rows)


def image_id(scene_id: str, pipeline: str, snr: float, stage: str) -> str:
    return f"{scene_id}:{pipeline}:snr{snr:g}:{stage}"


def synthetic_ratings(scene_ids, pipelines, snrs, stages, seed: int = 0) -> RatingsTable:
    """Monotone-in-SNR stand-in ratings with controlled scene scatter, for
    exercising the statistics end to end when observer data is absent."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5E71, seed]))
    stage_shift = {"pre-denoise": -2.0, "post-denoise": 0.5, "post-sharpen": 1.0}
    rows = []
    for scene in scene_ids:
        scene_off = rng.normal(0.0, 1.2)
        for pipeline in pipelines:
            for snr in snrs:
                base = 12.0 + 5.0 * math.log2(snr / 10.0) + scene_off
                for stage in stages:
                    val = base + stage_shift.get(stage, 0.0) + rng.normal(0.0, 0.3)
                    rows.append(RatingRow(image_id(scene, pipeline, snr, stage),
                                          scene, pipeline, float(snr), stage,
                                          float(np.clip(val, 3.0, 32.0)), 0.5))
    return RatingsTable(rows)


# ---------------------------------------------------------------------------
# Sweep configuration
# ---------------------------------------------------------------------------

ALL_METRICS = ("pic", "sqrin", "cpiq", "log-neq", "visual-log-neq")


@dataclass
class SweepConfig:
    size: int = 256
    replicates: int = 10
    seed: int = 0
    scenes: tuple[str, ...] = ("leaves", "blobs", "bars", "rings", "checks")
    pipelines: tuple[str, ...] = ("linear", "non-linear")
    snrs: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)
    stages: tuple[str, ...] = STAGES
    metrics: tuple[str, ...] = ALL_METRICS
    nps_variants: tuple[str, ...] = (spectral.NPS_UNIFORM, spectral.NPS_DEAD_LEAVES,
                                     spectral.NPS_PICTORIAL, spectral.NPS_MEAN_PICTORIAL)
    mtf_variants: tuple[str, ...] = (sysperf.MTF_DIRECT_DEAD_LEAVES, sysperf.MTF_DEAD_LEAVES,
                                     sysperf.MTF_PICTORIAL, sysperf.MTF_MEAN_PICTORIAL)
    csfs: tuple[str, ...] = ("barten",)
    bins: int = 64
    taper: float = 0.125
    uniform_level: float = 0.5
    calibration: str = "pooled"  # pooled | per-pipeline
    viewing: ViewingEnvironment = field(default_factory=ViewingEnvironment)
    pipeline_overrides: dict = field(default_factory=dict)
    visual_noise: float | None = None  # None: model default

    def __post_init__(self):
        if self.calibration not in ("pooled", "per-pipeline"):
            raise ConfigError(f"calibration mode {self.calibration!r} unknown")
        for m in self.metrics:
            if m not in ALL_METRICS:
                raise ConfigError(f"unknown metric {m!r}")
        for s in self.stages:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}")

    def variant_count(self) -> int:
        """Product of enabled axis sizes; metrics without a CSF axis count
        one CSF slot."""
        total = 0
        for m in self.metrics:
            n_csf = 1 if m == "log-neq" else len(self.csfs)
            total += len(self.nps_variants) * len(self.mtf_variants) * n_csf
        return total


def _stable_seed(root: int, *parts) -> int:
    tag = "|".join(str(p) for p in parts)
    return (int(root) * 0x1_0000_0000 + zlib.crc32(tag.encode())) % (2 ** 63)


# ---------------------------------------------------------------------------
# Per-cell measurement
# ---------------------------------------------------------------------------

@dataclass
class CellMeasurements:
    """Curves and scalars for one (pipeline, snr) across stages and scenes."""

    nps: dict  # (variant, scene_or_None, stage) -> Spectrum1D
    mtf: dict  # (variant, scene_or_None, stage) -> MtfCurve
    mu_a: dict  # (scene, stage) -> float
    ps_scene: dict  # scene -> Spectrum1D
    omega: dict  # (csf, nps_variant, scene_or_None, stage) -> float


def _csf_pool(cfg: SweepConfig):
    env = cfg.viewing
    pool = {}
    grid = np.linspace(0.0, 80.0, 2001)
    barten = BartenCsf(env, field_size_deg=env.angular_size_deg(cfg.size))
    jf = JohnsonFairchildCsf()
    for choice in cfg.csfs:
        if choice == "barten":
            pool[("stv", choice)] = barten
            # combined-loss metric normalizes every CSF to the frequency-only
            # model's area, per its standard usage
            pool[("cpiq", choice)] = normalized(barten, jf, grid)
        elif choice == "johnson-fairchild":
            pool[("stv", choice)] = normalized(jf, barten, grid)
            pool[("cpiq", choice)] = jf
        else:
            raise ConfigError(f"CSF {choice!r} has no built-in model")
    return pool


def measure_cell(cfg: SweepConfig, scenes: dict[str, PlanarImage],
                 dead_leaves: PlanarImage, uniform: PlanarImage,
                 pipeline: str, snr: float, csf_pool: dict) -> CellMeasurements:
    window = WindowSpec(taper=cfg.taper)
    bins = cfg.bins
    env = cfg.viewing

    def pipe_cfg(source_id: str) -> PipelineConfig:
        seed = _stable_seed(cfg.seed, source_id, pipeline, snr)
        return PipelineConfig(kind=pipeline, snr=snr, seed=seed,
                              **cfg.pipeline_overrides)

    reps_uniform = generate_replicates(uniform, pipe_cfg("uniform"), cfg.replicates,
                                       target_type="uniform", scene_id="uniform")
    reps_dl = generate_replicates(dead_leaves, pipe_cfg("dead-leaves"), cfg.replicates,
                                  target_type="dead-leaves", scene_id="dead-leaves")
    reps_scene = {sid: generate_replicates(img, pipe_cfg(sid), cfg.replicates,
                                           target_type="pictorial", scene_id=sid)
                  for sid, img in scenes.items()}

    nps: dict = {}
    mtf: dict = {}
    mu_a: dict = {}
    omega: dict = {}
    ps_scene = {sid: spectral.scene_power_spectrum(img, window, bins)
                for sid, img in scenes.items()}
    ps_dl_input = spectral.scene_power_spectrum(dead_leaves, window, bins)

    for stage in cfg.stages:
        nps_u = spectral.measure_nps(reps_uniform[stage], spectral.NPS_UNIFORM,
                                     window, bins)
        nps_dl = spectral.measure_nps(reps_dl[stage], spectral.NPS_DEAD_LEAVES,
                                      window, bins)
        nps[(spectral.NPS_UNIFORM, None, stage)] = nps_u
        nps[(spectral.NPS_DEAD_LEAVES, None, stage)] = nps_dl

        scene_nps = {}
        for sid in scenes:
            cur = spectral.measure_nps(reps_scene[sid][stage], spectral.NPS_PICTORIAL,
                                       window, bins)
            scene_nps[sid] = cur
            nps[(spectral.NPS_PICTORIAL, sid, stage)] = cur
        nps[(spectral.NPS_MEAN_PICTORIAL, None, stage)] = spectral.mean_pictorial_nps(
            list(scene_nps.values()))

        ps_dl_out = sysperf.output_power_spectrum(reps_dl[stage], window, bins)
        pair_direct = sysperf.SpectraPair(ps_dl_input, ps_dl_out, nps_u, "dead-leaves")
        mtf[(sysperf.MTF_DIRECT_DEAD_LEAVES, None, stage)] = sysperf.measure_mtf(pair_direct)
        pair_dl = sysperf.SpectraPair(ps_dl_input, ps_dl_out, nps_dl, "dead-leaves")
        mtf[(sysperf.MTF_DEAD_LEAVES, None, stage)] = sysperf.measure_mtf(pair_dl)

        scene_mtfs = []
        for sid in scenes:
            ps_out = sysperf.output_power_spectrum(reps_scene[sid][stage], window, bins)
            pair = sysperf.SpectraPair(ps_scene[sid], ps_out, scene_nps[sid], "pictorial")
            cur = sysperf.measure_mtf(pair)
            mtf[(sysperf.MTF_PICTORIAL, sid, stage)] = cur
            scene_mtfs.append(cur)
            mu_a[(sid, stage)] = sysperf.mean_signal(reps_scene[sid][stage])
        mtf[(sysperf.MTF_MEAN_PICTORIAL, None, stage)] = sysperf.mean_pictorial_mtf(scene_mtfs)

        if "cpiq" in cfg.metrics:
            sources = {spectral.NPS_UNIFORM: [(None, reps_uniform[stage])],
                       spectral.NPS_DEAD_LEAVES: [(None, reps_dl[stage])],
                       spectral.NPS_PICTORIAL: [(sid, reps_scene[sid][stage])
                                                 for sid in scenes]}
            for choice in cfg.csfs:
                csf = csf_pool[("cpiq", choice)]
                for variant, items in sources.items():
                    vals = []
                    for sid, reps in items:
                        val = mx.visual_noise_omega(reps, env, csf)
                        omega[(choice, variant, sid, stage)] = val
                        vals.append(val)
                    if variant == spectral.NPS_PICTORIAL:
                        omega[(choice, spectral.NPS_MEAN_PICTORIAL, None, stage)] = float(
                            np.mean(vals))

    return CellMeasurements(nps=nps, mtf=mtf, mu_a=mu_a, ps_scene=ps_scene, omega=omega)


# ---------------------------------------------------------------------------
# Scoring and the sweep
# ---------------------------------------------------------------------------

SCORE_HEADER = ["image_id", "pipeline", "snr", "stage", "metric",
                "nps_variant", "mtf_variant", "csf", "k1", "k2", "score"]


@dataclass
class ScoreRow:
    image_id: str
    pipeline: str
    snr: float
    stage: str
    metric: str
    nps_variant: str
    mtf_variant: str
    csf: str
    k1: float
    k2: float
    score: float

    def csv_row(self) -> list[str]:
        return [self.image_id, self.pipeline, repr(self.snr), self.stage,
                self.metric, self.nps_variant, self.mtf_variant, self.csf,
                repr(self.k1), repr(self.k2), repr(self.score)]


def write_scores_csv(rows: list[ScoreRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_HEADER)
        for r in rows:
            w.writerow(r.csv_row())


def read_scores_csv(path: str | Path) -> list[ScoreRow]:
    with open(path, newline="") as fh:
        return [ScoreRow(r["image_id"], r["pipeline"], float(r["snr"]), r["stage"],
                         r["metric"], r["nps_variant"], r["mtf_variant"], r["csf"],
                         float(r["k1"]), float(r["k2"]), float(r["score"]))
                for r in csv.DictReader(fh)]


def write_scatter_csv(rows: list[ScoreRow], ratings: RatingsTable,
                      path: str | Path) -> int:
    """Tidy score-versus-rating series, one row per rated image, ready for
    plotting tools. Returns the number of rows written."""
    rating_map = ratings.lookup()
    written = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_HEADER[:-3] + ["score", "rating"])
        for r in rows:
            if r.image_id not in rating_map:
                continue
            w.writerow([r.image_id, r.pipeline, repr(r.snr), r.stage, r.metric,
                        r.nps_variant, r.mtf_variant, r.csf,
                        repr(r.score), repr(rating_map[r.image_id])])
            written += 1
    return written


@dataclass
class VariantStats:
    metric: str
    nps_variant: str
    mtf_variant: str
    csf: str
    pipeline: str  # specific pipeline or "all"
    n: int
    mae: float
    rmse: float
    srocc: float | None


@dataclass
class BenchmarkReport:
    stats: list[VariantStats] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    unmatched: int = 0

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "nps_variant", "mtf_variant", "csf", "pipeline",
                        "n", "mae", "rmse", "srocc"])
            for s in self.stats:
                w.writerow([s.metric, s.nps_variant, s.mtf_variant, s.csf, s.pipeline,
                            s.n, repr(s.mae), repr(s.rmse),
                            "" if s.srocc is None else repr(s.srocc)])


def _variant_axes(cfg: SweepConfig):
    for metric in cfg.metrics:
        csf_axis = ("none",) if metric == "log-neq" else cfg.csfs
        for npsv in cfg.nps_variants:
            for mtfv in cfg.mtf_variants:
                for csf in csf_axis:
                    yield metric, npsv, mtfv, csf


def _raw_score(metric: str, cfg: SweepConfig, cell: CellMeasurements, scene: str,
               stage: str, npsv: str, mtfv: str, csf_choice: str, csf_pool: dict) -> float:
    env = cfg.viewing
    nps_key = (npsv, scene if npsv == spectral.NPS_PICTORIAL else None, stage)
    mtf_key = (mtfv, scene if mtfv == sysperf.MTF_PICTORIAL else None, stage)
    nps_curve = cell.nps[nps_key]
    mtf_curve = cell.mtf[mtf_key]
    nps_visual = cfg.visual_noise
    if nps_visual is None:
        from .vision import DEFAULT_VISUAL_NOISE
        nps_visual = DEFAULT_VISUAL_NOISE

    if metric == "log-neq":
        neq = sysperf.neq(mtf_curve, nps_curve, cell.mu_a[(scene, stage)])
        return mx.log_neq(neq, env).score
    if metric == "visual-log-neq":
        neq = sysperf.neq(mtf_curve, nps_curve, cell.mu_a[(scene, stage)])
        return mx.visual_log_neq(neq, env, csf_pool[("stv", csf_choice)]).score
    if metric in ("pic", "sqrin"):
        ds = mx.displayed_spectra(cell.ps_scene[scene], mtf_curve, nps_curve, env)
        fn = mx.pic if metric == "pic" else mx.sqrin
        return fn(ds, csf_pool[("stv", csf_choice)], nps_visual).score
    if metric == "cpiq":
        csf = csf_pool[("cpiq", csf_choice)]
        texture = mx.texture_quality_loss(mtf_curve, env, csf)
        om_key = (csf_choice, npsv, scene if npsv == spectral.NPS_PICTORIAL else None, stage)
        noise_ql = cell.omega[om_key]
        return mx.cpiq_score(texture, noise_ql).score
    raise ConfigError(f"unknown metric {metric!r}")


@dataclass
class SweepResult:
    scores: list[ScoreRow]
    report: BenchmarkReport
    ratings: RatingsTable
    config_hash: str


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


def run_variant_sweep(cfg: SweepConfig, ratings: RatingsTable | None = None,
                      scenes: dict[str, PlanarImage] | None = None) -> SweepResult:
    """Characterize every (pipeline, snr) cell, score every metric variant
    on every image, calibrate against the reference condition, and compute
    benchmark statistics against the ratings."""
    if scenes is None:
        scenes = {sid: make_scene(sid, cfg.size, seed=cfg.seed)
                  for sid in cfg.scenes}
    if ratings is None:
        ratings = synthetic_ratings(sorted(scenes), cfg.pipelines, cfg.snrs,
                                    cfg.stages, seed=cfg.seed)
    dl = generate_dead_leaves(DeadLeavesParams(seed=_stable_seed(cfg.seed, "dl-target")),
                              cfg.size)
    uniform = generate_uniform_patch(cfg.uniform_level, cfg.size)
    csf_pool = _csf_pool(cfg)

    cells: dict[tuple[str, float], CellMeasurements] = {}
    for pipeline in cfg.pipelines:
        for snr in cfg.snrs:
            cells[(pipeline, snr)] = measure_cell(cfg, scenes, dl, uniform,
                                                  pipeline, snr, csf_pool)

    rating_map = ratings.lookup()
    ref_snr = max(cfg.snrs)
    ref_stage = "pre-denoise"
    rows: list[ScoreRow] = []
    report = BenchmarkReport()

    for metric, npsv, mtfv, csf_choice in _variant_axes(cfg):
        try:
            raw: dict[tuple, float] = {}
            for pipeline in cfg.pipelines:
                for snr in cfg.snrs:
                    cell = cells[(pipeline, snr)]
                    for scene in sorted(scenes):
                        for stage in cfg.stages:
                            raw[(pipeline, snr, scene, stage)] = _raw_score(
                                metric, cfg, cell, scene, stage,
                                npsv, mtfv, csf_choice, csf_pool)

            cals: dict[str, mx.MetricCalibration] = {}
            if metric == "cpiq":
                for p in cfg.pipelines:
                    cals[p] = mx.MetricCalibration()
            else:
                groups = ([tuple(cfg.pipelines)] if cfg.calibration == "pooled"
                          else [(p,) for p in cfg.pipelines])
                for group in groups:
                    ref_keys = [(p, ref_snr, s, ref_stage)
                                for p in group for s in sorted(scenes)]
                    ref_ids = [image_id(k[2], k[0], k[1], k[3]) for k in ref_keys]
                    target = float(np.mean([rating_map[i] for i in ref_ids
                                            if i in rating_map]))
                    cal = mx.calibrate_k1([raw[k] for k in ref_keys], target)
                    for p in group:
                        cals[p] = cal

            for (pipeline, snr, scene, stage), val in raw.items():
                cal = cals[pipeline]
                rows.append(ScoreRow(image_id(scene, pipeline, snr, stage),
                                     pipeline, snr, stage, metric, npsv, mtfv,
                                     csf_choice, cal.k1, cal.k2, cal.apply(val)))
        except SqmError as exc:
            report.skipped.append({"metric": metric, "nps_variant": npsv,
                                   "mtf_variant": mtfv, "csf": csf_choice,
                                   "error": str(exc)})

    report.stats, report.unmatched = benchmark(rows, ratings, cfg.pipelines)
    return SweepResult(rows, report, ratings, config_hash(sweep_config_doc(cfg)))


def benchmark(rows: list[ScoreRow], ratings: RatingsTable,
              pipelines=None) -> tuple[list[VariantStats], int]:
    """Per-variant MAE/RMSE/SROCC overall and split by pipeline."""
    rating_map = ratings.lookup()
    groups: dict[tuple, list[ScoreRow]] = {}
    unmatched = 0
    for r in rows:
        if r.image_id not in rating_map:
            unmatched += 1
            continue
        groups.setdefault((r.metric, r.nps_variant, r.mtf_variant, r.csf), []).append(r)

    pipelines = tuple(pipelines) if pipelines else tuple(
        sorted({r.pipeline for r in rows}))
    stats: list[VariantStats] = []
    for key in sorted(groups):
        rows_v = groups[key]
        for pipe in ("all",) + pipelines:
            sel = rows_v if pipe == "all" else [r for r in rows_v if r.pipeline == pipe]
            if not sel:
                continue
            s = [r.score for r in sel]
            t = [rating_map[r.image_id] for r in sel]
            stats.append(VariantStats(*key, pipeline=pipe, n=len(sel),
                                      mae=mae(s, t), rmse=rmse(s, t), srocc=srocc(s, t)))
    return stats, unmatched


def sweep_config_doc(cfg: SweepConfig) -> dict:
    doc = asdict(cfg)
    doc["viewing"] = {k: v for k, v in asdict(cfg.viewing).items() if k != "display_nps"}
    return doc
