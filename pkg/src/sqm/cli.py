"""Command-line interface.

Subcommands: make-target, simulate, measure, score, calibrate, sweep, bench.
Every command writes a manifest.json holding its fully resolved
configuration; re-running with --config <manifest> reproduces the outputs
byte for byte. Exit codes: 0 ok, 2 configuration, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import harness, metrics as mx, spectral, sysperf
from .errors import (CalibrationError, ConfigError, DegenerateInputError,
                     DimensionError, DomainError, EncodingError, GenerationError,
                     PipelineFault, ShapeMismatchError, SqmError, UsageError)
from .harness import (BenchmarkReport, RatingsTable, ScoreRow, SweepConfig, benchmark,
                      read_scores_csv, run_variant_sweep, write_scores_csv)
from .image import (PlanarImage, WindowSpec, load_raster, prepare_scene, read_sqmraw,
                    save_raster, write_sqmraw)
from .simulator import STAGES, PipelineConfig, generate_replicates
from .spectral import write_curve_csv, write_curve_json
from .targets import DeadLeavesParams, generate_dead_leaves, generate_uniform_patch, make_scene
from .vision import BartenCsf, ViewingEnvironment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_ERRORS = (EncodingError, DimensionError, ShapeMismatchError, UsageError,
                DegenerateInputError, GenerationError, FileNotFoundError)
_NUMERIC_ERRORS = (DomainError, CalibrationError, PipelineFault)


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = json.loads(Path(path).read_text())
    # a manifest embeds its resolved config; unwrap it transparently
    if "command" in doc and "config" in doc:
        return doc["config"]
    return doc


def write_manifest(out_dir: Path, command: str, config: dict, outputs: list[str]) -> None:
    doc = {"command": command, "config": config,
           "config_hash": harness.config_hash(config), "outputs": sorted(outputs)}
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _viewing(config: dict) -> ViewingEnvironment:
    return ViewingEnvironment(**config.get("viewing", {}))


def _pipeline_config(config: dict, seed: int | None) -> PipelineConfig:
    section = dict(config.get("pipeline", {}))
    if seed is not None:
        section["seed"] = seed
    return PipelineConfig(**section)


def _resolve_scene(spec: str, size: int, seed: int) -> PlanarImage:
    if spec.startswith("builtin:"):
        return make_scene(spec.split(":", 1)[1], size, seed=seed)
    img = load_raster(spec)
    if (img.width, img.height) != (size, size):
        img = prepare_scene(img, size)  # bicubic downsize + center crop
    return img


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_make_target(args, config: dict) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    section = dict(config.get("target", {}))
    kind = args.type or section.get("type", "dead-leaves")
    size = args.size or section.get("size", 512)
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    level = section.get("level", 0.5)
    if kind == "dead-leaves":
        params = {k: section[k] for k in ("r_min", "r_max", "exponent",
                                          "gray_lo", "gray_hi") if k in section}
        img = generate_dead_leaves(DeadLeavesParams(seed=seed, **params), size)
    elif kind == "uniform":
        img = generate_uniform_patch(level, size)
    else:
        raise ConfigError(f"unknown target type {kind!r}")
    name = f"{kind}.sqmraw"
    write_sqmraw(img, out / name)
    save_raster(img, out / f"{kind}.png")  # display-coded preview
    resolved = {"target": {"type": kind, "size": size, "seed": seed, "level": level,
                           **{k: section[k] for k in section
                              if k in ("r_min", "r_max", "exponent", "gray_lo", "gray_hi")}}}
    write_manifest(out, "make-target", resolved, [name, f"{kind}.png"])
    print(f"wrote {out / name}")
    return EXIT_OK


def cmd_simulate(args, config: dict) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    size = config.get("size", 256)
    scene_spec = args.scene or config.get("scene")
    if not scene_spec:
        raise ConfigError("simulate needs a scene (--scene or config key 'scene')")
    target_type = config.get("target_type", "pictorial")
    n = config.get("replicates", 10)
    scene = _resolve_scene(scene_spec, size, seed)
    cfg = _pipeline_config(config, seed)
    reps = generate_replicates(scene, cfg, n, target_type=target_type,
                               scene_id=config.get("scene_id", scene_spec))
    outputs = []
    write_sqmraw(scene, out / "input.sqmraw")
    outputs.append("input.sqmraw")
    for stage, rs in reps.items():
        for i, img in enumerate(rs.replicates):
            name = f"{stage}_{i:02d}.sqmraw"
            write_sqmraw(img, out / name)
            outputs.append(name)
    resolved = {"scene": scene_spec, "scene_id": config.get("scene_id", scene_spec),
                "size": size, "seed": seed, "replicates": n,
                "target_type": target_type, "stages": list(STAGES),
                "pipeline": {**config.get("pipeline", {}), "seed": seed}}
    write_manifest(out, "simulate", resolved, outputs)
    print(f"wrote {len(outputs)} rasters to {out}")
    return EXIT_OK


def _load_replicates(rep_dir: Path) -> tuple[dict, PlanarImage, dict[str, spectral.ReplicateSet]]:
    manifest = json.loads((rep_dir / "manifest.json").read_text())
    cfg = manifest["config"]
    scene = read_sqmraw(rep_dir / "input.sqmraw")
    sets = {}
    for stage in STAGES:
        files = sorted(rep_dir.glob(f"{stage}_*.sqmraw"))
        if not files:
            continue
        prov = spectral.Provenance(target_type=cfg.get("target_type", "pictorial"),
                                   scene_id=cfg.get("scene_id", ""),
                                   pipeline_id=cfg.get("pipeline", {}).get("kind", ""),
                                   snr=cfg.get("pipeline", {}).get("snr"), stage=stage)
        sets[stage] = spectral.ReplicateSet(tuple(read_sqmraw(f) for f in files), prov)
    if not sets:
        raise UsageError(f"{rep_dir}: no replicate rasters found")
    return cfg, scene, sets


_NPS_FOR_TARGET = {"uniform": spectral.NPS_UNIFORM,
                   "dead-leaves": spectral.NPS_DEAD_LEAVES,
                   "pictorial": spectral.NPS_PICTORIAL}


def cmd_measure(args, config: dict) -> int:
    rep_dir = Path(args.replicates)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim_cfg, scene, sets = _load_replicates(rep_dir)
    window = WindowSpec(taper=config.get("taper", 0.125))
    bins = config.get("bins", 64)
    target_type = sim_cfg.get("target_type", "pictorial")
    nps_variant = _NPS_FOR_TARGET[target_type]
    input_kind = "dead-leaves" if target_type == "dead-leaves" else "pictorial"

    writer = write_curve_json if args.format == "json" else write_curve_csv
    ext = "json" if args.format == "json" else "csv"
    outputs = []
    ps_in = spectral.scene_power_spectrum(scene, window, bins)
    writer(ps_in, out / f"ps_input.{ext}")
    outputs.append(f"ps_input.{ext}")
    for stage, reps in sets.items():
        if target_type == "uniform":
            # a flat target supports no transfer measurement, only noise
            nps = spectral.measure_nps(reps, nps_variant, window, bins)
            writer(nps, out / f"nps_{stage}.{ext}")
            outputs.append(f"nps_{stage}.{ext}")
            continue
        sc = sysperf.characterize(scene, reps, nps_variant, input_kind, window, bins)
        writer(sc.nps, out / f"nps_{stage}.{ext}")
        writer(sc.mtf.spectrum, out / f"mtf_{stage}.{ext}")
        writer(sc.neq.spectrum, out / f"neq_{stage}.{ext}", extra={"mu_A": sc.mu_a})
        outputs += [f"nps_{stage}.{ext}", f"mtf_{stage}.{ext}", f"neq_{stage}.{ext}"]
    resolved = {"replicates_dir": str(rep_dir), "taper": window.taper, "bins": bins,
                "format": args.format, "source": sim_cfg}
    write_manifest(out, "measure", resolved, outputs)
    print(f"wrote {len(outputs)} curves to {out}")
    return EXIT_OK


def cmd_score(args, config: dict) -> int:
    rep_dir = Path(args.replicates)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim_cfg, scene, sets = _load_replicates(rep_dir)
    env = _viewing(config)
    window = WindowSpec(taper=config.get("taper", 0.125))
    bins = config.get("bins", 64)
    target_type = sim_cfg.get("target_type", "pictorial")
    if target_type == "uniform":
        raise UsageError("score needs a structured target (dead-leaves or pictorial)")
    nps_variant = _NPS_FOR_TARGET[target_type]
    input_kind = "dead-leaves" if target_type == "dead-leaves" else "pictorial"
    mtf_variant = (sysperf.MTF_DEAD_LEAVES if target_type == "dead-leaves"
                   else sysperf.MTF_PICTORIAL)
    csf = BartenCsf(env, field_size_deg=env.angular_size_deg(scene.width))
    pipeline = sim_cfg.get("pipeline", {}).get("kind", "")
    snr = float(sim_cfg.get("pipeline", {}).get("snr", float("nan")))
    scene_id = sim_cfg.get("scene_id", "scene")
    ps_in = spectral.scene_power_spectrum(scene, window, bins)

    rows: list[ScoreRow] = []
    for stage, reps in sets.items():
        nps = spectral.measure_nps(reps, nps_variant, window, bins)
        pair = sysperf.spectra_pair(scene, reps, nps, input_kind, window, bins)
        mtf = sysperf.measure_mtf(pair)
        mu = sysperf.mean_signal(reps)
        neq = sysperf.neq(mtf, nps, mu)
        ds = mx.displayed_spectra(ps_in, mtf, nps, env)
        iid = harness.image_id(scene_id, pipeline, snr, stage)

        def add(score: mx.MetricScore):
            rows.append(ScoreRow(iid, pipeline, snr, stage, score.metric,
                                 nps_variant, mtf_variant, "barten",
                                 score.k1, score.k2, score.score))

        add(mx.pic(ds, csf))
        add(mx.sqrin(ds, csf))
        add(mx.log_neq(neq, env))
        add(mx.visual_log_neq(neq, env, csf))
        texture = mx.texture_quality_loss(mtf, env, csf)
        noise_ql = mx.visual_noise_omega(reps, env, csf)
        add(mx.cpiq_score(texture, noise_ql))

    write_scores_csv(rows, out / "scores.csv")
    if args.format == "json":
        (out / "scores.json").write_text(json.dumps(
            [r.__dict__ for r in rows], indent=2) + "\n")
    resolved = {"replicates_dir": str(rep_dir), "taper": window.taper, "bins": bins,
                "viewing": config.get("viewing", {}), "source": sim_cfg}
    write_manifest(out, "score", resolved, ["scores.csv"])
    print(f"wrote {len(rows)} score rows to {out / 'scores.csv'}")
    return EXIT_OK


def cmd_calibrate(args, config: dict) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = read_scores_csv(args.scores)
    if not rows:
        raise UsageError("scores file is empty")
    target = args.target_mean
    ref_stage = config.get("reference_stage", "pre-denoise")
    snrs = [r.snr for r in rows]
    ref_snr = config.get("reference_snr", max(snrs))
    groups: dict[tuple, list[ScoreRow]] = {}
    for r in rows:
        groups.setdefault((r.metric, r.nps_variant, r.mtf_variant, r.csf), []).append(r)
    calibrated: list[ScoreRow] = []
    cal_doc = {}
    for key, rs in sorted(groups.items()):
        ref = [r.score for r in rs if r.snr == ref_snr and r.stage == ref_stage]
        if not ref:
            raise CalibrationError(
                f"no reference rows (snr={ref_snr}, stage={ref_stage}) for {key}")
        cal = mx.calibrate_k1(ref, target)
        cal_doc["|".join(key)] = {"k1": cal.k1, "k2": cal.k2}
        for r in rs:
            calibrated.append(ScoreRow(r.image_id, r.pipeline, r.snr, r.stage,
                                       r.metric, r.nps_variant, r.mtf_variant, r.csf,
                                       cal.k1, cal.k2, cal.apply(r.score)))
    write_scores_csv(calibrated, out / "scores_calibrated.csv")
    (out / "calibration.json").write_text(json.dumps(cal_doc, indent=2, sort_keys=True) + "\n")
    resolved = {"scores": str(args.scores), "target_mean": target,
                "reference_stage": ref_stage, "reference_snr": ref_snr}
    write_manifest(out, "calibrate", resolved,
                   ["scores_calibrated.csv", "calibration.json"])
    print(f"calibrated {len(groups)} variants")
    return EXIT_OK


def _sweep_config(config: dict, seed: int | None) -> SweepConfig:
    kw = dict(config.get("sweep", config))
    kw.pop("viewing", None)
    kw.pop("ratings", None)
    known = set(SweepConfig.__dataclass_fields__) - {"viewing"}
    unknown = set(kw) - known
    if unknown:
        raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
    for tup_key in ("scenes", "pipelines", "snrs", "stages", "metrics",
                    "nps_variants", "mtf_variants", "csfs"):
        if tup_key in kw:
            kw[tup_key] = tuple(kw[tup_key])
    if seed is not None:
        kw["seed"] = seed
    return SweepConfig(viewing=_viewing(config), **kw)


def cmd_sweep(args, config: dict) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _sweep_config(config, args.seed)
    ratings = None
    ratings_path = config.get("ratings")
    if ratings_path and ratings_path != "synthetic":
        ratings = RatingsTable.read_csv(ratings_path)
    result = run_variant_sweep(cfg, ratings=ratings)
    write_scores_csv(result.scores, out / "scores.csv")
    result.report.write_csv(out / "report.csv")
    result.ratings.write_csv(out / "ratings.csv")
    harness.write_scatter_csv(result.scores, result.ratings, out / "scatter.csv")
    if args.format == "json":
        (out / "report.json").write_text(json.dumps(
            [s.__dict__ for s in result.report.stats], indent=2) + "\n")
    resolved = {"sweep": harness.sweep_config_doc(cfg),
                "viewing": config.get("viewing", {}),
                "ratings": ratings_path or "synthetic"}
    write_manifest(out, "sweep", resolved,
                   ["scores.csv", "report.csv", "ratings.csv", "scatter.csv"])
    skipped = len(result.report.skipped)
    print(f"sweep wrote {len(result.scores)} scores, "
          f"{len(result.report.stats)} stat rows, {skipped} variants skipped")
    return EXIT_OK


def cmd_bench(args, config: dict) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = read_scores_csv(args.scores)
    ratings = RatingsTable.read_csv(args.ratings)
    report = BenchmarkReport()
    report.stats, report.unmatched = benchmark(rows, ratings)
    report.write_csv(out / "report.csv")
    harness.write_scatter_csv(rows, ratings, out / "scatter.csv")
    if args.format == "json":
        (out / "report.json").write_text(json.dumps(
            [s.__dict__ for s in report.stats], indent=2) + "\n")
    resolved = {"scores": str(args.scores), "ratings": str(args.ratings)}
    write_manifest(out, "bench", resolved, ["report.csv", "scatter.csv"])
    print(f"bench wrote {len(report.stats)} stat rows "
          f"({report.unmatched} unmatched scores)")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqm",
                                description="scene-dependent spatial quality toolkit")
    p.add_argument("--config", help="JSON config file or an emitted manifest")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="sqm-out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("make-target", help="generate a dead-leaves or uniform target")
    sp.add_argument("--type", choices=("dead-leaves", "uniform"))
    sp.add_argument("--size", type=int)
    sp.set_defaults(fn=cmd_make_target)

    sp = sub.add_parser("simulate", help="scene -> per-stage replicate captures")
    sp.add_argument("--scene", help="raster path or builtin:<kind>")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("measure", help="replicates -> NPS/MTF/NEQ curves")
    sp.add_argument("--replicates", required=True, help="directory from simulate")
    sp.set_defaults(fn=cmd_measure)

    sp = sub.add_parser("score", help="replicates -> metric scores")
    sp.add_argument("--replicates", required=True, help="directory from simulate")
    sp.set_defaults(fn=cmd_score)

    sp = sub.add_parser("calibrate", help="raw scores -> gain-calibrated scores")
    sp.add_argument("--scores", required=True)
    sp.add_argument("--target-mean", type=float, required=True)
    sp.set_defaults(fn=cmd_calibrate)

    sp = sub.add_parser("sweep", help="full variant sweep with benchmark report")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("bench", help="scores + ratings -> error statistics")
    sp.add_argument("--scores", required=True)
    sp.add_argument("--ratings", required=True)
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return args.fn(args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SqmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
