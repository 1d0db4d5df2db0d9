"""Command-line front end wiring the monitoring pipeline stage by stage.

Each subcommand performs one pipeline stage with file handoffs, so every
stage can be rerun and inspected in isolation::

    spattermon simulate --config scene.toml --out run/
    spattermon register --config reg.toml --segmenter reference --out run/reg
    spattermon fpp      --config fpp.toml --out run/fpp
    spattermon analyze | fit | compare | report ...

Exit codes: 0 success, 2 configuration/validation error, 3 runtime failure,
4 partial success (some frames skipped; the count is reported). Outputs are
byte-identical for identical config and seed. ``SPATTER_LOG`` sets the log
level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analytics, fixtures, fpp, pgmio, registration, segmentation, svr, synth
from .config import ConfigError, load_config, validate_config
from .imaging import Frame, Homography

log = logging.getLogger("spattermon")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_PARTIAL = 4


class RuntimeFailure(RuntimeError):
    """Subcommand-level failure mapping to exit code 3."""


def _scene_from_config(cfg: dict, seed_override: int | None) -> synth.SceneSpec:
    scene = cfg.get("scene", {})
    flare_cfg = cfg.get("flare")
    flare = None
    if flare_cfg is not None:
        flare = synth.FlareSpec(
            column_x=float(flare_cfg.get("column_x", 60.0)),
            spot_count=int(flare_cfg.get("spot_count", 4)),
            spot_spacing=float(flare_cfg.get("spot_spacing", 22.0)),
            spot_intensity=float(flare_cfg.get("spot_intensity", 180.0)),
            spot_radius=float(flare_cfg.get("spot_radius", 2.0)),
        )
    width = int(scene.get("width", 256))
    height = int(scene.get("height", 256))
    mp_center = None
    if "mp_center" in scene:
        mp_center = (float(scene["mp_center"][0]), float(scene["mp_center"][1]))
    seed = int(scene.get("seed", 1)) if seed_override is None else seed_override
    try:
        return synth.SceneSpec(
            image_size=(width, height),
            mp_center=mp_center,
            mp_radius=float(scene.get("mp_radius", 12.0)),
            mp_peak_intensity=float(scene.get("mp_peak", 255.0)),
            scan_direction=float(scene.get("scan_direction", 0.0)),
            spatter_count=int(scene.get("spatter_count", 3)),
            spatter_angle_distribution=(
                float(scene.get("angle_mean", 180.0)),
                float(scene.get("angle_spread", 50.0)),
            ),
            spatter_radius_range=(
                float(scene.get("radius_min", 2.0)),
                float(scene.get("radius_max", 4.0)),
            ),
            spatter_intensity_range=(
                float(scene.get("intensity_min", 120.0)),
                float(scene.get("intensity_max", 180.0)),
            ),
            flare=flare,
            background_noise_sigma=float(scene.get("noise_sigma", 8.0)),
            rng_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


_SIMULATE_SCHEMA = {
    "scene": {
        "width", "height", "mp_center", "mp_radius", "mp_peak", "scan_direction",
        "spatter_count", "angle_mean", "angle_spread", "radius_min", "radius_max",
        "intensity_min", "intensity_max", "noise_sigma", "seed",
    },
    "flare": {"column_x", "spot_count", "spot_spacing", "spot_intensity", "spot_radius"},
    "layer": {
        "layer_index", "hatch_angle", "hatch_space_mm", "bounds_mm", "power_w",
        "speed_mm_s", "sample_spacing_mm", "mm_per_px", "seed",
    },
    "fringe": {
        "width", "height", "period_px", "k_h", "gamma", "noise_sigma", "field",
        "peak_um", "seed", "bar", "layer",
    },
}


def _write_scene_outputs(out_dir: Path, frames: list[dict], seed: int) -> None:
    pgmio.dump_json({"schema_version": 1, "seed": seed, "frames": frames}, out_dir / "manifest.json")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _SIMULATE_SCHEMA)
    if not any(k in cfg for k in ("scene", "layer", "fringe")):
        raise ConfigError("simulate needs a [scene], [layer], or [fringe] section")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if "layer" in cfg:
        lc = cfg["layer"]
        scene = _scene_from_config(cfg, None)
        seed = int(lc.get("seed", 1)) if args.seed is None else args.seed
        bounds = lc.get("bounds_mm", [0.0, 0.0, 10.0, 10.0])
        if len(bounds) != 4:
            raise ConfigError("bounds_mm must be [x0, y0, x1, y1]")
        try:
            layer_spec = synth.LayerSceneSpec(
                layer_index=int(lc.get("layer_index", 0)),
                hatch_angle=float(lc.get("hatch_angle", 0.0)),
                hatch_space_mm=float(lc.get("hatch_space_mm", 1.0)),
                bounds_mm=tuple(float(v) for v in bounds),
                power_w=float(lc.get("power_w", 250.0)),
                speed_mm_s=float(lc.get("speed_mm_s", 1000.0)),
                sample_spacing_mm=float(lc.get("sample_spacing_mm", 1.0)),
                mm_per_px=float(lc.get("mm_per_px", 0.05)),
                scene=scene,
                rng_seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        records = synth.synth_layer_sequence(layer_spec)
        items = [(r.frame, r.labelmap, r.ground_truth, r.frame_index, r) for r in records]
    elif "scene" in cfg:
        scene = _scene_from_config(cfg, args.seed)
        try:
            frame, labels, truth = synth.synth_frame(scene)
        except synth.SceneInfeasibleError as exc:
            raise RuntimeFailure(str(exc)) from exc
        items = [(frame, labels, truth, 0, None)]
    else:
        items = []

    manifest_rows = []
    if items:
        for sub in ("frames", "labels", "gt"):
            (out_dir / sub).mkdir(exist_ok=True)
        for frame, labels, truth, index, rec in items:
            frame_name = f"frames/frame_{index:04d}.pgm"
            label_name = f"labels/label_{index:04d}.pgm"
            gt_name = f"gt/gt_{index:04d}.json"
            pgmio.write_frame(out_dir / frame_name, frame)
            pgmio.write_labelmap(out_dir / label_name, labels)
            pgmio.dump_json(truth.to_dict(), out_dir / gt_name)
            row = {
                "index": index,
                "frame": frame_name,
                "label": label_name,
                "gt": gt_name,
                "scan_direction": rec.scan_direction if rec else 0.0,
                "transform": [float(v) for v in (
                    rec.plate_transform.matrix.ravel() if rec else np.eye(3).ravel()
                )],
            }
            if rec:
                row["mp_plate_mm"] = list(rec.mp_plate_position)
            manifest_rows.append(row)
        seed_used = args.seed if args.seed is not None else int(
            cfg.get("layer", cfg.get("scene", {})).get("seed", 1)
        )
        _write_scene_outputs(out_dir, manifest_rows, seed_used)
        log.info("simulate: wrote %d frame(s) to %s", len(manifest_rows), out_dir)

    if "fringe" in cfg:
        fc = cfg["fringe"]
        seed = int(fc.get("seed", 1)) if args.seed is None else args.seed
        width = int(fc.get("width", 256))
        height = int(fc.get("height", 256))
        try:
            truth_h = fpp.make_height_field(
                str(fc.get("field", "bumps")), width, height, float(fc.get("peak_um", 100.0))
            )
            obj, ref = fpp.synth_fringes(
                truth_h,
                fringe_period=float(fc.get("period_px", 32.0)),
                k_h=float(fc.get("k_h", 2.0)),
                gamma=float(fc.get("gamma", 2.2)),
                noise_sigma=float(fc.get("noise_sigma", 0.0)),
                seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        fringe_dir = out_dir / "fringes"
        meta = {
            "period_px": float(fc.get("period_px", 32.0)),
            "k_h": float(fc.get("k_h", 2.0)),
            "bar": int(fc.get("bar", 0)),
            "layer": int(fc.get("layer", 0)),
        }
        fpp.save_fringe_stack(fringe_dir, "object", obj, meta)
        fpp.save_fringe_stack(fringe_dir, "reference", ref, meta)
        fpp.save_heightmap(fringe_dir / "truth_height.raw", truth_h, {"k_h": meta["k_h"]})
        log.info("simulate: wrote fringe stacks to %s", fringe_dir)
    return EXIT_OK


_REGISTER_SCHEMA = {
    "register": {
        "input_dir", "segmenter", "layer_index", "eps", "min_pts", "t_mp",
        "t_spatter", "flare_k", "flare_tol_x", "exclude_mp_margin",
    },
}


def cmd_register(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _REGISTER_SCHEMA, required_sections=("register",))
    rc = cfg["register"]
    input_dir = Path(rc.get("input_dir", "."))
    manifest_path = input_dir / "manifest.json"
    if not manifest_path.is_file():
        raise RuntimeFailure(f"no manifest.json under {input_dir}")
    manifest = pgmio.load_json(manifest_path)
    if not manifest.get("frames"):
        raise RuntimeFailure(f"{manifest_path} lists no frames")

    segmenter_name = args.segmenter or str(rc.get("segmenter", "labelmap"))
    seg_cfg = segmentation.SegmenterConfig(
        t_mp=float(rc.get("t_mp", 200.0)),
        t_spatter=float(rc.get("t_spatter", 100.0)),
        flare_k=int(rc.get("flare_k", 3)),
        flare_tol_x=float(rc.get("flare_tol_x", 1.5)),
    )
    if segmenter_name == "labelmap":
        segmenter = None
    elif segmenter_name == "reference":
        segmenter = lambda fr: segmentation.reference_segment(fr, seg_cfg)
    elif segmenter_name in ("kmeans3", "kmeans4"):
        k = 3 if segmenter_name == "kmeans3" else 4
        segmenter = lambda fr: segmentation.kmeans_segment(fr, k)
    else:
        raise ConfigError(f"unknown segmenter {segmenter_name!r}")

    params = registration.DbscanParams(
        eps=float(rc.get("eps", 3.0)), min_pts=int(rc.get("min_pts", 2))
    )
    margin = rc.get("exclude_mp_margin", 3.0)
    margin = None if margin in (False,) else float(margin)

    def build_input(row) -> registration.FrameInput:
        transform = Homography(np.array(row["transform"], dtype=float).reshape(3, 3))
        labelmap = None
        frame = None
        if segmenter_name == "labelmap":
            labelmap = pgmio.read_labelmap(input_dir / row["label"])
        else:
            frame = pgmio.read_frame(input_dir / row["frame"], frame_index=row["index"])
        return registration.FrameInput(
            frame_index=int(row["index"]),
            scan_direction=float(row["scan_direction"]),
            plate_transform=transform,
            frame=frame,
            labelmap=labelmap,
        )

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        inputs = list(pool.map(build_input, manifest["frames"]))
    signature_map = registration.register_layer(
        inputs,
        layer_index=int(rc.get("layer_index", 0)),
        segmenter=segmenter,
        params=params,
        exclude_mp_margin=margin,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    registration.write_signature_json(out_dir / "signatures.json", signature_map)
    registration.write_signature_csv(out_dir / "signatures.csv", signature_map)
    if signature_map.skipped_frames:
        log.warning(
            "register: skipped %d frame(s) without a melt pool",
            len(signature_map.skipped_frames),
        )
        print(f"register: partial success, {len(signature_map.skipped_frames)} frame(s) skipped")
        return EXIT_PARTIAL
    return EXIT_OK


_FPP_SCHEMA = {
    "fpp": {
        "object_header", "reference_header", "k_h", "region", "layer", "bar",
        "modulation_threshold",
    },
}


def cmd_fpp(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _FPP_SCHEMA, required_sections=("fpp",))
    fc = cfg["fpp"]
    for key in ("object_header", "reference_header"):
        if key not in fc:
            raise ConfigError(f"[fpp] section needs {key!r}")
        if not Path(fc[key]).is_file():
            raise RuntimeFailure(f"missing fringe stack header: {fc[key]}")
    try:
        obj_stack, obj_meta = fpp.load_fringe_stack(fc["object_header"])
        ref_stack, _ = fpp.load_fringe_stack(fc["reference_header"])
    except (pgmio.FormatError, OSError, KeyError, ValueError) as exc:
        raise RuntimeFailure(f"cannot load fringe stacks: {exc}") from exc

    k_h = float(fc.get("k_h", obj_meta.get("k_h", 1.0)))
    threshold = float(fc.get("modulation_threshold", fpp.DEFAULT_MODULATION_THRESHOLD))
    obj_phase = fpp.wrap_phase(fpp.gamma_correct(obj_stack), threshold)
    ref_phase = fpp.wrap_phase(fpp.gamma_correct(ref_stack), threshold)
    try:
        dphase = fpp.unwrap_reference(obj_phase, ref_phase)
    except fpp.NoValidOverlapError as exc:
        raise RuntimeFailure(str(exc)) from exc
    heights = fpp.phase_to_height(dphase, k_h)

    region = None
    if "region" in fc:
        if len(fc["region"]) != 4:
            raise ConfigError("region must be [x0, y0, x1, y1]")
        region = tuple(int(v) for v in fc["region"])
    try:
        rough = fpp.compute_sa(heights, region)
    except ValueError as exc:
        raise RuntimeFailure(str(exc)) from exc

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    fpp.save_heightmap(out_dir / "height.raw", heights, {"k_h": k_h})
    layer = int(fc.get("layer", obj_meta.get("layer", 0)))
    bar = int(fc.get("bar", obj_meta.get("bar", 0)))
    fpp.append_roughness_csv(
        out_dir / "roughness.csv", [(layer, bar, rough.sa, rough.z_std, rough.n_valid)]
    )
    log.info("fpp: Sa = %.4f um over %d valid pixels", rough.sa, rough.n_valid)
    return EXIT_OK


_ANALYZE_SCHEMA = {
    "analyze": {"signatures_dir", "signatures", "count_bin_max", "angle_bin_width"},
}


def _collect_signature_paths(ac: dict) -> list[Path]:
    paths: list[Path] = []
    if "signatures" in ac:
        paths = [Path(p) for p in ac["signatures"]]
    elif "signatures_dir" in ac:
        paths = sorted(Path(ac["signatures_dir"]).glob("*.json"))
    if not paths:
        raise RuntimeFailure("no signature files to analyze")
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise RuntimeFailure(f"missing signature file(s): {', '.join(missing)}")
    return paths


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _ANALYZE_SCHEMA, required_sections=("analyze",))
    ac = cfg["analyze"]
    maps = [registration.read_signature_json(p) for p in _collect_signature_paths(ac)]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    count_max = int(ac.get("count_bin_max", 10))
    analytics.emit_report(
        out_dir,
        records=(),
        signature_maps=maps,
        count_bin_edges=[float(v) for v in range(count_max + 1)],
        angle_bin_width=float(ac.get("angle_bin_width", 30.0)),
    )
    rows = []
    for m in sorted(maps, key=lambda s: s.layer_index):
        mean = m.mean_spatter_count
        std = m.std_spatter_count
        rows.append(
            [
                m.layer_index,
                len(m.observations),
                "" if mean is None else f"{mean:.4f}",
                "" if std is None else f"{std:.4f}",
                len(m.skipped_frames),
            ]
        )
    with open(out_dir / "layer_summary.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "n_observations", "mean_count", "std_count", "n_skipped"])
        writer.writerows(rows)
    return EXIT_OK


_FIT_SCHEMA = {"fit": {"features_csv", "use_fixture_sweeps"}}


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _FIT_SCHEMA, required_sections=("fit",))
    fc = cfg["fit"]
    rows = []
    if fc.get("use_fixture_sweeps", False):
        power = fixtures.load_power_sweep()
        fit = analytics.linfit([p for p, _ in power], [c for _, c in power])
        rows.append(("count_vs_power_w", fit))
        speed = fixtures.load_speed_sweep()
        fit = analytics.linfit([s for s, _ in speed], [c for _, c in speed])
        rows.append(("count_vs_speed_m_s", fit))
    if "features_csv" in fc:
        if not Path(fc["features_csv"]).is_file():
            raise RuntimeFailure(f"missing features CSV: {fc['features_csv']}")
        records = analytics.read_feature_csv(fc["features_csv"])
        if len(records) >= 2:
            xs = [r.ved for r in records]
            if len(set(xs)) >= 2:
                fit = analytics.linfit(xs, [r.sa_um for r in records])
                rows.append(("sa_vs_ved", fit))
            xs = [r.mean_spatter_count for r in records]
            if len(set(xs)) >= 2:
                fit = analytics.linfit(xs, [r.sa_um for r in records])
                rows.append(("sa_vs_count", fit))
    if not rows:
        raise RuntimeFailure("nothing to fit: provide features_csv or use_fixture_sweeps")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "fits.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["fit", "slope", "intercept", "r_squared", "n"])
        for name, fit in rows:
            writer.writerow(
                [name, f"{fit.slope:.8f}", f"{fit.intercept:.8f}", f"{fit.r_squared:.6f}", fit.n]
            )
    return EXIT_OK


_COMPARE_SCHEMA = {"compare": {"features_csv", "c", "epsilon", "gamma"}}


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _COMPARE_SCHEMA, required_sections=("compare",))
    cc = cfg["compare"]
    if "features_csv" not in cc:
        raise ConfigError("[compare] section needs 'features_csv'")
    path = Path(cc["features_csv"])
    if not path.is_file():
        raise RuntimeFailure(f"missing features CSV: {path}")
    records = analytics.read_feature_csv(path)
    if len(records) < 8:
        raise RuntimeFailure(f"model comparison needs >= 8 records, found {len(records)}")
    hp = svr.SvrHyperparams(
        c=float(cc.get("c", 10.0)),
        epsilon=float(cc.get("epsilon", 0.5)),
        gamma_kernel=float(cc["gamma"]) if "gamma" in cc else None,
    )
    try:
        rows = svr.compare_models(records, hp)
    except svr.ConvergenceError as exc:
        raise RuntimeFailure(str(exc)) from exc

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    svr.write_comparison_csv(out_dir / "comparison.csv", rows)

    from .svgplot import SvgPlot, make_axes

    rmses = [row.metrics.rmse for row in rows]
    plot = SvgPlot(
        make_axes(range(len(rows) + 1), rmses + [0.0]),
        "Leave-one-out RMSE by model input",
        "model (see comparison.csv row order)",
        "RMSE (um)",
    )
    plot.bars(list(range(len(rows) + 1)), rmses)
    (out_dir / "comparison.svg").write_text(plot.to_string())
    best = min(rows, key=lambda r: r.metrics.rmse)
    log.info("compare: best model input %s (RMSE %.3f um)", best.feature_set, best.metrics.rmse)
    return EXIT_OK


_REPORT_SCHEMA = {"report": {"features_csv", "signatures_dir", "signatures"}}


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg, _REPORT_SCHEMA, required_sections=("report",))
    rc = cfg["report"]
    records = []
    if "features_csv" in rc:
        if not Path(rc["features_csv"]).is_file():
            raise RuntimeFailure(f"missing features CSV: {rc['features_csv']}")
        records = analytics.read_feature_csv(rc["features_csv"])
    maps = []
    if "signatures_dir" in rc or "signatures" in rc:
        maps = [registration.read_signature_json(p) for p in _collect_signature_paths(rc)]
    out_dir = Path(args.out)
    analytics.emit_report(out_dir, records=records, signature_maps=maps)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spattermon",
        description="Melt-pool spatter registration and layer-surface analytics pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML-style run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="per-frame parallelism (results are independent of N)")
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=func)
        return p

    add("simulate", cmd_simulate, "render synthetic scenes and/or fringe stacks")
    reg = add("register", cmd_register, "extract and register spatter signatures")
    reg.add_argument(
        "--segmenter",
        choices=["labelmap", "reference", "kmeans3", "kmeans4"],
        default=None,
        help="label source (overrides the config)",
    )
    add("fpp", cmd_fpp, "reconstruct layer height maps and roughness")
    add("analyze", cmd_analyze, "histograms and per-layer summaries of signatures")
    add("fit", cmd_fit, "linear fits of spatter counts and roughness")
    add("compare", cmd_compare, "leave-one-out comparison of regression inputs")
    add("report", cmd_report, "render the full CSV/SVG report bundle")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SPATTER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, pgmio.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
