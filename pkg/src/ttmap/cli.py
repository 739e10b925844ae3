"""``ttmap`` command line: map, plan, bench, simulate, export.

Exit codes: 0 success, 2 no path, 3 invalid input, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ConfigError, PipelineConfig, load_config
from .fusion import traversability_rgb
from .gridmap import GridSpec, PointFileError, load_dump, read_point_file, read_pose_file, \
    write_point_file, write_pose_file
from .pipeline import MappingPipeline
from .planner import InvalidStart, NoPath, VehicleFootprint, plan
from .postprocess import OccupancyGrid, to_occupancy
from .semantics import (CameraModel, DimensionMismatch, PGMError, load_calibration,
                        nearest_stamp, read_label_image, save_calibration, write_pgm)

EXIT_OK, EXIT_NO_PATH, EXIT_INVALID, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("ttmap")


class InputError(ValueError):
    """Bad user input; reported with exit code 3."""


class _Parser(argparse.ArgumentParser):
    # argparse's own exit code 2 would collide with "no path"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# --- map ----------------------------------------------------------------------------

def _camera_for(args, cfg: PipelineConfig) -> CameraModel | None:
    if args.camera:
        return load_calibration(args.camera)
    if not cfg.camera:
        return None
    path = Path(cfg.camera)
    if not path.is_absolute() and args.config:
        # relative to the config file that names it
        path = Path(args.config).parent / path
    return load_calibration(path)


def cmd_map(args) -> int:
    cfg = load_config(args.config)
    pipe = MappingPipeline(cfg, use_semantics=not args.geometric_only)
    cam = _camera_for(args, cfg)
    poses = read_pose_file(args.poses) if args.poses else None
    if args.labels and cam is None:
        raise InputError("label images need a camera calibration (--camera or config 'camera')")

    images, stamps = [], []
    for path in args.labels or []:
        # label images arrive pre-segmented; loading them stands in for the segmentation stage
        with pipe.timer("segmentation"):
            img, stamp = read_label_image(path)
        if stamp is None:
            raise InputError(f"{path}: no timestamp (add a '# stamp=<t>' comment or name it <t>.pgm)")
        images.append(img)
        stamps.append(stamp)
    pose_stamps = [p.stamp for p in poses] if poses else []

    for path in args.cloud:
        pts = read_point_file(path)
        if len(pts) == 0:
            log.warning("%s: no points", path)
            continue
        if np.any(np.diff(pts[:, 0]) < 0):
            raise InputError(f"{path}: timestamps must be non-decreasing")
        stamp = float(pts[-1, 0])
        img = frame_cam = None
        k = nearest_stamp(stamps, stamp, cfg.image_time_tolerance)
        if k is not None:
            img, frame_cam = images[k], cam
            if poses:
                # calibration E is vehicle->camera; compose with the vehicle pose
                kp = int(np.argmin(np.abs(np.asarray(pose_stamps) - stamps[k])))
                frame_cam = cam.at_pose(poses[kp].matrix())
        elif images:
            log.info("%s: no label image within %.3f s; heights only", path, cfg.image_time_tolerance)
        rep = pipe.process(pts, img, frame_cam, now=stamp)
        log.info("%s: %d points, %d labeled, %d cells updated", path, rep.points,
                 rep.labeled_points, rep.cells_updated)

    out = Path(args.out)
    pipe.map.dump(out, layers=("height", "slope", "step", "roughness", "t_geo", "traversability"))
    occ = pipe.occupancy()
    occ.save(out / "occupancy.pgm")
    Image.fromarray(traversability_rgb(pipe.map.traversability)).save(out / "traversability.png")
    populated = int(np.count_nonzero(pipe.map.count))
    print(f"map: {populated} populated cells written to {out}")
    print(pipe.timer.format())
    return EXIT_OK


# --- plan ---------------------------------------------------------------------------

def cmd_plan(args) -> int:
    cfg = load_config(args.config)
    try:
        grid = OccupancyGrid.load(args.grid)
    except (OSError, KeyError, json.JSONDecodeError, PGMError) as exc:
        raise InputError(f"cannot read occupancy grid {args.grid}: {exc}") from None
    fp = cfg.footprint
    overrides = {k: v for k, v in (("length", args.length), ("width", args.width),
                                   ("min_turn_radius", args.turn_radius)) if v is not None}
    if overrides or args.no_reverse:
        fp = VehicleFootprint(overrides.get("length", fp.length), overrides.get("width", fp.width),
                              overrides.get("min_turn_radius", fp.min_turn_radius),
                              fp.allow_reverse and not args.no_reverse)
    try:
        path = plan(grid, args.start, args.goal, fp, cfg.planner)
    except InvalidStart as exc:
        print(f"invalid start: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoPath as exc:
        print(f"no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    path.to_csv(args.out)
    print(f"path: {len(path.poses)} poses, {path.total_length:.3f} m, "
          f"{path.expansions} expansions -> {args.out}")
    return EXIT_OK


# --- bench --------------------------------------------------------------------------

def cmd_bench(args) -> int:
    from .simulator import benchmark, default_suite, load_scenarios

    cfg = load_config(args.config)
    suite = load_scenarios(args.suite) if args.suite else default_suite()
    if args.trials < 10:
        raise InputError(f"--trials must be at least 10, got {args.trials}")

    def progress(o):
        log.info("%s trial %d %s: %s", o.scenario, o.trial, o.mode, o.result.value)

    result = benchmark(suite, trials=args.trials, seed=args.seed, base_cfg=cfg, progress=progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trial_log.csv").write_text(result.trial_log_csv())
    (out / "summary.csv").write_text(result.summary_csv())
    print(result.format_table())
    print(f"trial log and summary written to {out}")
    return EXIT_OK


# --- simulate -----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .simulator import (SensorConfig, Sensors, SurveyConfig, default_suite, generate_world,
                            load_scenarios, survey_route)
    from .simulator.sensing import body_to_camera

    suite = load_scenarios(args.suite) if args.suite else default_suite()
    by_name = {s.name: s for s in suite}
    if args.scenario not in by_name:
        raise InputError(f"unknown scenario {args.scenario!r}; available: {sorted(by_name)}")
    spec = by_name[args.scenario]
    world = generate_world(spec)
    scfg = SensorConfig(image_width=args.image_width, image_height=args.image_height,
                        noise_sigma=args.noise, lidar_points=args.points)
    survey = SurveyConfig(stations_per_axis=args.stations, headings=args.headings)
    sensors = Sensors(world, scfg)
    rng = np.random.default_rng(args.seed)

    out = Path(args.out)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(json.dumps(spec.to_dict(), indent=2))
    np.save(out / "height.npy", world.height)
    write_pgm(out / "texture.pgm", np.flipud(world.texture.T))
    poses = []
    for k, (x, y, yaw) in enumerate(survey_route(world, survey)):
        frame = sensors.sense(x, y, yaw, k * survey.frame_dt, rng)
        write_point_file(out / "clouds" / f"{k:04d}.txt", frame.points)
        write_pgm(out / "labels" / f"{k:04d}.pgm", frame.label_image, {"stamp": repr(frame.stamp)})
        poses.append(frame.pose)
    write_pose_file(out / "poses.txt", poses)
    # vehicle->camera extrinsic; `ttmap map --poses` composes it with each pose
    save_calibration(out / "calibration.json", sensors.camera.with_extrinsic(body_to_camera(scfg)))
    res = PipelineConfig().grid.resolution
    W, H = spec.extent
    cfg = {"grid": GridSpec((0.0, 0.0), int(round(W / res)), int(round(H / res)), res).to_dict(),
           "camera": "calibration.json"}
    (out / "config.json").write_text(json.dumps(cfg, indent=2))
    print(f"simulate: {len(poses)} frames of {spec.name} written to {out}")
    return EXIT_OK


# --- export -------------------------------------------------------------------------

def _grey(layer: np.ndarray) -> np.ndarray:
    """Layer scaled to 1..255 over its finite range; absent cells are 0. Row 0 = max y."""
    finite = np.isfinite(layer)
    img = np.zeros(layer.shape, dtype=np.uint8)
    if finite.any():
        lo, hi = float(layer[finite].min()), float(layer[finite].max())
        scale = (layer[finite] - lo) / (hi - lo) if hi > lo else np.ones(finite.sum())
        img[finite] = (1 + np.round(scale * 254)).astype(np.uint8)
    return np.flipud(img.T)


def cmd_export(args) -> int:
    try:
        spec, layers = load_dump(args.dump)
    except (OSError, KeyError, json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"cannot read map dump {args.dump}: {exc}") from None
    out = Path(args.out)
    if args.layer == "occupancy":
        if "traversability" not in layers:
            raise InputError("dump has no traversability layer")
        cfg = load_config(args.config)
        occ = to_occupancy(layers["traversability"], cfg.t_occ, args.unknown or cfg.unknown_policy,
                           spec=spec)
        occ.save(out.with_suffix(".pgm"))
        print(f"export: occupancy -> {out.with_suffix('.pgm')}")
        return EXIT_OK
    if args.layer not in layers:
        raise InputError(f"layer {args.layer!r} not in dump; available: {sorted(layers)}")
    layer = layers[args.layer]
    if args.format == "png":
        img = traversability_rgb(layer) if args.layer == "traversability" else _grey(layer)
        Image.fromarray(img).save(out)
    else:
        write_pgm(out, _grey(layer), {"layer": args.layer})
    print(f"export: {args.layer} -> {out}")
    return EXIT_OK


# --- entry point --------------------------------------------------------------------

def _pose(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"pose must be 'x,y,theta', got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"pose must have 3 values, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ttmap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-frame progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("map", help="build a traversability map from clouds and label images")
    m.add_argument("--config")
    m.add_argument("--cloud", nargs="+", required=True, help="point files, one frame each")
    m.add_argument("--labels", nargs="*", help="label PGMs with stamps")
    m.add_argument("--camera", help="calibration JSON (overrides config)")
    m.add_argument("--poses", help="vehicle poses; makes the calibration vehicle->camera")
    m.add_argument("--geometric-only", action="store_true")
    m.add_argument("--out", required=True, help="output directory")
    m.set_defaults(func=cmd_map)

    pl = sub.add_parser("plan", help="plan a path on an occupancy grid")
    pl.add_argument("--config")
    pl.add_argument("--grid", required=True, help="occupancy PGM or its JSON sidecar")
    pl.add_argument("--start", type=_pose, required=True, help="x,y,theta")
    pl.add_argument("--goal", type=_pose, required=True, help="x,y,theta")
    pl.add_argument("--length", type=float)
    pl.add_argument("--width", type=float)
    pl.add_argument("--turn-radius", type=float)
    pl.add_argument("--no-reverse", action="store_true")
    pl.add_argument("--out", default="path.csv")
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="run the two-mode planning benchmark")
    b.add_argument("--config")
    b.add_argument("--suite", help="scenario suite JSON (default: bundled suite)")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="bench_out")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("simulate", help="dump a synthetic world and its sensor frames")
    s.add_argument("--suite")
    s.add_argument("--scenario", default="s1-water")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stations", type=int, default=3)
    s.add_argument("--headings", type=int, default=6)
    s.add_argument("--points", type=int, default=20000)
    s.add_argument("--noise", type=float, default=0.02)
    s.add_argument("--image-width", type=int, default=320)
    s.add_argument("--image-height", type=int, default=180)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("export", help="render a dumped layer as PNG or PGM")
    e.add_argument("--dump", required=True, help="map dump directory")
    e.add_argument("--layer", default="traversability",
                   help="layer name, or 'occupancy' for a planner grid")
    e.add_argument("--format", choices=("png", "pgm"), default="png")
    e.add_argument("--config")
    e.add_argument("--unknown", choices=("occupied", "free", "unknown"))
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 3, --help exits 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError, PointFileError, PGMError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # validation failures from specs and configs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
