"""Command-line front end: run, eval, sweep, bench, compare.

Exit codes: 0 success, 1 I/O or data errors, 2 configuration errors,
3 empty ground truth.  The CONFLUENCE_LOG environment variable
(error/warn/info/debug) controls diagnostics on stderr; reports go to
stdout or --output.  Identical invocations produce byte-identical
reports (bench wall-clock timings excepted).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .detection_io import (
    ParseError,
    RecordError,
    AnnotationError,
    load_detections,
    load_ground_truth,
    write_detections,
)
from .evaluation import (
    EmptyGroundTruthError,
    EvalSummary,
    coco_summary,
    default_band,
    default_grid,
    threshold_sweep,
)
from .geometry import BoxCorners
from .suppression import (
    ALGORITHMS,
    DECAY_MODES,
    ConfigError,
    Detection,
    SuppressionConfig,
    result_detections,
    suppress,
)

log = logging.getLogger("confluence")

_DEFAULTS = SuppressionConfig()
_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}
_METRIC_NAMES = [name for name, _ in EvalSummary(
    ap=0, ap50=0, ap75=0, ap_small=0, ap_medium=0, ap_large=0,
    ar1=0, ar10=0, ar100=0, ar_small=0, ar_medium=0, ar_large=0,
).items()]

# Keys accepted in compare config specs, mirroring the CLI flag names.
_SPEC_KEYS = {
    "ct": "confluence_threshold",
    "iou-threshold": "iou_threshold",
    "decay": "decay",
    "sigma": "sigma",
    "score-floor": "score_floor",
    "class-agnostic": "class_agnostic",
}


def _setup_logging() -> None:
    raw = os.environ.get("CONFLUENCE_LOG")
    level = _LOG_LEVELS.get((raw or "warn").lower())
    # Rebuild the handler each invocation so it writes to the current
    # sys.stderr (main() may be called repeatedly in one process).
    for handler in list(log.handlers):
        log.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.propagate = False
    log.setLevel(level if level is not None else logging.WARNING)
    if raw is not None and level is None:
        log.warning("unknown CONFLUENCE_LOG value %r; using warn", raw)


def _config_from_args(args: argparse.Namespace) -> SuppressionConfig:
    return SuppressionConfig(
        algorithm=args.algorithm,
        confluence_threshold=args.ct,
        iou_threshold=args.iou_threshold,
        decay=args.decay,
        sigma=args.sigma,
        score_floor=args.score_floor,
        class_agnostic=args.class_agnostic,
    )


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"grid must be numeric start:stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise ConfigError(f"grid needs step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(count + 1)]


def _parse_band(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"band must be low:high, got {text!r}")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"band must be numeric low:high, got {text!r}")
    if hi < lo:
        raise ConfigError(f"band needs high >= low, got {text!r}")
    return (lo, hi)


def _parse_config_spec(spec: str) -> tuple[str, SuppressionConfig]:
    """Parse 'algorithm[:key=value,...]' into a config; label is the spec."""
    algorithm, _, rest = spec.partition(":")
    if algorithm not in ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {algorithm!r} in config spec {spec!r}"
        )
    kwargs: dict[str, object] = {}
    if rest:
        for pair in rest.split(","):
            key, sep, value = pair.partition("=")
            key = key.strip()
            if not sep or key not in _SPEC_KEYS:
                raise ConfigError(f"bad entry {pair!r} in config spec {spec!r}")
            field = _SPEC_KEYS[key]
            if field == "decay":
                kwargs[field] = value.strip()
            elif field == "class_agnostic":
                if value.strip() not in ("true", "false"):
                    raise ConfigError(
                        f"class-agnostic must be true or false in {spec!r}"
                    )
                kwargs[field] = value.strip() == "true"
            else:
                try:
                    kwargs[field] = float(value)
                except ValueError:
                    raise ConfigError(f"non-numeric {key}={value!r} in {spec!r}")
    return spec, SuppressionConfig(algorithm=algorithm, **kwargs)


def _load_dets(path: str, *, strict: bool, score_floor: float):
    loaded = load_detections(
        path,
        strict=strict,
        score_floor=score_floor,
        csv_format=str(path).endswith(".csv"),
    )
    if loaded.dropped_invalid or loaded.dropped_below_floor:
        log.info(
            "loaded %d records from %s (dropped %d invalid, %d below floor)",
            loaded.total, path, loaded.dropped_invalid, loaded.dropped_below_floor,
        )
    return loaded


def _suppress_images(by_image, config, jobs):
    images = sorted(by_image)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outs = pool.map(lambda img: suppress(by_image[img], config), images)
            return dict(zip(images, outs))
    return {img: suppress(by_image[img], config) for img in images}


def _emit(text: str, output: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _figures_dir(args: argparse.Namespace) -> str | None:
    directory = getattr(args, "figures", None)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return directory


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    loaded = _load_dets(args.detections, strict=args.strict_io,
                        score_floor=config.score_floor)
    results = _suppress_images(loaded.by_image, config, args.jobs)
    kept = sum(len(r.kept) for r in results.values())
    removed = sum(r.removed_count for r in results.values())
    if args.output:
        write_detections(results, args.output)
        sys.stdout.write(f"kept {kept} removed {removed}\n")
    else:
        buf = io.StringIO()
        write_detections(results, buf)
        sys.stdout.write(buf.getvalue() + "\n")
        log.info("kept %d removed %d", kept, removed)
    return 0


def _eval_summary(args: argparse.Namespace, config: SuppressionConfig) -> EvalSummary:
    loaded = _load_dets(args.detections, strict=args.strict_io,
                        score_floor=config.score_floor)
    truth = load_ground_truth(args.ground_truth)
    dets_by_image = loaded.by_image
    if args.suppress:
        results = _suppress_images(dets_by_image, config, args.jobs)
        dets_by_image = {img: result_detections(r) for img, r in results.items()}
    return coco_summary(dets_by_image, truth.by_image)


def _format_summary(summary: EvalSummary, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(dict(summary.items()), indent=1)
    if fmt == "csv":
        return _csv_text(["metric", "value"],
                         [[name, repr(value)] for name, value in summary.items()])
    width = max(len(name) for name in _METRIC_NAMES)
    return "\n".join(f"{name:<{width}}  {value!r}" for name, value in summary.items())


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summary = _eval_summary(args, config)
    _emit(_format_summary(summary, args.format), args.output)
    directory = _figures_dir(args)
    if directory:
        from . import figures

        path = os.path.join(directory, "eval.png")
        figures.render_eval(summary, path)
        log.info("wrote %s", path)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    grid = _parse_grid(args.grid) if args.grid else default_grid(config.algorithm)
    band = _parse_band(args.band) if args.band else default_band(config.algorithm)
    loaded = _load_dets(args.detections, strict=args.strict_io,
                        score_floor=config.score_floor)
    truth = load_ground_truth(args.ground_truth)
    result = threshold_sweep(loaded.by_image, truth.by_image, config, grid, band=band)

    stability = result.band_stability
    if args.format == "json":
        payload = {
            "algorithm": config.algorithm,
            "points": [
                {"threshold": p.threshold, "ap": p.summary.ap} for p in result.points
            ],
            "band": list(result.band),
            "band_stability": stability,
        }
        text = json.dumps(payload, indent=1)
    elif args.format == "text":
        lines = [f"{p.threshold:g}\t{p.summary.ap!r}" for p in result.points]
        lines.append(f"band {result.band[0]:g}:{result.band[1]:g} "
                     f"stability {stability!r}")
        text = "\n".join(lines)
    else:
        rows = [[format(p.threshold, "g"), "ap", repr(p.summary.ap)]
                for p in result.points]
        rows.append(["", "band_stability", repr(stability)])
        text = _csv_text(["threshold", "metric", "value"], rows)
    _emit(text, args.output)

    directory = _figures_dir(args)
    if directory:
        from . import figures

        path = os.path.join(directory, "sweep.png")
        figures.render_sweep(result, path)
        log.info("wrote %s", path)
    return 0


def synthetic_detections(n: int, rng: np.random.Generator, *,
                         image_id: int = 0, classes: int = 3) -> list[Detection]:
    """Clustered synthetic detections: jittered boxes around shared centers."""
    n_centers = max(1, n // 8)
    centers = rng.uniform(60.0, 940.0, size=(n_centers, 2))
    dets = []
    for i in range(n):
        cx, cy = centers[int(rng.integers(0, n_centers))]
        w = float(rng.uniform(24.0, 96.0))
        h = float(rng.uniform(24.0, 96.0))
        jx, jy = (float(v) for v in rng.normal(0.0, 5.0, size=2))
        x1 = cx + jx - w / 2.0
        y1 = cy + jy - h / 2.0
        dets.append(Detection(
            box=BoxCorners.from_xyxy(x1, y1, x1 + w, y1 + h),
            score=float(rng.uniform(0.05, 1.0)),
            class_id=int(rng.integers(0, classes)),
            stable_id=i,
            image_id=image_id,
        ))
    return dets


def _fit_exponent(pairs: list[tuple[int, float]]) -> float | None:
    if len(pairs) < 2:
        return None
    xs = np.log([n for n, _ in pairs])
    ys = np.log([max(t, 1e-9) for _, t in pairs])
    return float(np.polyfit(xs, ys, 1)[0])


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"sizes must be a comma list of integers, got {args.sizes!r}")
    if not sizes or any(n < 1 for n in sizes):
        raise ConfigError(f"sizes must all be >= 1, got {args.sizes!r}")
    if args.reps < 1:
        raise ConfigError("reps must be >= 1")
    algorithms = list(ALGORITHMS) if args.algorithm is None else [args.algorithm]
    if args.algorithm is None:
        args.algorithm = "confluence"
    config = _config_from_args(args)

    timings: dict[str, list[tuple[int, float]]] = {}
    exponents: dict[str, float | None] = {}
    for name in algorithms:
        if name == "greedy_nms":
            decay = "hard"
        elif name == "soft_nms" and config.decay == "hard":
            decay = "linear"
        else:
            decay = config.decay
        cfg = replace(config, algorithm=name, decay=decay)
        pairs = []
        for n in sizes:
            rng = np.random.default_rng(args.seed + n)
            dets = synthetic_detections(n, rng)
            reps = []
            for _ in range(args.reps):
                start = time.perf_counter()
                suppress(dets, cfg)
                reps.append(time.perf_counter() - start)
            pairs.append((n, statistics.median(reps)))
        timings[name] = pairs
        exponents[name] = _fit_exponent(pairs)
        log.info("bench %s: %s exponent=%s", name, pairs, exponents[name])

    if args.format == "json":
        payload = {
            "seed": args.seed,
            "sizes": sizes,
            "algorithms": [
                {
                    "name": name,
                    "rows": [[n, t] for n, t in timings[name]],
                    "exponent": exponents[name],
                }
                for name in algorithms
            ],
        }
        text = json.dumps(payload, indent=1)
    elif args.format == "csv":
        rows = []
        for name in algorithms:
            for n, t in timings[name]:
                rows.append([name, str(n), repr(t), repr(exponents[name])])
        text = _csv_text(["algorithm", "n", "median_seconds", "exponent"], rows)
    else:
        lines = []
        for name in algorithms:
            for n, t in timings[name]:
                lines.append(f"{name:<15} n={n:<7} median {t:.6f}s")
            lines.append(f"{name:<15} exponent {exponents[name]}")
        text = "\n".join(lines)
    _emit(text, args.output)

    directory = _figures_dir(args)
    if directory:
        from . import figures

        path = os.path.join(directory, "bench.png")
        figures.render_bench(timings, exponents, path)
        log.info("wrote %s", path)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.configs) < 2:
        raise ConfigError("compare needs at least two --configs entries")
    parsed = [_parse_config_spec(spec) for spec in args.configs]

    loaded_cache: dict[float, dict] = {}
    truth = load_ground_truth(args.ground_truth)
    rows: list[tuple[str, EvalSummary]] = []
    for label, config in parsed:
        floor = config.score_floor
        if floor not in loaded_cache:
            loaded_cache[floor] = _load_dets(
                args.detections, strict=args.strict_io, score_floor=floor
            ).by_image
        results = _suppress_images(loaded_cache[floor], config, args.jobs)
        dets = {img: result_detections(r) for img, r in results.items()}
        rows.append((label, coco_summary(dets, truth.by_image)))

    if args.format == "json":
        payload = [
            {"config": label, "metrics": dict(summary.items())}
            for label, summary in rows
        ]
        text = json.dumps(payload, indent=1)
    elif args.format == "csv":
        body = [[label] + [repr(value) for _, value in summary.items()]
                for label, summary in rows]
        text = _csv_text(["config"] + _METRIC_NAMES, body)
    else:
        width = max(len(label) for label, _ in rows)
        header = " ".join(f"{name:>9}" for name in _METRIC_NAMES)
        lines = [f"{'config':<{width}} {header}"]
        for label, summary in rows:
            cells = " ".join(f"{value:>9.4f}" for _, value in summary.items())
            lines.append(f"{label:<{width}} {cells}")
        text = "\n".join(lines)
    _emit(text, args.output)

    directory = _figures_dir(args)
    if directory:
        from . import figures

        path = os.path.join(directory, "compare.png")
        figures.render_compare([l for l, _ in rows], [s for _, s in rows], path)
        log.info("wrote %s", path)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algorithm", choices=ALGORITHMS,
                        default=_DEFAULTS.algorithm)
    parser.add_argument("--ct", type=float, default=_DEFAULTS.confluence_threshold,
                        help="confluence threshold C_t")
    parser.add_argument("--iou-threshold", type=float,
                        default=_DEFAULTS.iou_threshold)
    parser.add_argument("--decay", choices=DECAY_MODES, default=_DEFAULTS.decay)
    parser.add_argument("--sigma", type=float, default=_DEFAULTS.sigma)
    parser.add_argument("--score-floor", type=float, default=_DEFAULTS.score_floor)
    parser.add_argument("--class-agnostic", action="store_true")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("json", "csv", "text"), default=None)
    parser.add_argument("--output", default=None, help="report path (default stdout)")
    parser.add_argument("--figures", default=None, metavar="DIR",
                        help="also render figures into DIR")
    parser.add_argument("--jobs", type=int, default=None,
                        help="per-image workers (default: available parallelism)")
    parser.add_argument("--strict-io", action="store_true", dest="strict_io")
    parser.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confluence",
        description="Proximity-based bounding-box suppression and evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="suppress a detection file")
    p_run.add_argument("detections")
    _add_config_flags(p_run)
    _add_common_flags(p_run)
    p_run.set_defaults(func=cmd_run, default_format="text")

    p_eval = sub.add_parser("eval", help="evaluate detections against ground truth")
    p_eval.add_argument("detections")
    p_eval.add_argument("ground_truth")
    p_eval.add_argument("--suppress", action="store_true",
                        help="apply the configured algorithm before evaluating")
    _add_config_flags(p_eval)
    _add_common_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval, default_format="text")

    p_sweep = sub.add_parser("sweep", help="sweep the suppression threshold")
    p_sweep.add_argument("detections")
    p_sweep.add_argument("ground_truth")
    p_sweep.add_argument("--grid", default=None, help="start:stop:step")
    p_sweep.add_argument("--band", default=None, help="low:high stability band")
    _add_config_flags(p_sweep)
    _add_common_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep, default_format="csv")

    p_bench = sub.add_parser("bench", help="time algorithms on synthetic data")
    p_bench.add_argument("--sizes", default="500,1000,2000",
                         help="comma list of detection counts")
    p_bench.add_argument("--reps", type=int, default=3)
    _add_config_flags(p_bench)
    _add_common_flags(p_bench)
    # With no explicit --algorithm, bench times every algorithm.
    p_bench.set_defaults(func=cmd_bench, default_format="text", algorithm=None)

    p_cmp = sub.add_parser("compare", help="evaluate several configs side by side")
    p_cmp.add_argument("detections")
    p_cmp.add_argument("ground_truth")
    p_cmp.add_argument("--configs", nargs="+", required=True,
                       metavar="ALGO[:k=v,...]")
    _add_config_flags(p_cmp)
    _add_common_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare, default_format="text")

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "format", None) is None:
        args.format = args.default_format
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except EmptyGroundTruthError as exc:
        log.error("%s", exc)
        return 3
    except (ParseError, RecordError, AnnotationError) as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
