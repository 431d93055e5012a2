"""``nwdkit`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import (
    CURVE_COLUMNS,
    GRAD_COLUMNS,
    PAIR_SAMPLERS,
    STATS_COLUMNS,
    assign_stats,
    curve_rows,
    grad_check,
)
from .anchors import AnchorGridConfig
from .annotations import AnnotationError, dumps_coco, dumps_detections, load_coco, load_detections
from .assign import UndefinedStatisticError
from .geometry import BoundingBox, InvalidBoxError
from .losses import LOSSES
from .metrics import DEFAULT_C, METRIC_NAMES, InvalidConstantError, MetricKind, similarity
from .nms import NmsConfig, nms
from .report import fmt_float, render
from .synth import offset_grid_scene, synth_tiny_scene

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _box(text: str) -> BoundingBox:
    vals = _floats(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"box must be cx,cy,w,h; got {text!r}")
    try:
        return BoundingBox(*vals)
    except InvalidBoxError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _kinds(text: str) -> list[str]:
    names = [v.strip().lower() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in METRIC_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown metric(s) {bad or text!r}; choose from {','.join(METRIC_NAMES)}")
    return names


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _kind(args, name: str) -> MetricKind:
    return MetricKind(name, args.c)


def cmd_metric(args) -> int:
    value = similarity(_kind(args, args.kind), args.a, args.b)
    if args.format == "json":
        text = json.dumps({"metric": str(_kind(args, args.kind)), "value": float(fmt_float(value))}) + "\n"
    else:
        text = fmt_float(value) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    rows = []
    for name in args.kind:
        rows += curve_rows(_kind(args, name), args.sizes, args.axis, args.max_deviation, args.b_size)
    _emit(render(rows, CURVE_COLUMNS, args.format), args.out)
    return EXIT_OK


def cmd_assign_stats(args) -> int:
    images = load_coco(args.annotations, clip=args.clip)
    anchor_cfg = AnchorGridConfig(tuple(args.strides), tuple(args.scales), tuple(args.ratios))
    kinds = [_kind(args, name) for name in args.kind]
    rows = assign_stats(
        images, anchor_cfg, kinds, args.theta_p, args.theta_n, jobs=args.jobs, per_image=args.per_image
    )
    _emit(render(rows, STATS_COLUMNS, args.format), args.out)
    return EXIT_OK


def cmd_nms(args) -> int:
    records = load_detections(args.detections)
    cfg = NmsConfig(_kind(args, args.kind), args.nms_threshold, args.score_floor)
    by_image: dict = {}
    for image_id, det in records:
        by_image.setdefault(image_id, []).append(det)
    groups = list(by_image.items())
    run = lambda item: [(item[0], d) for d in nms(item[1], cfg)]  # noqa: E731
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            kept = list(pool.map(run, groups))
    else:
        kept = [run(g) for g in groups]
    _emit(dumps_detections([r for group in kept for r in group]), args.out)
    return EXIT_OK


def cmd_grad_check(args) -> int:
    rows = [
        grad_check(name, args.trials, args.seed, pairs=args.pairs, c=args.c)
        for name in args.kind
    ]
    _emit(render(rows, GRAD_COLUMNS, args.format), args.out)
    return EXIT_OK if all(r["status"] == "pass" for r in rows) else EXIT_CHECK


def cmd_synth(args) -> int:
    images = []
    for k in range(args.n_images):
        seed = args.seed + k
        if args.layout == "offset-grid":
            img = offset_grid_scene(
                seed, args.n_objects, gt_size=args.gt_size, stride=args.stride,
                offset_range=(args.min_offset, args.max_offset), image_size=args.image_size, image_id=k + 1,
            )
        else:
            img = synth_tiny_scene(
                seed, args.n_objects, (args.min_size, args.max_size), args.image_size, image_id=k + 1
            )
        images.append(img)
    _emit(dumps_coco(images), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nwdkit", description="Box similarity (IoU family and NWD) analysis tools.")
    parser.add_argument("--version", action="version", version=f"nwdkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, kinds_default=None, multi=False):
        if multi:
            p.add_argument("--kind", type=_kinds, default=kinds_default, help="comma-separated metrics")
        else:
            p.add_argument("--kind", choices=METRIC_NAMES, default=kinds_default or "nwd")
        p.add_argument("--c", type=float, default=DEFAULT_C, help="NWD constant in pixels (default 12.8)")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("metric", help="similarity between two boxes")
    common(p, "iou")
    p.add_argument("--a", type=_box, required=True, help="cx,cy,w,h")
    p.add_argument("--b", type=_box, required=True, help="cx,cy,w,h")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("curve", help="metric vs. center deviation in pixels")
    common(p, ["iou", "nwd"], multi=True)
    p.add_argument("--sizes", type=_ints, default=[4, 8, 16, 32], help="gt side lengths (px)")
    p.add_argument("--axis", choices=("diagonal", "horizontal"), default="diagonal")
    p.add_argument("--max-deviation", type=int, default=10)
    p.add_argument("--b-size", choices=("equal", "half"), default="equal")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("assign-stats", help="positives per gt under each metric")
    common(p, list(METRIC_NAMES), multi=True)
    p.add_argument("annotations", help="COCO annotation JSON")
    p.add_argument("--theta-p", type=float, default=0.7)
    p.add_argument("--theta-n", type=float, default=0.3)
    p.add_argument("--strides", type=_ints, default=[4, 8, 16, 32, 64])
    p.add_argument("--scales", type=_floats, default=[8.0])
    p.add_argument("--ratios", type=_floats, default=[0.5, 1.0, 2.0], help="anchor h/w ratios")
    p.add_argument("--clip", action="store_true", help="clip gts to the image")
    p.add_argument("--per-image", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_assign_stats)

    p = sub.add_parser("nms", help="class-wise greedy NMS over a detection file")
    common(p, "iou")
    p.add_argument("detections", help="JSON list of {bbox: [cx,cy,w,h], score, category_id, image_id}")
    p.add_argument("--nms-threshold", type=float, default=0.5)
    p.add_argument("--score-floor", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("grad-check", help="finite-difference check of loss gradients")
    common(p, list(LOSSES), multi=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", choices=tuple(PAIR_SAMPLERS), default="random")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("synth", help="write a seeded synthetic tiny-object COCO file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-images", type=int, default=1)
    p.add_argument("--n-objects", type=int, default=40)
    p.add_argument("--layout", choices=("random", "offset-grid"), default="random")
    p.add_argument("--image-size", type=int, default=800)
    p.add_argument("--min-size", type=int, default=2)
    p.add_argument("--max-size", type=int, default=16)
    p.add_argument("--gt-size", type=int, default=6, help="offset-grid: gt side (px)")
    p.add_argument("--stride", type=int, default=8, help="offset-grid: anchor stride (px)")
    p.add_argument("--min-offset", type=int, default=2)
    p.add_argument("--max-offset", type=int, default=4)
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConstantError as exc:
        print(f"nwdkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, AnnotationError, UndefinedStatisticError, InvalidBoxError, ValueError) as exc:
        print(f"nwdkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
