"""Command-line entry points: headless assessment, dataset tooling, serving.

Exit codes: 0 success, 1 bad flags or unusable required inputs, 2 when some
per-file inputs were unreadable (processing continues for the rest).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .assessment import AssessmentThresholds
from .core import BadImage, load_png, save_png
from .dataset import (
    DegenerateResult,
    GaussianNoise,
    InvalidBox,
    MalformedXml,
    Rotate,
    Scale,
    Translate,
    augment_annotated,
    dataset_summary,
    export_voc,
    import_voc,
)
from .geometry import BadCalibration, load_calibration
from .session import auto_assess

REPORT_SCHEMA_VERSION = 1


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this CLI reserves 2 for per-file
    # failures, so usage errors raise and main() maps them to exit 1
    def error(self, message):
        raise _CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deckinspect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_assess = sub.add_parser("assess", help="headless assessment of a directory of PNGs")
    p_assess.add_argument("--images", required=True, help="directory of PNG images")
    p_assess.add_argument("--calib", required=True, help="calibration JSON file")
    p_assess.add_argument("--det-threshold", type=float, default=0.5)
    p_assess.add_argument("--seg-threshold", type=float, default=0.5)
    p_assess.add_argument("--out", required=True, help="report JSON path")
    p_assess.add_argument(
        "--thresholds",
        default=None,
        help="optional JSON file overriding the AASHTO limit criteria",
    )

    p_dataset = sub.add_parser("dataset", help="VOC dataset tooling")
    dsub = p_dataset.add_subparsers(dest="dataset_command", required=True)

    p_aug = dsub.add_parser("augment", help="write augmented image/annotation pairs")
    p_aug.add_argument("--images", required=True, help="directory of PNG + VOC XML pairs")
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--count", type=int, default=4, help="augmentations per image")
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument("--rotate-max", type=float, default=15.0, help="degrees")
    p_aug.add_argument("--scale-min", type=float, default=0.8)
    p_aug.add_argument("--scale-max", type=float, default=1.2)
    p_aug.add_argument("--translate-frac", type=float, default=0.1)
    p_aug.add_argument("--noise-sigma", type=float, default=5.0)

    p_conv = dsub.add_parser("convert", help="normalize VOC XML files through a round trip")
    p_conv.add_argument("--in", dest="in_dir", required=True)
    p_conv.add_argument("--out", required=True)

    p_sum = dsub.add_parser("summary", help="tally images and labels in a VOC directory")
    p_sum.add_argument("--dir", required=True)
    p_sum.add_argument("--json", action="store_true", help="print machine-readable JSON")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--addr", default="127.0.0.1:8421", help="HOST:PORT")
    p_serve.add_argument("--data", required=True, help="data root directory")
    p_serve.add_argument("--ui", default=None, help="static UI directory to mount at /ui")

    return parser


def cmd_assess(args) -> int:
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        print(f"error: --images {images_dir} is not a directory", file=sys.stderr)
        return 1
    try:
        scale = load_calibration(args.calib)
    except BadCalibration as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not (0.0 <= args.det_threshold <= 1.0 and 0.0 <= args.seg_threshold <= 1.0):
        print("error: thresholds must be in [0, 1]", file=sys.stderr)
        return 1
    limit_criteria = None
    if args.thresholds:
        try:
            limit_criteria = AssessmentThresholds.from_json(
                json.loads(Path(args.thresholds).read_text(encoding="utf-8"))
            )
        except (OSError, ValueError, TypeError) as exc:
            print(f"error: bad thresholds file: {exc}", file=sys.stderr)
            return 1

    entries = []
    had_failures = False
    for path in sorted(images_dir.glob("*.png")):
        try:
            image = load_png(path)
        except (OSError, BadImage) as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            entries.append({"image": path.name, "error": str(exc)})
            had_failures = True
            continue
        report, _ = auto_assess(
            image,
            scale,
            detection_threshold=args.det_threshold,
            mask_threshold=args.seg_threshold,
            session_id=path.stem,
            image_ref=path.name,
            thresholds=limit_criteria,
        )
        entries.append({"image": path.name, **report.to_json()})

    out = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "det_threshold": args.det_threshold,
        "seg_threshold": args.seg_threshold,
        "images": entries,
    }
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True), encoding="utf-8")
    print(f"assessed {len(entries)} image(s) -> {args.out}")
    return 2 if had_failures else 0


def _sample_op(rng, args):
    kind = rng.integers(0, 4)
    if kind == 0:
        return Rotate(angle_deg=float(rng.uniform(-args.rotate_max, args.rotate_max)))
    if kind == 1:
        return Scale(factor=float(rng.uniform(args.scale_min, args.scale_max)))
    if kind == 2:
        return Translate(
            dx=float(rng.uniform(-args.translate_frac, args.translate_frac)),
            dy=float(rng.uniform(-args.translate_frac, args.translate_frac)),
        )
    return GaussianNoise(
        sigma=float(rng.uniform(0.0, args.noise_sigma)),
        seed=int(rng.integers(0, 2**31)),
    )


def cmd_dataset_augment(args) -> int:
    images_dir = Path(args.images)
    out_dir = Path(args.out)
    if not images_dir.is_dir():
        print(f"error: --images {images_dir} is not a directory", file=sys.stderr)
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)

    had_failures = False
    written = 0
    pairs = sorted(images_dir.glob("*.png"))
    for file_index, png_path in enumerate(pairs):
        xml_path = png_path.with_suffix(".xml")
        try:
            image = load_png(png_path)
            ann = import_voc(xml_path.read_text(encoding="utf-8"))
        except (OSError, BadImage, MalformedXml, InvalidBox) as exc:
            print(f"warning: skipping {png_path.name}: {exc}", file=sys.stderr)
            had_failures = True
            continue
        boxes = [o.box for o in ann.objects]
        labels = [o.name for o in ann.objects]
        for k in range(args.count):
            # seeding by (seed, file index, k) keeps outputs reproducible
            # and independent of which other files are present
            rng = np.random.default_rng([args.seed, file_index, k])
            op = _sample_op(rng, args)
            if isinstance(op, Translate):
                h, w = image.shape[:2]
                op = Translate(dx=op.dx * w, dy=op.dy * h)
            try:
                new_img, new_boxes, new_labels = augment_annotated(image, boxes, labels, op)
            except DegenerateResult as exc:
                print(f"warning: {png_path.stem}_aug{k}: {exc}", file=sys.stderr)
                continue
            stem = f"{png_path.stem}_aug{k}"
            save_png(out_dir / f"{stem}.png", new_img)
            nh, nw = new_img.shape[:2]
            xml = export_voc(new_boxes, new_labels, (nw, nh), filename=f"{stem}.png")
            (out_dir / f"{stem}.xml").write_text(xml, encoding="utf-8")
            written += 1
    print(f"wrote {written} augmented pair(s) -> {out_dir}")
    return 2 if had_failures else 0


def cmd_dataset_convert(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    if not in_dir.is_dir():
        print(f"error: --in {in_dir} is not a directory", file=sys.stderr)
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)
    had_failures = False
    converted = 0
    for path in sorted(in_dir.glob("*.xml")):
        try:
            ann = import_voc(path.read_text(encoding="utf-8"))
        except (OSError, MalformedXml, InvalidBox) as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            had_failures = True
            continue
        xml = export_voc(
            [o.box for o in ann.objects],
            [o.name for o in ann.objects],
            (ann.width, ann.height),
            filename=ann.filename or path.with_suffix(".png").name,
            depth=ann.depth,
        )
        (out_dir / path.name).write_text(xml, encoding="utf-8")
        converted += 1
    print(f"converted {converted} file(s) -> {out_dir}")
    return 2 if had_failures else 0


def cmd_dataset_summary(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"error: --dir {directory} is not a directory", file=sys.stderr)
        return 1
    summary = dataset_summary(directory)
    if args.json:
        print(json.dumps(summary.to_json(), indent=2, sort_keys=True))
    else:
        print(f"images: {summary.image_count}")
        print(f"labels: {summary.label_count}")
        for name, count in sorted(summary.per_class.items()):
            print(f"  class {name}: {count}")
        for name, count in sorted(summary.per_source.items()):
            print(f"  source {name}: {count}")
        if summary.skipped:
            print(f"skipped: {', '.join(summary.skipped)}")
    return 2 if summary.skipped else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"error: --addr must be HOST:PORT, got {args.addr!r}", file=sys.stderr)
        return 1
    app = create_app(args.data, ui_dir=args.ui)
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"error: cannot serve on {args.addr}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "assess":
        return cmd_assess(args)
    if args.command == "dataset":
        if args.dataset_command == "augment":
            return cmd_dataset_augment(args)
        if args.dataset_command == "convert":
            return cmd_dataset_convert(args)
        return cmd_dataset_summary(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
