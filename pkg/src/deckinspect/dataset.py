"""Pascal VOC 2012 annotation interchange and image/box augmentation.

VOC bounding boxes are 1-based inclusive integers, while the engine uses
0-based continuous max-exclusive coordinates.  Export converts with
xmin' = floor(x_min)+1, xmax' = ceil(x_max); import inverts that, so a
round trip preserves labels exactly and boxes within one pixel.

Augmentation keeps images and boxes consistent: boxes are mapped by
transforming their four corners and taking the axis-aligned hull, then
clamped to the new canvas.  Quarter turns are lossless permutations;
arbitrary rotation, scaling and translation resample bilinearly with edge
replication; Gaussian noise is seeded and leaves boxes untouched.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from xml.etree import ElementTree

import numpy as np
from scipy import ndimage

from .core import BoundingBox, DefectClass, EmptyIntersection, clamp_box, validate_image

logger = logging.getLogger(__name__)


class MalformedXml(Exception):
    """An annotation document is not usable VOC XML."""


class InvalidBox(Exception):
    """A bounding box violates the VOC ordering/ bounds invariants."""


class DegenerateResult(Exception):
    """An augmentation dropped every box."""


@dataclass(frozen=True)
class VocObject:
    name: str  # defect class label, or an opaque label from foreign files
    box: BoundingBox


@dataclass(frozen=True)
class VocAnnotation:
    filename: str
    width: int
    height: int
    depth: int
    objects: tuple[VocObject, ...]


def export_voc(
    boxes: list[BoundingBox],
    labels: list[str],
    image_size: tuple[int, int],
    filename: str = "image.png",
    depth: int = 3,
    source: str = "deckinspect",
) -> str:
    """Serialize boxes and labels to a VOC 2012 XML document string."""
    if len(boxes) != len(labels):
        raise ValueError("boxes and labels must have equal length")
    width, height = image_size
    root = ElementTree.Element("annotation")
    ElementTree.SubElement(root, "folder").text = "images"
    ElementTree.SubElement(root, "filename").text = filename
    src = ElementTree.SubElement(root, "source")
    ElementTree.SubElement(src, "database").text = source
    size = ElementTree.SubElement(root, "size")
    ElementTree.SubElement(size, "width").text = str(width)
    ElementTree.SubElement(size, "height").text = str(height)
    ElementTree.SubElement(size, "depth").text = str(depth)
    ElementTree.SubElement(root, "segmented").text = "0"

    for box, label in zip(boxes, labels):
        xmin = math.floor(box.x_min) + 1
        ymin = math.floor(box.y_min) + 1
        xmax = math.ceil(box.x_max)
        ymax = math.ceil(box.y_max)
        if not (1 <= xmin <= xmax <= width and 1 <= ymin <= ymax <= height):
            raise InvalidBox(
                f"box {box.as_tuple()} outside a {width}x{height} image after conversion"
            )
        obj = ElementTree.SubElement(root, "object")
        ElementTree.SubElement(obj, "name").text = label
        ElementTree.SubElement(obj, "pose").text = "Unspecified"
        ElementTree.SubElement(obj, "truncated").text = "0"
        ElementTree.SubElement(obj, "difficult").text = "0"
        bnd = ElementTree.SubElement(obj, "bndbox")
        ElementTree.SubElement(bnd, "xmin").text = str(xmin)
        ElementTree.SubElement(bnd, "ymin").text = str(ymin)
        ElementTree.SubElement(bnd, "xmax").text = str(xmax)
        ElementTree.SubElement(bnd, "ymax").text = str(ymax)

    ElementTree.indent(root)
    return ElementTree.tostring(root, encoding="unicode")


_KNOWN_LABELS = {c.label for c in DefectClass}


def import_voc(xml_text: str) -> VocAnnotation:
    """Parse a VOC XML document back into annotation data.

    Unknown object names are preserved as opaque labels with a warning.
    Raises MalformedXml for structural problems and InvalidBox for
    out-of-order or out-of-bounds coordinates.
    """
    try:
        root = ElementTree.fromstring(xml_text)
    except ElementTree.ParseError as exc:
        raise MalformedXml(f"not well-formed XML: {exc}") from exc
    if root.tag != "annotation":
        raise MalformedXml(f"root element is {root.tag!r}, expected 'annotation'")
    size = root.find("size")
    if size is None:
        raise MalformedXml("missing <size> element")
    try:
        width = int(size.findtext("width"))
        height = int(size.findtext("height"))
        depth = int(size.findtext("depth") or "3")
    except (TypeError, ValueError) as exc:
        raise MalformedXml(f"bad <size> contents: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedXml("image size must be positive")
    filename = root.findtext("filename") or ""

    objects = []
    for obj in root.findall("object"):
        name = obj.findtext("name")
        if name is None:
            raise MalformedXml("object without <name>")
        if name not in _KNOWN_LABELS:
            logger.warning("unknown defect class %r kept as opaque label", name)
        bnd = obj.find("bndbox")
        if bnd is None:
            raise MalformedXml(f"object {name!r} without <bndbox>")
        try:
            xmin = int(float(bnd.findtext("xmin")))
            ymin = int(float(bnd.findtext("ymin")))
            xmax = int(float(bnd.findtext("xmax")))
            ymax = int(float(bnd.findtext("ymax")))
        except (TypeError, ValueError) as exc:
            raise MalformedXml(f"bad <bndbox> contents: {exc}") from exc
        if not (1 <= xmin <= xmax <= width and 1 <= ymin <= ymax <= height):
            raise InvalidBox(
                f"bndbox {(xmin, ymin, xmax, ymax)} invalid in {width}x{height} image"
            )
        box = BoundingBox(float(xmin - 1), float(ymin - 1), float(xmax), float(ymax))
        objects.append(VocObject(name=name, box=box))

    return VocAnnotation(
        filename=filename, width=width, height=height, depth=depth, objects=tuple(objects)
    )


@dataclass(frozen=True)
class Rotate:
    """Rotation about the image center; positive angles turn clockwise.

    quarter_turns in 1..3 selects the lossless 90-degree path; otherwise the
    angle path resamples bilinearly on the same canvas.
    """

    quarter_turns: int | None = None
    angle_deg: float | None = None

    def __post_init__(self):
        if (self.quarter_turns is None) == (self.angle_deg is None):
            raise ValueError("give exactly one of quarter_turns or angle_deg")
        if self.quarter_turns is not None and self.quarter_turns not in (1, 2, 3):
            raise ValueError("quarter_turns must be 1, 2 or 3")


@dataclass(frozen=True)
class Scale:
    factor: float

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError("scale factor must be positive")


@dataclass(frozen=True)
class Translate:
    dx: float
    dy: float


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


AugmentationOp = Rotate | Scale | Translate | GaussianNoise


def _map_boxes(boxes, corner_map, new_w, new_h):
    """Hull of transformed corners, clamped; boxes with area < 1 px^2 drop.

    Returns the surviving boxes and their indices into the input list.
    """
    out = []
    kept = []
    for i, box in enumerate(boxes):
        corners = [
            corner_map(box.x_min, box.y_min),
            corner_map(box.x_max, box.y_min),
            corner_map(box.x_min, box.y_max),
            corner_map(box.x_max, box.y_max),
        ]
        xs = [c[0] for c in corners]
        ys = [c[1] for c in corners]
        try:
            hull = BoundingBox(min(xs), min(ys), max(xs), max(ys))
            clamped = clamp_box(hull, new_w, new_h)
        except (ValueError, EmptyIntersection):
            continue
        if clamped.area >= 1.0:
            out.append(clamped)
            kept.append(i)
    return out, kept


def _rotate_quarter(image, boxes, turns):
    h, w = image.shape[:2]
    # np.rot90 with k=-1 is one clockwise turn; corner map (x, y) -> (h - y, x)
    new_img = np.rot90(image, k=-turns).copy()
    maps = {
        1: lambda x, y: (h - y, x),
        2: lambda x, y: (w - x, h - y),
        3: lambda x, y: (y, w - x),
    }
    nh, nw = new_img.shape[:2]
    return (new_img, *_map_boxes(boxes, maps[turns], nw, nh))


def _affine_resample(image, inverse, output_shape):
    """Bilinear resample with edge replication, per channel."""
    matrix = inverse[:2, :2]
    offset = inverse[:2, 2]

    def one(channel):
        return ndimage.affine_transform(
            channel.astype(np.float64),
            matrix,
            offset=offset,
            output_shape=output_shape,
            order=1,
            mode="nearest",
        )

    if image.ndim == 2:
        out = one(image)
    else:
        out = np.stack([one(image[:, :, c]) for c in range(image.shape[2])], axis=2)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _rotate_angle(image, boxes, angle_deg):
    h, w = image.shape[:2]
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = w / 2.0, h / 2.0

    # forward map in (x, y): clockwise rotation about the image center
    def forward(x, y):
        dx, dy = x - cx, y - cy
        return (cx + cos_t * dx - sin_t * dy, cy + sin_t * dx + cos_t * dy)

    # affine_transform maps output (row, col) to input (row, col): the
    # inverse of the forward map, which in row/col space is
    # [[cos, sin], [-sin, cos]]; its transpose inverts it
    center_rc = np.array([cy, cx])
    rot_rc = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    inverse = np.eye(3)
    inverse[:2, :2] = rot_rc
    inverse[:2, 2] = center_rc - rot_rc @ center_rc
    new_img = _affine_resample(image, inverse, (h, w))
    return (new_img, *_map_boxes(boxes, forward, w, h))


def _scale(image, boxes, factor):
    h, w = image.shape[:2]
    nh = max(int(round(h * factor)), 1)
    nw = max(int(round(w * factor)), 1)
    inverse = np.diag([1.0 / factor, 1.0 / factor, 1.0])
    new_img = _affine_resample(image, inverse, (nh, nw))
    return (new_img, *_map_boxes(boxes, lambda x, y: (x * factor, y * factor), nw, nh))


def _translate(image, boxes, dx, dy):
    h, w = image.shape[:2]
    inverse = np.eye(3)
    inverse[:2, 2] = [-dy, -dx]  # output (r, c) samples input (r - dy, c - dx)
    new_img = _affine_resample(image, inverse, (h, w))
    return (new_img, *_map_boxes(boxes, lambda x, y: (x + dx, y + dy), w, h))


def _gaussian_noise(image, boxes, sigma, seed):
    if sigma == 0:
        return image.copy(), list(boxes), list(range(len(boxes)))
    rng = np.random.default_rng(seed)
    noisy = image.astype(np.float64) + rng.normal(0.0, sigma, size=image.shape)
    clipped = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return clipped, list(boxes), list(range(len(boxes)))


def _augment_indexed(arr, boxes, op):
    if isinstance(op, Rotate):
        if op.quarter_turns is not None:
            return _rotate_quarter(arr, boxes, op.quarter_turns)
        if op.angle_deg % 360 == 0:
            return arr.copy(), list(boxes), list(range(len(boxes)))
        return _rotate_angle(arr, boxes, op.angle_deg)
    if isinstance(op, Scale):
        return _scale(arr, boxes, op.factor)
    if isinstance(op, Translate):
        return _translate(arr, boxes, op.dx, op.dy)
    if isinstance(op, GaussianNoise):
        return _gaussian_noise(arr, boxes, op.sigma, op.seed)
    raise TypeError(f"unknown augmentation op {op!r}")


def augment(
    image: np.ndarray, boxes: list[BoundingBox], op: AugmentationOp
) -> tuple[np.ndarray, list[BoundingBox]]:
    """Apply one augmentation to an image and its boxes consistently.

    Raises DegenerateResult when the input had boxes and none survive.
    """
    arr = validate_image(image)
    new_img, new_boxes, _ = _augment_indexed(arr, boxes, op)
    if boxes and not new_boxes:
        raise DegenerateResult(f"{op} dropped every box")
    return new_img, new_boxes


def augment_annotated(
    image: np.ndarray,
    boxes: list[BoundingBox],
    labels: list[str],
    op: AugmentationOp,
) -> tuple[np.ndarray, list[BoundingBox], list[str]]:
    """augment() that carries each surviving box's label along."""
    if len(boxes) != len(labels):
        raise ValueError("boxes and labels must have equal length")
    arr = validate_image(image)
    new_img, new_boxes, kept = _augment_indexed(arr, boxes, op)
    if boxes and not new_boxes:
        raise DegenerateResult(f"{op} dropped every box")
    return new_img, new_boxes, [labels[i] for i in kept]


@dataclass
class DatasetSummary:
    image_count: int
    label_count: int
    per_class: dict[str, int]
    per_source: dict[str, int]
    skipped: list[str]

    def to_json(self) -> dict:
        return {
            "images": self.image_count,
            "labels": self.label_count,
            "per_class": dict(sorted(self.per_class.items())),
            "per_source": dict(sorted(self.per_source.items())),
            "skipped": list(self.skipped),
        }


def dataset_summary(directory) -> DatasetSummary:
    """Scan a directory of VOC XML files and tally images and labels.

    Unreadable files are reported in ``skipped`` and do not abort the scan.
    """
    directory = Path(directory)
    per_class: dict[str, int] = {}
    per_source: dict[str, int] = {}
    images = 0
    labels = 0
    skipped: list[str] = []
    for path in sorted(directory.glob("*.xml")):
        try:
            ann = import_voc(path.read_text(encoding="utf-8"))
        except (OSError, MalformedXml, InvalidBox) as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            skipped.append(path.name)
            continue
        images += 1
        labels += len(ann.objects)
        for obj in ann.objects:
            per_class[obj.name] = per_class.get(obj.name, 0) + 1
        source = _read_source(path)
        per_source[source] = per_source.get(source, 0) + 1
    return DatasetSummary(images, labels, per_class, per_source, skipped)


def _read_source(path: Path) -> str:
    try:
        root = ElementTree.fromstring(path.read_text(encoding="utf-8"))
        return root.findtext("source/database") or "unknown"
    except ElementTree.ParseError:
        return "unknown"
