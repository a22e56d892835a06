"""Shared domain types for the inspection engine.

Pixel convention used throughout the package: coordinates are 0-based with the
origin at the top-left corner and y growing downward.  Bounding boxes are
continuous and half-open — ``x_max``/``y_max`` are exclusive when a box is
rasterized to pixels, so an integer-aligned box of width 10 covers exactly
10 pixel columns.

Images are plain numpy arrays of dtype uint8: shape ``(h, w)`` for grayscale
or ``(h, w, 3)`` for RGB.  ``validate_image`` enforces the contract; there is
no wrapper class.
"""

from __future__ import annotations

import enum
import hashlib
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image, UnidentifiedImageError


class DeckInspectError(Exception):
    """Base class for all domain errors raised by this package."""


class EmptyIntersection(DeckInspectError):
    """A box lies wholly outside the region it was clamped against."""


class BadImage(DeckInspectError):
    """Bytes or array do not form a usable image."""


class EmptyMask(DeckInspectError):
    """A binary mask has no foreground where foreground is required."""


class OutsideBox(DeckInspectError):
    """A mask edit does not intersect the mask's bounding box."""


class NonPositiveInput(DeckInspectError):
    """An argument required to be strictly positive was not."""


class DefectClass(enum.Enum):
    """The six concrete defect categories the engine recognizes."""

    CRACKING = "Cracking"
    RUSTING = "Rusting"
    SPALLING = "Spalling"
    EFFLORESCENCE = "Efflorescence"
    JOINT_DAMAGE = "JointDamage"
    DELAMINATION = "Delamination"

    @classmethod
    def parse(cls, label: str) -> "DefectClass":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown defect class label: {label!r}") from None

    @property
    def label(self) -> str:
        return self.value


class ReviewState(enum.Enum):
    PROPOSED = "Proposed"
    CONFIRMED = "Confirmed"
    REJECTED = "Rejected"


@enum.unique
class SeverityBand(enum.IntEnum):
    """Defect severity categories, totally ordered from none to severe."""

    NONE = 0
    HAIRLINE_MINOR = 1
    NARROW_MODERATE = 2
    MEDIUM_SEVERE = 3

    @property
    def label(self) -> str:
        return _BAND_LABELS[self]


_BAND_LABELS = {
    SeverityBand.NONE: "None",
    SeverityBand.HAIRLINE_MINOR: "Hairline-Minor",
    SeverityBand.NARROW_MODERATE: "Narrow-Moderate",
    SeverityBand.MEDIUM_SEVERE: "Medium-Severe",
}


class ConditionState(enum.Enum):
    """AASHTO element condition states with their feasible actions."""

    CS1 = ("Good", ("do nothing", "protect"))
    CS2 = ("Fair", ("do nothing", "protect", "repair"))
    CS3 = ("Poor", ("do nothing", "protect", "repair", "rehab"))
    CS4 = ("Severe", ("do nothing", "repair", "rehab", "replace"))

    def __init__(self, label: str, actions: tuple[str, ...]):
        self.label = label
        self.actions = list(actions)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous pixel coordinates, max-exclusive."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {self}")
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains_box(self, other: "BoundingBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and other.x_max <= self.x_max
            and other.y_max <= self.y_max
        )

    def pixel_extent(self) -> tuple[int, int, int, int]:
        """Integer crop covering the box: (x0, y0, w, h).

        The origin is the floor of the min corner and the size is the ceiling
        of the continuous size, so the crop of a box of width w spans exactly
        ceil(w) columns.
        """
        x0 = math.floor(self.x_min)
        y0 = math.floor(self.y_min)
        w = math.ceil(self.x_max - self.x_min)
        h = math.ceil(self.y_max - self.y_min)
        return x0, y0, w, h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def clamp_box(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """Intersect ``box`` with the image rectangle [0,width]x[0,height].

    Raises EmptyIntersection when the box lies wholly outside the image.
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    x_min = max(box.x_min, 0.0)
    y_min = max(box.y_min, 0.0)
    x_max = min(box.x_max, float(width))
    y_max = min(box.y_max, float(height))
    if x_min >= x_max or y_min >= y_max:
        raise EmptyIntersection(f"{box} does not intersect {width}x{height} image")
    return BoundingBox(x_min, y_min, x_max, y_max)


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class Detection:
    """One detector proposal: class, box, confidence, and review verdict."""

    id: str
    cls: DefectClass
    box: BoundingBox
    confidence: float
    review: ReviewState = ReviewState.PROPOSED

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def with_review(self, state: ReviewState) -> "Detection":
        return replace(self, review=state)


@dataclass(frozen=True)
class ProbabilityMask:
    """Per-pixel foreground probability over the crop of a bounding box."""

    box: BoundingBox
    values: np.ndarray  # float64, shape (h, w), all in [0, 1]

    def __post_init__(self):
        _, _, w, h = self.box.pixel_extent()
        if self.values.shape != (h, w):
            raise ValueError(
                f"mask shape {self.values.shape} does not match box crop ({h}, {w})"
            )
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("probabilities outside [0, 1]")
        self.values.setflags(write=False)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MaskEdit:
    """One human correction applied to a binary mask.

    ``region`` is either a rectangle (x0, y0, x1, y1) or a polygon given as a
    vertex list [(x, y), ...], both in box-local continuous coordinates.
    """

    mode: str  # "add" | "remove"
    shape: str  # "rect" | "polygon"
    region: tuple

    def __post_init__(self):
        if self.mode not in ("add", "remove"):
            raise ValueError(f"unknown edit mode {self.mode!r}")
        if self.shape not in ("rect", "polygon"):
            raise ValueError(f"unknown edit shape {self.shape!r}")
        if self.shape == "rect":
            if len(self.region) != 4:
                raise ValueError("rect region must be (x0, y0, x1, y1)")
            object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        else:
            if len(self.region) < 3:
                raise ValueError("polygon needs at least 3 vertices")
            object.__setattr__(
                self,
                "region",
                tuple((float(x), float(y)) for x, y in self.region),
            )

    def to_json(self) -> dict:
        region = list(self.region) if self.shape == "rect" else [list(v) for v in self.region]
        return {"mode": self.mode, "shape": self.shape, "region": region}

    @classmethod
    def from_json(cls, doc: dict) -> "MaskEdit":
        region = doc["region"]
        if doc["shape"] == "polygon":
            region = tuple((v[0], v[1]) for v in region)
        else:
            region = tuple(region)
        return cls(mode=doc["mode"], shape=doc["shape"], region=region)


@dataclass(frozen=True)
class BinaryMask:
    """Thresholded defect mask confined to a bounding box.

    The foreground array covers exactly the box crop, so the attention
    guarantee (no foreground outside the box) holds by construction.
    ``edit_log`` records every human correction in application order.
    """

    box: BoundingBox
    foreground: np.ndarray  # bool, shape (h, w)
    edit_log: tuple[MaskEdit, ...] = field(default_factory=tuple)

    def __post_init__(self):
        _, _, w, h = self.box.pixel_extent()
        if self.foreground.dtype != np.bool_:
            raise ValueError("foreground must be a boolean array")
        if self.foreground.shape != (h, w):
            raise ValueError(
                f"mask shape {self.foreground.shape} does not match box crop ({h}, {w})"
            )
        self.foreground.setflags(write=False)

    @property
    def area(self) -> int:
        return int(self.foreground.sum())


def rle_encode(foreground: np.ndarray) -> list[int]:
    """Run-length encode a boolean mask as alternating (skip, run) counts.

    Counts are taken in row-major order; the sequence always starts with a
    skip (possibly 0) and alternates skip, run, skip, run, ...
    """
    flat = np.asarray(foreground, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.nonzero(np.diff(flat))[0] + 1
    boundaries = np.concatenate(([0], changes, [flat.size]))
    lengths = np.diff(boundaries)
    counts: list[int] = []
    if flat[0]:
        counts.append(0)
    counts.extend(int(n) for n in lengths)
    return counts


def rle_decode(counts: list[int], height: int, width: int) -> np.ndarray:
    """Inverse of rle_encode for a mask of the given shape."""
    total = height * width
    flat = np.zeros(total, dtype=bool)
    pos = 0
    fg = False
    for n in counts:
        if n < 0:
            raise ValueError("negative run length")
        if fg:
            flat[pos : pos + n] = True
        pos += n
        fg = not fg
    if pos != total:
        raise ValueError(f"run lengths sum to {pos}, expected {total}")
    return flat.reshape(height, width)


def validate_image(image: np.ndarray) -> np.ndarray:
    """Check the image contract and return the array unchanged.

    Accepted: uint8 arrays of shape (h, w) or (h, w, 3) with h, w >= 1.
    """
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise BadImage(f"expected uint8 pixels, got {arr.dtype}")
    if arr.ndim == 2:
        h, w = arr.shape
    elif arr.ndim == 3 and arr.shape[2] == 3:
        h, w = arr.shape[:2]
    else:
        raise BadImage(f"expected (h, w) or (h, w, 3) image, got shape {arr.shape}")
    if h < 1 or w < 1:
        raise BadImage("image dimensions must be >= 1")
    return arr


def as_gray(image: np.ndarray) -> np.ndarray:
    """Grayscale view of an image, ITU-R 601 luma for RGB inputs."""
    arr = validate_image(image)
    if arr.ndim == 2:
        return arr
    lum = arr[:, :, 0] * 0.299 + arr[:, :, 1] * 0.587 + arr[:, :, 2] * 0.114
    return np.clip(np.rint(lum), 0, 255).astype(np.uint8)


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a uint8 array; raises BadImage on failure."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise BadImage(f"cannot decode image: {exc}") from exc
    return validate_image(arr)


def encode_png(image: np.ndarray) -> bytes:
    arr = validate_image(image)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def load_png(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


def save_png(path, image: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(image))


def image_checksum(image: np.ndarray) -> str:
    """Content hash of the pixel data (dims + raw bytes), hex SHA-256."""
    arr = validate_image(image)
    h = hashlib.sha256()
    h.update(f"{arr.shape}".encode())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
