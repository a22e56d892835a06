"""Attention-guided segmentation and pixel-space mask metrics.

Segmentation runs only on the crop inside a confirmed bounding box; pixels
outside the box are never classified.  The per-pixel probabilities are
thresholded into a binary mask the inspector can correct with add/remove
edits, and the mask is reduced to the pixel metrics (area, skeleton length,
maximum thickness) that the measurement stage converts to millimetres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from .core import (
    BinaryMask,
    BoundingBox,
    EmptyMask,
    MaskEdit,
    OutsideBox,
    ProbabilityMask,
    as_gray,
    validate_image,
)

SQRT2 = math.sqrt(2.0)
_EIGHT = np.ones((3, 3), dtype=int)


class BackendFailure(Exception):
    """The segmentation backend could not process the crop."""


class SegmenterBackend(Protocol):
    """Interface a segmentation backend must provide.

    segment() receives the image crop for one bounding box and returns a
    float64 array of the same height/width with foreground probabilities
    in [0, 1].
    """

    def segment(self, crop: np.ndarray) -> np.ndarray: ...


def otsu_threshold(gray: np.ndarray) -> int | None:
    """Otsu's cut over an 8-bit grayscale array.

    Returns the midpoint of the plateau of thresholds maximizing the
    between-class variance (dark class is <= cut), or None when the input
    has a single distinct intensity and no cut exists.
    """
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0 or np.count_nonzero(hist) < 2:
        return None
    omega = np.cumsum(hist) / total
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_t * omega - mu) ** 2 / denom, 0.0)
    best = np.flatnonzero(sigma_b == sigma_b.max())
    return int(round((best[0] + best[-1]) / 2.0))


class ReferenceSegmenter:
    """Deterministic Otsu-based probability backend.

    The crop's grayscale histogram is cut with Otsu's method and each pixel
    gets a logistic probability of being foreground (darker side of the cut),
    with a scale of ``softness`` intensity levels.  A crop with no separable
    foreground (single intensity) gets probability 0 everywhere.
    """

    def __init__(self, softness: float = 10.0):
        if softness <= 0:
            raise ValueError("softness must be positive")
        self.softness = softness

    def segment(self, crop: np.ndarray) -> np.ndarray:
        gray = as_gray(crop)
        cut = otsu_threshold(gray)
        if cut is None:
            return np.zeros(gray.shape, dtype=np.float64)
        margin = (cut - gray.astype(np.float64)) / self.softness
        return 1.0 / (1.0 + np.exp(-margin))


_BACKENDS = {"reference": ReferenceSegmenter}


def get_segmenter_backend(name: str) -> SegmenterBackend:
    """Resolve a segmentation backend by its registered name."""
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown segmenter backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return factory()


def segment_region(
    image: np.ndarray,
    box: BoundingBox,
    backend: SegmenterBackend | None = None,
) -> ProbabilityMask:
    """Segment only the crop inside ``box`` (the attention-guidance contract).

    The backend sees nothing but the crop, so content elsewhere in the image
    cannot influence the mask, and the returned mask covers exactly the crop.
    """
    arr = validate_image(image)
    h, w = arr.shape[:2]
    x0, y0, cw, ch = box.pixel_extent()
    if x0 < 0 or y0 < 0 or x0 + cw > w or y0 + ch > h:
        raise ValueError(f"{box} not inside {w}x{h} image")
    crop = arr[y0 : y0 + ch, x0 : x0 + cw]
    if backend is None:
        backend = ReferenceSegmenter()
    try:
        probs = np.asarray(backend.segment(crop), dtype=np.float64)
    except Exception as exc:
        raise BackendFailure(f"segmenter backend failed: {exc}") from exc
    if probs.shape != (ch, cw):
        raise BackendFailure(
            f"backend returned shape {probs.shape}, expected {(ch, cw)}"
        )
    return ProbabilityMask(box=box, values=probs)


def binarize(mask: ProbabilityMask, tau_seg: float) -> BinaryMask:
    """Threshold a probability mask: foreground = probability >= tau_seg."""
    if not (0.0 <= tau_seg <= 1.0):
        raise ValueError(f"segmentation threshold {tau_seg} outside [0, 1]")
    return BinaryMask(box=mask.box, foreground=mask.values >= tau_seg)


def rasterize_rect(region: tuple, height: int, width: int) -> np.ndarray:
    """Pixels covered by a continuous, max-exclusive rectangle."""
    x0, y0, x1, y1 = region
    out = np.zeros((height, width), dtype=bool)
    c0 = max(math.floor(x0), 0)
    c1 = min(math.ceil(x1), width)
    r0 = max(math.floor(y0), 0)
    r1 = min(math.ceil(y1), height)
    if c0 < c1 and r0 < r1:
        out[r0:r1, c0:c1] = True
    return out


def rasterize_polygon(vertices: tuple, height: int, width: int) -> np.ndarray:
    """Even-odd scanline fill sampled at pixel centers."""
    xs = np.array([v[0] for v in vertices], dtype=np.float64)
    ys = np.array([v[1] for v in vertices], dtype=np.float64)
    out = np.zeros((height, width), dtype=bool)
    r_lo = max(int(math.floor(ys.min() - 0.5)), 0)
    r_hi = min(int(math.ceil(ys.max())), height)
    n = len(vertices)
    for r in range(r_lo, r_hi):
        py = r + 0.5
        crossings = []
        for i in range(n):
            x1, y1 = xs[i], ys[i]
            x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
            if (y1 <= py < y2) or (y2 <= py < y1):
                crossings.append(x1 + (py - y1) * (x2 - x1) / (y2 - y1))
        crossings.sort()
        for j in range(0, len(crossings) - 1, 2):
            c0 = max(int(math.ceil(crossings[j] - 0.5)), 0)
            c1 = min(int(math.floor(crossings[j + 1] - 0.5)) + 1, width)
            if c0 < c1:
                out[r, c0:c1] = True
    return out


def _rasterize_edit(edit: MaskEdit, height: int, width: int) -> np.ndarray:
    if edit.shape == "rect":
        return rasterize_rect(edit.region, height, width)
    return rasterize_polygon(edit.region, height, width)


def apply_edit(mask: BinaryMask, edit: MaskEdit) -> BinaryMask:
    """Apply one human correction, clipped to the box, and log it.

    Raises OutsideBox when the edit region does not cover any crop pixel.
    """
    h, w = mask.foreground.shape
    region = _rasterize_edit(edit, h, w)
    if not region.any():
        raise OutsideBox(f"edit region {edit.region} misses the mask box")
    if edit.mode == "add":
        fg = mask.foreground | region
    else:
        fg = mask.foreground & ~region
    return BinaryMask(box=mask.box, foreground=fg, edit_log=mask.edit_log + (edit,))


def apply_edits(mask: BinaryMask, edits) -> BinaryMask:
    for edit in edits:
        mask = apply_edit(mask, edit)
    return mask


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Zhang-Suen iterative thinning; preserves 8-connectivity.

    Both sub-iterations compute their deletion set from a snapshot and delete
    in one batch, per the original parallel formulation.
    """
    img = np.pad(np.asarray(mask, dtype=np.uint8), 1)

    def shifted(a):
        # P2..P9: N, NE, E, SE, S, SW, W, NW (clockwise from north)
        return (
            np.roll(a, 1, 0),
            np.roll(np.roll(a, 1, 0), -1, 1),
            np.roll(a, -1, 1),
            np.roll(np.roll(a, -1, 0), -1, 1),
            np.roll(a, -1, 0),
            np.roll(np.roll(a, -1, 0), 1, 1),
            np.roll(a, 1, 1),
            np.roll(np.roll(a, 1, 0), 1, 1),
        )

    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = shifted(img)
            ns = (p2, p3, p4, p5, p6, p7, p8, p9)
            b = sum(int_n.astype(np.int8) for int_n in ns)
            seq = ns + (p2,)
            a_count = sum(
                ((seq[i] == 0) & (seq[i + 1] == 1)).astype(np.int8) for i in range(8)
            )
            if step == 0:
                c1 = (p2 * p4 * p6) == 0
                c2 = (p4 * p6 * p8) == 0
            else:
                c1 = (p2 * p4 * p8) == 0
                c2 = (p2 * p6 * p8) == 0
            cond = (img == 1) & (a_count == 1) & (b >= 2) & (b <= 6) & c1 & c2
            if cond.any():
                img[cond] = 0
                changed = True
    return img[1:-1, 1:-1].astype(bool)


def skeleton_length(skel: np.ndarray, radii: np.ndarray | None = None) -> float:
    """Weighted length of a skeleton: unit orthogonal steps, sqrt(2) diagonal.

    Adjacent pixel pairs contribute one step each; a diagonal pair is skipped
    when it closes a triangle with an orthogonal neighbor (staircase
    artifacts would otherwise be double counted).  Each connected component
    contributes one extra unit so an isolated pixel has length 1.  When
    ``radii`` (the mask's distance transform) is given, every free end is
    extended by its radius, restoring the end caps that thinning erodes.
    """
    s = np.asarray(skel, dtype=bool)
    if not s.any():
        return 0.0
    pad = np.pad(s, 1)
    center = pad[1:-1, 1:-1]
    right = center & pad[1:-1, 2:]
    down = center & pad[2:, 1:-1]
    n_orth = int(right.sum()) + int(down.sum())
    down_right = center & pad[2:, 2:]
    down_left = center & pad[2:, :-2]
    dr_tri = down_right & (pad[1:-1, 2:] | pad[2:, 1:-1])
    dl_tri = down_left & (pad[1:-1, :-2] | pad[2:, 1:-1])
    n_diag = int((down_right & ~dr_tri).sum()) + int((down_left & ~dl_tri).sum())
    n_comp = ndimage.label(s, structure=_EIGHT)[1]
    length = n_orth + SQRT2 * n_diag + n_comp

    if radii is not None:
        neighbor_count = ndimage.convolve(
            s.astype(np.int8), _EIGHT, mode="constant"
        ) - s.astype(np.int8)
        endpoints = s & (neighbor_count == 1)
        length += float(radii[endpoints].sum())
    return float(length)


def _scan_runs(fg: np.ndarray) -> np.ndarray:
    """Per-pixel length of the maximal vertical run through each pixel."""
    h, w = fg.shape
    forward = np.zeros((h, w), dtype=np.int32)
    backward = np.zeros((h, w), dtype=np.int32)
    for r in range(h):
        prev = forward[r - 1] if r else 0
        forward[r] = (prev + 1) * fg[r]
    for r in range(h - 1, -1, -1):
        nxt = backward[r + 1] if r < h - 1 else 0
        backward[r] = (nxt + 1) * fg[r]
    return forward + backward - 1


def _chord_widths(fg: np.ndarray) -> np.ndarray:
    """Shortest chord through each foreground pixel, in pixel units.

    Chords are measured along the horizontal, vertical, and both diagonal
    directions (diagonal steps weigh sqrt(2)); the minimum approximates the
    local cross-section of the defect at that pixel.
    """
    h, w = fg.shape
    vert = _scan_runs(fg)
    horiz = _scan_runs(fg.T).T

    # shear rows so diagonals become columns, then reuse the vertical scan
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    main = np.zeros((h, w + h - 1), dtype=bool)  # direction (+1, +1)
    main[rows, cols - rows + h - 1] = fg
    anti = np.zeros((h, w + h - 1), dtype=bool)  # direction (+1, -1)
    anti[rows, cols + rows] = fg
    diag_main = _scan_runs(main)[rows, cols - rows + h - 1]
    diag_anti = _scan_runs(anti)[rows, cols + rows]

    widths = np.minimum(
        np.minimum(vert, horiz).astype(np.float64),
        SQRT2 * np.minimum(diag_main, diag_anti),
    )
    return np.where(fg, widths, 0.0)


@dataclass(frozen=True)
class MaskMetrics:
    """Pixel-space measurements of a binary defect mask."""

    area: int
    skeleton_length: float
    max_thickness: float
    component_count: int

    def __post_init__(self):
        if self.area < 0 or self.skeleton_length < 0 or self.max_thickness < 0:
            raise ValueError("metrics must be non-negative")


def mask_metrics(mask: BinaryMask) -> MaskMetrics:
    """Reduce a mask to area, skeleton length, max thickness, components.

    Thickness at a skeleton pixel is the shortest chord through it (the
    local cross-section); max_thickness takes the widest such point.  For an
    axis-aligned bar this equals the exact pixel width, where the raw
    distance transform is ambiguous by half a pixel.  Raises EmptyMask when
    the mask has no foreground.
    """
    fg = mask.foreground
    area = int(fg.sum())
    if area == 0:
        raise EmptyMask("mask has no foreground pixels")

    component_count = int(ndimage.label(fg, structure=_EIGHT)[1])
    skel = skeletonize(fg)
    if not skel.any():
        # thinning can in principle eat everything only for degenerate inputs
        skel = fg.copy()

    edt = ndimage.distance_transform_edt(np.pad(fg, 1))[1:-1, 1:-1]
    length = skeleton_length(skel, radii=edt)
    max_thickness = float(_chord_widths(fg)[skel].max())

    max_thickness = min(max_thickness, mask.box.width, mask.box.height)
    return MaskMetrics(
        area=area,
        skeleton_length=float(length),
        max_thickness=max_thickness,
        component_count=component_count,
    )
