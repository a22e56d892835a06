"""Defect detection: pluggable backends plus threshold filtering and NMS.

The built-in reference backend is a deterministic classical pipeline:
grayscale -> local-mean adaptive threshold -> 8-connected components ->
per-component contrast score.  It stands behind the same interface a learned
detector would use, so the human steering loop (cache everything above a low
floor, re-filter as the inspector moves the confidence slider) can be
exercised end to end without trained weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from .core import (
    BoundingBox,
    DefectClass,
    Detection,
    as_gray,
    box_iou,
    clamp_box,
    validate_image,
)
from .segmenter import skeletonize, skeleton_length


class BackendFailure(Exception):
    """The detection backend could not process the image."""


@dataclass(frozen=True)
class DetectorConfig:
    """Tunables for proposal generation.

    tau_floor is the caching floor: every proposal at or above it is kept so
    later threshold moves never re-run the backend.
    """

    tau_floor: float = 0.01
    nms_iou: float = 0.5
    min_blob_area: int = 25
    window: int = 31
    offset: float = 10.0

    def __post_init__(self):
        if not (0.0 <= self.tau_floor < 1.0):
            raise ValueError(f"tau_floor {self.tau_floor} outside [0, 1)")
        if not (0.0 < self.nms_iou <= 1.0):
            raise ValueError(f"nms_iou {self.nms_iou} outside (0, 1]")
        if self.min_blob_area < 1:
            raise ValueError("min_blob_area must be >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd integer >= 3")


class DetectorBackend(Protocol):
    """Interface a detection backend must provide.

    detect() returns raw detections with confidence >= the configured floor
    and boxes valid within the image.  Backends must be deterministic for
    identical input and stateless after construction.
    """

    def detect(self, image: np.ndarray) -> list[Detection]: ...


# Components more elongated than this (skeleton length relative to the square
# root of their area) are classified as cracks even when their box is squat.
_CRACK_ELONGATION = 3.0
_CRACK_ASPECT = 5.0


class ReferenceDetector:
    """Deterministic classical blob detector for dark defects.

    A pixel is a defect candidate when it is darker than the local mean over
    a ``window`` x ``window`` neighborhood by more than ``offset`` intensity
    levels.  Candidate pixels are grouped with 8-connectivity; components
    smaller than ``min_blob_area`` are dropped.  Confidence is the contrast
    between the surrounding background and the component, normalized by 255
    and clamped to [tau_floor, 0.99].  Only Cracking and Spalling are emitted.

    Boxes are the component pixel bounds padded by one pixel (clamped to the
    image) so the downstream box-confined segmentation keeps a background
    ring to contrast against.
    """

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()

    def detect(self, image: np.ndarray) -> list[Detection]:
        cfg = self.config
        gray = as_gray(image).astype(np.float64)
        h, w = gray.shape

        local_mean = ndimage.uniform_filter(gray, size=cfg.window, mode="nearest")
        candidates = gray < (local_mean - cfg.offset)
        if not candidates.any():
            return []
        # blobs wider than the window respond only along their boundary;
        # filling holes recovers them as solid components
        candidates = ndimage.binary_fill_holes(candidates)

        labels, n = ndimage.label(candidates, structure=np.ones((3, 3), dtype=int))
        pad = cfg.window // 2
        detections: list[Detection] = []
        slices = ndimage.find_objects(labels)
        for idx, slc in enumerate(slices, start=1):
            if slc is None:
                continue
            component = labels[slc] == idx
            area = int(component.sum())
            if area < cfg.min_blob_area:
                continue
            rows, cols = slc
            box = BoundingBox(
                float(max(cols.start - 1, 0)),
                float(max(rows.start - 1, 0)),
                float(min(cols.stop + 1, w)),
                float(min(rows.stop + 1, h)),
            )

            fg_mean = float(gray[slc][component].mean())
            bg_mean = self._background_mean(gray, candidates, slc, pad)
            if bg_mean is None:
                confidence = cfg.tau_floor
            else:
                contrast = (bg_mean - fg_mean) / 255.0
                confidence = float(np.clip(contrast, cfg.tau_floor, 0.99))

            detections.append(
                Detection(
                    id=f"raw{idx}",
                    cls=self._classify(component, box, area),
                    box=box,
                    confidence=confidence,
                )
            )
        return detections

    @staticmethod
    def _background_mean(gray, candidates, slc, pad):
        """Mean intensity of non-candidate pixels around the component's box."""
        h, w = gray.shape
        rows, cols = slc
        r0, r1 = max(rows.start - pad, 0), min(rows.stop + pad, h)
        c0, c1 = max(cols.start - pad, 0), min(cols.stop + pad, w)
        region_bg = ~candidates[r0:r1, c0:c1]
        if region_bg.any():
            return float(gray[r0:r1, c0:c1][region_bg].mean())
        if (~candidates).any():
            return float(gray[~candidates].mean())
        return None

    @staticmethod
    def _classify(component: np.ndarray, box: BoundingBox, area: int) -> DefectClass:
        aspect = max(box.width, box.height) / min(box.width, box.height)
        if aspect >= _CRACK_ASPECT:
            return DefectClass.CRACKING
        skel = skeletonize(component)
        if skeleton_length(skel) / math.sqrt(area) >= _CRACK_ELONGATION:
            return DefectClass.CRACKING
        return DefectClass.SPALLING


_BACKENDS = {"reference": ReferenceDetector}


def get_detector_backend(name: str, config: DetectorConfig | None = None) -> DetectorBackend:
    """Resolve a detector backend by its registered name."""
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown detector backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return factory(config)


def filter_by_threshold(detections: list[Detection], tau: float) -> list[Detection]:
    """Keep exactly the detections with confidence >= tau, order preserved."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"threshold {tau} outside [0, 1]")
    return [d for d in detections if d.confidence >= tau]


def non_max_suppression(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy keep-highest NMS over same-class pairs.

    Expects the input sorted by descending confidence; any kept pair of the
    same class has IoU strictly below ``iou_threshold``.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1]")
    kept: list[Detection] = []
    for det in detections:
        suppressed = any(
            k.cls is det.cls and box_iou(k.box, det.box) >= iou_threshold for k in kept
        )
        if not suppressed:
            kept.append(det)
    return kept


def propose_detections(
    image: np.ndarray,
    config: DetectorConfig | None = None,
    backend: DetectorBackend | None = None,
) -> list[Detection]:
    """Run the backend and post-process into the canonical proposal list.

    Output is sorted by descending confidence, boxes are clamped to the
    image, NMS is applied at ``config.nms_iou``, and ids are reassigned
    d0, d1, ... in rank order so identical inputs yield identical proposals.
    """
    cfg = config or DetectorConfig()
    arr = validate_image(image)
    if backend is None:
        backend = ReferenceDetector(cfg)
    try:
        raw = backend.detect(arr)
    except Exception as exc:
        raise BackendFailure(f"detector backend failed: {exc}") from exc

    h, w = arr.shape[:2]
    clamped = [
        Detection(d.id, d.cls, clamp_box(d.box, w, h), d.confidence, d.review) for d in raw
    ]
    clamped.sort(key=lambda d: (-d.confidence, d.box.y_min, d.box.x_min))
    kept = non_max_suppression(clamped, cfg.nms_iou)
    return [
        Detection(f"d{i}", d.cls, d.box, d.confidence, d.review) for i, d in enumerate(kept)
    ]
