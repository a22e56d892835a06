"""The inspection session state machine and annotation capture.

A session walks one image through propose -> review -> segment -> attribute
-> assess -> finalize.  Proposals above a low confidence floor are cached
once, so moving the detection threshold re-filters instantly without
touching the detector again.  Only confirmed detections may carry masks and
assessments; finalizing freezes the session and appends a self-contained,
replayable annotation record (confirmed masks with their edit history plus
rejected proposals as hard negatives) to the capture store.
"""

from __future__ import annotations

import enum
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import assessment as grading
from .core import (
    BadImage,
    BinaryMask,
    BoundingBox,
    DefectClass,
    Detection,
    EmptyMask,
    MaskEdit,
    ProbabilityMask,
    ReviewState,
    decode_png,
    image_checksum,
    rle_decode,
    rle_encode,
    validate_image,
)
from .detector import DetectorBackend, DetectorConfig, filter_by_threshold, propose_detections
from .geometry import BadCalibration, CameraModel, PlanarScale, measure_crack, measure_spall
from .geometry import parse_calibration, scale_from_pinhole
from .segmenter import SegmenterBackend, apply_edit, apply_edits, binarize, mask_metrics, segment_region

SCHEMA_VERSION = 1


class Phase(enum.Enum):
    CREATED = "Created"
    PROPOSED = "Proposed"
    REVIEWING = "Reviewing"
    FINALIZED = "Finalized"


class InvalidPhase(Exception):
    """Operation not allowed in the session's current phase."""


class OutOfRange(Exception):
    """A threshold argument fell outside [0, 1]."""


class UnknownDetection(Exception):
    """No cached proposal has the given id."""


class NotVisible(Exception):
    """The detection is hidden by the current detection threshold."""


class NotConfirmed(Exception):
    """The operation requires a confirmed detection."""


class NoMask(Exception):
    """The detection has not been segmented yet."""


class NonPositiveDepth(Exception):
    """Spall depth must be positive when supplied."""


class UnassessedDetections(Exception):
    """Finalize requires every confirmed detection to be assessed."""


class CorruptStore(Exception):
    """The capture store contains unreadable data."""


@dataclass
class DetectionState:
    """Mutable per-proposal state tracked by a session."""

    detection: Detection
    prob: ProbabilityMask | None = None
    mask_threshold: float = 0.5
    mask: BinaryMask | None = None
    depth_mm: float | None = None
    exposed_rebar: bool | None = None
    assessment: grading.DefectAssessment | None = None


def _resolve_scale(calibration) -> PlanarScale:
    if isinstance(calibration, PlanarScale):
        return calibration
    if isinstance(calibration, CameraModel):
        distance = float(calibration.extrinsics.translation[2])
        if distance <= 0:
            raise BadCalibration("camera z translation is not a usable surface distance")
        return scale_from_pinhole(calibration, distance)
    if isinstance(calibration, dict):
        return parse_calibration(calibration)
    raise BadCalibration(f"unsupported calibration {type(calibration).__name__}")


def create_session(image, calibration, **kwargs) -> "InspectionSession":
    """Validate inputs and open a session in the Created phase.

    ``image`` may be a uint8 array or PNG bytes; ``calibration`` a
    PlanarScale, CameraModel, or calibration document dict.  Raises BadImage
    and BadCalibration respectively.
    """
    if isinstance(image, (bytes, bytearray)):
        arr = decode_png(bytes(image))
    else:
        arr = validate_image(image)
    scale = _resolve_scale(calibration)
    return InspectionSession(arr, scale, **kwargs)


class InspectionSession:
    """One image's walk through the human-in-the-loop assessment loop.

    Operations within a session are serialized by an internal lock;
    concurrent sessions are independent.  After finalize every mutating
    call raises InvalidPhase.
    """

    def __init__(
        self,
        image: np.ndarray,
        scale: PlanarScale,
        *,
        session_id: str | None = None,
        image_ref: str | None = None,
        inspector_id: str = "anonymous",
        detector_config: DetectorConfig | None = None,
        detector_backend: DetectorBackend | None = None,
        segmenter_backend: SegmenterBackend | None = None,
        detector_name: str = "reference",
        segmenter_name: str = "reference",
        thresholds: grading.AssessmentThresholds | None = None,
    ):
        self.image = validate_image(image)
        self.image.setflags(write=False)
        self.scale = scale
        self.id = session_id or uuid.uuid4().hex
        self.image_checksum = image_checksum(self.image)
        self.image_ref = image_ref or self.image_checksum
        self.inspector_id = inspector_id
        self.detector_config = detector_config or DetectorConfig()
        self.detector_name = detector_name
        self.segmenter_name = segmenter_name
        self.detection_threshold = 0.5
        self.phase = Phase.CREATED
        self.created_at = datetime.now(timezone.utc).isoformat()
        self._detector_backend = detector_backend
        self._segmenter_backend = segmenter_backend
        self._thresholds = thresholds or grading.AssessmentThresholds()
        self._order: list[str] = []
        self._states: dict[str, DetectionState] = {}
        self._lock = threading.RLock()

    # -- phase helpers -----------------------------------------------------

    def _require_phase(self, *phases: Phase):
        if self.phase not in phases:
            allowed = "/".join(p.value for p in phases)
            raise InvalidPhase(f"phase is {self.phase.value}, needs {allowed}")

    def _require_mutable(self):
        if self.phase is Phase.FINALIZED:
            raise InvalidPhase("session is finalized and immutable")

    def _state(self, detection_id: str) -> DetectionState:
        try:
            return self._states[detection_id]
        except KeyError:
            raise UnknownDetection(detection_id) from None

    # -- proposal and steering ----------------------------------------------

    def propose(self) -> list[Detection]:
        """Run the detector once, caching everything above the floor."""
        with self._lock:
            self._require_phase(Phase.CREATED)
            raw = propose_detections(
                self.image, self.detector_config, self._detector_backend
            )
            self._order = [d.id for d in raw]
            self._states = {d.id: DetectionState(detection=d) for d in raw}
            self.phase = Phase.PROPOSED
            return self.visible_detections()

    def raw_proposals(self) -> list[Detection]:
        return [self._states[i].detection for i in self._order]

    def visible_detections(self) -> list[Detection]:
        """The cached proposals at or above the current detection threshold."""
        return filter_by_threshold(self.raw_proposals(), self.detection_threshold)

    def set_detection_threshold(self, tau: float) -> list[Detection]:
        """Re-filter the cache; never re-runs the detector backend."""
        with self._lock:
            self._require_phase(Phase.PROPOSED, Phase.REVIEWING)
            if not (0.0 <= tau <= 1.0):
                raise OutOfRange(f"detection threshold {tau} outside [0, 1]")
            self.detection_threshold = float(tau)
            return self.visible_detections()

    # -- review -------------------------------------------------------------

    def review_detection(self, detection_id: str, verdict) -> Detection:
        """Confirm or reject a currently visible proposal."""
        with self._lock:
            self._require_phase(Phase.PROPOSED, Phase.REVIEWING)
            state = self._state(detection_id)
            if state.detection.confidence < self.detection_threshold:
                raise NotVisible(
                    f"{detection_id} hidden at threshold {self.detection_threshold}"
                )
            review = _parse_verdict(verdict)
            state.detection = state.detection.with_review(review)
            if review is ReviewState.REJECTED:
                # rejected proposals may not carry analysis artifacts
                state.prob = None
                state.mask = None
                state.assessment = None
            self.phase = Phase.REVIEWING
            return state.detection

    # -- segmentation and mask editing ---------------------------------------

    def segment_detection(self, detection_id: str) -> BinaryMask:
        """Segment inside the confirmed box; an all-background result is kept."""
        with self._lock:
            self._require_mutable()
            state = self._state(detection_id)
            if state.detection.review is not ReviewState.CONFIRMED:
                raise NotConfirmed(f"{detection_id} is {state.detection.review.value}")
            state.prob = segment_region(
                self.image, state.detection.box, self._segmenter_backend
            )
            state.mask = binarize(state.prob, state.mask_threshold)
            state.assessment = None
            return state.mask

    def set_mask_threshold(self, detection_id: str, tau_seg: float) -> BinaryMask:
        """Re-threshold the probability mask, re-applying any human edits."""
        with self._lock:
            self._require_mutable()
            state = self._state(detection_id)
            if state.prob is None:
                raise NoMask(f"{detection_id} has not been segmented")
            if not (0.0 <= tau_seg <= 1.0):
                raise OutOfRange(f"mask threshold {tau_seg} outside [0, 1]")
            edits = state.mask.edit_log if state.mask is not None else ()
            state.mask_threshold = float(tau_seg)
            state.mask = apply_edits(binarize(state.prob, state.mask_threshold), edits)
            state.assessment = None
            return state.mask

    def edit_mask(self, detection_id: str, edit: MaskEdit) -> BinaryMask:
        with self._lock:
            self._require_mutable()
            state = self._state(detection_id)
            if state.mask is None:
                raise NoMask(f"{detection_id} has not been segmented")
            state.mask = apply_edit(state.mask, edit)
            state.assessment = None
            return state.mask

    # -- attributes and assessment -------------------------------------------

    def set_attributes(
        self,
        detection_id: str,
        depth_mm: float | None = None,
        exposed_rebar: bool | None = None,
    ) -> None:
        """Store inspector-supplied depth and rebar flags for grading."""
        with self._lock:
            self._require_mutable()
            state = self._state(detection_id)
            if state.detection.review is not ReviewState.CONFIRMED:
                raise NotConfirmed(f"{detection_id} is {state.detection.review.value}")
            if depth_mm is not None:
                if depth_mm <= 0:
                    raise NonPositiveDepth(f"depth {depth_mm} must be positive")
                state.depth_mm = float(depth_mm)
            if exposed_rebar is not None:
                state.exposed_rebar = bool(exposed_rebar)
            state.assessment = None

    def assess_detection(self, detection_id: str) -> grading.DefectAssessment:
        """Measure and grade one confirmed, segmented detection."""
        with self._lock:
            self._require_mutable()
            state = self._state(detection_id)
            if state.detection.review is not ReviewState.CONFIRMED:
                raise NotConfirmed(f"{detection_id} is {state.detection.review.value}")
            if state.mask is None:
                raise NoMask(f"{detection_id} has not been segmented")
            cls = state.detection.cls
            if cls in (DefectClass.CRACKING, DefectClass.SPALLING):
                metrics = mask_metrics(state.mask)  # raises EmptyMask on area 0
                if cls is DefectClass.CRACKING:
                    measurement = measure_crack(
                        metrics, self.scale, state.depth_mm, state.exposed_rebar
                    )
                else:
                    measurement = measure_spall(
                        metrics, self.scale, state.depth_mm, state.exposed_rebar
                    )
            else:
                if state.mask.area == 0:
                    raise EmptyMask("mask has no foreground pixels")
                measurement = None
            state.assessment = grading.assess_measurement(
                detection_id, cls, measurement, self._thresholds
            )
            return state.assessment

    # -- finalize -------------------------------------------------------------

    def confirmed_states(self) -> list[DetectionState]:
        return [
            self._states[i]
            for i in self._order
            if self._states[i].detection.review is ReviewState.CONFIRMED
        ]

    def rejected_states(self) -> list[DetectionState]:
        return [
            self._states[i]
            for i in self._order
            if self._states[i].detection.review is ReviewState.REJECTED
        ]

    def finalize(self, store: "CaptureStore | None" = None):
        """Freeze the session; build the report and the annotation record.

        Every confirmed detection must have been assessed.  The record is
        appended to ``store`` when one is given, before the session is
        marked finalized.
        """
        with self._lock:
            self._require_phase(Phase.REVIEWING)
            confirmed = self.confirmed_states()
            unassessed = [s.detection.id for s in confirmed if s.assessment is None]
            if unassessed:
                raise UnassessedDetections(f"unassessed detections: {unassessed}")

            report = self._build_report(confirmed)
            record = self._build_record(confirmed)
            if store is not None:
                store.append(record.to_json())
            self.phase = Phase.FINALIZED
            return report, record

    def _crack_density(self, confirmed: list[DetectionState]):
        cracks = [
            s.detection for s in confirmed if s.detection.cls is DefectClass.CRACKING
        ]
        if len(cracks) < 2:
            return None
        spacing = grading.crack_spacing_ft(cracks, self.scale)
        band = grading.grade_crack_density(spacing, self._thresholds)
        condition = grading.to_condition_state(band)
        return {
            "mean_spacing_ft": spacing,
            "band": band.label,
            "condition_state": condition.name,
            "condition_label": condition.label,
            "actions": list(condition.actions),
        }

    def _build_report(self, confirmed: list[DetectionState]) -> "AssessmentReport":
        entries = []
        for state in confirmed:
            det = state.detection
            entries.append(
                {
                    "id": det.id,
                    "class": det.cls.label,
                    "box": list(det.box.as_tuple()),
                    "confidence": det.confidence,
                    "mask_threshold": state.mask_threshold,
                    "mask_area_px": state.mask.area if state.mask else 0,
                    **state.assessment.to_json(),
                }
            )
        return AssessmentReport(
            session_id=self.id,
            image_ref=self.image_ref,
            image_checksum=self.image_checksum,
            detection_threshold=self.detection_threshold,
            detections=entries,
            crack_density=self._crack_density(confirmed),
        )

    def _build_record(self, confirmed: list[DetectionState]) -> "AnnotationRecord":
        confirmed_entries = []
        for state in confirmed:
            det = state.detection
            mask = state.mask
            confirmed_entries.append(
                {
                    "id": det.id,
                    "class": det.cls.label,
                    "box": list(det.box.as_tuple()),
                    "confidence": det.confidence,
                    "mask_threshold": state.mask_threshold,
                    "mask": {
                        "width": int(mask.foreground.shape[1]),
                        "height": int(mask.foreground.shape[0]),
                        "rle": rle_encode(mask.foreground),
                    },
                    "edit_log": [e.to_json() for e in mask.edit_log],
                    "depth_mm": state.depth_mm,
                    "exposed_rebar": state.exposed_rebar,
                    "assessment": state.assessment.to_json(),
                }
            )
        rejected_entries = [
            {
                "id": s.detection.id,
                "class": s.detection.cls.label,
                "box": list(s.detection.box.as_tuple()),
                "confidence": s.detection.confidence,
                "rejected": True,
            }
            for s in self.rejected_states()
        ]
        return AnnotationRecord(
            schema_version=SCHEMA_VERSION,
            session_id=self.id,
            image_ref=self.image_ref,
            image_checksum=self.image_checksum,
            inspector_id=self.inspector_id,
            timestamp=datetime.now(timezone.utc).isoformat(),
            detection_threshold=self.detection_threshold,
            segmenter=self.segmenter_name,
            confirmed=confirmed_entries,
            rejected=rejected_entries,
        )

    # -- persistence -----------------------------------------------------------

    def to_doc(self) -> dict:
        """Serializable session document (probability masks are recomputable)."""
        detections = []
        for did in self._order:
            state = self._states[did]
            det = state.detection
            detections.append(
                {
                    "id": det.id,
                    "class": det.cls.label,
                    "box": list(det.box.as_tuple()),
                    "confidence": det.confidence,
                    "review": det.review.value,
                    "mask_threshold": state.mask_threshold,
                    "has_mask": state.mask is not None,
                    "mask_rle": rle_encode(state.mask.foreground) if state.mask else None,
                    "edit_log": [e.to_json() for e in state.mask.edit_log] if state.mask else [],
                    "depth_mm": state.depth_mm,
                    "exposed_rebar": state.exposed_rebar,
                    "assessment": state.assessment.to_json() if state.assessment else None,
                }
            )
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "image_ref": self.image_ref,
            "image_checksum": self.image_checksum,
            "inspector_id": self.inspector_id,
            "calibration": {
                "mm_per_pixel": self.scale.mm_per_pixel,
                "source": self.scale.source,
            },
            "detector_backend": self.detector_name,
            "segmenter_backend": self.segmenter_name,
            "detection_threshold": self.detection_threshold,
            "phase": self.phase.value,
            "created_at": self.created_at,
            "detections": detections,
        }

    @classmethod
    def from_doc(
        cls,
        doc: dict,
        image: np.ndarray,
        *,
        detector_config: DetectorConfig | None = None,
        detector_backend: DetectorBackend | None = None,
        segmenter_backend: SegmenterBackend | None = None,
    ) -> "InspectionSession":
        """Rebuild a session from its document and image.

        Probability masks are recomputed from the image (the reference
        backend is deterministic); binary masks come from the stored runs.
        """
        scale = PlanarScale(**doc["calibration"])
        session = cls(
            image,
            scale,
            session_id=doc["id"],
            image_ref=doc["image_ref"],
            inspector_id=doc["inspector_id"],
            detector_config=detector_config,
            detector_backend=detector_backend,
            segmenter_backend=segmenter_backend,
        )
        session.detection_threshold = doc["detection_threshold"]
        session.phase = Phase(doc["phase"])
        session.created_at = doc.get("created_at", session.created_at)
        if doc["image_checksum"] != session.image_checksum:
            raise BadImage("session image checksum mismatch")
        for entry in doc["detections"]:
            box = BoundingBox(*entry["box"])
            det = Detection(
                id=entry["id"],
                cls=DefectClass.parse(entry["class"]),
                box=box,
                confidence=entry["confidence"],
                review=ReviewState(entry["review"]),
            )
            state = DetectionState(
                detection=det,
                mask_threshold=entry["mask_threshold"],
                depth_mm=entry["depth_mm"],
                exposed_rebar=entry["exposed_rebar"],
            )
            if entry["has_mask"]:
                state.prob = segment_region(session.image, box, segmenter_backend)
                x0, y0, w, h = box.pixel_extent()
                edits = tuple(MaskEdit.from_json(e) for e in entry["edit_log"])
                state.mask = BinaryMask(
                    box=box,
                    foreground=rle_decode(entry["mask_rle"], h, w),
                    edit_log=edits,
                )
            if entry["assessment"]:
                state.assessment = grading.DefectAssessment.from_json(entry["assessment"])
            session._order.append(det.id)
            session._states[det.id] = state
        return session


def _parse_verdict(verdict) -> ReviewState:
    if isinstance(verdict, ReviewState):
        if verdict is ReviewState.PROPOSED:
            raise ValueError("verdict must be Confirmed or Rejected")
        return verdict
    v = str(verdict).strip().lower()
    if v in ("confirm", "confirmed"):
        return ReviewState.CONFIRMED
    if v in ("reject", "rejected"):
        return ReviewState.REJECTED
    raise ValueError(f"unknown verdict {verdict!r}")


@dataclass(frozen=True)
class AssessmentReport:
    """Aggregated per-detection assessments for a finalized session."""

    session_id: str
    image_ref: str
    image_checksum: str
    detection_threshold: float
    detections: list[dict]
    crack_density: dict | None

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "image_ref": self.image_ref,
            "image_checksum": self.image_checksum,
            "detection_threshold": self.detection_threshold,
            "detections": self.detections,
            "crack_density": self.crack_density,
        }


@dataclass(frozen=True)
class AnnotationRecord:
    """Self-contained capture of one finalized session for retraining."""

    schema_version: int
    session_id: str
    image_ref: str
    image_checksum: str
    inspector_id: str
    timestamp: str
    detection_threshold: float
    segmenter: str
    confirmed: list[dict]
    rejected: list[dict]

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "session_id": self.session_id,
            "image_ref": self.image_ref,
            "image_checksum": self.image_checksum,
            "inspector_id": self.inspector_id,
            "timestamp": self.timestamp,
            "detection_threshold": self.detection_threshold,
            "segmenter": self.segmenter,
            "confirmed": self.confirmed,
            "rejected": self.rejected,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AnnotationRecord":
        return cls(**doc)


def replay_record(
    record: dict, image: np.ndarray, segmenter_backend: SegmenterBackend | None = None
) -> dict[str, BinaryMask]:
    """Recompute every confirmed mask in a record from its image.

    Replays the stored pipeline: segment inside the stored box, binarize at
    the stored threshold, re-apply the edit log in order.  The result must
    match the stored runs bit for bit when the image is unchanged.
    """
    masks: dict[str, BinaryMask] = {}
    for entry in record["confirmed"]:
        box = BoundingBox(*entry["box"])
        prob = segment_region(image, box, segmenter_backend)
        mask = binarize(prob, entry["mask_threshold"])
        edits = [MaskEdit.from_json(e) for e in entry["edit_log"]]
        masks[entry["id"]] = apply_edits(mask, edits)
    return masks


def verify_replay(
    record: dict, image: np.ndarray, segmenter_backend: SegmenterBackend | None = None
) -> bool:
    """True when every replayed mask equals its stored run-length encoding."""
    masks = replay_record(record, image, segmenter_backend)
    for entry in record["confirmed"]:
        stored = rle_decode(
            entry["mask"]["rle"], entry["mask"]["height"], entry["mask"]["width"]
        )
        if not np.array_equal(stored, masks[entry["id"]].foreground):
            return False
    return True


class CaptureStore:
    """Append-only JSON-lines store of annotation records.

    Appends are serialized and fsynced before returning, so a finalized
    record survives an immediate crash.  Existing bytes are never rewritten.
    """

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, separators=(",", ":"), sort_keys=True)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def count(self) -> int:
        return len(self.records())

    def records(self) -> list[dict]:
        """All records in append order; raises CorruptStore on bad lines."""
        if not os.path.exists(self.path):
            return []
        out = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise CorruptStore(f"{self.path}:{n}: {exc}") from exc
        return out

    def raw_bytes(self) -> bytes:
        if not os.path.exists(self.path):
            return b""
        with open(self.path, "rb") as fh:
            return fh.read()


def auto_assess(
    image,
    calibration,
    *,
    detection_threshold: float = 0.5,
    mask_threshold: float = 0.5,
    session_id: str | None = None,
    image_ref: str | None = None,
    inspector_id: str = "headless",
    store: CaptureStore | None = None,
    detector_config: DetectorConfig | None = None,
    detector_backend: DetectorBackend | None = None,
    segmenter_backend: SegmenterBackend | None = None,
    thresholds: grading.AssessmentThresholds | None = None,
) -> tuple[AssessmentReport, AnnotationRecord | None]:
    """Non-interactive session: auto-confirm every visible proposal.

    This is the exact interactive pipeline with the human verdicts scripted:
    confirm everything visible at the detection threshold, segment, assess,
    finalize.  A confirmed proposal whose segmentation comes back empty is
    rejected instead (it cannot be assessed without a human-drawn mask).
    Returns the report and the annotation record (None when the image had
    no visible proposals, in which case there is nothing to capture).
    """
    session = create_session(
        image,
        calibration,
        session_id=session_id,
        image_ref=image_ref,
        inspector_id=inspector_id,
        detector_config=detector_config,
        detector_backend=detector_backend,
        segmenter_backend=segmenter_backend,
        thresholds=thresholds,
    )
    session.propose()
    session.set_detection_threshold(detection_threshold)
    visible = session.visible_detections()
    if not visible:
        report = AssessmentReport(
            session_id=session.id,
            image_ref=session.image_ref,
            image_checksum=session.image_checksum,
            detection_threshold=session.detection_threshold,
            detections=[],
            crack_density=None,
        )
        return report, None

    for det in visible:
        session.review_detection(det.id, ReviewState.CONFIRMED)
    for det in visible:
        mask = session.segment_detection(det.id)
        if mask_threshold != 0.5:
            mask = session.set_mask_threshold(det.id, mask_threshold)
        if mask.area == 0:
            session.review_detection(det.id, ReviewState.REJECTED)
            continue
        session.assess_detection(det.id)
    report, record = session.finalize(store)
    return report, record
