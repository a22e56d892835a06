"""Severity banding and AASHTO condition-state grading.

The limit criteria grade cracks by maximum width, spalls by depth, diameter
and exposed reinforcement, crack fields by mean spacing, and efflorescence
by build-up and rust staining.  There is no published mapping from the three
severity bands to the four condition states; this module uses

    None -> CS1 (Good), Hairline-Minor -> CS2 (Fair),
    Narrow-Moderate -> CS3 (Poor), Medium-Severe -> CS4 (Severe),

which aligns the band labels with the Fair/Poor/Severe semantics.  Rusting,
joint damage and delamination have no quantitative limit criteria and pass
through ungraded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    ConditionState,
    DefectClass,
    Detection,
    NonPositiveInput,
    SeverityBand,
)
from .geometry import MM_PER_FOOT, Measurement, PlanarScale


class InsufficientCracks(Exception):
    """Crack spacing needs at least two confirmed crack detections."""


@dataclass(frozen=True)
class AssessmentThresholds:
    """AASHTO bridge-deck limit criteria, in SI units (feet for spacing).

    Imperial limits are converted at exactly 25.4 mm/inch: the 1/16" and
    1/8" crack widths become 1.6 and 3.2 mm, the 6" spall diameter 152.4 mm.
    Override via from_json to support agency variants.
    """

    crack_minor_max_mm: float = 1.6
    crack_moderate_max_mm: float = 3.2
    spall_depth_mm: float = 25.0
    spall_diameter_mm: float = 152.4
    density_minor_min_ft: float = 3.0
    density_severe_max_ft: float = 1.0

    def __post_init__(self):
        values = (
            self.crack_minor_max_mm,
            self.crack_moderate_max_mm,
            self.spall_depth_mm,
            self.spall_diameter_mm,
            self.density_minor_min_ft,
            self.density_severe_max_ft,
        )
        if any(v <= 0 for v in values):
            raise ValueError("all thresholds must be positive")
        if self.crack_minor_max_mm >= self.crack_moderate_max_mm:
            raise ValueError("crack minor bound must be below the moderate bound")
        if self.density_severe_max_ft >= self.density_minor_min_ft:
            raise ValueError("density severe bound must be below the minor bound")

    @classmethod
    def from_json(cls, doc: dict) -> "AssessmentThresholds":
        return cls(**doc)


def grade_crack(max_width_mm: float, t: AssessmentThresholds | None = None) -> SeverityBand:
    """Band a crack by maximum width; the moderate interval is closed."""
    t = t or AssessmentThresholds()
    if max_width_mm <= 0:
        raise NonPositiveInput("crack width must be positive")
    if max_width_mm < t.crack_minor_max_mm:
        return SeverityBand.HAIRLINE_MINOR
    if max_width_mm <= t.crack_moderate_max_mm:
        return SeverityBand.NARROW_MODERATE
    return SeverityBand.MEDIUM_SEVERE


def grade_spall(
    diameter_mm: float,
    depth_mm: float | None = None,
    exposed_rebar: bool = False,
    t: AssessmentThresholds | None = None,
) -> SeverityBand:
    """Band a spall by diameter, optional depth, and exposed reinforcement.

    There is no hairline band for spalls; anything not severe is moderate.
    Depth is optional because a single image cannot measure it.
    """
    t = t or AssessmentThresholds()
    if diameter_mm <= 0:
        raise NonPositiveInput("spall diameter must be positive")
    if depth_mm is not None and depth_mm <= 0:
        raise NonPositiveInput("spall depth must be positive when given")
    if exposed_rebar:
        return SeverityBand.MEDIUM_SEVERE
    if depth_mm is not None and depth_mm > t.spall_depth_mm:
        return SeverityBand.MEDIUM_SEVERE
    if diameter_mm > t.spall_diameter_mm:
        return SeverityBand.MEDIUM_SEVERE
    return SeverityBand.NARROW_MODERATE


def grade_crack_density(mean_spacing_ft: float, t: AssessmentThresholds | None = None) -> SeverityBand:
    """Band a crack field by mean spacing: wider spacing is less severe."""
    t = t or AssessmentThresholds()
    if mean_spacing_ft <= 0:
        raise NonPositiveInput("crack spacing must be positive")
    if mean_spacing_ft > t.density_minor_min_ft:
        return SeverityBand.HAIRLINE_MINOR
    if mean_spacing_ft >= t.density_severe_max_ft:
        return SeverityBand.NARROW_MODERATE
    return SeverityBand.MEDIUM_SEVERE


def grade_efflorescence(heavy_buildup: bool, rust_staining: bool) -> SeverityBand:
    """Band efflorescence; severe requires heavy build-up AND rust staining."""
    if heavy_buildup and rust_staining:
        return SeverityBand.MEDIUM_SEVERE
    return SeverityBand.NARROW_MODERATE


_BAND_TO_STATE = {
    SeverityBand.NONE: ConditionState.CS1,
    SeverityBand.HAIRLINE_MINOR: ConditionState.CS2,
    SeverityBand.NARROW_MODERATE: ConditionState.CS3,
    SeverityBand.MEDIUM_SEVERE: ConditionState.CS4,
}


def to_condition_state(band: SeverityBand) -> ConditionState:
    """Order-preserving map from severity band to condition state."""
    return _BAND_TO_STATE[band]


def crack_spacing_ft(crack_detections: list[Detection], scale: PlanarScale) -> float:
    """Mean nearest-neighbor distance between crack box centroids, in feet."""
    cracks = [d for d in crack_detections if d.cls is DefectClass.CRACKING]
    if len(cracks) < 2:
        raise InsufficientCracks(f"need >= 2 cracks, got {len(cracks)}")
    centers = [d.box.center for d in cracks]
    nearest_px = []
    for i, (xi, yi) in enumerate(centers):
        best = min(
            ((xi - xj) ** 2 + (yi - yj) ** 2) ** 0.5
            for j, (xj, yj) in enumerate(centers)
            if j != i
        )
        nearest_px.append(best)
    mean_px = sum(nearest_px) / len(nearest_px)
    return mean_px * scale.mm_per_pixel / MM_PER_FOOT


UNGRADED_CLASSES = frozenset(
    {DefectClass.RUSTING, DefectClass.JOINT_DAMAGE, DefectClass.DELAMINATION}
)
UNGRADED_NOTE = "not graded: no quantitative AASHTO limit criteria for this class"


@dataclass(frozen=True)
class DefectAssessment:
    """Grading outcome for one confirmed detection."""

    detection_id: str
    cls: DefectClass
    measurement: Measurement | None
    band: SeverityBand
    condition: ConditionState | None
    guideline: str = "AASHTO"
    note: str = ""

    def to_json(self) -> dict:
        return {
            "detection_id": self.detection_id,
            "class": self.cls.label,
            "measurement": self.measurement.to_json() if self.measurement else None,
            "band": self.band.label,
            "condition_state": self.condition.name if self.condition else None,
            "condition_label": self.condition.label if self.condition else None,
            "actions": list(self.condition.actions) if self.condition else [],
            "guideline": self.guideline,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DefectAssessment":
        band = next(b for b in SeverityBand if b.label == doc["band"])
        condition = (
            ConditionState[doc["condition_state"]] if doc["condition_state"] else None
        )
        measurement = (
            Measurement.from_json(doc["measurement"]) if doc["measurement"] else None
        )
        return cls(
            detection_id=doc["detection_id"],
            cls=DefectClass.parse(doc["class"]),
            measurement=measurement,
            band=band,
            condition=condition,
            guideline=doc.get("guideline", "AASHTO"),
            note=doc.get("note", ""),
        )


def assess_measurement(
    detection_id: str,
    cls: DefectClass,
    measurement: Measurement | None,
    t: AssessmentThresholds | None = None,
) -> DefectAssessment:
    """Grade a measured defect into its band and condition state.

    Cracks are banded by maximum width, spalls by diameter/depth/rebar.
    Classes without limit criteria pass through with band None, no
    condition state, and an explanatory note.
    """
    t = t or AssessmentThresholds()
    if cls is DefectClass.CRACKING:
        if measurement is None or measurement.max_width_mm is None:
            raise ValueError("crack assessment needs a width measurement")
        band = grade_crack(measurement.max_width_mm, t)
    elif cls is DefectClass.SPALLING:
        if measurement is None or measurement.equivalent_diameter_mm is None:
            raise ValueError("spall assessment needs a diameter measurement")
        band = grade_spall(
            measurement.equivalent_diameter_mm,
            measurement.depth_mm,
            bool(measurement.exposed_rebar),
            t,
        )
    else:
        return DefectAssessment(
            detection_id=detection_id,
            cls=cls,
            measurement=measurement,
            band=SeverityBand.NONE,
            condition=None,
            note=UNGRADED_NOTE,
        )
    return DefectAssessment(
        detection_id=detection_id,
        cls=cls,
        measurement=measurement,
        band=band,
        condition=to_condition_state(band),
    )
