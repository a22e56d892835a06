"""deckinspect: human-in-the-loop concrete defect assessment.

The engine proposes defect detections, lets an inspector steer them with a
confidence threshold, segments confirmed regions inside their boxes,
converts pixel metrics to physical measurements through a planar camera
scale, grades them against AASHTO limit criteria, and captures the
human-verified annotations for future retraining.
"""

from .assessment import (
    AssessmentThresholds,
    DefectAssessment,
    InsufficientCracks,
    assess_measurement,
    crack_spacing_ft,
    grade_crack,
    grade_crack_density,
    grade_efflorescence,
    grade_spall,
    to_condition_state,
)
from .core import (
    BadImage,
    BinaryMask,
    BoundingBox,
    ConditionState,
    DefectClass,
    Detection,
    EmptyIntersection,
    EmptyMask,
    MaskEdit,
    NonPositiveInput,
    OutsideBox,
    ProbabilityMask,
    ReviewState,
    SeverityBand,
    box_iou,
    clamp_box,
    decode_png,
    encode_png,
    load_png,
    rle_decode,
    rle_encode,
    save_png,
    validate_image,
)
from .dataset import (
    GaussianNoise,
    Rotate,
    Scale,
    Translate,
    augment,
    augment_annotated,
    dataset_summary,
    export_voc,
    import_voc,
)
from .detector import (
    DetectorConfig,
    ReferenceDetector,
    filter_by_threshold,
    non_max_suppression,
    propose_detections,
)
from .geometry import (
    BadCalibration,
    BehindCamera,
    CameraModel,
    Extrinsics,
    Intrinsics,
    Measurement,
    PlanarScale,
    RayParallelToPlane,
    back_project_to_plane,
    measure_crack,
    measure_spall,
    parse_calibration,
    project,
    scale_from_pinhole,
    scale_from_reference,
)
from .segmenter import (
    MaskMetrics,
    ReferenceSegmenter,
    apply_edit,
    binarize,
    mask_metrics,
    segment_region,
    skeletonize,
)
from .session import (
    AnnotationRecord,
    AssessmentReport,
    CaptureStore,
    InspectionSession,
    Phase,
    auto_assess,
    create_session,
    replay_record,
    verify_replay,
)

__version__ = "0.1.0"
