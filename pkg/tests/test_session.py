import numpy as np
import pytest

from deckinspect.core import (
    BadImage,
    BoundingBox,
    DefectClass,
    EmptyMask,
    MaskEdit,
    OutsideBox,
    ReviewState,
    encode_png,
)
from deckinspect.detector import ReferenceDetector
from deckinspect.geometry import BadCalibration, PlanarScale
from deckinspect.session import (
    CaptureStore,
    InspectionSession,
    InvalidPhase,
    NoMask,
    NonPositiveDepth,
    NotConfirmed,
    NotVisible,
    OutOfRange,
    Phase,
    UnassessedDetections,
    UnknownDetection,
    auto_assess,
    create_session,
    replay_record,
    verify_replay,
)

from conftest import blob_image


class CountingDetector:
    """Reference detector wrapped with a call counter."""

    def __init__(self):
        self.calls = 0
        self._inner = ReferenceDetector()

    def detect(self, image):
        self.calls += 1
        return self._inner.detect(image)


@pytest.fixture
def scale():
    return PlanarScale(1.0, "ReferenceObject")


@pytest.fixture
def session(two_spall_image, scale):
    return create_session(two_spall_image, scale, session_id="s1")


def proposed(session):
    session.propose()
    return session


class TestCreate:
    def test_from_png_bytes(self, two_spall_image, scale):
        s = create_session(encode_png(two_spall_image), scale)
        assert s.phase is Phase.CREATED
        assert s.detection_threshold == 0.5
        assert s.raw_proposals() == []

    def test_truncated_image_rejected(self, two_spall_image, scale):
        data = encode_png(two_spall_image)
        with pytest.raises(BadImage):
            create_session(data[:40], scale)

    def test_bad_calibration_rejected(self, two_spall_image):
        with pytest.raises(BadCalibration):
            create_session(two_spall_image, {"mm_per_pixel": -0.5})
        with pytest.raises(BadCalibration):
            create_session(two_spall_image, "half a millimetre")


class TestPropose:
    def test_two_spall_default_threshold(self, session):
        visible = session.propose()
        assert session.phase is Phase.PROPOSED
        assert len(visible) == 1
        assert len(session.raw_proposals()) == 2

    def test_blank_image(self, scale):
        s = create_session(np.full((100, 100), 255, dtype=np.uint8), scale)
        assert s.propose() == []
        assert s.phase is Phase.PROPOSED

    def test_propose_twice_rejected(self, session):
        proposed(session)
        with pytest.raises(InvalidPhase):
            session.propose()


class TestThresholdSteering:
    def test_lowering_reveals_second_spall(self, session):
        proposed(session)
        assert len(session.visible_detections()) == 1
        assert len(session.set_detection_threshold(0.2)) == 2

    def test_raising_hides_all_but_cache_intact(self, session):
        proposed(session)
        assert session.set_detection_threshold(0.99) == []
        assert len(session.raw_proposals()) == 2

    def test_lower_then_restore_identical(self, session):
        proposed(session)
        before = session.visible_detections()
        session.set_detection_threshold(0.1)
        session.set_detection_threshold(0.5)
        assert session.visible_detections() == before

    def test_no_backend_reinvocation(self, two_spall_image, scale):
        counting = CountingDetector()
        s = create_session(two_spall_image, scale, detector_backend=counting)
        s.propose()
        assert counting.calls == 1
        for tau in (0.2, 0.9, 0.0, 0.5):
            s.set_detection_threshold(tau)
        assert counting.calls == 1

    def test_out_of_range(self, session):
        proposed(session)
        with pytest.raises(OutOfRange):
            session.set_detection_threshold(1.5)

    def test_wrong_phase(self, session):
        with pytest.raises(InvalidPhase):
            session.set_detection_threshold(0.2)

    def test_review_marks_preserved_across_moves(self, session):
        proposed(session)
        d0 = session.visible_detections()[0]
        session.review_detection(d0.id, "confirm")
        session.set_detection_threshold(0.2)
        session.set_detection_threshold(0.5)
        assert session.visible_detections()[0].review is ReviewState.CONFIRMED


class TestReview:
    def test_confirm(self, session):
        proposed(session)
        det = session.review_detection(session.visible_detections()[0].id, "confirm")
        assert det.review is ReviewState.CONFIRMED
        assert session.phase is Phase.REVIEWING

    def test_reject_logged_not_confirmed(self, session):
        proposed(session)
        d0 = session.visible_detections()[0]
        session.review_detection(d0.id, "reject")
        assert session.confirmed_states() == []
        assert [s.detection.id for s in session.rejected_states()] == [d0.id]

    def test_confirm_hidden_detection(self, session):
        proposed(session)
        hidden = [
            d for d in session.raw_proposals() if d.confidence < 0.5
        ][0]
        with pytest.raises(NotVisible):
            session.review_detection(hidden.id, "confirm")

    def test_unknown_detection(self, session):
        proposed(session)
        with pytest.raises(UnknownDetection):
            session.review_detection("nope", "confirm")

    def test_bad_verdict(self, session):
        proposed(session)
        with pytest.raises(ValueError):
            session.review_detection(session.visible_detections()[0].id, "maybe")


def confirm_first(session):
    session.propose()
    det = session.visible_detections()[0]
    session.review_detection(det.id, "confirm")
    return det


class TestSegment:
    def test_confirmed_blob_segments(self, session):
        det = confirm_first(session)
        mask = session.segment_detection(det.id)
        assert mask.area > 0
        # attention: the mask covers exactly the box crop
        _, _, w, h = det.box.pixel_extent()
        assert mask.foreground.shape == (h, w)

    def test_uniform_region_segments_empty(self, scale):
        # one detectable blob plus a confirmed manual session over it;
        # re-segmenting a uniform sub-box yields an empty mask, recorded
        img = blob_image(blobs=[(30, 30, 20, 20, 30)])
        s = create_session(img, scale)
        s.propose()
        det = s.visible_detections()[0]
        s.review_detection(det.id, "confirm")
        state = s._state(det.id)
        # shrink the box to the uniform blob interior
        state.detection = state.detection
        mask = s.segment_detection(det.id)
        assert mask.area > 0  # normal path is non-empty
        # now a genuinely uniform crop through the segmenter directly
        from deckinspect.segmenter import segment_region, binarize

        uniform = binarize(
            segment_region(img, BoundingBox(35, 35, 45, 45)), 0.5
        )
        assert uniform.area == 0

    def test_segment_before_confirm(self, session):
        proposed(session)
        det = session.visible_detections()[0]
        with pytest.raises(NotConfirmed):
            session.segment_detection(det.id)

    def test_reject_clears_artifacts(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        session.review_detection(det.id, "reject")
        assert session._state(det.id).mask is None
        assert session._state(det.id).prob is None


class TestMaskOps:
    def test_lower_threshold_superset(self, session):
        det = confirm_first(session)
        base = session.segment_detection(det.id).foreground
        lower = session.set_mask_threshold(det.id, 0.2).foreground
        assert not (base & ~lower).any()

    def test_threshold_requires_mask(self, session):
        det = confirm_first(session)
        with pytest.raises(NoMask):
            session.set_mask_threshold(det.id, 0.4)

    def test_edit_then_assess_reflects_edit(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        before = session.assess_detection(det.id).measurement.area_mm2
        session.edit_mask(det.id, MaskEdit("add", "rect", (0, 0, 5, 5)))
        after = session.assess_detection(det.id).measurement.area_mm2
        assert after > before

    def test_edit_outside_box(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        with pytest.raises(OutsideBox):
            session.edit_mask(det.id, MaskEdit("add", "rect", (500, 500, 600, 600)))

    def test_threshold_change_preserves_edits(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        edit = MaskEdit("remove", "rect", (0, 0, 3, 3))
        session.edit_mask(det.id, edit)
        mask = session.set_mask_threshold(det.id, 0.3)
        assert mask.edit_log == (edit,)
        assert not mask.foreground[0:3, 0:3].any()

    def test_mask_ops_invalidate_assessment(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        session.assess_detection(det.id)
        assert session._state(det.id).assessment is not None
        session.edit_mask(det.id, MaskEdit("add", "rect", (0, 0, 2, 2)))
        assert session._state(det.id).assessment is None


class TestAttributes:
    def test_depth_drives_severe(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        session.set_attributes(det.id, depth_mm=30.0)
        out = session.assess_detection(det.id)
        assert out.band.label == "Medium-Severe"

    def test_rebar_drives_severe(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        session.set_attributes(det.id, exposed_rebar=True)
        assert session.assess_detection(det.id).band.label == "Medium-Severe"

    def test_negative_depth(self, session):
        det = confirm_first(session)
        with pytest.raises(NonPositiveDepth):
            session.set_attributes(det.id, depth_mm=-1.0)

    def test_requires_confirmed(self, session):
        proposed(session)
        det = session.visible_detections()[0]
        with pytest.raises(NotConfirmed):
            session.set_attributes(det.id, depth_mm=5.0)


class TestAssess:
    def test_spall_moderate(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        out = session.assess_detection(det.id)
        # 20x20 blob at 1 mm/px: diameter ~22.6 mm, shallow, no rebar
        assert out.cls is DefectClass.SPALLING
        assert out.band.label == "Narrow-Moderate"
        assert out.condition.name == "CS3"

    def test_crack_narrow_moderate(self, crack_image):
        s = create_session(crack_image, PlanarScale(0.125, "ReferenceObject"))
        s.propose()
        det = s.visible_detections()[0]
        s.review_detection(det.id, "confirm")
        s.segment_detection(det.id)
        out = s.assess_detection(det.id)
        assert out.cls is DefectClass.CRACKING
        # 16 px at 0.125 mm/px -> 2.0 mm wide
        assert out.measurement.max_width_mm == pytest.approx(2.0, abs=0.125)
        assert out.band.label == "Narrow-Moderate"
        assert out.condition.name == "CS3"

    def test_empty_mask_rejected(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        session.set_mask_threshold(det.id, 1.0)  # nothing reaches p = 1
        with pytest.raises(EmptyMask):
            session.assess_detection(det.id)

    def test_assess_without_mask(self, session):
        det = confirm_first(session)
        with pytest.raises(NoMask):
            session.assess_detection(det.id)


def full_session(image, scale, mask_edits=(), session_id="s"):
    s = create_session(image, scale, session_id=session_id)
    s.propose()
    s.set_detection_threshold(0.2)
    for det in s.visible_detections():
        s.review_detection(det.id, "confirm")
    for det in s.visible_detections():
        s.segment_detection(det.id)
        for edit in mask_edits:
            s.edit_mask(det.id, edit)
        s.assess_detection(det.id)
    return s


class TestFinalize:
    def test_report_and_record(self, two_spall_image, scale, tmp_path):
        store = CaptureStore(tmp_path / "annotations.jsonl")
        s = full_session(two_spall_image, scale)
        report, record = s.finalize(store)
        assert s.phase is Phase.FINALIZED
        assert len(report.detections) == 2
        assert len(record.confirmed) == 2
        assert store.count() == 1

    def test_finalize_twice(self, two_spall_image, scale):
        s = full_session(two_spall_image, scale)
        s.finalize()
        with pytest.raises(InvalidPhase):
            s.finalize()

    def test_unassessed_blocks(self, session):
        det = confirm_first(session)
        session.segment_detection(det.id)
        with pytest.raises(UnassessedDetections):
            session.finalize()

    def test_wrong_phase(self, session):
        proposed(session)
        with pytest.raises(InvalidPhase):
            session.finalize()

    def test_three_cracks_density(self, scale):
        img = blob_image(
            size=(200, 400),
            background=235,
            blobs=[
                (20, 20, 6, 100, 40),
                (90, 20, 6, 100, 40),
                (160, 20, 6, 100, 40),
            ],
        )
        s = full_session(img, scale)
        report, _ = s.finalize()
        assert report.crack_density is not None
        # centroids 70 px apart vertically at 1 mm/px -> 70/304.8 ft
        assert report.crack_density["mean_spacing_ft"] == pytest.approx(70 / 304.8)
        assert report.crack_density["band"] == "Medium-Severe"

    def test_finalized_immutable(self, two_spall_image, scale):
        s = full_session(two_spall_image, scale)
        s.finalize()
        det_id = s.confirmed_states()[0].detection.id
        for call in (
            lambda: s.set_detection_threshold(0.3),
            lambda: s.review_detection(det_id, "reject"),
            lambda: s.segment_detection(det_id),
            lambda: s.set_mask_threshold(det_id, 0.4),
            lambda: s.edit_mask(det_id, MaskEdit("add", "rect", (0, 0, 2, 2))),
            lambda: s.set_attributes(det_id, depth_mm=5.0),
            lambda: s.assess_detection(det_id),
            lambda: s.propose(),
        ):
            with pytest.raises(InvalidPhase):
                call()

    def test_rejected_logged_as_hard_negatives(self, two_spall_image, scale):
        s = create_session(two_spall_image, scale)
        s.propose()
        s.set_detection_threshold(0.2)
        keep, drop = s.visible_detections()
        s.review_detection(keep.id, "confirm")
        s.review_detection(drop.id, "reject")
        s.segment_detection(keep.id)
        s.assess_detection(keep.id)
        _, record = s.finalize()
        assert [r["id"] for r in record.rejected] == [drop.id]
        assert record.rejected[0]["rejected"] is True


class TestReplay:
    def test_bit_for_bit(self, two_spall_image, scale):
        edits = (
            MaskEdit("add", "rect", (1.0, 1.0, 6.0, 6.0)),
            MaskEdit("remove", "polygon", ((2.0, 2.0), (9.0, 2.0), (2.0, 9.0))),
        )
        s = full_session(two_spall_image, scale, mask_edits=edits)
        _, record = s.finalize()
        assert verify_replay(record.to_json(), two_spall_image)

    def test_replay_detects_image_change(self, two_spall_image, scale):
        s = full_session(two_spall_image, scale)
        _, record = s.finalize()
        tampered = two_spall_image.copy()
        tampered[30:50, 30:40] = 240  # erase half the strong blob
        assert not verify_replay(record.to_json(), tampered)

    def test_replay_masks_match_mask_threshold(self, two_spall_image, scale):
        s = create_session(two_spall_image, scale)
        s.propose()
        det = s.visible_detections()[0]
        s.review_detection(det.id, "confirm")
        s.segment_detection(det.id)
        s.set_mask_threshold(det.id, 0.31)
        s.assess_detection(det.id)
        _, record = s.finalize()
        masks = replay_record(record.to_json(), two_spall_image)
        assert masks[det.id].area == s._state(det.id).mask.area


class TestCaptureStore:
    def test_append_only(self, two_spall_image, scale, tmp_path):
        store = CaptureStore(tmp_path / "ann.jsonl")
        s1 = full_session(two_spall_image, scale, session_id="a")
        s1.finalize(store)
        first = store.raw_bytes()
        s2 = full_session(two_spall_image, scale, session_id="b")
        s2.finalize(store)
        second = store.raw_bytes()
        assert second.startswith(first)
        assert store.count() == 2

    def test_corrupt_line_detected(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text('{"ok": 1}\nnot json\n')
        from deckinspect.session import CorruptStore

        with pytest.raises(CorruptStore):
            CaptureStore(path).records()


class TestSessionDoc:
    def test_round_trip_preserves_state(self, two_spall_image, scale):
        edits = (MaskEdit("add", "rect", (0.0, 0.0, 4.0, 4.0)),)
        s = full_session(two_spall_image, scale, mask_edits=edits)
        doc = s.to_doc()
        rebuilt = InspectionSession.from_doc(doc, two_spall_image)
        assert rebuilt.phase == s.phase
        assert rebuilt.detection_threshold == s.detection_threshold
        assert [d.id for d in rebuilt.visible_detections()] == [
            d.id for d in s.visible_detections()
        ]
        for state, rstate in zip(s.confirmed_states(), rebuilt.confirmed_states()):
            assert np.array_equal(state.mask.foreground, rstate.mask.foreground)
            assert state.mask.edit_log == rstate.mask.edit_log
            assert state.assessment == rstate.assessment

    def test_checksum_mismatch_rejected(self, two_spall_image, scale):
        s = full_session(two_spall_image, scale)
        doc = s.to_doc()
        other = np.zeros_like(two_spall_image)
        with pytest.raises(BadImage):
            InspectionSession.from_doc(doc, other)


class TestAutoAssess:
    def test_empty_image(self, scale):
        report, record = auto_assess(np.full((80, 80), 255, dtype=np.uint8), scale)
        assert report.detections == []
        assert record is None

    def test_matches_scripted_session(self, two_spall_image, scale):
        report, record = auto_assess(
            two_spall_image, scale, detection_threshold=0.2, session_id="x", image_ref="x.png"
        )
        scripted = full_session(two_spall_image, scale, session_id="x")
        scripted.image_ref = "x.png"
        # rebuild the report from the scripted session for comparison
        sreport, _ = scripted.finalize()
        assert len(report.detections) == len(sreport.detections) == 2
        for a, b in zip(report.detections, sreport.detections):
            assert a == b
