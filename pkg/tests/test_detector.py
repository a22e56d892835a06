import numpy as np
import pytest
from hypothesis import given, strategies as st

from deckinspect.core import BoundingBox, DefectClass, Detection
from deckinspect.detector import (
    BackendFailure,
    DetectorConfig,
    ReferenceDetector,
    filter_by_threshold,
    non_max_suppression,
    propose_detections,
)

from conftest import blob_image


def make_det(conf, x0=0.0, cls=DefectClass.SPALLING, det_id=None):
    return Detection(
        id=det_id or f"c{conf}",
        cls=cls,
        box=BoundingBox(x0, 0, x0 + 10, 10),
        confidence=conf,
    )


class TestConfig:
    def test_valid_defaults(self):
        cfg = DetectorConfig()
        assert cfg.tau_floor == 0.01
        assert cfg.nms_iou == 0.5
        assert cfg.min_blob_area == 25

    def test_bounds(self):
        with pytest.raises(ValueError):
            DetectorConfig(tau_floor=1.0)
        with pytest.raises(ValueError):
            DetectorConfig(nms_iou=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(window=30)


class TestReferencePipeline:
    def test_uniform_image_yields_nothing(self):
        img = np.full((200, 200), 255, dtype=np.uint8)
        assert propose_detections(img) == []

    def test_single_blob_box_matches_pixel_scan(self, single_blob_image):
        # oracle: exhaustive scan of dark pixels in the constructed fixture
        dark = np.argwhere(single_blob_image < 200)
        r_min, c_min = dark.min(axis=0)
        r_max, c_max = dark.max(axis=0)

        dets = propose_detections(single_blob_image)
        assert len(dets) == 1
        box = dets[0].box
        assert abs(box.x_min - c_min) <= 1
        assert abs(box.y_min - r_min) <= 1
        assert abs(box.x_max - (c_max + 1)) <= 1
        assert abs(box.y_max - (r_max + 1)) <= 1

    def test_two_blob_contrast_ordering(self, two_spall_image):
        # oracle: confidence formula applied to fixture pixel statistics
        expected_strong = (240 - 30) / 255
        expected_faint = (240 - 150) / 255

        dets = propose_detections(two_spall_image)
        assert len(dets) == 2
        strong, faint = dets
        assert strong.confidence > faint.confidence
        assert strong.confidence == pytest.approx(expected_strong, abs=1e-9)
        assert faint.confidence == pytest.approx(expected_faint, abs=1e-9)

    def test_two_threshold_steering(self, two_spall_image):
        dets = propose_detections(two_spall_image)
        assert len(filter_by_threshold(dets, 0.5)) == 1
        assert len(filter_by_threshold(dets, 0.2)) == 2

    def test_idempotent(self, two_spall_image):
        first = propose_detections(two_spall_image)
        second = propose_detections(two_spall_image)
        assert first == second

    def test_boxes_valid_within_image(self, two_spall_image):
        h, w = two_spall_image.shape
        for det in propose_detections(two_spall_image):
            b = det.box
            assert 0 <= b.x_min < b.x_max <= w
            assert 0 <= b.y_min < b.y_max <= h

    def test_sorted_by_descending_confidence(self, two_spall_image):
        dets = propose_detections(two_spall_image)
        confs = [d.confidence for d in dets]
        assert confs == sorted(confs, reverse=True)

    def test_small_blobs_dropped(self):
        img = blob_image(blobs=[(50, 50, 4, 4, 30)])  # 16 px < min area 25
        assert propose_detections(img) == []

    def test_elongated_blob_is_cracking(self):
        img = blob_image(size=(120, 400), background=235, blobs=[(50, 30, 10, 300, 40)])
        dets = propose_detections(img)
        assert [d.cls for d in dets] == [DefectClass.CRACKING]

    def test_compact_blob_is_spalling(self, single_blob_image):
        dets = propose_detections(single_blob_image)
        assert dets[0].cls is DefectClass.SPALLING

    def test_touching_edge_blob_clamped(self):
        img = blob_image(blobs=[(0, 0, 30, 30, 20)])
        dets = propose_detections(img)
        assert len(dets) == 1
        assert dets[0].box.x_min == 0.0 and dets[0].box.y_min == 0.0

    def test_backend_failure_wrapped(self):
        class Exploding:
            def detect(self, image):
                raise RuntimeError("boom")

        img = np.zeros((10, 10), dtype=np.uint8)
        with pytest.raises(BackendFailure):
            propose_detections(img, backend=Exploding())


class TestFilterByThreshold:
    def test_direct_comparison(self):
        dets = [make_det(0.85), make_det(0.45)]
        assert filter_by_threshold(dets, 0.5) == [dets[0]]

    def test_zero_threshold_keeps_all(self):
        dets = [make_det(0.85), make_det(0.45), make_det(0.0)]
        assert filter_by_threshold(dets, 0.0) == dets

    def test_boundary_inclusive(self):
        dets = [make_det(0.5)]
        assert filter_by_threshold(dets, 0.5) == dets

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            filter_by_threshold([], 1.5)

    @given(
        st.lists(st.floats(0, 1), max_size=30),
        st.floats(0, 1),
        st.floats(0, 1),
    )
    def test_monotonicity(self, confs, t1, t2):
        t1, t2 = min(t1, t2), max(t1, t2)
        dets = [make_det(c, det_id=f"d{i}") for i, c in enumerate(confs)]
        high = {d.id for d in filter_by_threshold(dets, t2)}
        low = {d.id for d in filter_by_threshold(dets, t1)}
        assert high <= low

    @given(st.lists(st.floats(0, 1), max_size=30), st.floats(0, 1))
    def test_order_preserved(self, confs, tau):
        dets = [make_det(c, det_id=f"d{i}") for i, c in enumerate(confs)]
        kept = filter_by_threshold(dets, tau)
        indexes = [dets.index(d) for d in kept]
        assert indexes == sorted(indexes)


def greedy_oracle(dets, iou_threshold):
    """Independent greedy NMS: literal transcription of the keep rule."""
    from deckinspect.core import box_iou

    kept = []
    for d in dets:
        ok = True
        for k in kept:
            if k.cls is d.cls and box_iou(k.box, d.box) >= iou_threshold:
                ok = False
        if ok:
            kept.append(d)
    return kept


class TestNms:
    def test_overlapping_same_class(self):
        a = Detection("a", DefectClass.SPALLING, BoundingBox(0, 0, 10, 10), 0.9)
        b = Detection("b", DefectClass.SPALLING, BoundingBox(0, 0, 10, 8), 0.7)
        assert non_max_suppression([a, b], 0.5) == [a]

    def test_disjoint_both_kept(self):
        a = Detection("a", DefectClass.SPALLING, BoundingBox(0, 0, 10, 10), 0.9)
        b = Detection("b", DefectClass.SPALLING, BoundingBox(20, 20, 30, 30), 0.7)
        assert non_max_suppression([a, b], 0.5) == [a, b]

    def test_different_class_not_suppressed(self):
        a = Detection("a", DefectClass.SPALLING, BoundingBox(0, 0, 10, 10), 0.9)
        b = Detection("b", DefectClass.CRACKING, BoundingBox(0, 0, 10, 10), 0.7)
        assert non_max_suppression([a, b], 0.5) == [a, b]

    def test_chain_keeps_ends(self):
        # A-B and B-C overlap ~0.6, A-C overlap 0
        a = Detection("a", DefectClass.SPALLING, BoundingBox(0, 0, 10, 10), 0.9)
        b = Detection("b", DefectClass.SPALLING, BoundingBox(2.5, 0, 12.5, 10), 0.8)
        c = Detection("c", DefectClass.SPALLING, BoundingBox(10, 0, 20, 10), 0.7)
        from deckinspect.core import box_iou

        assert box_iou(a.box, b.box) == pytest.approx(0.6, abs=0.01)
        assert box_iou(a.box, c.box) == 0.0

        kept = non_max_suppression([a, b, c], 0.5)
        assert kept == [a, c]
        assert kept == greedy_oracle([a, b, c], 0.5)

    def test_kept_pairs_below_threshold(self):
        rng = np.random.default_rng(3)
        dets = []
        for i in range(40):
            x = float(rng.uniform(0, 80))
            y = float(rng.uniform(0, 80))
            dets.append(
                Detection(
                    f"d{i}",
                    DefectClass.SPALLING,
                    BoundingBox(x, y, x + 15, y + 15),
                    float(rng.uniform(0.1, 0.99)),
                )
            )
        dets.sort(key=lambda d: -d.confidence)
        kept = non_max_suppression(dets, 0.4)
        assert kept == greedy_oracle(dets, 0.4)
        from deckinspect.core import box_iou

        for i, p in enumerate(kept):
            for q in kept[i + 1 :]:
                if p.cls is q.cls:
                    assert box_iou(p.box, q.box) < 0.4
