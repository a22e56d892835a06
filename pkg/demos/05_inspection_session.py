"""A complete human-in-the-loop session, finalized and replayed.

The session walks propose -> steer threshold -> confirm/reject -> segment ->
edit mask -> attribute -> assess -> finalize.  Finalizing emits a report
and appends a self-contained annotation record to the capture store; the
record replays bit-for-bit against the original image, which is what makes
the capture usable as a retraining corpus.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from deckinspect import CaptureStore, MaskEdit, create_session, verify_replay

from _shared import two_spall_scene

image = two_spall_scene()
store_dir = Path(tempfile.mkdtemp(prefix="deckinspect_demo_"))
store = CaptureStore(store_dir / "annotations.jsonl")

session = create_session(image, {"mm_per_pixel": 1.0}, inspector_id="demo-inspector")
session.propose()
print(f"proposed: {len(session.raw_proposals())} cached, "
      f"{len(session.visible_detections())} visible at 0.5")

session.set_detection_threshold(0.2)
strong, faint = session.visible_detections()
print(f"steered to 0.2: {strong.id} ({strong.confidence:.2f}) "
      f"and {faint.id} ({faint.confidence:.2f}) visible")

# the inspector confirms the strong proposal and rejects the faint one
session.review_detection(strong.id, "confirm")
session.review_detection(faint.id, "reject")

mask = session.segment_detection(strong.id)
print(f"segmented {strong.id}: {mask.area} px")

# a human correction: carve a notch out of the mask
session.edit_mask(strong.id, MaskEdit("remove", "rect", (0.0, 0.0, 4.0, 4.0)))
session.set_attributes(strong.id, depth_mm=12.0, exposed_rebar=False)

assessment = session.assess_detection(strong.id)
print(f"assessed: {assessment.band.label} -> {assessment.condition.name} "
      f"({assessment.condition.label}), actions {assessment.condition.actions}")

report, record = session.finalize(store)
print(f"\nfinalized: report has {len(report.detections)} entr(y/ies), "
      f"{len(record.rejected)} rejected hard negative(s)")
print(f"capture store now holds {store.count()} record(s) at {store.path}")

# the record is self-contained: replay it against the image and compare masks
ok = verify_replay(record.to_json(), image)
print(f"replay reproduces the stored mask bit-for-bit: {ok}")

entry = record.to_json()["confirmed"][0]
print("\nrecord excerpt:")
print(json.dumps({k: entry[k] for k in ("id", "class", "mask_threshold", "edit_log")}, indent=2))
