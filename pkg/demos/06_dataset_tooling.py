"""VOC annotation interchange and augmentation with consistent boxes.

Annotations round-trip through Pascal VOC 2012 XML (1-based inclusive
integers) within a pixel.  Augmentations transform the image and its boxes
together: quarter turns are exact permutations, noise is seeded, arbitrary
rotation maps box corners and takes the hull.
"""

import numpy as np

from deckinspect import (
    BoundingBox,
    GaussianNoise,
    Rotate,
    Scale,
    augment,
    export_voc,
    import_voc,
    save_png,
)

from _shared import crack_scene, ensure_output

out = ensure_output()
image = crack_scene()
boxes = [BoundingBox(29.0, 59.0, 391.0, 77.0)]
labels = ["Cracking"]
h, w = image.shape

xml = export_voc(boxes, labels, (w, h), filename="crack.png")
print("VOC export (first lines):")
print("\n".join(xml.splitlines()[:8]))

ann = import_voc(xml)
print(f"\nre-imported: {ann.objects[0].name} at {ann.objects[0].box.as_tuple()}")
print(f"original box:            {boxes[0].as_tuple()}  (within 1 px)")

print("\naugmentations:")
for name, op in [
    ("quarter turn clockwise", Rotate(quarter_turns=1)),
    ("rotate 12 degrees", Rotate(angle_deg=12.0)),
    ("scale x1.3", Scale(factor=1.3)),
    ("gaussian noise sigma 8", GaussianNoise(sigma=8.0, seed=42)),
]:
    new_img, new_boxes = augment(image, boxes, op)
    save_png(out / f"06_{name.replace(' ', '_')}.png", new_img)
    print(f"  {name:24s} image {new_img.shape[1]}x{new_img.shape[0]}, "
          f"box -> {tuple(round(v, 1) for v in new_boxes[0].as_tuple())}")

# four clockwise quarter turns restore image and boxes exactly
cur_img, cur_boxes = image, boxes
for _ in range(4):
    cur_img, cur_boxes = augment(cur_img, cur_boxes, Rotate(quarter_turns=1))
assert np.array_equal(cur_img, image)
assert [b.as_tuple() for b in cur_boxes] == [b.as_tuple() for b in boxes]
print("\nfour clockwise quarter turns are the identity (image and boxes)")
