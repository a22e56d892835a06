"""Attention-guided segmentation: classify only inside the confirmed box.

Running a segmenter over a whole image happily marks every dark speck.
Running it only on the crop inside a confirmed detection box makes stray
marks outside the box structurally impossible.  This scene has one real
defect inside a box and dark speckle scattered elsewhere.
"""

import numpy as np

from deckinspect import BoundingBox, save_png
from deckinspect.segmenter import binarize, segment_region

from _shared import draw_box, ensure_output, fill_mask, speckle_scene, to_rgb

out = ensure_output()
image, box = speckle_scene()
h, w = image.shape

# whole-image run: the segmenter sees everything, and marks everything dark
whole = binarize(segment_region(image, BoundingBox(0, 0, float(w), float(h))), 0.5)
x0, y0, bw, bh = box.pixel_extent()
outside = whole.foreground.copy()
outside[y0 : y0 + bh, x0 : x0 + bw] = False
print(f"whole-image segmentation: {whole.area} foreground px, "
      f"{outside.sum()} of them OUTSIDE the defect box")

rgb = to_rgb(image)
fill_mask(rgb, whole, (207, 34, 46))
draw_box(rgb, box, (9, 105, 218))
save_png(out / "02_whole_image_segmentation.png", rgb)

# box-confined run: the mask covers exactly the crop, nothing else exists
confined = binarize(segment_region(image, box), 0.5)
print(f"box-confined segmentation:  {confined.area} foreground px, "
      f"0 outside the box by construction")

rgb = to_rgb(image)
fill_mask(rgb, confined, (46, 160, 67))
draw_box(rgb, box, (9, 105, 218))
save_png(out / "02_attention_guided_segmentation.png", rgb)

print(f"wrote {out}/02_whole_image_segmentation.png and "
      f"02_attention_guided_segmentation.png")
