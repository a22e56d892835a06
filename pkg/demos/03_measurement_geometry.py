"""From pixels to millimetres: camera projection and planar scales.

The measurement model is a pinhole camera over a locally planar concrete
surface.  A world point projects through x = K [R | t] X; the inverse ray
intersected with the surface plane recovers world coordinates from pixels.
For fronto-parallel shots a single mm-per-pixel scale suffices, obtained
either from a reference object or from distance / focal length.
"""

import numpy as np

from deckinspect import (
    BoundingBox,
    CameraModel,
    Extrinsics,
    Intrinsics,
    back_project_to_plane,
    measure_crack,
    measure_spall,
    project,
    scale_from_pinhole,
    scale_from_reference,
)
from deckinspect.core import BinaryMask
from deckinspect.segmenter import mask_metrics

camera = CameraModel(
    Intrinsics(fx=1000.0, fy=1000.0, cx=320.0, cy=240.0),
    Extrinsics.identity(),
)

print("projection x = K [R | t] X")
for world in ([0.0, 0.0, 2000.0], [200.0, 0.0, 2000.0], [0.0, -100.0, 2000.0]):
    u, v = project(camera, np.array(world))
    print(f"  world {world} mm -> pixel ({u:.1f}, {v:.1f})")

pixel = (420.0, 240.0)
surface = back_project_to_plane(
    camera, pixel, np.array([0.0, 0.0, 2000.0]), np.array([0.0, 0.0, 1.0])
)
print(f"back-projection: pixel {pixel} on the z=2000 plane -> {surface} mm")

ruler = scale_from_reference(reference_length_mm=100.0, reference_span_px=200.0)
pinhole = scale_from_pinhole(camera, surface_distance_mm=2000.0)
print(f"\nscale from a 100 mm ruler spanning 200 px: {ruler.mm_per_pixel} mm/px")
print(f"scale from pinhole at 2000 mm with fx=1000:  {pinhole.mm_per_pixel} mm/px")

# crack: 300 px skeleton, 16 px thick, measured at 0.1 mm/px
crack = np.zeros((60, 340), dtype=bool)
crack[20:36, 20:320] = True
metrics = mask_metrics(BinaryMask(BoundingBox(0, 0, 340, 60), crack))
scale_01 = scale_from_reference(1.0, 10.0)  # 0.1 mm/px
m = measure_crack(metrics, scale_01)
print(f"\ncrack mask {metrics.skeleton_length:.0f} px long, "
      f"{metrics.max_thickness:.0f} px thick at {scale_01.mm_per_pixel} mm/px:")
print(f"  length {m.length_mm:.1f} mm, max width {m.max_width_mm:.2f} mm")

# spall: rasterized disk of radius 50 px at 1 mm/px
yy, xx = np.mgrid[0:120, 0:120]
disk = (yy - 60) ** 2 + (xx - 60) ** 2 <= 50**2
metrics = mask_metrics(BinaryMask(BoundingBox(0, 0, 120, 120), disk))
m = measure_spall(metrics, scale_from_reference(1.0, 1.0))
print(f"disk mask of {metrics.area} px^2 at 1 mm/px:")
print(f"  area {m.area_mm2:.0f} mm^2, equivalent diameter {m.equivalent_diameter_mm:.2f} mm")
