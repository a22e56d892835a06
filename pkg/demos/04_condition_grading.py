"""AASHTO limit criteria: from physical measurements to condition states.

Crack width, spall depth/diameter/rebar, crack spacing and efflorescence
flags map to three severity bands; each band maps to a condition state with
its feasible actions.  The tables below reproduce the full decision surface.
"""

from deckinspect import (
    grade_crack,
    grade_crack_density,
    grade_efflorescence,
    grade_spall,
    to_condition_state,
)


def show(label, band):
    cs = to_condition_state(band)
    print(f"  {label:46s} -> {band.label:15s} {cs.name} ({cs.label}): "
          f"{'/'.join(cs.actions)}")


print("cracking (by maximum width)")
for width in (0.4, 1.0, 1.6, 2.0, 3.2, 4.0, 8.0):
    show(f"width {width:.1f} mm", grade_crack(width))

print("\nspalls (by depth, diameter, exposed reinforcement)")
show("diameter 100 mm, depth 20 mm, no rebar", grade_spall(100.0, 20.0, False))
show("diameter 100 mm, depth unknown", grade_spall(100.0))
show("diameter 200 mm", grade_spall(200.0))
show("diameter 100 mm, depth 30 mm", grade_spall(100.0, 30.0))
show("any size with exposed rebar", grade_spall(10.0, exposed_rebar=True))

print("\ncracking density (by mean spacing)")
for spacing in (4.0, 3.0, 2.0, 1.0, 0.5):
    show(f"spacing {spacing:.1f} ft", grade_crack_density(spacing))

print("\nefflorescence (by build-up and rust staining)")
show("surface white, no build-up", grade_efflorescence(False, False))
show("heavy build-up, no rust", grade_efflorescence(True, False))
show("heavy build-up with rust staining", grade_efflorescence(True, True))
