"""A bar that fades from red to blue along its length.

The fraction expressions are f-strings over the bar dimensions, so the
gradient keeps spanning the full part if the geometry is resized.
"""

import sys

import vcadpy as pv


def build(length=15.0):
    materials = pv.default_materials()

    # Parameters
    dimensions = pv.Vec3(length, 10, 5)  # in mm
    center = pv.Vec3(0, 0, 0)
    # Create a gray bar
    bar = pv.RectPrism(center, dimensions, materials.id("gray"))
    # Apply a red to blue gradient
    expressions = [f"x/{dimensions.x}+0.5", f"-x/{dimensions.x}+0.5"]
    grade_materials = [materials.id("red"), materials.id("blue")]
    root = pv.FGrade(expressions, grade_materials, True, bar)
    return root, materials


if __name__ == "__main__":
    root, materials = build()
    out = sys.argv[1] if len(sys.argv) > 1 else "graded_bar.json"
    root.save(out, materials)
    print(f"wrote {out}")
