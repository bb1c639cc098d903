"""Hello-world script: a red 10 mm cube centered at the origin."""

import sys

import vcadpy as pv


def build():
    materials = pv.default_materials()

    # Parameters
    center_point = pv.Vec3(0, 0, 0)  # at origin
    dimensions = pv.Vec3(10, 10, 10)  # in mm
    # Create a rectangular prism
    root = pv.RectPrism(center_point, dimensions, materials.id("red"))
    return root, materials


if __name__ == "__main__":
    root, materials = build()
    out = sys.argv[1] if len(sys.argv) > 1 else "cube.json"
    root.save(out, materials)
    print(f"wrote {out}")
