"""A space-filling BCC lattice clipped to a sphere.

One unit cell is built once, tiled across space, and intersected with the
bounding sphere; tiling replicates geometry and materials without copying
the cell.
"""

import sys

import vcadpy as pv


def build():
    materials = pv.default_materials()

    # Parameters
    sphere_radius = 10
    cell_size = pv.Vec3(5, 5, 5)
    cell_type = pv.LatticeType.BodyCenteredCubic
    strut_dia = 0.35

    # Create a unit cell (BCC lattice)
    cell_bcc = pv.GraphLattice(cell_type, cell_size, strut_dia, materials.id("gray"))
    # Tile the unit cell to fill space
    lattice_fill = pv.Tile(cell_bcc)
    # Create bounding geometry (sphere)
    sphere = pv.Sphere(pv.Vec3(0, 0, 0), sphere_radius)
    # Intersection of lattice with bounding sphere
    filled_sphere = pv.Intersection(False, [lattice_fill, sphere])
    return filled_sphere, materials


if __name__ == "__main__":
    root, materials = build()
    out = sys.argv[1] if len(sys.argv) > 1 else "lattice_sphere.json"
    root.save(out, materials)
    print(f"wrote {out}")
