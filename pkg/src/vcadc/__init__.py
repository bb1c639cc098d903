"""vcadc: a volumetric design compiler.

Designs are trees of implicit nodes answering signed-distance and
volume-fraction queries anywhere in space; compilers lower them to dithered
PNG voxel stacks, FEA meshes with heterogeneity-adaptive sizing, and
fraction-segmented STL sets, and FEA results can be ingested back as
material gradients.
"""

__version__ = "0.1.0"

from .errors import (
    DesignError,
    DesignJsonError,
    EvalError,
    ExprSyntaxError,
    InpError,
    ResultsCsvError,
    UnboundedDesignError,
    VcadError,
)
from .expr import ExprProgram, parse
from .fea import SizingField, cell_size, export_bricks, export_tets, heterogeneity
from .geom import BBox, Vec3, rotation, scaling, translation
from .inp import (
    DEFAULT_ELASTIC,
    BrickMesh,
    ElasticModel,
    NodalResults,
    TetMesh,
    parse_inp,
    parse_results_csv,
    write_inp,
)
from .jsonio import DesignDocument, from_json, load_design, to_json
from .lattice import GradeScope, GraphLattice, LatticeType, Strut, grade_lattice, topology_edges
from .materials import FractionSet, Material, MaterialTable, default_materials
from .mesh_export import SegmentationSpec, export_meshes, marching_cubes, sample_segmented_grids
from .meshimport import MeshImport
from .nodes import (
    DesignNode,
    Difference,
    FGrade,
    Intersection,
    RectPrism,
    Sphere,
    Tile,
    Transform,
    Union,
)
from .sdfgrid import NarrowBandGrid
from .simfield import AabbTree, SimulationField, extract_boundary
from .stl import read_stl, write_stl
from .voxels import SampleJob, SampleMode, assign_materials, compile_stack, render_slice

__all__ = [
    "AabbTree", "BBox", "BrickMesh", "DEFAULT_ELASTIC", "DesignDocument", "DesignError",
    "DesignJsonError", "DesignNode", "Difference", "ElasticModel", "EvalError",
    "ExprProgram", "ExprSyntaxError", "FGrade", "FractionSet", "GradeScope",
    "GraphLattice", "InpError", "Intersection", "LatticeType", "Material",
    "MaterialTable", "MeshImport", "NarrowBandGrid", "NodalResults", "RectPrism",
    "ResultsCsvError", "SampleJob", "SampleMode", "SegmentationSpec",
    "SimulationField", "SizingField", "Sphere", "Strut", "TetMesh", "Tile",
    "Transform", "UnboundedDesignError", "Union", "VcadError", "Vec3",
    "assign_materials", "cell_size", "compile_stack", "default_materials",
    "export_bricks", "export_meshes", "export_tets", "extract_boundary",
    "from_json", "grade_lattice", "heterogeneity", "load_design",
    "marching_cubes", "parse", "parse_inp", "parse_results_csv", "read_stl",
    "render_slice", "rotation", "sample_segmented_grids", "scaling", "to_json",
    "topology_edges", "translation", "write_inp", "write_stl",
]
