"""vcadc: compile design documents to fabrication and simulation outputs.

Every subcommand resolves its configuration up front, writes it to a
``job_manifest.json`` beside the outputs, and produces byte-identical
results when re-run from that manifest (``vcadc rerun``). Exit codes:
0 success, 2 invalid input (arguments, design document, file missing),
3 unbounded design, 4 output I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import UnboundedDesignError, VcadError
from .fea import SizingField, export_bricks, export_tets
from .geom import BBox
from .inp import DEFAULT_ELASTIC, write_inp
from .jsonio import load_design
from .materials import default_materials
from .mesh_export import SegmentationSpec, export_meshes
from .voxels import SampleJob, SampleMode, compile_stack, render_slice

JOB_MANIFEST = "job_manifest.json"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNBOUNDED = 3
EXIT_IO = 4


def _workers(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("VCADC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise VcadError(f"VCADC_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_region(text: str, design) -> list[float] | None:
    if text == "auto":
        return None
    parts = text.split(",")
    if len(parts) != 6:
        raise VcadError("--region needs 'auto' or x0,y0,z0,x1,y1,z1")
    return [float(p) for p in parts]


def _write_manifest(out_dir: str, config: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, JOB_MANIFEST), "w") as f:
        json.dump({"tool": "vcadc", "version": __version__, "config": config}, f, indent=2, sort_keys=True)


def _execute(config: dict) -> None:
    command = config["command"]
    doc = load_design(config["design"])
    materials = doc.materials or default_materials()
    design = doc.root

    if command == "compile-stack":
        region = config["region"]
        box = design.bounds() if region is None else BBox(region[:3], region[3:])
        job = SampleJob(
            design,
            box,
            np.array([config["res"]] * 3),
            seed=config["seed"],
            mode=SampleMode(config["mode"]),
            workers=config["workers"],
        )
        _write_manifest(config["out"], config)
        compile_stack(job, materials, config["out"])
    elif command == "export-fea":
        if config["bricks"]:
            mesh = export_bricks(design, config["res"], seed=config["seed"])
        else:
            sizing = SizingField(config["min_cell"], config["max_cell"], config.get("sizing"))
            mesh = export_tets(design, sizing, seed=config["seed"])
        names = {m.id: m.name for m in materials}
        models = DEFAULT_ELASTIC if config["material_cards"] else None
        data = write_inp(mesh, names, models)
        out = config["out"]
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "wb") as f:
            f.write(data)
        _write_manifest(os.path.dirname(os.path.abspath(out)), config)
    elif command == "export-mesh":
        ref = config["ref_material"]
        ref_id = materials.id(ref) if isinstance(ref, str) else int(ref)
        spec = SegmentationSpec(config["segments"], ref_id, config["res"])
        _write_manifest(config["out"], config)
        export_meshes(design, spec, materials, config["out"], workers=config["workers"])
    elif command == "preview":
        img = render_slice(
            design,
            materials,
            config["axis"],
            config["at"],
            config["res"],
            seed=config["seed"],
            mode=SampleMode(config["mode"]),
        )
        out = config["out"]
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        img.save(out, format="PNG")
        _write_manifest(os.path.dirname(os.path.abspath(out)), config)
    else:
        raise VcadError(f"unknown command {command!r} in manifest")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vcadc", description=__doc__)
    p.add_argument("--version", action="version", version=f"vcadc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cs = sub.add_parser("compile-stack", help="sample a design into a PNG layer stack")
    cs.add_argument("design")
    cs.add_argument("--res", type=float, required=True, help="voxel size, mm")
    cs.add_argument("--region", default="auto", help="'auto' or x0,y0,z0,x1,y1,z1")
    cs.add_argument("--seed", type=int, default=0)
    cs.add_argument("--mode", choices=["prob", "thresh"], default="prob")
    cs.add_argument("--out", required=True)
    cs.add_argument("--workers", type=int, default=None)

    fe = sub.add_parser("export-fea", help="export a C3D8R or adaptive C3D4 mesh as .inp")
    fe.add_argument("design")
    kind = fe.add_mutually_exclusive_group(required=True)
    kind.add_argument("--bricks", action="store_true")
    kind.add_argument("--tets", action="store_true")
    fe.add_argument("--res", type=float, help="brick edge, mm (with --bricks)")
    fe.add_argument("--min-cell", type=float, dest="min_cell")
    fe.add_argument("--max-cell", type=float, dest="max_cell")
    fe.add_argument("--sizing", default=None, help="expression over h overriding the linear map")
    fe.add_argument("--seed", type=int, default=0)
    fe.add_argument("--no-material-cards", dest="material_cards", action="store_false")
    fe.add_argument("--out", required=True)

    em = sub.add_parser("export-mesh", help="segment fractions into N slicer meshes")
    em.add_argument("design")
    em.add_argument("--segments", type=int, required=True)
    em.add_argument("--ref-material", dest="ref_material", default=0)
    em.add_argument("--res", type=float, required=True)
    em.add_argument("--out", required=True)
    em.add_argument("--workers", type=int, default=None)

    pv = sub.add_parser("preview", help="render one slice of the design to PNG")
    pv.add_argument("design")
    pv.add_argument("--axis", choices=["x", "y", "z"], default="z")
    pv.add_argument("--at", type=float, required=True, help="slice position, mm")
    pv.add_argument("--res", type=float, required=True)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--mode", choices=["prob", "thresh"], default="thresh")
    pv.add_argument("--out", required=True)

    rr = sub.add_parser("rerun", help="re-execute a job from its manifest")
    rr.add_argument("manifest")
    return p


def _resolve_config(args: argparse.Namespace) -> dict:
    design = args.design
    if not os.path.exists(design):
        raise VcadError(f"design file not found: {design}")
    doc_hash = _sha256(design)
    config: dict = {
        "command": args.command,
        "design": os.path.abspath(design),
        "design_sha256": doc_hash,
    }
    if args.command == "compile-stack":
        doc = load_design(design)
        region = _parse_region(args.region, doc.root)
        if region is None:
            b = doc.root.bounds()
            region = [float(v) for v in b.min] + [float(v) for v in b.max]
        config.update(
            res=args.res,
            region=region,
            seed=args.seed,
            mode=args.mode,
            out=os.path.abspath(args.out),
            workers=_workers(args.workers),
        )
    elif args.command == "export-fea":
        if args.bricks:
            if args.res is None:
                raise VcadError("--bricks requires --res")
        else:
            if args.min_cell is None or args.max_cell is None:
                raise VcadError("--tets requires --min-cell and --max-cell")
            if args.min_cell > args.max_cell:
                raise VcadError(f"--min-cell {args.min_cell} exceeds --max-cell {args.max_cell}")
        config.update(
            bricks=bool(args.bricks),
            res=args.res,
            min_cell=args.min_cell,
            max_cell=args.max_cell,
            sizing=args.sizing,
            seed=args.seed,
            material_cards=bool(args.material_cards),
            out=os.path.abspath(args.out),
        )
    elif args.command == "export-mesh":
        if args.segments < 1:
            raise VcadError("--segments must be >= 1")
        ref = args.ref_material
        config.update(
            segments=args.segments,
            ref_material=ref if isinstance(ref, str) and not str(ref).isdigit() else int(ref),
            res=args.res,
            out=os.path.abspath(args.out),
            workers=_workers(args.workers),
        )
    elif args.command == "preview":
        config.update(
            axis=args.axis,
            at=args.at,
            res=args.res,
            seed=args.seed,
            mode=args.mode,
            out=os.path.abspath(args.out),
        )
    return config


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            if not os.path.exists(args.manifest):
                raise VcadError(f"manifest not found: {args.manifest}")
            with open(args.manifest) as f:
                manifest = json.load(f)
            config = manifest.get("config")
            if not isinstance(config, dict) or "command" not in config:
                raise VcadError("manifest has no usable 'config' section")
            _execute(config)
        else:
            config = _resolve_config(args)
            _execute(config)
    except UnboundedDesignError as e:
        print(f"vcadc: error: {e}", file=sys.stderr)
        return EXIT_UNBOUNDED
    except (VcadError, ValueError, json.JSONDecodeError) as e:
        print(f"vcadc: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"vcadc: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"vcadc: error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
