"""
Mesh file reader/writer (UTF-8 JSON) and mesh validation.
"""
import json
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError
from scipy.spatial import cKDTree

from config import Config
from models.config_models import ElementRecord, MeshFile, validation_messages
from models.fem_models import BoundarySet, Mesh, PolytopalElement
from services.geometry import element_measure_centroid
from utils.errors import MeshValidationError, ParseError
from utils.logger import app_logger


def parse_mesh(text: str, source: str = "<string>") -> Mesh:
    """
    Parse and validate a mesh document.

    Raises:
        ParseError: malformed JSON (with line/column) or schema violation (with field path)
        MeshValidationError: structural invariant violated
        GeometryError: invalid element geometry
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        document = MeshFile.model_validate(raw)
    except ValidationError as e:
        raise ParseError(f"{source}: {validation_messages(e)[0]}") from e
    return mesh_from_document(document)


def mesh_from_document(document: MeshFile) -> Mesh:
    """Convert a validated mesh document into a Mesh and check its invariants."""
    d = document.dimension
    for k, node in enumerate(document.nodes):
        if len(node) != d:
            raise MeshValidationError(f"nodes.{k}: expected {d} coordinates, got {len(node)}")
    coordinates = np.asarray(document.nodes, dtype=float).reshape(-1, d)

    elements = []
    for k, record in enumerate(document.elements):
        if isinstance(record, ElementRecord):
            if d != 3:
                raise MeshValidationError(f"elements.{k}: polyhedral element in a 2D mesh")
            elements.append(PolytopalElement(tuple(record.nodes), tuple(tuple(f) for f in record.faces), record.tag))
        else:
            if d != 2:
                raise MeshValidationError(f"elements.{k}: 3D elements need nodes and faces")
            elements.append(PolytopalElement(tuple(record)))

    boundary_sets = {
        name: BoundarySet(name, tuple(rec.nodes), tuple(tuple(f) for f in rec.facets))
        for name, rec in document.boundary_sets.items()
    }
    mesh = Mesh(d, coordinates, elements, boundary_sets)
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: Mesh) -> None:
    """
    Check the mesh invariants.

    Raises:
        MeshValidationError: non-finite coordinates, dangling node ids, duplicate
            nodes, boundary sets referencing missing entities
        GeometryError: degenerate, clockwise or non-closed elements
    """
    n = mesh.n_nodes
    if not np.all(np.isfinite(mesh.coordinates)):
        raise MeshValidationError("node coordinates must be finite")
    if mesh.n_elements == 0:
        raise MeshValidationError("mesh has no elements")

    for eid, element in enumerate(mesh.elements):
        ids = set(element.node_ids)
        if len(ids) != len(element.node_ids):
            raise MeshValidationError(f"element {eid}: repeated node id")
        if any(v < 0 or v >= n for v in ids):
            raise MeshValidationError(f"element {eid}: node id out of range [0, {n})")
        if element.faces is not None:
            face_nodes = {v for face in element.faces for v in face}
            if face_nodes != ids:
                raise MeshValidationError(f"element {eid}: face nodes differ from element nodes")
        element_measure_centroid(element, mesh)

    tol = Config.DUPLICATE_NODE_TOL * mesh.bbox_diagonal
    pairs = cKDTree(mesh.coordinates).query_pairs(tol)
    if pairs:
        i, j = min(pairs)
        raise MeshValidationError(f"nodes {i} and {j} coincide within {tol:.3e}")

    for name, bset in mesh.boundary_sets.items():
        if any(v < 0 or v >= n for v in bset.nodes):
            raise MeshValidationError(f"boundary set '{name}': node id out of range")
        for facet in bset.facets:
            if any(v < 0 or v >= n for v in facet):
                raise MeshValidationError(f"boundary set '{name}': facet {tuple(facet)} references a missing node")


def load_mesh(path: Union[str, Path]) -> Mesh:
    """Read a mesh file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror}") from e
    mesh = parse_mesh(text, str(path))
    app_logger.info(f"Loaded mesh {path}: {mesh.n_nodes} nodes, {mesh.n_elements} elements")
    return mesh


def _number(value: float) -> str:
    return f"{value:.{Config.MESH_FLOAT_DIGITS}g}"


def dump_mesh(mesh: Mesh) -> str:
    """Serialize a mesh; coordinates carry 17 significant digits."""
    nodes = ",\n".join("    [" + ", ".join(_number(v) for v in x) + "]" for x in mesh.coordinates)
    if mesh.dimension == 2:
        elements = [list(e.node_ids) for e in mesh.elements]
    else:
        elements = [{"nodes": list(e.node_ids), "faces": [list(f) for f in e.faces], "tag": e.tag}
                    for e in mesh.elements]
    element_text = ",\n".join("    " + json.dumps(e) for e in elements)
    sets = {name: {"nodes": list(s.nodes), "facets": [list(f) for f in s.facets]}
            for name, s in mesh.boundary_sets.items()}
    return (
        "{\n"
        f'  "dimension": {mesh.dimension},\n'
        f'  "nodes": [\n{nodes}\n  ],\n'
        f'  "elements": [\n{element_text}\n  ],\n'
        f'  "boundary_sets": {json.dumps(sets, sort_keys=True)}\n'
        "}\n"
    )


def save_mesh(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Write a mesh file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_mesh(mesh), encoding="utf-8")
    app_logger.info(f"Saved mesh to {path}")
    return path
