"""
Error hierarchy for the solver.

Geometry, mesh-file and material errors are ValueErrors (bad input); solver
errors are RuntimeErrors. The CLI maps the two families to exit codes 2 and 3.
"""
from typing import Optional


class PolyVemError(Exception):
    """Base class for all solver errors."""


# Geometry

class GeometryError(PolyVemError, ValueError):
    """Invalid or degenerate geometry."""


class DegenerateElement(GeometryError):
    """Element measure below tolerance."""


class OrientationError(GeometryError):
    """Polygon loop is clockwise (negative signed area)."""


class NonClosedSurface(GeometryError):
    """Polyhedron faces do not pair every edge with an opposite edge."""


class FaceTooSmall(GeometryError):
    """Face loop with fewer than three nodes."""


class DegenerateTriangle(GeometryError):
    """Surface triangle with zero area Jacobian."""


class SubdivisionFailed(GeometryError):
    """No simplex subdivision using only element nodes exists for this element."""


class DuplicateSeeds(GeometryError):
    """Voronoi seeds are not pairwise distinct."""


# Mesh files

class MeshFileError(PolyVemError, ValueError):
    """Problem reading or validating a mesh file."""


class ParseError(MeshFileError):
    """Malformed mesh file; message carries line/column or the field path."""


class MeshValidationError(MeshFileError):
    """Mesh violates a structural invariant."""


# Material

class MaterialError(PolyVemError, ValueError):
    """Invalid material parameters or state."""


class IncompressibleLimit(MaterialError):
    """Poisson ratio at or above the incompressible limit."""


class InvertedElement(MaterialError):
    """Deformation with det F <= 0."""

    def __init__(self, message: str, element_id: Optional[int] = None):
        self.element_id = element_id
        if element_id is not None:
            message = f"element {element_id}: {message}"
        super().__init__(message)


# Loads and boundary conditions

class BoundaryConditionError(PolyVemError, ValueError):
    """Boundary condition cannot be resolved on the mesh."""


class FacetNotOnBoundary(BoundaryConditionError):
    """Load facet is not a boundary facet of the mesh."""


# Solver

class SolverError(PolyVemError, RuntimeError):
    """Numerical solution failed."""


class SingularSystem(SolverError):
    """Linear system is singular; carries the near-null-space count if computed."""

    def __init__(self, message: str, null_count: Optional[int] = None):
        self.null_count = null_count
        if null_count is not None:
            message = f"{message} ({null_count} near-null vectors, suspected rigid modes)"
        super().__init__(message)


class NewtonDiverged(SolverError):
    """Newton iteration cap and step cuts exhausted."""
