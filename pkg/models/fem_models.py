"""
Data models for the discretization.
Contains the mesh, element, projection and time-integration state structures.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np


class MassScheme(str, Enum):
    """Evaluation schemes for the integral of H^T H over an element."""
    CENTROID = "centroid"
    SUBTRIANGULATION = "subtriangulation"
    EXACT = "exact"


class BenchmarkPreset(str, Enum):
    """Built-in benchmark problems."""
    BAR2D = "bar2d"
    TRANSVERSAL_BEAM2D = "beam2d"
    COOKS2D = "cook2d"
    BAR3D = "bar3d"
    BEAM3D = "beam3d"
    PLATE3D = "plate3d"


@dataclass(frozen=True)
class Node:
    """Mesh node in the initial configuration."""
    id: int
    X: np.ndarray


@dataclass(frozen=True)
class PolytopalElement:
    """
    Polygon (counter-clockwise node loop) or polyhedron (node set plus
    outward-oriented face loops).
    """
    node_ids: Tuple[int, ...]
    faces: Optional[Tuple[Tuple[int, ...], ...]] = None
    tag: int = 0

    @property
    def is_polyhedron(self) -> bool:
        return self.faces is not None

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def local_index(self) -> Dict[int, int]:
        """Map global node id to position in node_ids."""
        return {nid: k for k, nid in enumerate(self.node_ids)}

    def facets(self) -> List[Tuple[int, ...]]:
        """Boundary facets: edges (2D) or face loops (3D)."""
        if self.faces is not None:
            return [tuple(f) for f in self.faces]
        n = len(self.node_ids)
        return [(self.node_ids[k], self.node_ids[(k + 1) % n]) for k in range(n)]


@dataclass(frozen=True)
class BoundarySet:
    """Named node and facet sets used to apply boundary conditions."""
    name: str
    nodes: Tuple[int, ...] = ()
    facets: Tuple[Tuple[int, ...], ...] = ()


def facet_key(facet: Tuple[int, ...]) -> Tuple[int, ...]:
    """Orientation-independent key of a facet."""
    return tuple(sorted(facet))


@dataclass
class Mesh:
    """Polytopal mesh: coordinates, elements and named boundary sets."""
    dimension: int
    coordinates: np.ndarray
    elements: List[PolytopalElement]
    boundary_sets: Dict[str, BoundarySet] = field(default_factory=dict)

    def __post_init__(self):
        self.coordinates = np.asarray(self.coordinates, dtype=float).reshape(-1, self.dimension)

    @property
    def n_nodes(self) -> int:
        return self.coordinates.shape[0]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dimension

    @property
    def nodes(self) -> List[Node]:
        return [Node(k, x) for k, x in enumerate(self.coordinates)]

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.coordinates.min(axis=0), self.coordinates.max(axis=0)

    @property
    def bbox_diagonal(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def facet_owners(self) -> Dict[Tuple[int, ...], List[Tuple[int, Tuple[int, ...]]]]:
        """Map facet key to the (element id, oriented facet) pairs that contain it."""
        owners: Dict[Tuple[int, ...], List[Tuple[int, Tuple[int, ...]]]] = {}
        for eid, element in enumerate(self.elements):
            for facet in element.facets():
                owners.setdefault(facet_key(facet), []).append((eid, facet))
        return owners

    def boundary_facets(self) -> List[Tuple[int, ...]]:
        """Facets owned by exactly one element, in the owner's orientation."""
        return [pairs[0][1] for pairs in self.facet_owners().values() if len(pairs) == 1]


@dataclass(frozen=True)
class SurfaceTriangle:
    """Triangle of a fan-triangulated polyhedron face."""
    vertices: np.ndarray
    node_ids: Tuple[int, int, int]
    face_id: int
    degenerate: bool = False


@dataclass(frozen=True)
class ProjectionOperator:
    """
    Element projection onto the linear monomials.

    pi_nabla maps stacked nodal displacements (node-major) to the parameters
    a, ordered a[m*d + i] for monomial m in (1, X, Y[, Z]) and direction i.
    grad_map maps them to the constant gradient, vec ordering G[i*d + J].
    Monomials are (X - origin) / scale (origin 0, scale 1 unless scaled).
    """
    pi_nabla: np.ndarray
    grad_map: np.ndarray
    measure: float
    centroid: np.ndarray
    origin: np.ndarray
    scale: float = 1.0

    @property
    def dimension(self) -> int:
        return self.centroid.shape[0]


@dataclass(frozen=True)
class ElementMass:
    """Element mass matrix, node-major DOF ordering."""
    M: np.ndarray


@dataclass(frozen=True)
class StabilizationConfig:
    """Weights of the simplex-submesh energy in the static and inertial parts."""
    beta_stat: float = 0.4
    beta_dyn: float = 0.0

    def __post_init__(self):
        for name in ("beta_stat", "beta_dyn"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class NewmarkParams:
    """Newmark parameters (gamma, zeta) and time step."""
    dt: float
    gamma: float = 0.5
    zeta: float = 0.25

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.zeta <= 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def mass_factor(self) -> float:
        """Coefficient of M in the effective tangent."""
        return 1.0 / (self.zeta * self.dt ** 2)


@dataclass
class NewmarkState:
    """Global displacement, velocity and acceleration at time t."""
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float = 0.0

    def copy(self) -> "NewmarkState":
        return NewmarkState(self.u.copy(), self.v.copy(), self.a.copy(), self.t)


@dataclass(frozen=True)
class NewtonSettings:
    """Newton convergence controls."""
    tol_abs: float = 1e-8
    tol_rel: float = 1e-10
    max_iter: int = 25
    max_step_cuts: int = 8


@dataclass
class StepReport:
    """Outcome of one Newton solve."""
    iterations: int
    step_cuts: int
    residual_norm: float
    converged: bool = True
    residual_history: List[float] = field(default_factory=list)
    strain_energy: float = 0.0
    reactions: Optional[np.ndarray] = None
