"""
Pydantic models for user-facing documents: simulation config and mesh file.
"""
import math
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config import Config
from models.fem_models import MassScheme


def validation_messages(exc: ValidationError) -> List[str]:
    """One 'field.path: message' line per schema violation."""
    lines = []
    for error in exc.errors():
        field = ".".join(str(p) for p in error.get("loc", ())) or "document"
        lines.append(f"{field}: {error.get('msg', 'invalid value')}")
    return lines


class MaterialSpec(BaseModel):
    """Material block: engineering constants or bulk/shear moduli."""
    E: Optional[float] = Field(None, gt=0, description="Young's modulus (MPa)")
    nu: Optional[float] = Field(None, gt=-1.0, description="Poisson ratio")
    kappa: Optional[float] = Field(None, gt=0, description="Bulk modulus (MPa)")
    mu: Optional[float] = Field(None, gt=0, description="Shear modulus (MPa)")
    rho: float = Field(..., ge=0, description="Density (tonne/mm^3)")

    @model_validator(mode="after")
    def check_pair(self):
        engineering = self.E is not None and self.nu is not None
        moduli = self.kappa is not None and self.mu is not None
        if engineering == moduli:
            raise ValueError("give either {E, nu} or {kappa, mu}")
        return self


class MeshSpec(BaseModel):
    """Inline mesh generator settings or a mesh file reference."""
    kind: Literal["q2s", "h2s", "q1", "h1", "voronoi", "cmesh", "file"]
    divisions: Optional[List[int]] = None
    box: Optional[List[List[float]]] = Field(None, description="[[xmin, ymin(, zmin)], [xmax, ymax(, zmax)]]")
    corners: Optional[List[List[float]]] = Field(None, description="Four 2D corners of a quadrilateral domain")
    seeds: Optional[List[List[float]]] = None
    n_seeds: Optional[int] = Field(None, ge=1)
    random_seed: int = 0
    shift: Optional[float] = Field(None, gt=0, description="C-mesh chevron offset")
    path: Optional[str] = None

    @field_validator("divisions")
    @classmethod
    def positive_divisions(cls, value):
        if value is not None and any(n < 1 for n in value):
            raise ValueError("divisions must be >= 1 per axis")
        return value

    @model_validator(mode="after")
    def check_source(self):
        if self.kind == "file":
            if not self.path:
                raise ValueError("mesh kind 'file' needs a path")
            return self
        if self.kind == "voronoi":
            if self.seeds is None and self.n_seeds is None:
                raise ValueError("voronoi mesh needs seeds or n_seeds")
            if self.box is None:
                raise ValueError("voronoi mesh needs a box")
            return self
        if self.divisions is None:
            raise ValueError(f"{self.kind} mesh needs divisions")
        if self.box is None and self.corners is None:
            raise ValueError(f"{self.kind} mesh needs a box or corners")
        return self

    @property
    def dimension(self) -> Optional[int]:
        if self.kind in ("h2s", "h1"):
            return 3
        if self.kind in ("q2s", "q1", "voronoi", "cmesh"):
            return 2
        return None


class TimeFunctionSpec(BaseModel):
    """Load amplitude over time."""
    kind: Literal["constant", "half_sine"] = "constant"
    p_max: float = 1.0
    period: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_period(self):
        if self.kind == "half_sine" and self.period is None:
            raise ValueError("half_sine needs a period")
        return self

    def value(self, t: float) -> float:
        """Amplitude at time t; half_sine is P_max sin(pi t / T) on [0, T] and 0 after."""
        if self.kind == "constant":
            return self.p_max
        if t < 0.0 or t > self.period:
            return 0.0
        return self.p_max * math.sin(math.pi * t / self.period)


class AffineField(BaseModel):
    """Displacement field u = c + A X."""
    c: List[float]
    A: List[List[float]]


class BoundaryConditionSpec(BaseModel):
    """Boundary condition, load or initial condition on a named set."""
    kind: Literal["dirichlet_fixed", "dirichlet_prescribed", "traction", "body_force", "initial_velocity"]
    target: str = Field("all", description="Boundary set name, or 'all'")
    components: Optional[List[bool]] = Field(None, description="Per-axis mask")
    value: Optional[List[float]] = None
    affine: Optional[AffineField] = None
    time_function: TimeFunctionSpec = Field(default_factory=TimeFunctionSpec)

    @model_validator(mode="after")
    def check_payload(self):
        if self.kind == "dirichlet_prescribed" and self.value is None and self.affine is None:
            raise ValueError("dirichlet_prescribed needs a value or an affine field")
        if self.kind in ("traction", "body_force", "initial_velocity") and self.value is None:
            raise ValueError(f"{self.kind} needs a value")
        return self


class NewmarkSpec(BaseModel):
    """Time integration block."""
    dt: float = Field(..., gt=0, description="Time step (s)")
    t_end: float = Field(..., gt=0, description="End time (s)")
    gamma: float = Field(Config.NEWMARK_GAMMA, ge=0, le=1)
    zeta: float = Field(Config.NEWMARK_ZETA, gt=0)


class NewtonSpec(BaseModel):
    """Newton solver block."""
    tol_abs: float = Field(Config.NEWTON_TOL_ABS, gt=0)
    tol_rel: float = Field(Config.NEWTON_TOL_REL, gt=0)
    max_iter: int = Field(Config.NEWTON_MAX_ITER, ge=1)
    max_step_cuts: int = Field(Config.MAX_STEP_CUTS, ge=0)


class ProbeSpec(BaseModel):
    """History output at a node, or at the node closest to a point."""
    name: str
    node: Optional[int] = Field(None, ge=0)
    point: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_location(self):
        if (self.node is None) == (self.point is None):
            raise ValueError("probe needs exactly one of node or point")
        return self


class OutputSpec(BaseModel):
    """Output locations and cadence."""
    directory: str = Config.OUTPUT_DIR
    snapshot_times: List[float] = Field(default_factory=list)
    log_every: int = Field(10, ge=1)
    summary: bool = True
    log_file: bool = Field(True, description="Mirror the run log into <directory>/run.log")


class SimulationConfig(BaseModel):
    """Complete description of a run."""
    name: str = "run"
    analysis: Literal["dynamic", "static"] = "dynamic"
    mesh: MeshSpec
    material: MaterialSpec
    bcs: List[BoundaryConditionSpec] = Field(default_factory=list)
    newmark: NewmarkSpec
    newton: NewtonSpec = Field(default_factory=NewtonSpec)
    mass_scheme: MassScheme = MassScheme(Config.MASS_SCHEME)
    beta_stat: float = Field(Config.BETA_STAT, ge=0, le=1)
    beta_dyn: float = Field(Config.BETA_DYN, ge=0, le=1)
    scaled_monomials: bool = False
    probes: List[ProbeSpec] = Field(default_factory=list)
    output: OutputSpec = Field(default_factory=OutputSpec)
    workers: int = Field(Config.WORKERS, ge=1)
    load_factor: float = 1.0

    @model_validator(mode="after")
    def check_dimensions(self):
        d = self.mesh.dimension
        if d is None:
            return self
        for bc in self.bcs:
            for label, vector in (("value", bc.value), ("components", bc.components)):
                if vector is not None and len(vector) != d:
                    raise ValueError(f"bc on '{bc.target}': {label} must have {d} entries")
        for probe in self.probes:
            if probe.point is not None and len(probe.point) != d:
                raise ValueError(f"probe '{probe.name}': point must have {d} entries")
        return self


class ElementRecord(BaseModel):
    """Polyhedral element in a mesh file."""
    nodes: List[int]
    faces: List[List[int]]
    tag: int = 0


class BoundarySetRecord(BaseModel):
    """Boundary set in a mesh file."""
    nodes: List[int] = Field(default_factory=list)
    facets: List[List[int]] = Field(default_factory=list)


class MeshFile(BaseModel):
    """Mesh file document (JSON)."""
    dimension: Literal[2, 3]
    nodes: List[List[float]]
    elements: List[Union[List[int], ElementRecord]]
    boundary_sets: Dict[str, BoundarySetRecord] = Field(default_factory=dict)


class RunSummary(BaseModel):
    """Machine-readable record of a finished run."""
    name: str
    analysis: str
    dimension: int
    n_nodes: int
    n_elements: int
    n_dofs: int
    mesh: Dict[str, Any] = Field(default_factory=dict)
    steps: int = 0
    newton_iterations: List[int] = Field(default_factory=list)
    step_cuts: List[int] = Field(default_factory=list)
    times: List[float] = Field(default_factory=list)
    kinetic_energy: List[float] = Field(default_factory=list)
    strain_energy: List[float] = Field(default_factory=list)
    external_work: List[float] = Field(default_factory=list)
    momentum: List[List[float]] = Field(default_factory=list)
    equilibrium_error: List[float] = Field(default_factory=list)
    probes: Dict[str, int] = Field(default_factory=dict)
    snapshots: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)

    @property
    def total_energy(self) -> List[float]:
        """Kinetic plus strain energy minus the accumulated external work."""
        return [k + u - w for k, u, w in zip(self.kinetic_energy, self.strain_energy, self.external_work)]
