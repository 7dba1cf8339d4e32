"""
Models package exports.
"""
from models.fem_models import (
    BenchmarkPreset,
    BoundarySet,
    ElementMass,
    MassScheme,
    Mesh,
    NewmarkParams,
    NewmarkState,
    NewtonSettings,
    Node,
    PolytopalElement,
    ProjectionOperator,
    StabilizationConfig,
    StepReport,
    SurfaceTriangle,
)
from models.config_models import (
    BoundaryConditionSpec,
    MaterialSpec,
    MeshFile,
    MeshSpec,
    RunSummary,
    SimulationConfig,
    TimeFunctionSpec,
)

__all__ = [
    'BenchmarkPreset',
    'BoundarySet',
    'ElementMass',
    'MassScheme',
    'Mesh',
    'NewmarkParams',
    'NewmarkState',
    'NewtonSettings',
    'Node',
    'PolytopalElement',
    'ProjectionOperator',
    'RunSummary',
    'StabilizationConfig',
    'StepReport',
    'SurfaceTriangle',
    'BoundaryConditionSpec',
    'MaterialSpec',
    'MeshFile',
    'MeshSpec',
    'SimulationConfig',
    'TimeFunctionSpec',
]
