import pytest
from pydantic import ValidationError

from config import Config
from models.config_models import (
    BoundaryConditionSpec,
    MaterialSpec,
    MeshSpec,
    ProbeSpec,
    SimulationConfig,
    TimeFunctionSpec,
    validation_messages,
)
from models.fem_models import MassScheme

pytestmark = pytest.mark.unit


def test_defaults_follow_config(bar_config_data):
    config = SimulationConfig.model_validate(bar_config_data)
    assert config.beta_stat == Config.BETA_STAT
    assert config.newton.max_iter == Config.NEWTON_MAX_ITER
    assert config.newmark.gamma == 0.5 and config.newmark.zeta == 0.25
    assert config.mass_scheme == MassScheme(Config.MASS_SCHEME)
    assert config.mesh.dimension == 2


def test_recommended_beta_range():
    assert Config.recommended_beta(0.4)
    assert not Config.recommended_beta(0.9)


@pytest.mark.parametrize("name, value", [
    ("WORKERS", 0),
    ("BETA_STAT", 1.5),
    ("NEWTON_MAX_ITER", 0),
    ("MASS_SCHEME", "lumped"),
    ("LOG_LEVEL", "LOUD"),
])
def test_config_rejects_bad_overrides(monkeypatch, name, value):
    monkeypatch.setattr(Config, name, value)
    with pytest.raises(ValueError):
        Config.validate()


def test_material_needs_one_pair():
    assert MaterialSpec(kappa=2.0, mu=1.0, rho=1.0).E is None
    with pytest.raises(ValidationError):
        MaterialSpec(E=1.0, nu=0.3, kappa=1.0, mu=1.0, rho=1.0)
    with pytest.raises(ValidationError):
        MaterialSpec(E=1.0, rho=1.0)


def test_mesh_spec_sources():
    assert MeshSpec(kind="h2s", divisions=[1, 1, 1], box=[[0, 0, 0], [1, 1, 1]]).dimension == 3
    assert MeshSpec(kind="file", path="mesh.json").dimension is None
    with pytest.raises(ValidationError):
        MeshSpec(kind="voronoi", n_seeds=10)
    with pytest.raises(ValidationError):
        MeshSpec(kind="q2s", box=[[0, 0], [1, 1]])
    with pytest.raises(ValidationError):
        MeshSpec(kind="q1", divisions=[0, 2], box=[[0, 0], [1, 1]])


def test_half_sine_time_function():
    load = TimeFunctionSpec(kind="half_sine", p_max=4.0, period=2.0)
    assert load.value(1.0) == pytest.approx(4.0)
    assert load.value(0.0) == pytest.approx(0.0)
    assert load.value(2.5) == 0.0
    assert TimeFunctionSpec(p_max=3.0).value(100.0) == 3.0
    with pytest.raises(ValidationError):
        TimeFunctionSpec(kind="half_sine")


def test_boundary_condition_payloads():
    with pytest.raises(ValidationError):
        BoundaryConditionSpec(kind="traction", target="xmax")
    with pytest.raises(ValidationError):
        BoundaryConditionSpec(kind="dirichlet_prescribed", target="xmax")
    assert BoundaryConditionSpec(kind="dirichlet_fixed", target="xmin").value is None


def test_probe_needs_one_location():
    with pytest.raises(ValidationError):
        ProbeSpec(name="p")
    with pytest.raises(ValidationError):
        ProbeSpec(name="p", node=1, point=[0.0, 0.0])


def test_vector_lengths_match_mesh_dimension(bar_config_data):
    bar_config_data["bcs"].append({"kind": "traction", "target": "xmax", "value": [1.0, 0.0, 0.0]})
    with pytest.raises(ValidationError, match="must have 2 entries"):
        SimulationConfig.model_validate(bar_config_data)


def test_validation_messages_name_the_field(bar_config_data):
    bar_config_data["newmark"]["dt"] = -1.0
    with pytest.raises(ValidationError) as info:
        SimulationConfig.model_validate(bar_config_data)
    messages = validation_messages(info.value)
    assert any(line.startswith("newmark.dt:") for line in messages)
