"""Tests fuer Konfigurations- und Artefaktmodelle (domain/models.py)."""

import pytest
from pydantic import ValidationError

from deepwarp.domain.core import InvalidParameterError
from deepwarp.domain.models import (
    AwuUnit,
    MobiusUnit,
    ModelKind,
    RunConfig,
    SimulationConfig,
    SrRbfUnit,
    architecture_label,
    parse_architecture,
)


class TestParseArchitecture:
    """Tests fuer die Kurzschreibweise der Architekturen."""

    def test_empty_code(self):
        assert parse_architecture("", 2) == []

    def test_awu_per_axis(self):
        units = parse_architecture("A", 2, awu_r=11)
        assert units == [AwuUnit(axis=0, r=11), AwuUnit(axis=1, r=11)]

    def test_full_stack(self):
        units = parse_architecture("a + s + m", 2)
        assert [u.unit for u in units] == ["awu", "awu", "sr_rbf", "mobius"]

    def test_unknown_token_rejected(self):
        with pytest.raises(InvalidParameterError):
            parse_architecture("A+X", 2)

    def test_label_roundtrip(self):
        assert architecture_label(parse_architecture("A+S+M", 2)) == "A+S+M"
        assert architecture_label([]) == ""


class TestRunConfig:
    """Tests fuer die Laufkonfiguration."""

    def test_defaults(self):
        config = RunConfig()
        assert config.model is ModelKind.SIWGP
        assert config.schedule == (100, 100, 100)
        assert config.simulation.effective_grid_per_dim == 1001

    def test_parses_units_from_json(self):
        config = RunConfig.model_validate_json(
            '{"model": "sdsp", "architecture": [{"unit": "awu", "axis": 1}, {"unit": "sr_rbf"},'
            ' {"unit": "mobius"}]}'
        )
        assert isinstance(config.architecture[0], AwuUnit)
        assert config.architecture[0].axis == 1
        assert isinstance(config.architecture[1], SrRbfUnit)
        assert isinstance(config.architecture[2], MobiusUnit)

    def test_negative_schedule_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig(schedule=(10, -1, 10))

    def test_unknown_unit_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"architecture": [{"unit": "spline"}]})

    def test_sr_rbf_resolution_bounds(self):
        with pytest.raises(ValidationError):
            SrRbfUnit(l=4)

    def test_frk_ignores_architecture(self):
        config = RunConfig(model=ModelKind.FRK, architecture=[AwuUnit()])
        assert config.effective_architecture() == []

    def test_check_dimension_axis(self):
        config = RunConfig(architecture=[AwuUnit(axis=1)])
        with pytest.raises(InvalidParameterError):
            config.check_dimension(1)
        config.check_dimension(2)

    def test_check_dimension_two_dimensional_units(self):
        config = RunConfig(architecture=[SrRbfUnit()])
        with pytest.raises(InvalidParameterError):
            config.check_dimension(1)

    def test_consecutive_mobius_warning(self):
        config = RunConfig(architecture=[MobiusUnit(), MobiusUnit(), SrRbfUnit(), MobiusUnit()])
        assert len(config.warnings()) == 1

    def test_two_dimensional_grid_default(self):
        sim = SimulationConfig(lower=[0.0, 0.0], upper=[1.0, 1.0])
        assert sim.dim == 2
        assert sim.effective_grid_per_dim == 50
