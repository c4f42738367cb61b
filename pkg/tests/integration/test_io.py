"""Integration-Tests fuer CSV-, JSON- und SVG-Dateien (infrastructure/)."""

from pathlib import Path

import numpy as np
import pytest

from deepwarp.domain.core import Dataset, LocationSet, PredictiveSummary
from deepwarp.domain.models import ModelKind, RunConfig
from deepwarp.infrastructure.csv_io import (
    DataFormatError,
    read_dataset_csv,
    read_locations_csv,
    read_predictions_csv,
    read_scene_csv,
    read_truth_csv,
    write_dataset_csv,
    write_predictions_csv,
    write_scene_csv,
    write_warp_csv,
)
from deepwarp.infrastructure.model_store import load_model, load_run_config, save_json
from deepwarp.infrastructure.svg_export import write_warp_svg


@pytest.fixture()
def data_file(tmp_path: Path) -> Path:
    path = tmp_path / "data.csv"
    path.write_text("s1,s2,z\n0.1,0.2,1.5\n0.3,0.4,-2\n0.5,0.9,0.25\n", encoding="utf-8")
    return path


class TestReadDataset:
    """Tests fuer das Einlesen von Beobachtungen."""

    def test_reads_two_dimensional(self, data_file):
        data = read_dataset_csv(data_file, seed=4)
        assert data.n == 3
        assert data.dim == 2
        assert data.seed == 4
        np.testing.assert_allclose(data.z, [1.5, -2.0, 0.25])

    def test_non_numeric_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("s1,z\n0.1,1\n0.2,2\n0.3,abc\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as excinfo:
            read_dataset_csv(path)
        assert excinfo.value.line == 4
        assert excinfo.value.path == str(path)

    def test_missing_value_reports_line(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("s1,z\n0.1,\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as excinfo:
            read_dataset_csv(path)
        assert excinfo.value.line == 2

    def test_missing_column(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("x,z\n0.1,1\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as excinfo:
            read_dataset_csv(path)
        assert excinfo.value.line == 1

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("s1,z\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            read_dataset_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "nothing.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataFormatError) as excinfo:
            read_dataset_csv(path)
        assert excinfo.value.line == 1


class TestLocationsAndPredictions:
    """Tests fuer Vorhersageorte und Vorhersagedateien."""

    def test_header_only_locations(self, tmp_path):
        path = tmp_path / "locs.csv"
        path.write_text("s1,s2\n", encoding="utf-8")
        coords = read_locations_csv(path)
        assert coords.shape == (0, 2)

    def test_predictions_written_and_read(self, tmp_path):
        path = tmp_path / "out" / "pred.csv"
        coords = np.array([[0.0, 1.0], [0.5, 0.5]])
        summary = PredictiveSummary.from_moments(np.array([1.0, 2.0]), np.array([0.25, 1.0]))
        write_predictions_csv(path, coords, summary)
        back_coords, back = read_predictions_csv(path)
        np.testing.assert_allclose(back_coords, coords)
        np.testing.assert_allclose(back.mean, [1.0, 2.0])
        np.testing.assert_allclose(back.sd, [0.5, 1.0])
        assert path.read_text(encoding="utf-8").splitlines()[0] == (
            "s1,s2,pred_mean,pred_sd,lower95,upper95"
        )

    def test_header_only_predictions(self, tmp_path):
        path = tmp_path / "pred.csv"
        write_predictions_csv(path, np.empty((0, 1)), None)
        assert path.read_text(encoding="utf-8") == "s1,pred_mean,pred_sd,lower95,upper95\n"

    def test_truth_file(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("s1,y\n-0.5,0.5\n0.5,-0.5\n", encoding="utf-8")
        coords, y = read_truth_csv(path)
        assert coords.shape == (2, 1)
        np.testing.assert_allclose(y, [0.5, -0.5])


class TestWriters:
    """Tests fuer Ausgabeformate."""

    def test_dataset_file_is_deterministic(self, tmp_path):
        data = Dataset(locations=LocationSet(np.array([0.1, 1.0 / 3.0])), z=np.array([2.0, 1e-12]))
        write_dataset_csv(tmp_path / "a.csv", data)
        write_dataset_csv(tmp_path / "b.csv", data)
        text = (tmp_path / "a.csv").read_bytes()
        assert text == (tmp_path / "b.csv").read_bytes()
        assert text.decode() == "s1,z\n0.1,2\n0.3333333333,1e-12\n"

    def test_scene_roundtrip(self, tmp_path):
        scene = np.arange(6.0).reshape(2, 3)
        write_scene_csv(tmp_path / "scene.csv", scene)
        np.testing.assert_array_equal(read_scene_csv(tmp_path / "scene.csv"), scene)

    def test_incomplete_scene_rejected(self, tmp_path):
        path = tmp_path / "scene.csv"
        path.write_text("row,col,value\n0,0,1\n1,1,2\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            read_scene_csv(path)

    def test_warp_csv_columns(self, tmp_path):
        path = tmp_path / "warp.csv"
        write_warp_csv(path, np.array([[0.0, 0.0]]), np.array([[0.1, 0.2]]))
        assert path.read_text(encoding="utf-8").splitlines()[0] == "s1,s2,f1,f2"

    def test_svg_is_deterministic(self, tmp_path):
        lines = [(0, np.array([[0.0, 0.0], [1.0, 1.0]])), (1, np.array([[0.0, 1.0], [1.0, 0.0]]))]
        write_warp_svg(tmp_path / "a.svg", lines, title="test")
        write_warp_svg(tmp_path / "b.svg", lines, title="test")
        content = (tmp_path / "a.svg").read_bytes()
        assert content.startswith(b"<?xml")
        assert content == (tmp_path / "b.svg").read_bytes()


class TestModelStore:
    """Tests fuer JSON-Konfiguration und Artefakte."""

    def test_missing_config_gives_defaults(self):
        assert load_run_config(None) == RunConfig()

    def test_config_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"model": "frk", "seed": 3, "schedule": [1, 2, 3]}', encoding="utf-8")
        config = load_run_config(path)
        assert config.model is ModelKind.FRK
        assert config.seed == 3
        assert config.schedule == (1, 2, 3)

    def test_invalid_config_names_field(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"top_per_dim": 0}', encoding="utf-8")
        with pytest.raises(DataFormatError, match="top_per_dim"):
            load_run_config(path)

    def test_invalid_artifact(self, tmp_path):
        path = tmp_path / "model.json"
        save_json(path, RunConfig())
        with pytest.raises(DataFormatError):
            load_model(path)
