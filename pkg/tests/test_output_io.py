import json

import numpy as np
import pytest

from src.utils.output_io import (
    ArtifactHeader,
    convert_to_serializable,
    read_csv,
    write_columns,
    write_g_table_csv,
    write_json,
)

HEADER = ArtifactHeader(seed=7, config_hash="abc123", version="0.1.0")


def test_csv_starts_with_provenance_block(tmp_path):
    path = write_columns(tmp_path / "out.csv", HEADER, {"t_hr": [0.0, 0.5], "psi": [1e-3, 0.25]})
    text = path.read_bytes().decode("utf-8")
    assert text.splitlines()[:4] == ["# seed=7", "# config_hash=abc123", "# version=0.1.0", "t_hr,psi"]
    assert "\r" not in text
    assert text.endswith("\n")


def test_csv_round_trip(tmp_path):
    path = write_columns(tmp_path / "out.csv", HEADER, {"a": [1.0, 2.5], "b": [np.float64(1 / 3), 4.0]})
    table = read_csv(path)
    assert table["meta"] == {"seed": "7", "config_hash": "abc123", "version": "0.1.0"}
    assert table["columns"] == ["a", "b"]
    assert table["rows"][0] == ["1", "0.3333333333"]


def test_csv_is_deterministic(tmp_path):
    columns = {"t_hr": np.linspace(0.0, 1.0, 50), "x": np.sin(np.linspace(0.0, 1.0, 50))}
    first = write_columns(tmp_path / "a.csv", HEADER, columns).read_bytes()
    second = write_columns(tmp_path / "b.csv", HEADER, columns).read_bytes()
    assert first == second


def test_json_nan_becomes_null(tmp_path):
    path = write_json(tmp_path / "out.json", {"value": float("nan"), "arr": np.array([1.0, np.inf]), "n": np.int64(3)})
    payload = json.loads(path.read_text())
    assert payload == {"arr": [1.0, None], "n": 3, "value": None}


def test_convert_to_serializable_nested():
    converted = convert_to_serializable({"flag": np.bool_(True), "items": (np.float32(0.5), [np.int32(2)])})
    assert converted == {"flag": True, "items": [0.5, [2]]}
    assert isinstance(converted["flag"], bool)


def test_g_table_columns(tmp_path):
    grid = np.array([0.0, 1.0])
    path = write_g_table_csv(tmp_path / "g.csv", HEADER, grid, np.arange(8.0).reshape(2, 4))
    table = read_csv(path)
    assert table["columns"] == ["t_hr", "g1", "g2", "g3", "g4"]
    assert table["rows"][1] == ["1", "4", "5", "6", "7"]


def test_missing_value_written_empty(tmp_path):
    path = write_columns(tmp_path / "out.csv", HEADER, {"name": ["fixed", "opt"], "t": [1.5, None]})
    assert read_csv(path)["rows"][1] == ["opt", ""]


@pytest.mark.parametrize("value, text", [(0.1 + 0.2, "0.3"), (123456789.123, "123456789.1"), (1e-12, "1e-12")])
def test_float_format(tmp_path, value, text):
    path = write_columns(tmp_path / "f.csv", HEADER, {"x": [value]})
    assert read_csv(path)["rows"][0] == [text]
