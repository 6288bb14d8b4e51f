import csv
import json
import math

import numpy as np

from cccharts.output import SCHEMA_VERSION, read_json, to_jsonable, write_csv, write_json


def test_json_has_schema_version(tmp_path):
    path = write_json(tmp_path / "sub" / "out.json", {"value": np.float64(1.5), "count": np.int64(3)})
    document = read_json(path)
    assert document == {"schema_version": SCHEMA_VERSION, "value": 1.5, "count": 3}


def test_non_finite_floats_become_null(tmp_path):
    path = write_json(tmp_path / "out.json", {"a": math.inf, "b": [1.0, math.nan]})
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["a"] is None
    assert document["b"] == [1.0, None]


def test_to_jsonable_converts_nested_numpy():
    value = to_jsonable({"m": np.eye(2), "flag": np.bool_(True), 3: (1, 2)})
    assert value == {"m": [[1.0, 0.0], [0.0, 1.0]], "flag": True, "3": [1, 2]}


def test_csv_has_schema_version_column(tmp_path):
    path = write_csv(tmp_path / "rows.csv", ["x", "value"], [[[0.5, -1.0], 0.1], [[0.0, 0.0], 1.0 / 3.0]])
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["schema_version", "x", "value"]
    assert rows[1] == ["1", "0.5 -1.0", "0.1"]
    assert float(rows[2][2]) == 1.0 / 3.0


def test_same_payload_same_bytes(tmp_path):
    payload = {"b": 2.0, "a": [0.1, 0.2]}
    one = write_json(tmp_path / "one.json", payload).read_bytes()
    two = write_json(tmp_path / "two.json", dict(reversed(list(payload.items())))).read_bytes()
    assert one == two
