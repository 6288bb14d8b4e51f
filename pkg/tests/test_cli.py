import csv
import json
from pathlib import Path

import pytest

from cccharts.cli import build_parser, delta_range, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

NON_SPANNING = """
schema_version = 1
dimension = 2

[domain]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[[fields]]
name = "X"
components = ["1", "0"]
"""


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def write_config(tmp_path, text, name="system.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_flow_reaches_closed_form(tmp_path):
    code = main(["flow", "--config", str(CONFIGS / "quadratic.toml"), "--field", "Q", "--time", "0.5",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = read_rows(tmp_path / "flow.csv")
    assert rows[0] == ["schema_version", "t", "x1", "x2"]
    assert float(rows[-1][1]) == pytest.approx(0.5)
    assert float(rows[-1][2]) == pytest.approx(2.0, abs=1e-6)


def test_flow_past_blow_up_fails(tmp_path):
    code = main(["flow", "--config", str(CONFIGS / "quadratic.toml"), "--field", "Q", "--time", "1.1",
                 "--out", str(tmp_path)])
    assert code == 1
    assert (tmp_path / "flow.csv").exists()


def test_flow_unknown_field(tmp_path):
    code = main(["flow", "--config", str(CONFIGS / "quadratic.toml"), "--field", "Z", "--time", "0.1",
                 "--out", str(tmp_path)])
    assert code == 2


def test_distance_writes_json(tmp_path):
    code = main(["distance", "--config", str(CONFIGS / "euclidean2.toml"), "--to", "0.3,0.4",
                 "--out", str(tmp_path)])
    assert code == 0
    document = json.loads((tmp_path / "distance.json").read_text(encoding="utf-8"))
    assert document["schema_version"] == 1
    assert 0.49 <= document["estimate"]["value"] <= 0.52


def test_distance_point_dimension_checked(tmp_path):
    code = main(["distance", "--config", str(CONFIGS / "euclidean2.toml"), "--to", "0.3,0.4,0.5",
                 "--out", str(tmp_path)])
    assert code == 2


def test_ball_writes_lebesgue_and_weighted_rows(tmp_path):
    code = main(["ball", "--config", str(CONFIGS / "euclidean2.toml"), "--delta", "0.5", "--samples", "2000",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = read_rows(tmp_path / "ball.csv")
    assert rows[0] == ["schema_version", "center", "delta", "volume", "stderr", "samples", "seed", "weight"]
    assert rows[1][-1] == "lebesgue"
    assert len(rows) == 3


def test_norms_zygmund_of_abs(tmp_path):
    code = main(["norms", "--config", str(CONFIGS / "euclidean2.toml"), "--function", "abs(x1)",
                 "--family", "zygmund", "--out", str(tmp_path)])
    assert code == 0
    document = json.loads((tmp_path / "norms.json").read_text(encoding="utf-8"))
    assert document["report"]["components"]["second_difference"] == pytest.approx(2.0, abs=0.05)


def test_norms_bad_expression(tmp_path):
    code = main(["norms", "--config", str(CONFIGS / "euclidean2.toml"), "--function", "x1 +",
                 "--out", str(tmp_path)])
    assert code == 2


def test_scaling_single_delta_omits_slope(tmp_path):
    code = main(["scaling", "--config", str(CONFIGS / "euclidean2.toml"), "--deltas", "0.5:0.5:1",
                 "--samples", "1000", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "scaling.json").read_text(encoding="utf-8"))
    assert "slope" not in summary
    assert len(read_rows(tmp_path / "scaling.csv")) == 2


def test_scaling_writes_slope_and_doubling(tmp_path):
    code = main(["scaling", "--config", str(CONFIGS / "euclidean2.toml"), "--deltas", "0.25:0.5:2",
                 "--samples", "2000", "--doubling", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "scaling.json").read_text(encoding="utf-8"))
    assert summary["slope"] == pytest.approx(2.0, abs=0.3)
    rows = read_rows(tmp_path / "scaling.csv")
    assert rows[0] == ["schema_version", "delta", "volume", "stderr", "lambda", "ratio"]
    assert len(rows) == 3
    assert len(read_rows(tmp_path / "doubling.csv")) == 3


def test_scaling_needs_degrees(tmp_path):
    config = write_config(tmp_path, NON_SPANNING)
    assert main(["scaling", "--config", config, "--out", str(tmp_path)]) == 2


def test_chart_of_non_spanning_fields_fails(tmp_path):
    config = write_config(tmp_path, NON_SPANNING)
    assert main(["chart", "--config", config, "--out", str(tmp_path)]) == 1


@pytest.mark.slow
def test_chart_of_coordinate_fields(tmp_path):
    code = main(["chart", "--config", str(CONFIGS / "euclidean2.toml"), "--grid", "9", "--sample-y", "5",
                 "--out", str(tmp_path)])
    assert code == 0
    header = json.loads((tmp_path / "chart.json").read_text(encoding="utf-8"))
    assert header["J0"] == [1, 2]
    assert (tmp_path / "chart_A.csv").exists()
    assert len(read_rows(tmp_path / "chart_Y.csv")) == 6
    assert (tmp_path / "chart_density.json").exists()


def test_missing_config_is_a_usage_error(tmp_path):
    assert main(["ball", "--out", str(tmp_path)]) == 2


def test_broken_toml_is_a_usage_error(tmp_path):
    config = write_config(tmp_path, "dimension = [")
    assert main(["ball", "--config", config, "--out", str(tmp_path)]) == 2


def test_even_grid_is_a_usage_error(tmp_path):
    code = main(["norms", "--config", str(CONFIGS / "euclidean2.toml"), "--function", "x1", "--grid", "8",
                 "--out", str(tmp_path)])
    assert code == 2


def test_bad_thread_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("CCCHARTS_THREADS", "zero")
    assert main(["verify", "--suite", "expr", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [
    ["ball", "--samples", "0"],
    ["scaling", "--deltas", "0.5:2.0:3"],
    ["flow", "--time", "0.1", "--threads", "-1"],
    ["teleport"],
])
def test_argument_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_verify_writes_reports(tmp_path):
    assert main(["verify", "--suite", "expr", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "verify.xml").exists()
    document = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    assert document["suites"][0]["name"] == "expr"
    assert document["suites"][0]["passed"]


def test_default_output_directory_comes_from_environment(tmp_path):
    assert main(["verify", "--suite", "expr"]) == 0
    assert (tmp_path / "default_out" / "verify.xml").exists()


def test_delta_range_parsing():
    assert delta_range("0.2:1.0:5") == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
    assert delta_range("0.3:0.3:1") == [0.3]


def test_parser_lists_all_subcommands():
    parser = build_parser()
    for command in ("chart", "ball", "distance", "norms", "scaling", "flow", "verify"):
        assert parser.parse_args([command] + (["--to", "0,0"] if command == "distance" else [])
                                 + (["--function", "x1"] if command == "norms" else [])
                                 + (["--time", "1"] if command == "flow" else [])).command == command
