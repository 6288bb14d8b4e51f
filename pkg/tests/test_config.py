import pytest

from cccharts.config import SolverSettings, config_from_dict, load_config, load_settings
from cccharts.errors import ConfigError

HEISENBERG_TOML = """
schema_version = 1
name = "heis"
dimension = 3
base_point = [0.0, 0.0, 0.0]

[domain]
lower = [-2.0, -2.0, -2.0]
upper = [2.0, 2.0, 2.0]

[[fields]]
name = "X"
components = ["1", "0", "-x2/2"]
degree = 1

[[fields]]
name = "Y"
components = ["0", "1", "x1/2"]
degree = 1

[[fields]]
name = "T"
components = ["0", "0", "1"]
degree = 2

[structure]
"1,2,3" = "{c12}"
"2,1,3" = "-1"
"""


def minimal(**extra):
    data = {"dimension": 2, "domain": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
            "fields": [{"components": ["1", "0"]}, {"components": ["0", "1"]}]}
    data.update(extra)
    return data


def test_settings_defaults():
    settings = load_settings()
    assert settings["threads"] == 1
    assert settings["log_level"] == "INFO"


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("CCCHARTS_THREADS", "4")
    monkeypatch.setenv("CCCHARTS_LOG_LEVEL", "debug")
    settings = load_settings()
    assert settings["threads"] == 4
    assert settings["log_level"] == "DEBUG"


@pytest.mark.parametrize("value", ["four", "0", "-2"])
def test_bad_thread_count(monkeypatch, value):
    monkeypatch.setenv("CCCHARTS_THREADS", value)
    with pytest.raises(ConfigError):
        load_settings()


def test_load_heisenberg_file(tmp_path):
    path = tmp_path / "heis.toml"
    path.write_text(HEISENBERG_TOML.format(c12="1"), encoding="utf-8")
    config = load_config(path)
    assert config.name == "heis"
    assert config.system.q == 3
    assert config.degrees == (1.0, 1.0, 2.0)
    assert config.graded().degrees == (1.0, 1.0, 2.0)
    assert config.path == path


def test_wrong_structure_table_is_rejected(tmp_path):
    path = tmp_path / "heis.toml"
    path.write_text(HEISENBERG_TOML.format(c12="2"), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_invalid_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("dimension = [", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_base_point_defaults_to_domain_center():
    config = config_from_dict(minimal())
    assert config.base_point == (0.0, 0.0)
    assert config.degrees is None
    assert config.density is None


@pytest.mark.parametrize("data", [
    minimal(colour="red"),
    minimal(schema_version=2),
    minimal(dimension=0),
    minimal(base_point=[5.0, 0.0]),
    minimal(base_point=[0.0]),
    minimal(fields=[]),
    minimal(fields=[{"components": ["1"]}]),
    minimal(fields=[{"components": ["1", "y"]}]),
    minimal(fields=[{"components": ["1", "0"], "degree": 0}]),
    minimal(domain={"lower": [1.0, 1.0], "upper": [0.0, 0.0]}),
    minimal(density="log("),
    minimal(solver={"grid": 16}),
    minimal(solver={"samples": 0}),
    minimal(solver={"unknown": 1}),
    minimal(structure={"1,2": "0"}),
    minimal(structure={"1,2,7": "0"}),
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_builtin_system():
    config = config_from_dict({"builtin": "grushin"})
    assert config.system.q == 4
    assert config.base_point == (0.0, 0.0)


def test_builtin_cannot_be_mixed_with_fields():
    with pytest.raises(ConfigError):
        config_from_dict({"builtin": "grushin", "dimension": 2})


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        config_from_dict({"builtin": "moebius"})


def test_graded_needs_degrees():
    with pytest.raises(ConfigError):
        config_from_dict(minimal()).graded()


def test_threads_argument_fills_solver():
    config = config_from_dict(minimal(), threads=3)
    assert config.solver.threads == 3
    assert config_from_dict(minimal(solver={"threads": 2}), threads=3).solver.threads == 2


def test_solver_override_ignores_none():
    settings = SolverSettings().override(seed=5, grid=None)
    assert settings.seed == 5
    assert settings.grid == 17
    assert settings.chart_config().seed == 5
    assert settings.cc_params().nodes == 256
