import json
import os

import numpy as np
import pytest

from qusum.system import config
from qusum.system.exceptions import ConfigError


def write(tmp_path, name, text):
    path = os.path.join(tmp_path, name)
    with open(path, "w") as fp:
        fp.write(text)
    return path


def test_defaults():
    """Tests the default configuration: canonical pair and block lengths 1, 5, 50"""
    cfg = config.ScenarioConfig()
    assert (cfg.r0, cfg.r1) == (0.9, 0.9)
    assert np.isclose(cfg.theta, np.pi / 4)
    assert cfg.l_list == [1, 5, 50]
    assert cfg.cap == 10**7
    assert not cfg.classical


def test_defaults_not_shared():
    """Tests whether list defaults are copied per configuration"""
    a = config.ScenarioConfig()
    a.l_list.append(7)
    assert config.ScenarioConfig().l_list == [1, 5, 50]


def test_parse_angle():
    """Tests angles written as numbers and multiples of pi"""
    assert np.isclose(config.parse_angle("pi/4"), np.pi / 4)
    assert np.isclose(config.parse_angle("3*pi/4"), 3 * np.pi / 4)
    assert np.isclose(config.parse_angle("2pi"), 2 * np.pi)
    assert config.parse_angle("0.5") == 0.5
    for bad in ("/4", "foo", ""):
        with pytest.raises(ValueError):
            config.parse_angle(bad)


def test_read_parameter_file(tmp_path):
    """Tests key = value parsing with comments, lists, families and booleans"""
    path = write(
        tmp_path,
        "scenario.txt",
        "# canonical pair\nr0 = 0.8\ntheta = pi/2  # quarter turn\n\nl_list = 1, 2, 3\n"
        "family = 0.6:0; 0.6:pi\nstraddle = yes\n",
    )
    values, lines = config.read_parameter_file(path)
    assert values["r0"] == 0.8
    assert np.isclose(values["theta"], np.pi / 2)
    assert values["l_list"] == [1, 2, 3]
    assert values["family"] == [(0.6, 0.0), (0.6, np.pi)]
    assert values["straddle"] is True
    assert lines == {"r0": 2, "theta": 3, "l_list": 5, "family": 6, "straddle": 7}


def test_read_parameter_file_unknown_key(tmp_path):
    """Tests whether an unknown key names its line"""
    path = write(tmp_path, "bad.txt", "r0 = 0.5\ncolour = blue\n")
    with pytest.raises(ConfigError) as err:
        config.read_parameter_file(path)
    assert err.value.key == "colour" and err.value.line == 2


def test_read_parameter_file_missing():
    """Tests whether a missing file raises OSError"""
    with pytest.raises(OSError):
        config.read_parameter_file("foo")


def test_read_parameter_file_malformed(tmp_path):
    """Tests whether a line without '=' raises ConfigError"""
    path = write(tmp_path, "bad.txt", "r0 0.5\n")
    with pytest.raises(ConfigError):
        config.read_parameter_file(path)


def test_read_parameter_file_json(tmp_path):
    """Tests whether a JSON object is read with the same conversions"""
    path = write(tmp_path, "scenario.json", json.dumps({"theta": "pi/2", "l_list": [1, 2], "trials": 10}))
    values, lines = config.read_parameter_file(path)
    assert np.isclose(values["theta"], np.pi / 2)
    assert values["l_list"] == [1, 2] and values["trials"] == 10
    assert lines == {}


def test_validation_reports_line(tmp_path):
    """Tests whether an out-of-range value reports its key and line"""
    path = write(tmp_path, "bad.txt", "trials = 5\nr0 = 1.5\n")
    with pytest.raises(ConfigError) as err:
        config.ScenarioConfig.build(path=path)
    assert err.value.key == "r0" and err.value.line == 2
    assert "line 2" in str(err.value)


@pytest.mark.parametrize(
    "values",
    [
        {"measurement": "sdp"},
        {"l_list": [0]},
        {"h_list": [-1.0]},
        {"trials": 0},
        {"nu": 30, "steps": 20},
        {"bias_pre": 0.2},
        {"bias_pre": 1.2, "bias_post": 0.5},
        {"eps": [1.0]},
        {"alpha": [1.0]},
        {"threads": 0},
        {"max_censored": 2.0},
        {"family": "0.6"},
        {"trials": 2.5},
    ],
)
def test_validation_errors(values):
    """Tests whether invalid settings raise ConfigError"""
    with pytest.raises(ConfigError):
        config.ScenarioConfig(values)


def test_build_precedence(tmp_path):
    """Tests whether flags override the file and the file overrides the preset"""
    path = write(tmp_path, "scenario.txt", "trials = 30\nh_list = 2, 3\n")
    cfg = config.ScenarioConfig.build("fast-accept", path, {"trials": 7, "seed": None})
    assert cfg.trials == 7
    assert cfg.h_list == [2.0, 3.0]
    assert cfg.bias_post == 0.6
    assert cfg.classical


def test_build_unknown_preset():
    """Tests whether an unknown preset raises ConfigError"""
    with pytest.raises(ConfigError):
        config.ScenarioConfig.build("fig9")


def test_presets_valid():
    """Tests whether every preset passes validation"""
    for name in config.PRESETS:
        config.ScenarioConfig.build(name)


def test_default_out_dir(monkeypatch, tmp_path):
    """Tests whether QUSUM_OUT_DIR sets the output directory"""
    monkeypatch.setenv("QUSUM_OUT_DIR", str(tmp_path))
    assert config.default_out_dir() == str(tmp_path)
    monkeypatch.delenv("QUSUM_OUT_DIR")
    assert config.default_out_dir() == os.getcwd()


def test_run_manifest(tmp_path):
    """Tests whether the manifest records digests that detect later edits"""
    out = write(tmp_path, "result.csv", "a,b\n1,2\n")
    manifest = config.RunManifest("simulate", config.ScenarioConfig())
    manifest.add(out)
    path = manifest.write(str(tmp_path))
    with open(path) as fp:
        data = json.load(fp)
    assert data["command"] == "simulate"
    assert set(data["outputs"]) == {"result.csv"}
    assert data["config"]["l_list"] == [1, 5, 50]
    assert manifest.verify(str(tmp_path))
    write(tmp_path, "result.csv", "a,b\n1,3\n")
    assert not manifest.verify(str(tmp_path))


def test_read_parameter_file_skips_null(tmp_path):
    """Tests whether null JSON values keep their defaults"""
    path = write(tmp_path, "scenario.json", json.dumps({"family": None, "bias_pre": None, "trials": 7}))
    values, _ = config.read_parameter_file(path)
    assert values == {"trials": 7}
    assert config.ScenarioConfig(values).family is None


def test_manifest_as_parameter_file(tmp_path):
    """Tests whether a written manifest rebuilds the configuration it records"""
    cfg = config.ScenarioConfig.build("fig2", overrides={"seed": 11, "family": "0.9:pi/4; 0.8:pi/3"})
    path = config.RunManifest("simulate", cfg).write(str(tmp_path))
    again = config.ScenarioConfig.build(path=path)
    assert np.isclose(again.theta, cfg.theta) and again.h_list == cfg.h_list
    assert again.seed == 11 and again.l_list == [1, 5, 50]
    assert np.allclose(again.family, cfg.family)
    assert again.bias_pre is None


def test_run_manifest_load(tmp_path):
    """Tests whether a loaded manifest reports missing and changed files by name"""
    first = write(tmp_path, "a.csv", "x\n1\n")
    second = write(tmp_path, "b.csv", "y\n2\n")
    manifest = config.RunManifest("block-rate", config.ScenarioConfig())
    manifest.add(first)
    manifest.add(second)
    path = manifest.write(str(tmp_path))
    loaded = config.RunManifest.load(path)
    assert loaded.command == "block-rate"
    assert loaded.outputs == manifest.outputs
    assert loaded.timestamp == manifest.timestamp
    assert loaded.mismatches(str(tmp_path)) == []
    write(tmp_path, "a.csv", "x\n9\n")
    os.remove(second)
    assert loaded.mismatches(str(tmp_path)) == ["a.csv", "b.csv"]
    assert not loaded.verify(str(tmp_path))


def test_run_manifest_load_errors(tmp_path):
    """Tests whether a missing manifest or one without config is rejected"""
    with pytest.raises(OSError):
        config.RunManifest.load(os.path.join(tmp_path, "run_manifest.json"))
    path = write(tmp_path, "run_manifest.json", json.dumps({"command": "simulate"}))
    with pytest.raises(ConfigError):
        config.RunManifest.load(path)
