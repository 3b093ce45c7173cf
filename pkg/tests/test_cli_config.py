import filecmp
import io
import os

import pytest
import yaml

from qtrates.cli import EXIT_CONFIG, EXIT_GATE, EXIT_OK, main
from qtrates.config import (ConfigError, load_config, parse_config, parse_tolerance_override,
                            with_overrides)
from qtrates.presets import PRESET_NAMES, list_presets, preset_config

CUSTOM = {
    "experiment": "custom",
    "task": "paths",
    "model": {"kind": "custom",
              "hamiltonian": [[0.5, 1.0], [1.0, -0.5]],
              "rho0": [[1, 0], [0, 0]],
              "pi_a": [[1, 0], [0, 0]],
              "pi_b": [[0, 0], [0, 1]]},
    "grid": {"t_start": 0.0, "t_end": 2.0, "n_steps": 20},
    "paths": ["direct", "finite_difference"],
}

RANDOM = {
    "experiment": "random-small",
    "task": "random",
    "model": {"kind": "random", "count": 12, "dim_max": 4},
    "seed": 20240611,
}


def cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


# -- configuration parsing ------------------------------------------------------------


def test_presets_are_listed_and_valid():
    assert len(PRESET_NAMES) == 10
    assert [n for n, _ in list_presets()] == list(PRESET_NAMES)
    for name in PRESET_NAMES:
        cfg = preset_config(name)
        assert cfg.experiment == name
    with pytest.raises(KeyError):
        preset_config("nope")


def test_preset_yaml_round_trip(tmp_path):
    code, text = cli("presets", "--write", str(tmp_path))
    assert code == EXIT_OK
    assert len(text.splitlines()) == 10
    for name in PRESET_NAMES:
        cfg = load_config(tmp_path / f"{name}.yaml")
        assert cfg.digest() == preset_config(name).digest()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config(dict(CUSTOM, colour="red"))
    bad = dict(CUSTOM, grid={"t_start": 0.0, "t_end": 1.0, "n_steps": 4, "dt": 0.1})
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_missing_seed_is_a_config_error():
    data = dict(RANDOM)
    del data["seed"]
    with pytest.raises(ConfigError, match="seed"):
        parse_config(data)


def test_tolerance_override_parsing():
    assert parse_tolerance_override("path_agreement=1e-7") == ("path_agreement", 1e-7)
    with pytest.raises(ConfigError):
        parse_tolerance_override("path_agreement")
    with pytest.raises(ConfigError):
        parse_tolerance_override("path_agreement=tiny")
    cfg = with_overrides(parse_config(CUSTOM), tolerances=[("path_agreement", 1e-3)])
    assert cfg.tolerances["path_agreement"] == 1e-3


def test_seed_override_changes_digest():
    cfg = parse_config(RANDOM)
    other = with_overrides(cfg, seed=7)
    assert other.seed == 7
    assert other.digest() != cfg.digest()


# -- command line ------------------------------------------------------------------------


def test_exit_code_for_unknown_key(tmp_path):
    path = write_yaml(tmp_path / "bad.yaml", dict(CUSTOM, bogus=1))
    assert cli("validate", path)[0] == EXIT_CONFIG
    assert cli("run", path, "--out", str(tmp_path / "o"))[0] == EXIT_CONFIG
    assert cli("run", "no-such-preset")[0] == EXIT_CONFIG


def test_validate_custom_and_overlapping_projectors(tmp_path):
    code, text = cli("validate", write_yaml(tmp_path / "ok.yaml", CUSTOM))
    assert code == EXIT_OK and "ok" in text
    model = dict(CUSTOM["model"], pi_b=[[1, 0], [0, 1]])
    path = write_yaml(tmp_path / "overlap.yaml", dict(CUSTOM, model=model))
    assert cli("validate", path)[0] == EXIT_CONFIG


def test_validate_warns_on_coarse_driven_step(tmp_path):
    model = dict(CUSTOM["model"], dynamics="linear", drive=[[1, 0], [0, -1]], max_dt=0.5)
    code, text = cli("validate", write_yaml(tmp_path / "coarse.yaml", dict(CUSTOM, model=model)))
    assert code == EXIT_OK
    assert "warning" in text and "max_dt" in text
    # static propagation is exact: no step warning
    model = dict(CUSTOM["model"], max_dt=0.5)
    code, text = cli("validate", write_yaml(tmp_path / "static.yaml", dict(CUSTOM, model=model)))
    assert "warning" not in text


def test_run_custom_writes_tables(tmp_path):
    out = tmp_path / "o"
    code, text = cli("run", write_yaml(tmp_path / "c.yaml", CUSTOM), "--out", str(out))
    assert code == EXIT_OK
    names = sorted(os.listdir(out))
    assert "custom_manifest.json" in names
    assert any(n.endswith(".csv") for n in names)
    assert "gates passed" in text


def test_corrupted_reference_fails_gate(tmp_path, monkeypatch):
    monkeypatch.setenv("QTRATES_CORRUPT", "tls")
    assert cli("run", "tls-qsl", "--out", str(tmp_path))[0] == EXIT_GATE


def test_tolerance_override_can_fail_a_gate(tmp_path):
    path = write_yaml(tmp_path / "c.yaml", CUSTOM)
    assert cli("run", path, "--out", str(tmp_path / "o"), "--tol", "path_agreement=1e-30")[0] \
        == EXIT_GATE


def test_random_runs_are_byte_identical(tmp_path):
    path = write_yaml(tmp_path / "r.yaml", RANDOM)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli("run", path, "--out", str(a))[0] == EXIT_OK
    assert cli("run", path, "--out", str(b))[0] == EXIT_OK
    assert cli("run", path, "--out", str(c), "--seed", "7")[0] == EXIT_OK
    csvs = sorted(n for n in os.listdir(a) if n.endswith(".csv"))
    assert csvs
    match, mismatch, errors = filecmp.cmpfiles(a, b, csvs, shallow=False)
    assert match == csvs and not mismatch and not errors
    _, mismatch, _ = filecmp.cmpfiles(a, c, csvs, shallow=False)
    assert mismatch


def test_bad_seed_rejected():
    with pytest.raises(SystemExit):
        cli("run", "tls-qsl", "--seed", "-1")


def test_plot_renders_png_next_to_csv(tmp_path):
    pytest.importorskip("matplotlib")
    code, _ = cli("run", "cd-geometric-bound", "--out", str(tmp_path), "--plot")
    assert code == EXIT_OK
    csvs = {n[:-4] for n in os.listdir(tmp_path) if n.endswith(".csv")}
    pngs = {n[:-4] for n in os.listdir(tmp_path) if n.endswith(".png")}
    assert csvs and csvs == pngs
