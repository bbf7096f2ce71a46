import json

import pytest

from tests.compat import ROOT
from conesolver.errors import ConfigError
from conesolver.settings import DEFAULT_CONFIG, load_config, save_config


def test_shipped_config_matches_defaults():
    shipped = json.loads((ROOT / "_conesolver.json").read_text("utf-8"))
    assert shipped == DEFAULT_CONFIG
    cfg = load_config(ROOT / "_conesolver.json")
    assert cfg.problem.p == 4.0 and cfg.nr == 65 and cfg.ntheta == 65
    assert cfg.flow.phi_tol == cfg.tolerances.phi_tol


def test_defaults_without_file():
    cfg = load_config()
    assert cfg.problem.N == 3 and cfg.problem.weight.kind == "constant"
    assert cfg.solve["psi"] == "bump"
    assert cfg.verify["suites"] is None


def test_overrides_win(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"problem": {"p": 5.0}, "grid": {"nr": 33}}), "utf-8")
    cfg = load_config(path, {"grid": {"nr": 17}, "workers": 3})
    assert cfg.problem.p == 5.0
    assert cfg.nr == 17 and cfg.ntheta == 65
    assert cfg.workers == 3


def test_toml_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('output_dir = "out"\n[problem]\np = 6.5\nR0 = 2.0\nR1 = 3.0\n'
                    '[problem.weight]\nkind = "angular-profile"\nepsilon = 0.5\n', "utf-8")
    cfg = load_config(path)
    assert cfg.problem.p == 6.5 and cfg.problem.R0 == 2.0
    assert cfg.problem.weight.kind == "angular-profile" and cfg.problem.weight.epsilon == 0.5
    assert cfg.output_dir == "out"


def test_unknown_keys_are_listed(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"problem": {"q": 1}, "colour": "red"}), "utf-8")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert sorted(exc.value.problems) == ["unknown config key colour", "unknown config key problem.q"]


def test_every_problem_is_reported():
    with pytest.raises(ConfigError) as exc:
        load_config(overrides={"problem": {"p": 2.0}, "grid": {"ntheta": 64}, "workers": 0,
                               "solve": {"psi": "sideways"}})
    text = " ".join(exc.value.problems)
    assert len(exc.value.problems) == 4
    for word in ("p must be > 2", "grid.ntheta", "workers", "solve.psi"):
        assert word in text
    assert exc.value.exit_code == 2


@pytest.mark.parametrize("overrides", [
    {"tolerances": {"phi_tol": 0.0}},
    {"flow": {"dt_max": 2.0}},
    {"sweep": {"range": [4.0, 3.0]}},
    {"verify": {"fault_inject": "radial-sign"}},
    {"problem": {"weight": "flat"}},
])
def test_bad_values_rejected(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", "utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", "utf-8")
    with pytest.raises(ConfigError):
        load_config(listed)


def test_saved_config_reloads(tmp_path):
    cfg = load_config(overrides={"problem": {"p": 3.25}, "seed": 7})
    path = save_config(tmp_path / "config.json", cfg)
    again = load_config(path)
    assert again.problem == cfg.problem
    assert again.seed == 7 and again.document == cfg.document
