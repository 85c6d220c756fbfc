import json

import pytest

from qbm import config
from qbm.errors import ConfigError


def test_defaults():
    cfg = config.from_dict()
    assert cfg.bath_minus.coupling == cfg.bath_plus.coupling == 0.1
    assert cfg.bath_minus.cutoff == cfg.bath_plus.cutoff == 10.0
    assert cfg.mdf.frequency == 0.3 and cfg.idf.frequency == 1.0
    assert cfg.grid.n_steps == 512 and cfg.grid.dt == pytest.approx(0.1)
    assert cfg.kernel_mode == "finite" and cfg.format == "csv"


def test_problems_are_itemized():
    with pytest.raises(ConfigError) as exc:
        config.from_dict({"grid": {"n_steps": 0}, "seed": -1, "format": "xml", "bogus": 1})
    text = "\n".join(exc.value.problems)
    assert len(exc.value.problems) == 4
    for word in ("grid.n_steps", "seed", "format", "bogus"):
        assert word in text


def test_overrides_and_coupling_fallback():
    cfg = config.from_dict({"coupling": 0.3, "bath_plus": {"coupling": 0.05}}, {"grid": {"n_steps": 64}})
    assert cfg.bath_minus.coupling == 0.3
    assert cfg.bath_plus.coupling == 0.05
    assert cfg.grid.n_steps == 64 and cfg.grid.t_max == 51.2


def test_replace_keeps_document():
    cfg = config.from_dict(preset="relaxing")
    c2 = cfg.replace(grid={"n_steps": 128})
    assert c2.bath_minus.coupling == 0.5 and c2.grid.n_steps == 128
    assert c2.echo()["preset"] == "relaxing"


def test_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        config.from_dict(preset="nope")


def test_load_file(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"mdf": {"frequency": 0.5}, "seed": 7}))
    cfg = config.load(p)
    assert cfg.mdf.frequency == 0.5 and cfg.seed == 7
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        config.load(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "missing.json")


def test_echo_is_json():
    cfg = config.from_dict()
    assert json.loads(json.dumps(cfg.echo()))["grid"]["n_steps"] == 512
