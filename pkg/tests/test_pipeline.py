import json

import pytest

from greybox_narx.errors import ConfigError
from greybox_narx.pipeline import DEFAULT_CONFIG, PipelineConfig, load_model, model_report
from greybox_narx.dataio import reference_model


def test_defaults():
    cfg = PipelineConfig.load()
    assert len(cfg.pool()) == 61
    m = cfg.moea_config
    assert (m.algorithm, m.p_c, m.p_m, m.budget, m.runs) == ("nsga2", 0.9, 0.006, 25000, 100)
    b = cfg.bundle()
    assert (len(b.estimation), len(b.validation), len(b.static_curve)) == (100, 68, 61)
    assert cfg.preferences[0].rankings == (3, 1, 2)


def test_hash_is_stable_and_sensitive():
    a = PipelineConfig.load()
    assert a.hash == PipelineConfig.load().hash
    assert len(a.hash) == 12
    assert a.hash != PipelineConfig.load(overrides={"seed": 1}).hash
    assert a.meta == {"config_hash": a.hash, "seed": 0}


def test_spea2_override_uses_its_rates():
    m = PipelineConfig.load(overrides={"moea": {"algorithm": "spea2"}}).moea_config
    assert (m.p_c, m.p_m) == (0.7, 0.008)


def test_config_file_merge(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"pool": {"n_l": 2}, "pruning": "linear"}))
    cfg = PipelineConfig.load(p)
    assert cfg.pool_config.n_l == 2 and cfg.raw["pool"]["n_u"] == 5
    assert len(cfg.pool()) == 11


@pytest.mark.parametrize("override", [
    {"bogus": 1},
    {"pool": {"n_q": 1}},
    {"pool": {"n_u": 0}},
    {"pruning": "none-such"},
    {"moea": {"population": 7}},
    {"decision": {"mtd": [{"rankings": [1, 1, 2]}]}},
    {"data": {"source": "csv"}},
    {"data": {"source": "csv", "series": "missing.csv"}},
    {"validation": {"residuals": "smoothed"}},
    {"static_grid": {"count": 1}},
])
def test_invalid_configs(override):
    with pytest.raises(ConfigError):
        PipelineConfig.load(overrides=override)


def test_bad_config_files(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        PipelineConfig.load(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.load(p)


def test_model_report_round_trip(tmp_path):
    m3 = reference_model("M3")
    doc = model_report(m3)
    assert len(doc["static_polynomial"]) == 4
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    back = load_model(p)
    assert back.terms == m3.terms
    assert DEFAULT_CONFIG["validation"]["band"] == "simultaneous"
