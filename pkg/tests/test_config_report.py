import json

import pytest
import yaml

from degentrace.config import DEFAULTS, ConfigError, ExperimentConfig
from degentrace.report import PROVENANCE, RunReport


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig.from_mapping()
    path = tmp_path / "c.yaml"
    cfg.save(path)
    again = ExperimentConfig.load(path)
    assert again.canonical() == cfg.canonical()
    assert again.hash() == cfg.hash()
    assert cfg["spectral"]["h_min"] == DEFAULTS["spectral"]["h_min"]


def test_override_changes_hash():
    cfg = ExperimentConfig.from_mapping()
    other = cfg.with_overrides(seed=3, expand={"order": 3})
    assert other["seed"] == 3 and other["expand"]["order"] == 3
    assert other["expand"]["per_decade"] == cfg["expand"]["per_decade"]
    assert other.hash() != cfg.hash()


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"spectral": {"epsilon": 0.1}})
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump({"nonsense": 1}))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


@pytest.mark.parametrize("over", [
    {"spectral": {"eps": -1.0}},
    {"identities": {"E_rtol": 0.0}},
    {"dynamics": {"jet_t_grid": []}},
])
def test_invalid_values_rejected(over):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(over)


def test_potential_from_config():
    p = ExperimentConfig.from_mapping().potential()
    assert (p.n, p.k, p.e_c) == (1, 2, 0.0)
    assert p.full(0.5) == pytest.approx(-0.0625 + 0.015625)


def test_report_records_and_json():
    rep = RunReport("demo", "abc", 0)
    rep.check_close("a", 1.0, 1.0 + 1e-9, rtol=1e-6, provenance="oracle")
    rep.check_close("b", 0.0, 1e-3, atol=1e-6, provenance="paper-formula")
    rep.add("c", True, True, "exact", True, "trivial")
    assert not rep.passed and rep.failed() == ["b"]
    d = json.loads(rep.to_json())
    assert {r["provenance"] for r in d["records"]} <= set(PROVENANCE)
    assert d["config_hash"] == "abc"
    assert rep.to_json() == rep.to_json()
    assert any(line.startswith("FAIL") for line in rep.summary_lines())


def test_report_rejects_unknown_provenance():
    rep = RunReport("demo", "abc", 0)
    with pytest.raises(ValueError):
        rep.add("x", 1, 1, 0, True, "folklore")
