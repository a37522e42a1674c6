import json

import pytest
import yaml

from degentrace import cli
from degentrace.config import ExperimentConfig


def _small_identities(tmp_path):
    cfg = {"identities": {"catalog_cases": [[1, 2]]}, "output_dir": str(tmp_path)}
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_default_m0_rule():
    assert [cli.default_m0(n, k) for n, k in [(1, 2), (3, 3), (4, 2), (2, 2), (3, 2)]] == [2, 1, 2, 3, 4]


def test_fault_injection_fails_only_E_closed(tmp_path, capsys):
    cfg = _small_identities(tmp_path)
    assert cli.main(["verify-identities", "--config", str(cfg), "--inject-fault", "E_closed_sign"]) == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    failed = {r["name"] for r in rep["records"] if not r["passed"]}
    assert failed and all(name.startswith("E_closed(") for name in failed)
    assert len(failed) == len(ExperimentConfig.from_mapping()["identities"]["E_cases"])
    assert "FAIL" in capsys.readouterr().out


def test_identities_pass_without_fault(tmp_path):
    assert cli.main(["verify-identities", "--config", str(_small_identities(tmp_path))]) == 0


def test_period_precondition_exit_code(tmp_path, capsys):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"spectral": {"T": 1.0}}))
    assert cli.main(["spectral", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "period bound" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"spectral": {"no_such_key": 1}}))
    assert cli.main(["dynamics", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_bad_nk_argument():
    with pytest.raises(SystemExit):
        cli.main(["expand", "--nk", "three"])


def test_dynamics_outputs(tmp_path):
    assert cli.main(["dynamics", "--out", str(tmp_path), "--seed", "3"]) == 0
    jets = (tmp_path / "dynamics_jets.csv").read_text().splitlines()
    assert jets[0].startswith("t,direction,rel_error,closed_0")
    assert len(jets) == 1 + 5 * 3
    assert (tmp_path / "dynamics_orbits.csv").read_text().startswith("energy,x0,period")
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["seed"] == 3 and rep["command"] == "dynamics"


def test_write_csv_uses_repr(tmp_path):
    cli.write_csv(tmp_path / "x.csv", ["a", "b"], [(0.1, 2), (1 / 3, "s")])
    assert (tmp_path / "x.csv").read_text() == "a,b\n0.1,2\n0.3333333333333333,s\n"
