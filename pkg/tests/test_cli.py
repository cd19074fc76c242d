import json

import pytest
import yaml

from helicity_lab.cli import build_config, main, make_parser


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "bw-norm-equality" in out and "convexity-probe" in out
    assert main(["list", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert len(cat) == 12


def test_run_with_config_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"seed": 3, "experiments": {"bw-norm-equality": {"params": {"count": 4}}}}))
    code = main(["run", "bw-norm-equality", "--config", str(cfg), "--n", "8", "--out", str(tmp_path / "res")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("[PASS] bw-norm-equality")
    record = next((tmp_path / "res" / "bw-norm-equality").glob("*/record.json"))
    data = json.loads(record.read_text())
    assert data["config"]["n"] == 8 and data["config"]["seed"] == 3
    assert data["config"]["params"]["count"] == 4


def test_failing_check_exit_code(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"params": {"count": 2}, "tolerances": {"rel": 0.0}}))
    assert main(["run", "bw-norm-equality", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_usage_errors(tmp_path, capsys):
    assert main(["run", "nope", "--out", str(tmp_path)]) == 2
    assert "unknown experiment" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("n: 8\nfrobnicate: true\n")
    assert main(["run", "bw-norm-equality", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["run", "bw-norm-equality", "--config", str(tmp_path / "missing.yaml")]) == 2
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    assert main(["run", "bw-norm-equality", "--config", str(listing)]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_parallel_jobs(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"experiments": {"bw-norm-equality": {"params": {"count": 3}}}}))
    code = main(["run", "bw-norm-equality", "abelian-duality", "--config", str(cfg),
                 "--out", str(tmp_path), "--jobs", "2"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2


def test_build_config_sections():
    args = make_parser().parse_args(["run", "abelian-flow", "--seed", "9"])
    cfg = build_config("abelian-flow", {"n": 12, "experiments": {"abelian-flow": {"n": 8}}}, args)
    assert cfg.n == 8 and cfg.seed == 9
