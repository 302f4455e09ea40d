import json

import pytest

from bicritical import cli
from bicritical.errors import BadInput


def _config(tmp_path, **fields):
    base = {"pair": "same", "depth": 12, "n_range": [3, 7],
            "maps": [{"tune": {"family": "trig_bicritical", "parameters": {"u": "0.2"}, "digits": [1]}}]}
    base.update(fields)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(base))
    return str(path)


def test_config_round_trip():
    cfg = cli.ExperimentConfig(pair="rotated", depth=10)
    again = cli.ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.grid_config.two_bridges_min == 23
    assert list(again.levels) == list(range(3, 13))


def test_config_rejects_unknown_fields():
    with pytest.raises(BadInput):
        cli.ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(BadInput):
        cli.ExperimentConfig(pair="mirror")


def test_jsonable_handles_numeric_types():
    import mpmath
    import numpy as np

    doc = cli.jsonable({"a": mpmath.mpf("0.5"), "b": np.float64(2), "c": (1, 2), "d": np.bool_(True)})
    assert doc == {"a": 0.5, "b": 2.0, "c": [1, 2], "d": True}


def test_digits_of_a_rational_exit_code(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "digits", "--value", "3/7"]) == 4
    assert "RationalInput" in capsys.readouterr().err


def test_digits_of_golden(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "digits", "6", "--value", "0.6180339887498948482"]) == 0
    assert capsys.readouterr().out.strip() == "1 1 1 1 1 1"


def test_bad_config_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert cli.main(["--config", str(path), "selftest"]) == 4


def test_tune_writes_map(tmp_path):
    assert cli.main(["--out", str(tmp_path), "--depth", "10", "tune", "--family", "trig_bicritical",
                     "--u", "0.2"]) == 0
    doc = json.loads((tmp_path / "map.json").read_text())
    assert doc["family"] == "trig_bicritical" and doc["digits"] == [1] * 10


def test_partition_and_finegrid_exports(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["--config", cfg, "--out", str(out), "partition", "5"]) == 0
    assert cli.main(["--config", cfg, "--out", str(out), "finegrid", "4"]) == 0
    for name in ("partition_5.json", "partition_5.svg", "real_bounds.json", "aux_4.json",
                 "intermediate_4.json", "grid_4.json", "grids.svg", "grid_report.json"):
        assert (out / name).exists(), name


def test_verify_same_pair_and_determinism(tmp_path):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--config", cfg, "--out", str(a), "verify"]) == 0
    assert cli.main(["--config", cfg, "--out", str(b), "verify"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert "manifest.json" in names and "d0.csv" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    manifest = json.loads((a / "manifest.json").read_text())
    assert all(s["identically_zero"] for s in manifest["series"])


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out
