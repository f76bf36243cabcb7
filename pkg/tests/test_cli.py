import hashlib
import json

import pytest

from rstree import analytic as an
from rstree.cli import ENV_OUTPUT, main, parse_config
from rstree.pointprocess import ConfigError


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_curve_command(tmp_path):
    assert main(["curve", "--name", "edge_length_ccdf", "--x", "1", "--rmin", "0", "--rmax", "1", "--n", "101",
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "edge_length_ccdf.csv").read_text().splitlines()[1:]
    assert len(rows) == 101
    last = rows[-1].split(",")
    assert float(last[0]) == 1.0
    # atom-inclusive P(L >= 1); the law has no mass past r = 1
    assert float(last[1]) == an.edge_length_ccdf(1.0, 1.0)
    assert an.edge_length_ccdf(1.0, 1.0 + 1e-12) == 0.0
    assert json.loads((tmp_path / "edge_length_ccdf.json").read_text())["params"] == {"x": 1.0}


def test_validate_twice_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["validate", "--suite", "core", "--seed", "7", "--out", str(a)]) == 0
    assert main(["validate", "--suite", "core", "--seed", "7", "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert "PASS" in capsys.readouterr().out


def test_estimate_command(tmp_path):
    assert main(["estimate", "--transitions", "20000", "--out", str(tmp_path)]) == 0
    body = json.loads((tmp_path / "constants.json").read_text())
    assert abs(body["p"] - 0.504) < 0.01
    assert 0 < body["ci"]["p"] < 0.01


def test_build_reproducible_and_checksums(tmp_path):
    args = ["build", "--kind", "dsf", "--window-radius", "6", "--seed", "4", "--replicates", "2"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    for name in ("points_0000.csv", "forest_0000.csv", "forest_0001.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    m = manifest(a)
    for name, digest in m["outputs"].items():
        assert hashlib.sha256((a / name).read_bytes()).hexdigest() == digest
    assert m["seeds"]["seed"] == 4 and m["config"]["forest"]["kind"] == "dsf"


def test_manifest_config_reproduces_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--window-radius", "3", "--seed", "9", "--out", str(a)]) == 0
    cfg = manifest(a)["config"]
    cfg["output_dir"] = None
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["sample", "--config", str(tmp_path / "cfg.json"), "--out", str(b)]) == 0
    assert manifest(a)["outputs"] == manifest(b)["outputs"]


def test_flags_override_config(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 1, "sampler": {"window_radius": 2.0}}))
    out = tmp_path / "o"
    assert main(["sample", "--config", str(tmp_path / "c.json"), "--seed", "5", "--out", str(out)]) == 0
    cfg = manifest(out)["config"]
    assert cfg["seed"] == 5 and cfg["sampler"]["window_radius"] == 2.0


def test_minimal_config_defaults():
    cfg = parse_config('{"command": "sample"}')
    assert cfg.sampler["intensity"] == 1.0 and cfg.sampler["guard_margin"] == 0.2
    assert cfg.seed == 0


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="sampler.lamda"):
        parse_config('{"command": "sample", "sampler": {"lamda": 1}}')


def test_negative_intensity():
    with pytest.raises(ConfigError, match="intensity"):
        parse_config('{"command": "sample", "sampler": {"intensity": -1}}')


def test_type_and_required_errors():
    with pytest.raises(ConfigError, match="seed"):
        parse_config('{"command": "sample", "seed": "x"}')
    with pytest.raises(ConfigError, match="command"):
        parse_config("{}")
    with pytest.raises(ConfigError, match="curve.name"):
        parse_config('{"command": "curve"}')


def test_exit_codes(tmp_path):
    assert main(["nope"]) == 2
    assert main(["sample", "--intensity", "-1", "--out", str(tmp_path)]) == 2
    (tmp_path / "bad.json").write_text('{"sampler": {"lamda": 1}}')
    assert main(["sample", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 2
    # a start point outside the window is a runtime failure
    assert main(["paths", "--window-radius", "3", "--start", "5", "--out", str(tmp_path)]) == 3
    failing = {"command": "validate", "suite": {"checks": {"edge_length_law": {"samples": 500, "radii": [1.0],
                                                                               "ks_max": 0.0}}}}
    (tmp_path / "fail.json").write_text(json.dumps(failing))
    assert main(["validate", "--config", str(tmp_path / "fail.json"), "--out", str(tmp_path / "v")]) == 1


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT, str(tmp_path / "env"))
    assert main(["sample", "--window-radius", "2"]) == 0
    assert (tmp_path / "env" / "points_0000.csv").exists()


def test_paths_and_shape_commands(tmp_path):
    assert main(["paths", "--kind", "dsf", "--window-radius", "12", "--start", "8", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "path_0000.csv").read_text().splitlines()
    assert lines[0] == "hop,x,y,edge_len,progress" and len(lines) > 3
    assert main(["shape", "--window-radius", "20", "--k", "10", "--p", "0.504", "--replicates", "3",
                 "--out", str(tmp_path / "s")]) == 0
    body = json.loads((tmp_path / "s" / "shape.json").read_text())
    assert body["replicates"] == 3 and body["shape_mean"] > 0


def test_voronoi_build(tmp_path):
    assert main(["build", "--kind", "voronoi_local", "--window-radius", "4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "forest_0000.csv").read_text().startswith("child_id,parent_id,length,censored")
