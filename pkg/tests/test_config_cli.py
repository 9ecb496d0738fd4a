import json

import pytest

from clonelab import cli
from clonelab.config import default_config, load_config, merge, selftest_config, validate
from clonelab.errors import ConfigError


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_defaults_validate():
    cfg = load_config()
    assert validate(cfg) == []
    assert validate(selftest_config(cfg)) == []


def test_merge_reports_unknown_keys_and_types():
    problems = []
    merge({"a": {"b": 1.0}}, {"a": {"b": "x", "c": 2}}, problems=problems)
    assert problems == ["a.b: expected float, got str", "a.c: unknown key"]
    problems = []
    assert merge({"a": 1.0}, {"a": 2}, problems=problems) == {"a": 2} and problems == []


def test_seed_override_and_range():
    assert load_config(seed=2 ** 64 - 1)["seed"] == 2 ** 64 - 1
    with pytest.raises(ConfigError):
        load_config(seed=-1)


@pytest.mark.parametrize("override, fragment", [
    ({"bogus": 1}, "bogus: unknown key"),
    ({"clone_r2n": {"dims": [3]}}, "clone_r2n.dims"),
    ({"approx": {"r2": {"budget": 50}}}, "approx.r2.budget"),
    ({"no_go": {"system": [{"kind": "euclidean", "dim": 2}]}}, "no_go.system"),
    ({"selftest": {"overrides": {"nope": {}}}}, "selftest.overrides.nope"),
])
def test_invalid_configs_exit_2(tmp_path, capsys, override, fragment):
    code, _, err = run(["quantum-1d", "--config", str(write(tmp_path, override)), "--out", str(tmp_path)], capsys)
    assert code == 2
    diag = json.loads(err)
    assert any(fragment in p for p in diag["problems"])
    assert not (tmp_path / "quantum-1d.json").exists()


def test_unreadable_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["quantum-1d", "--config", str(bad)], capsys)[0] == 2


def test_seed_must_be_u64(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["quantum-1d", "--seed", "-3"])
    assert exc.value.code == 2


def test_quantum_run_and_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code, stdout, _ = run(["quantum-1d", "--seed", "5", "--out", str(out)], capsys)
        assert code == 0 and "all properties hold" in stdout
        outs.append(json.loads((out / "quantum-1d.json").read_text()))
    a, b = outs
    assert a["passed"] and a["seed"] == 5 and a["violations"] == []
    a.pop("metadata"), b.pop("metadata")
    assert a == b


def test_invariant_failure_exits_1(tmp_path, capsys):
    # an impossible tolerance makes the regrouping check fail
    cfg = write(tmp_path, {"quantum": {"tolerance": 1e-300}})
    code, _, err = run(["quantum-1d", "--config", str(cfg), "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 1
    assert "regrouping_identity" in err or "unitarity" in err
    report = json.loads((tmp_path / "quantum-1d.json").read_text())
    assert report["passed"] is False and report["violations"]


def test_points_writes_csv(tmp_path, capsys):
    cfg = write(tmp_path, {"points": {"swap": False, "random": {"count": 0}}})
    code, _, _ = run(["points", "--config", str(cfg), "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0
    header = (tmp_path / "points_coin_trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("t,coord_0")


def test_selftest_on_defaults(tmp_path, capsys):
    code, _, err = run(["selftest", "--out", str(tmp_path), "--quiet"], capsys)
    assert code == 0, err
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert set(report["suites"]) == {"dynamics", "clone-r2n", "no-go", "approx", "points", "quantum-1d"}
    assert report["suites"]["no-go"]["report"]["verdict"] == "OBSTRUCTED"
