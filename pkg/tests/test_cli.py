import json
import subprocess
import sys

import pytest

from paqft.cli import COMMANDS, ConfigError, RunConfig, main, run

PASSING = [c for c in COMMANDS if c != "bracket-equiv"]


def report_of(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


@pytest.mark.parametrize("command", PASSING)
def test_commands_pass(command, capsys):
    code, report = report_of(capsys, [command])
    assert code == 0
    assert report["command"] == command
    assert report["seed"] == 0
    assert {"paqft", "numpy", "scipy", "python"} <= set(report["versions"])
    for r in report["results"]:
        assert set(r) == {"name", "value", "contract", "pass", "source"}
        assert r["pass"] in (True, None)


def test_bracket_equivalence_reports_sign(capsys):
    code, report = report_of(capsys, ["bracket-equiv"])
    rows = {r["name"]: r for r in report["results"]}
    assert code == 1
    assert rows["star_commutator_vs_peierls"]["pass"] is True
    assert rows["peierls_vs_canonical"]["pass"] is False
    assert rows["peierls_plus_canonical"]["value"] < 1e-9


def test_graphs_listing(capsys):
    code, report = report_of(capsys, ["graphs", "--n", "2", "--cap", "2"])
    rows = {r["name"]: r["value"] for r in report["results"]}
    assert code == 0 and rows["count"] == 3
    assert [v["sym"] for k, v in rows.items() if k.startswith("graph:")] == [1, 1, 2]


def test_extend_three_dimensions(capsys):
    code, report = report_of(capsys, ["extend", "--dist", "abs_pow:-3", "--dim", "3"])
    rows = {r["name"]: r for r in report["results"]}
    assert code == 0
    assert rows["pole_1"]["pass"] is True
    assert abs(rows["extension_value"]["value"][0] + 3.626752984783207) < 1e-7


def test_output_is_canonical_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["flow", "--steps", "2000", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    text = out.read_text()
    assert text.endswith("\n")
    assert text == json.dumps(json.loads(text), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def test_reports_are_reproducible(capsys):
    _, a = report_of(capsys, ["weyl-check", "--seed", "5"])
    _, b = report_of(capsys, ["weyl-check", "--seed", "5"])
    assert a == b


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mass": 2.0, "seed": 3}))
    code, report = report_of(capsys, ["model-check", "--config", str(cfg)])
    assert code == 0 and report["config"]["mass"] == 2.0 and report["seed"] == 3


@pytest.mark.parametrize("argv", [
    ["model-check", "--mass", "-1"],
    ["model-check", "--grid", "4"],
    ["extend", "--dist", "cube:-1"],
    ["extend", "--scheme", "dimreg"],
    ["graphs", "--n", "0"],
    ["nonsense"],
])
def test_configuration_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["model-check", "--config", str(cfg)]) == 2
    cfg.write_text("[1, 2]")
    assert main(["model-check", "--config", str(cfg)]) == 2


def test_thread_variable(monkeypatch, capsys):
    monkeypatch.setenv("PAQFT_THREADS", "zero")
    assert main(["flow", "--steps", "100"]) == 2
    monkeypatch.setenv("PAQFT_THREADS", "1")
    assert main(["flow", "--steps", "100"]) == 0


def test_run_validates():
    with pytest.raises(ConfigError):
        run("flow", RunConfig(tol=-1.0))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "paqft", "graphs", "--n", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"][0]["value"] == 1
