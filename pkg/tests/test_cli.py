import json

import pytest
from click.testing import CliRunner

import hausdorff_choquet.cli as cli
from hausdorff_choquet import __version__
from hausdorff_choquet.errors import BracketInversionError
from hausdorff_choquet.grid import ball_set, make_grid
from hausdorff_choquet.io import write_field, write_set
from hausdorff_choquet.testbed import radial_bump


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, tmp_path, *args):
    out = tmp_path / "report.json"
    res = runner.invoke(cli.main, [*args, "--out", str(out)])
    man = json.loads((tmp_path / "report.json.manifest.json").read_text())
    return res, out, man


def test_version(runner):
    res = runner.invoke(cli.main, ["--version"])
    assert res.exit_code == 0 and __version__ in res.output


def test_content_ball(runner, tmp_path):
    res, out, man = _invoke(runner, tmp_path, "content", "--family", "ball", "--delta", "1", "--grid", "64")
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    assert rep["lower"] <= 1.0 <= rep["upper"]
    assert man["status"] == "ok" and man["command"] == "content"
    assert set(man["timings"]) >= {"build", "bracket", "write"}


def test_content_from_set_file(runner, tmp_path):
    g = make_grid(2, (-2, 2), 32)
    write_set(tmp_path / "e.json", ball_set(g, (0, 0), 1.0))
    res, out, _ = _invoke(runner, tmp_path, "content", "--family", "file", "--file", str(tmp_path / "e.json"))
    assert res.exit_code == 0, res.output
    assert json.loads(out.read_text())["upper"] > 0


def test_integrate_from_field_file(runner, tmp_path):
    write_field(tmp_path / "f.txt", radial_bump(2, 1.0, 32))
    res, out, _ = _invoke(
        runner, tmp_path, "integrate", "--family", "file", "--file", str(tmp_path / "f.txt"), "--delta", "2"
    )
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    # cone: int u dH^2 = (pi / 3) / v_2
    assert rep["lower"] <= 1 / 3 <= rep["upper"]


def test_verify_report_fields(runner, tmp_path):
    res, out, _ = _invoke(runner, tmp_path, "verify", "--theorem", "ko", "--grid", "64")
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "consistent"
    assert rep["params"]["theorem"] == "ko"


def test_limit_window_exit_code(runner, tmp_path):
    res, out, man = _invoke(runner, tmp_path, "verify", "--theorem", "limit", "--delta", "1.2", "--kappa", "0.5")
    assert res.exit_code == 2
    assert "window" in man["error"]
    assert man["status"] == "error"
    assert not out.exists()


def test_ps_requires_p(runner, tmp_path):
    res, _, man = _invoke(runner, tmp_path, "verify", "--theorem", "ps", "--grid", "32")
    assert res.exit_code == 2 and "--p" in man["error"]


def test_csv_only_for_sweeps(runner, tmp_path):
    res, _, man = _invoke(runner, tmp_path, "content", "--grid", "32", "--format", "csv")
    assert res.exit_code == 2 and "CSV" in man["error"]


def test_config_file_wins_with_warning(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 1.5, "grid": 32}))
    res, out, man = _invoke(runner, tmp_path, "content", "--delta", "1", "--config", str(cfg))
    assert res.exit_code == 0, res.output
    assert json.loads(out.read_text())["delta"] == 1.5
    assert any("overrides --delta" in w for w in man["warnings"])


def test_config_unknown_key(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    res, _, man = _invoke(runner, tmp_path, "content", "--config", str(cfg))
    assert res.exit_code == 2 and "bogus" in man["error"]


def test_bracket_inversion_exit_code(runner, tmp_path, monkeypatch):
    def boom(cfg, run):
        raise BracketInversionError("lower 2 > upper 1")

    monkeypatch.setattr(cli, "run_content", boom)
    res, _, man = _invoke(runner, tmp_path, "content")
    assert res.exit_code == 3
    assert "lower 2 > upper 1" in man["error"]


def test_manifest_to_stderr_without_out(runner):
    res = runner.invoke(cli.main, ["content", "--grid", "32", "--delta", "1"])
    assert res.exit_code == 0
    assert json.loads(res.stdout)["delta"] == 1.0
    assert '"command": "content"' in res.stderr


def test_tent_sweep_drops_unresolved_radii(runner, tmp_path):
    res, out, man = _invoke(
        runner,
        tmp_path,
        "sweep",
        "--kind",
        "tent",
        "--grid-fixed",
        "--grid",
        "256",
        "--r-list",
        "0.5,0.25,0.125,0.0625",
        "--alpha",
        "3",
        "--format",
        "csv",
    )
    assert res.exit_code == 0, res.output
    assert any("0.0625" in w for w in man["warnings"])
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema v1"
    assert len([ln for ln in lines if not ln.startswith("#")]) == 1 + 3


def test_sweep_needs_three_radii(runner, tmp_path):
    res, _, man = _invoke(runner, tmp_path, "sweep", "--kind", "tent", "--r-list", "0.25,0.125")
    assert res.exit_code == 2 and "3" in man["error"]
