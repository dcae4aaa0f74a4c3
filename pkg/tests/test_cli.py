import csv
import io
import math
import subprocess
import sys

import pytest

from piezopolaron import cli
from piezopolaron.cli import RunConfig, load_config, main, parse_grid, run
from piezopolaron.errors import DomainError, RegimeError


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# piezopolaron=")
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_bound_command(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bound", "--alpha", "1", "--k0", "150", "--n-max", "2", "--out", str(out)]) == 0
    header, rows = read_csv(out.read_text())
    assert "n_max=2" in header and "workers" not in header
    assert [r["n"] for r in rows] == ["1", "2"]
    assert float(rows[0]["E_W"]) == pytest.approx(-3.194099547617573, rel=1e-14)
    assert float(rows[0]["bound"]) == pytest.approx(float(rows[0]["E_W"]), rel=1e-12)
    assert float(rows[1]["bound"]) == pytest.approx(float(rows[1]["E_var_closed"]), rel=1e-9)
    assert float(rows[1]["bound"]) < float(rows[0]["bound"])


def test_bound_zero_coupling(capsys):
    assert main(["bound", "--alpha", "0", "--n-max", "3"]) == 0
    _, rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 3
    assert all(float(r["bound"]) == 0.0 for r in rows)
    assert all(math.isnan(float(r["E_LBL"])) for r in rows)


def test_moments_command(capsys):
    assert main(["--command", "moments", "--n-max", "1", "--k0", "1"]) == 0
    _, rows = read_csv(capsys.readouterr().out)
    assert [r["m"] for r in rows] == ["0", "1", "2"]
    assert float(rows[1]["alpha^1"]) == pytest.approx(-2 / math.pi * math.log(2), rel=1e-14)


def test_mass_command(capsys):
    assert main(["mass", "--alpha", "0:1:3", "--f-choice", "pshifted"]) == 0
    _, rows = read_csv(capsys.readouterr().out)
    assert float(rows[0]["m_eff"]) == pytest.approx(0.5, abs=1e-9)
    assert float(rows[2]["m_eff"]) > float(rows[1]["m_eff"]) > 0.5


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\ncommand = bound\nalpha = 0.5,1\nk0=10\nn-max=2\n")
    assert main(["--config", str(cfg), "--k0", "20"]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert "k0=20.0" in header
    assert [r["alpha"] for r in rows] == ["0.5", "0.5", "1.0", "1.0"]


def test_grid_parsing():
    assert parse_grid("2") == (2.0,)
    assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
    g = parse_grid("1:100:3", "geometric")
    assert g[1] == pytest.approx(10.0)
    with pytest.raises(DomainError):
        parse_grid("0:1:3", "geometric")
    with pytest.raises(DomainError):
        parse_grid("a:b")


def test_config_errors(tmp_path, capsys):
    assert main(["bound", "--alpha", "1,0.5"]) == 2
    assert main(["bound", "--n-max", "0"]) == 2
    assert main(["bound", "--f-choice", "nope"]) == 2
    assert main([]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert main(["bound", "--config", str(bad)]) == 2
    assert main(["bound", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["moments", "--f-choice", "pshifted"]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_resource_exit(capsys):
    assert main(["bound", "--n-max", "3", "--budget", "10"]) == 4


def test_regime_exit(monkeypatch):
    def boom(cfg):
        raise RegimeError("supersonic")

    monkeypatch.setitem(cli._DISPATCH, "mass", boom)
    assert run(RunConfig("mass")) == 3


def test_validate_exit_codes(monkeypatch, capsys):
    from piezopolaron.validation import Check

    monkeypatch.setattr(cli, "run_checks", lambda workers=1: [Check("a", True), Check("b", False, gating=False)])
    assert main(["validate"]) == 0
    assert "NOTE  b" in capsys.readouterr().out
    monkeypatch.setattr(cli, "run_checks", lambda workers=1: [Check("a", False)])
    assert main(["validate"]) == 5


def test_figures(tmp_path):
    out = tmp_path / "figs"
    assert main(["figures", "--out", str(out), "--figure2-alpha", "0.1:1:4"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["figure1.csv", "figure2.csv", "figure3.csv"]
    header, rows = read_csv((out / "figure2.csv").read_text())
    assert "k0=150.0" in header
    assert len(rows) == 4
    for name in names:
        _, rows = read_csv((out / name).read_text())
        for r in rows:
            assert float(r["E_var"]) <= float(r["E_W"])
            assert {"E_var", "E_LBS", "E_LBL"} <= set(r)


def test_deterministic_rows(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["figures", "--out", str(a)]) == 0
    assert main(["figures", "--out", str(b), "--workers", "4"]) == 0
    for name in ("figure1.csv", "figure2.csv", "figure3.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "piezopolaron", "bound", "--alpha", "1", "--n-max", "1"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert "alpha,n,bound" in proc.stdout


def test_manifest_excludes_paths(tmp_path):
    cfg = RunConfig("bound", output_path=str(tmp_path / "x.csv"), workers=3)
    assert str(tmp_path) not in cfg.manifest()
    assert "workers" not in cfg.manifest()


def test_load_config_comments(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("alpha=1 # trailing\n\n# full line\nk0 = 2\n")
    assert load_config(str(p)) == {"alpha": "1", "k0": "2"}
