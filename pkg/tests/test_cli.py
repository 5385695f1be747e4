import csv
import subprocess
import sys

import numpy as np
import pytest

from hfgalerkin import cli
from hfgalerkin.hfspaces import load_settings
from hfgalerkin.operators import SolverError

CIRCLE = """\
[geometry]
kind = circle
radius = 1.0
alpha = 1, 0

[hfspaces]
family = alg-cov
J = 6

[galerkin]
ppw = 10
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_writes_density_and_summary(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE)
    out = tmp_path / "eta.csv"
    assert cli.main(["solve", "--config", cfg, "--k", "50", "--degrees", "8",
                     "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["s", "re_eta", "im_eta", "re_ref", "im_ref"]
    summary = capsys.readouterr().out
    fields = dict(item.split("=") for item in summary.split())
    assert 0 < float(fields["global_relerr"]) < 0.01
    assert 0 < float(fields["shadow_relerr"]) < 0.1
    assert int(fields["dof"]) == 54
    # the summary matches the CSV columns
    eta = np.array([complex(float(r["re_eta"]), float(r["im_eta"])) for r in rows])
    ref = np.array([complex(float(r["re_ref"]), float(r["im_ref"])) for r in rows])
    assert abs(np.linalg.norm(eta - ref) / np.linalg.norm(ref)
               - float(fields["global_relerr"])) < 1e-12


def test_degree_zero_runs(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE)
    assert cli.main(["solve", "--config", cfg, "--k", "20", "--degrees", "0",
                     "--out", str(tmp_path / "o.csv")]) == 0
    fields = dict(item.split("=") for item in capsys.readouterr().out.split())
    err = float(fields["global_relerr"])
    assert np.isfinite(err) and err <= 1 + 1e-12


def test_missing_key_names_it(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE.replace("radius = 1.0\n", ""))
    assert cli.main(["solve", "--config", cfg, "--k", "20"]) == cli.EXIT_CONFIG
    assert "'radius'" in capsys.readouterr().err


def test_missing_kind(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE.replace("kind = circle\n", ""))
    assert cli.main(["solve", "--config", cfg, "--k", "20"]) == cli.EXIT_CONFIG
    assert "'kind'" in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE.replace("ppw = 10\n", "ppw = 10\npwp = 12\n"))
    assert cli.main(["solve", "--config", cfg, "--k", "20"]) == cli.EXIT_CONFIG
    assert f"{cfg}:12:" in capsys.readouterr().err


def test_bad_value_and_low_ppw(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE.replace("radius = 1.0", "radius = one"))
    assert cli.main(["solve", "--config", cfg, "--k", "20"]) == cli.EXIT_CONFIG
    assert f"{cfg}:3:" in capsys.readouterr().err
    cfg = write(tmp_path, CIRCLE)
    assert cli.main(["solve", "--config", cfg, "--k", "20", "--ppw", "4"]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise SolverError("singular", float("inf"))

    monkeypatch.setattr(cli, "solve", broken)
    cfg = write(tmp_path, CIRCLE)
    assert cli.main(["solve", "--config", cfg, "--k", "20"]) == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_parse_list():
    assert cli.parse_list("2:12:2", int) == [2, 4, 6, 8, 10, 12]
    assert cli.parse_list("50, 100 200") == [50.0, 100.0, 200.0]
    with pytest.raises(ValueError):
        cli.parse_list("1:2")


def test_sweep_rows_and_dof(tmp_path):
    cfg = write(tmp_path, CIRCLE)
    out = tmp_path / "cov.csv"
    assert cli.main(["sweep", "--config", cfg, "--k", "10, 20", "--degrees", "2:6:2",
                     "--out", str(out), "--no-timing"]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    assert len(rows) == 6
    assert [(float(r["k"]), int(r["d"])) for r in rows] == [
        (k, d) for k in (10.0, 20.0) for d in (2, 4, 6)]
    assert all(int(r["dof"]) == 6 * (int(r["d"]) + 1) for r in rows)
    assert all(float(r["wall_seconds"]) == 0 for r in rows)
    freq = tmp_path / "freq.csv"
    assert cli.main(["sweep", "--config", cfg, "--family", "alg-freq", "--k", "20",
                     "--degrees", "2:6:2", "--out", str(freq), "--no-timing"]) == 0
    assert all(int(r["dof"]) == 8 * (int(r["d"]) + 1) for r in read_csv(freq))


def test_sweep_is_deterministic(tmp_path):
    cfg = write(tmp_path, CIRCLE)
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main(["sweep", "--config", cfg, "--k", "20", "--degrees", "2,4",
                         "--out", str(p), "--no-timing"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sweep_figure(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write(tmp_path, CIRCLE)
    fig = tmp_path / "err.png"
    assert cli.main(["sweep", "--config", cfg, "--k", "20", "--degrees", "2,4",
                     "--out", str(tmp_path / "s.csv"), "--figure", str(fig)]) == 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_tune_round_trip_and_reuse(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE + "\n[tuning]\nmax_rounds = 1\nmax_moves = 2\n")
    out = tmp_path / "tuned.ini"
    assert cli.main(["tune", "--config", cfg, "--k", "20", "--degrees", "4",
                     "--out", str(out)]) == 0
    settings = load_settings(out)
    assert settings.family == "alg-cov" and settings.params is not None
    history = read_csv(tmp_path / "tuned_history.csv")
    assert list(history[0]) == cli.HISTORY_COLUMNS
    assert history[0]["param_name"] == "initial"
    objective = [float(h["global_err"]) for h in history]
    assert all(b <= a for a, b in zip(objective, objective[1:]))
    # reuse at a larger wavenumber
    capsys.readouterr()
    assert cli.main(["solve", "--config", cfg, "--params", str(out), "--k", "80",
                     "--degrees", "4", "--out", str(tmp_path / "eta.csv")]) == 0
    fields = dict(item.split("=") for item in capsys.readouterr().out.split())
    assert float(fields["global_relerr"]) < 0.1


def test_params_family_mismatch(tmp_path, capsys):
    cfg = write(tmp_path, CIRCLE + "\n[tuning]\nmax_rounds = 1\nmax_moves = 1\n")
    out = tmp_path / "tuned.ini"
    assert cli.main(["tune", "--config", cfg, "--k", "10", "--degrees", "2",
                     "--out", str(out)]) == 0
    assert cli.main(["solve", "--config", cfg, "--params", str(out), "--family", "alg-freq",
                     "--k", "10"]) == cli.EXIT_CONFIG


def test_geometry_info(tmp_path):
    cfg = write(tmp_path, CIRCLE)
    out = tmp_path / "info.txt"
    assert cli.main(["geometry-info", "--config", cfg, "--k", "100", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    info = dict(line.split(" = ") for line in lines if " = " in line)
    assert abs(float(info["length"]) - 2 * np.pi) < 1e-12
    assert abs(float(info["t1"]) - np.pi / 2) < 1e-12
    assert abs(float(info["t2"]) - 3 * np.pi / 2) < 1e-12
    table = lines[lines.index("tag,a,b,width,kind") + 1:]
    assert [row.split(",")[0] for row in table] == ["ST1", "SB1", "IT1", "IT2", "SB2", "ST2"]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, CIRCLE)
    proc = subprocess.run([sys.executable, "-m", "hfgalerkin.cli", "geometry-info",
                           "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0 and "length = " in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hfgalerkin.cli", "solve", "--config",
                           str(tmp_path / "missing.ini"), "--k", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == cli.EXIT_CONFIG
