import csv
import io
import json
import math
import subprocess
import sys

import pytest

from mrs_prophet.cli import main
from mrs_prophet.harness import CSV_COLUMNS, config_from_json

# the CLI reports clamping on stderr by design
pytestmark = pytest.mark.filterwarnings("ignore::mrs_prophet.profiles.ScheduleClampWarning")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def usage(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    capsys.readouterr()
    return exc.value.code


def test_solve_p(capsys):
    code, out, _ = run(capsys, "solve", "p")
    assert code == 0 and "alpha: 0.6533" in out


def test_solve_q_json(capsys):
    code, out, _ = run(capsys, "solve", "q", "--beta", "1.0", "--json")
    d = json.loads(out)
    assert code == 0 and d["alpha"] == pytest.approx(0.648957, abs=1e-4)


@pytest.mark.parametrize("argv", [
    ["solve", "q"],
    ["solve", "p", "--beta", "1"],
    ["simulate", "--algo", "mrs:opt", "--dist", "uniform01", "--k", "3", "--beta", "1"],
    ["simulate", "--algo", "streaming:opt", "--dist", "uniform01"],
    ["simulate", "--algo", "secretary", "--beta", "0.6", "--dist", "uniform01"],
    ["simulate", "--algo", "bogus", "--dist", "uniform01"],
    ["simulate", "--algo", "mrs:opt", "--dist", "nope:1"],
    ["simulate", "--algo", "mrs:opt", "--dist", "uniform01", "--trials", "0"],
    ["sweep", "--algo", "mrs:opt", "--a-grid", "0.2,1.0"],
    ["table1", "--betas", "1,x"],
    [],
])
def test_usage_errors_exit_2(capsys, argv):
    assert usage(capsys, *argv) == 2


def test_infeasible_exit_1(capsys):
    code, out, err = run(capsys, "simulate", "--algo", "mrs:opt", "--dist", "uniform01", "--n", "100",
                         "--k", "10", "--trials", "10")
    assert code == 1 and out == ""
    assert "infeasible" in err and "step 1" in err


def test_clamp_makes_feasible(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "mrs:opt", "--dist", "uniform01", "--n", "100",
                       "--k", "10", "--trials", "10", "--clamp")
    assert code == 0 and len(rows(out)) == 1


def test_simulate_worst_case_example(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "mrs:opt", "--dist", "two-point-max:0.3829",
                       "--n", "10000", "--beta", "1.45", "--trials", "10000", "--seed", "7")
    r = rows(out)[0]
    assert code == 0 and r["k"] == "14500"
    assert abs(float(r["mean"]) - 0.6534) <= 3 * float(r["stderr"])


def test_simulate_secretary(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "secretary", "--beta", "0", "--dist", "uniform01",
                       "--n", "10000", "--trials", "100000")
    r = rows(out)[0]
    assert code == 0 and abs(float(r["success_prob"]) - 1 / math.e) < 0.01


def test_streaming_cells_constant_in_n(capsys):
    cells = set()
    for n in ("1000", "1000000"):
        code, out, _ = run(capsys, "simulate", "--algo", "streaming:opt", "--epsilon", "0.05", "--dist",
                           "uniform01", "--n", n, "--trials", "20" if n == "1000000" else "2000")
        assert code == 0
        cells.add(rows(out)[0]["stored_cells_peak"])
    assert len(cells) == 1 and int(cells.pop()) > 0


def test_csv_format_and_determinism(capsys, tmp_path):
    argv = ["simulate", "--algo", "mrs:three-step", "--dist", "exp:1", "--n", "300",
            "--trials", "5000", "--seed", "3"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert a.splitlines()[0] == ",".join(CSV_COLUMNS)
    f = tmp_path / "out.csv"
    assert main(argv + ["--output", str(f)]) == 0
    assert f.read_bytes() == a.encode("utf-8")


def test_prophet_seed_env(capsys, monkeypatch):
    base = ["simulate", "--algo", "secretary", "--beta", "0.3", "--dist", "uniform01", "--n", "100",
            "--trials", "3000"]
    monkeypatch.setenv("PROPHET_SEED", "41")
    _, env_out, _ = run(capsys, *base)
    monkeypatch.delenv("PROPHET_SEED")
    _, flag_out, _ = run(capsys, *base, "--seed", "41")
    _, zero_out, _ = run(capsys, *base)
    assert env_out == flag_out != zero_out
    assert rows(env_out)[0]["seed"] == "41"


def test_json_round_trip(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "streaming:opt", "--epsilon", "0.1", "--dist",
                       "two-point-max:0.4", "--n", "500", "--trials", "2000", "--json")
    cfg = config_from_json(out)
    assert code == 0 and cfg["algo"] == "streaming:opt" and cfg["epsilon"] == 0.1
    code, out, _ = run(capsys, "sweep", "--algo", "secretary", "--beta", "0.3", "--n", "200",
                       "--trials", "2000", "--a-grid", "0.1,0.5", "--json")
    cfg = config_from_json(out)
    assert cfg["a_grid"] == [0.1, 0.5] and len(json.loads(out)["results"]) == 2


def test_sweep_csv(capsys):
    code, out, err = run(capsys, "sweep", "--algo", "mrs:opt", "--n", "200", "--trials", "2000",
                         "--a-points", "5")
    r = rows(out)
    assert code == 0 and [float(x["a"]) for x in r] == [0.05, 0.275, 0.5, 0.725, 0.95]
    assert "argmin_a" in err


def test_table1_subset_and_empty(capsys):
    code, out, _ = run(capsys, "table1", "--betas", "0.6")
    r = rows(out)
    assert code == 0 and len(r) == 1 and abs(float(r[0]["alpha"]) - 0.588379) < 1e-3
    code, out, _ = run(capsys, "table1", "--betas", "")
    assert code == 0 and len(out.strip().splitlines()) == 1


def test_gnuplot_script(capsys, tmp_path):
    script = tmp_path / "plot.gp"
    code, out, _ = run(capsys, "sweep", "--algo", "secretary", "--n", "100", "--trials", "1000",
                       "--a-points", "3", "--gnuplot", str(script))
    assert code == 0
    assert script.with_suffix(".csv").read_text() == out
    assert "plot.csv" in script.read_text()


def test_report_writes_figures(capsys, tmp_path):
    code, out, _ = run(capsys, "report", "--outdir", str(tmp_path), "--n", "100", "--trials", "2000")
    assert code == 0
    for name in ("table1.csv", "table1.png", "profiles.png", "pointwise.png", "sweep_opt.csv",
                 "sweep_opt.png"):
        p = tmp_path / name
        assert p.exists() and p.stat().st_size > 0
    assert (tmp_path / "table1.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_console_entry_points():
    for cmd in (["mrs-prophet", "--help"], [sys.executable, "-m", "mrs_prophet", "solve", "p"]):
        res = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
        assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "mrs_prophet", "simulate"], capture_output=True, text=True)
    assert res.returncode == 2
