import csv
import io
import math

import pytest

from _sdpa_reader import read_sdpa, solve_sdpa
from kmsbound.cli import main, parse_beta, parse_grid, parse_window
from kmsbound.lattice import Window
from kmsbound.oracles import tfising_magnetization


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _interval(text):
    line = next(ln for ln in text.splitlines() if ln.startswith("interval"))
    lo, hi = line[line.index("[") + 1:line.index("]")].split(",")
    return float(lo), float(hi), line


def test_parsers():
    assert parse_beta("inf") == math.inf and parse_beta("0.5") == 0.5
    assert parse_grid("g=0:1:0.25") == ("g", [0.0, 0.25, 0.5, 0.75, 1.0])
    assert parse_grid("g=0.1,0.3") == ("g", [0.1, 0.3])
    assert parse_window("-1:2") == Window.interval(-1, 2)
    assert parse_window("box:1") == Window.box(1)
    for bad in ("g=", "g=1:0:0.1", "=1,2"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_bound_paramagnet(capsys):
    code, out, _ = run(capsys, "bound", "--model", "tfising", "--param", "g=1.5", "--obs", "Z0", "--beta", "inf")
    lo, hi, line = _interval(out)
    assert code == 0 and "CERTIFIED" in line
    assert lo <= 0 <= hi
    assert "ell=1" in out and "backend=" in out and "wall time" in out


def test_bound_identity(capsys):
    code, out, _ = run(capsys, "bound", "--model", "tfising", "--obs", "I", "--beta", "1")
    lo, hi, _ = _interval(out)
    assert code == 0 and lo == pytest.approx(1, abs=1e-6) and hi == pytest.approx(1, abs=1e-6)


def test_bound_commuting_classical(capsys, tmp_path):
    out_file = tmp_path / "report.txt"
    code, out, _ = run(capsys, "bound", "--model", "ising", "--commuting", "--beta", "1", "--obs", "Z0 Z1",
                       "--out", str(out_file))
    lo, hi, _ = _interval(out)
    assert code == 0 and lo <= math.tanh(1.0) <= hi
    assert out_file.read_text() == out


def test_uncertified_exit_code(capsys):
    code, out, _ = run(capsys, "bound", "--model", "tfising", "--obs", "Z0", "--beta", "1",
                       "--gap-threshold", "1e-30")
    assert code == 1 and "NOT CERTIFIED" in out


def test_input_errors(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("dim 1 range 1\nterm 1 Q0\n")
    code, _, err = run(capsys, "bound", "--model", str(bad), "--obs", "Z0")
    assert code == 3 and f"{bad}:2:" in err
    assert run(capsys, "bound", "--model", "tfising", "--obs", "Z0 W1")[0] == 3
    assert run(capsys, "bound", "--model", "tfising", "--obs", "Z7")[0] == 3
    assert run(capsys, "bound", "--model", "no-such-model", "--obs", "Z0")[0] == 3
    assert run(capsys, "sweep", "--model", "tfising", "--obs", "Z0", "--grid", "h=0,1")[0] == 3
    with pytest.raises(SystemExit) as exc:
        main(["bound", "--model", "tfising", "--obs", "Z0", "--beta", "hot"])
    assert exc.value.code == 3


def test_sweep_is_ordered_and_deterministic(capsys, tmp_path):
    args = ["sweep", "--model", "tfising", "--obs", "Z0", "--beta", "inf,1", "--grid", "g=1.2,0,0.6", "--m", "2"]
    code, out1, _ = run(capsys, *args, "--jobs", "1")
    assert code == 0
    out_file = tmp_path / "sweep.csv"
    assert run(capsys, *args, "--jobs", "2", "--out", str(out_file))[0] == 0
    rows1 = list(csv.DictReader(io.StringIO(out1)))
    rows2 = list(csv.DictReader(io.StringIO(out_file.read_text())))
    assert list(rows1[0]) == ["g", "beta", "ell", "m", "p_min", "p_max", "status_min", "status_max", "seconds"]
    assert [(r["g"], r["beta"]) for r in rows1] == [
        ("1.2", "inf"), ("0.0", "inf"), ("0.6", "inf"), ("1.2", "1.0"), ("0.0", "1.0"), ("0.6", "1.0")]
    strip = [[{k: v for k, v in r.items() if k != "seconds"} for r in rows] for rows in (rows1, rows2)]
    assert strip[0] == strip[1]
    for r in rows1:
        mz = tfising_magnetization(float(r["g"])) if r["beta"] == "inf" else 0.0
        assert float(r["p_min"]) <= -mz + 1e-6 and float(r["p_max"]) >= mz - 1e-6


def test_sweep_records_point_failures(capsys):
    code, out, _ = run(capsys, "sweep", "--model", "tfising", "--obs", "Z0", "--grid", "g=0.5", "--beta", "1",
                       "--backend", "no-such-solver")
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == 2 and row["status_min"] not in ("optimal", "near_optimal")


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--obs", "Mz", "--grid", "g=0:1.2:0.6")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [float(r["value"]) for r in rows] == [tfising_magnetization(g) for g in (0, 0.6, 1.2)]
    assert run(capsys, "oracle", "--model", "ising", "--obs", "Mz", "--grid", "g=0,1")[0] == 3


def test_export_then_external_solve(capsys, tmp_path):
    path = tmp_path / "p.dat-s"
    code, _, _ = run(capsys, "export", "--model", "tfising", "--param", "g=0.6", "--obs", "Z0",
                     "--beta", "inf", "--out", str(path))
    assert code == 0
    status, ext = solve_sdpa(read_sdpa(path.read_text()))
    assert status == "optimal"
    _, out, _ = run(capsys, "bound", "--model", "tfising", "--param", "g=0.6", "--obs", "Z0", "--beta", "inf")
    raw_min = float(next(ln for ln in out.splitlines() if ln.startswith("min:")).split()[3])
    assert ext == pytest.approx(raw_min, abs=1e-5)


def test_ed_then_validate(capsys, tmp_path):
    path = tmp_path / "ed.csv"
    code, _, _ = run(capsys, "ed", "--model", "tfising", "--n", "8", "--beta", "1", "--window=-1:2",
                     "--out", str(path))
    assert code == 0 and path.read_text().startswith("pauli_string,value")
    code, out, _ = run(capsys, "validate", "--model", "tfising", "--assignment", str(path), "--beta", "1",
                       "--samples", "50")
    assert code == 0 and "PASS" in out
    # the same state claimed at a much higher temperature fails
    code, out, _ = run(capsys, "validate", "--model", "tfising", "--assignment", str(path), "--beta", "0.05",
                       "--samples", "50")
    assert code == 1 and "FAIL" in out
