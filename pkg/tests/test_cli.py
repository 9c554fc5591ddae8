import csv
import io
import os
import shutil

import numpy as np
import pytest
import yaml

from sparse_levelset.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXPERIMENT_HEADER, SOLVE_HEADER, format_value, main
from utils.grid_manager import load_grid


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_format_value():
    """Test CSV cell formatting"""
    assert format_value(None) == "NA"
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "0.10000000000000001"


def test_solve_tiny_problem(tiny_path, capsys):
    """Test a solve row on the fixture file"""
    assert main(["solve", "--problem", tiny_path, "--sigma-ratio", "0.5", "--method", "pegasus"]) == EXIT_OK
    header, row = _rows(capsys.readouterr().out)
    assert header == SOLVE_HEADER
    values = dict(zip(header, row))
    assert (values["problem"], values["M"], values["N"], values["loss"]) == (tiny_path, "2", "3", "ls")
    sigma = float(values["sigma"])
    assert sigma == pytest.approx(0.5 * np.sqrt(13.0))
    assert float(values["rho_r"]) == pytest.approx(sigma, rel=1e-3)
    assert values["converged"] == "true"


def test_newton_student_refused(tiny_path, capsys):
    """Test Newton with Student's t exits with a usage error"""
    code = main(["solve", "--problem", tiny_path, "--sigma-ratio", "0.5", "--method", "newton", "--loss", "student"])
    assert code == EXIT_USAGE
    assert "not supported" in capsys.readouterr().err


def test_sigma_above_rho_gives_zero_row(tiny_path, capsys):
    """Test x = 0 is reported when sigma exceeds rho(y)"""
    assert main(["solve", "--problem", tiny_path, "--sigma-ratio", "1.5"]) == EXIT_OK
    values = dict(zip(*_rows(capsys.readouterr().out)))
    assert values["x_norm1"] == "0"
    assert values["nnz"] == "0"
    assert values["tau_solves"] == "0"


def test_solve_writes_csv_file(tiny_path, tmp_path, capsys):
    """Test --csv redirects output"""
    out = tmp_path / "row.csv"
    assert main(["solve", "--problem", tiny_path, "--sigma-ratio", "0.5", "--csv", str(out)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert _rows(out.read_text(encoding="utf-8"))[0] == SOLVE_HEADER


def test_missing_problem_file(capsys):
    """Test unreadable files exit with a usage error"""
    assert main(["solve", "--problem", "/nonexistent/problem.txt", "--sigma-ratio", "0.5"]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_rank_deficient_problem(tmp_path, capsys):
    """Test a singular Gram matrix exits with a numerical failure"""
    path = tmp_path / "singular.txt"
    path.write_text("2 3\n1 0 0\n2 0 0\n2\n1 2\n", encoding="utf-8")
    assert main(["solve", "--problem", str(path), "--sigma-ratio", "0.5"]) == EXIT_NUMERICAL
    assert "singular" in capsys.readouterr().err


def test_bad_arguments_exit_two():
    """Test argparse rejects unknown choices"""
    with pytest.raises(SystemExit) as excinfo:
        main(["solve", "--problem", "x", "--sigma-ratio", "0.5", "--method", "brent"])
    assert excinfo.value.code == 2


def test_bad_environment(monkeypatch, capsys):
    """Test invalid environment settings exit with a usage error"""
    monkeypatch.setenv("LEVELSET_MAX_ITERS", "lots")
    assert main(["solve", "--problem", "x", "--sigma-ratio", "0.5"]) == EXIT_USAGE
    assert "LEVELSET_MAX_ITERS" in capsys.readouterr().err


def test_bad_log_level(monkeypatch, capsys):
    """Test an unknown LEVELSET_LOG_LEVEL exits with a usage error before logging is configured"""
    monkeypatch.setenv("LEVELSET_LOG_LEVEL", "LOUD")
    assert main(["solve", "--problem", "x", "--sigma-ratio", "0.5"]) == EXIT_USAGE
    assert "LEVELSET_LOG_LEVEL" in capsys.readouterr().err


def test_experiment_from_grid_file(tmp_path, capsys):
    """Test a YAML grid with an unsupported cell"""
    grid = tmp_path / "grid.yml"
    grid.write_text(yaml.safe_dump({
        'problems': ['gen:m=10,n=30,k=2,noise=1e-4,seed=4'],
        'sigma_ratios': [0.5],
        'methods': ['illinois', 'newton'],
        'losses': ['ls', 'student'],
    }), encoding="utf-8")
    assert main(["experiment", "--grid", str(grid), "--parallel", "2"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == EXPERIMENT_HEADER
    assert len(rows) == 5
    na_rows = [row for row in rows[1:] if row[EXPERIMENT_HEADER.index("rho_r")] == "NA"]
    assert len(na_rows) == 1
    assert na_rows[0][EXPERIMENT_HEADER.index("method")] == "newton"


def test_experiment_rejects_bad_grid_file(tmp_path, capsys):
    """Test an invalid grid file is a usage error"""
    grid = tmp_path / "grid.yml"
    grid.write_text(yaml.safe_dump({'problems': ['gen:gauss-en'], 'sigma_ratios': [2.0],
                                    'methods': ['rf'], 'losses': ['ls']}), encoding="utf-8")
    assert main(["experiment", "--grid", str(grid)]) == EXIT_USAGE
    assert "Sigma ratios" in capsys.readouterr().err


def test_experiment_problem_folder_and_saved_grid(tiny_path, tmp_path, capsys):
    """Test a folder of problem files expands and the resolved grid is saved"""
    folder = tmp_path / "problems"
    folder.mkdir()
    shutil.copy(tiny_path, str(folder / "b.txt"))
    shutil.copy(tiny_path, str(folder / "a.dat"))
    (folder / "notes.md").write_text("not a problem", encoding="utf-8")
    saved = tmp_path / "grids"

    assert main(["experiment", "--problems", str(folder), "--sigma-ratios", "0.5", "--methods", "illinois",
                 "--losses", "ls", "--save-grid", str(saved)]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    expected = [str(folder / "a.dat"), str(folder / "b.txt")]
    assert [row[EXPERIMENT_HEADER.index("problem")] for row in rows[1:]] == expected

    files = os.listdir(str(saved))
    assert len(files) == 1
    grid = load_grid(os.path.join(str(saved), files[0]))
    assert grid['problems'] == expected
    assert grid['methods'] == ['illinois']
    assert 'created_at' in grid and 'id' in grid


def test_experiment_empty_problem_folder(tmp_path, capsys):
    """Test a folder without problem files is a usage error"""
    assert main(["experiment", "--problems", str(tmp_path), "--methods", "rf", "--losses", "ls"]) == EXIT_USAGE
    assert "No problem files" in capsys.readouterr().err


def test_experiment_is_deterministic(capsys):
    """Test reruns print identical tables"""
    argv = ["experiment", "--problems", "gen:m=10,n=30,k=2,seed=1", "--sigma-ratios", "0.5", "0.05",
            "--methods", "rf", "ab", "--losses", "ls"]
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    assert len(_rows(first)) == 5


def test_pareto_two_points(tiny_path, capsys):
    """Test G = 2 samples the two bracket endpoints"""
    assert main(["pareto", "--problem", tiny_path, "--grid-points", "2", "--opt-tol", "1e-8"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["tau", "nu"]
    assert [float(v) for v in rows[1]] == pytest.approx([0.0, np.sqrt(13.0)])
    assert float(rows[2][0]) == pytest.approx(5.0)
    assert float(rows[2][1]) <= 1e-6


def test_pareto_monotone_column(capsys):
    """Test the sampled frontier is nonincreasing"""
    assert main(["pareto", "--problem", "gen:m=10,n=30,k=2", "--loss", "huber", "--delta", "0.1",
                 "--grid-points", "8"]) == EXIT_OK
    nu = np.array([float(row[1]) for row in _rows(capsys.readouterr().out)[1:]])
    assert len(nu) == 8
    assert np.all(np.diff(nu) <= 1e-6)


def test_pareto_needs_two_points(tiny_path, capsys):
    """Test a one-point grid is rejected"""
    assert main(["pareto", "--problem", tiny_path, "--grid-points", "1"]) == EXIT_USAGE


@pytest.mark.slow
def test_recovery_command(capsys):
    """Test the recovery study on one seed"""
    assert main(["recovery", "--seeds", "1"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["seed", "loss", "sigma", "rel_error", "nnz", "tau_solves", "converged"]
    assert [row[1] for row in rows[1:]] == ["ls", "huber", "student"]
    assert all(row[0] == "0" for row in rows[1:])
