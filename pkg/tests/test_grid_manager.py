import os

import pytest
import yaml

from utils.grid_manager import list_problem_files, load_grid, save_grid, validate_grid


def _grid():
    return {
        'problems': ['gen:gauss-en', 'tiny.txt'],
        'sigma_ratios': [0.5, 0.05],
        'methods': ['illinois', 'newton'],
        'losses': ['ls', {'name': 'huber', 'delta': 0.01}],
    }


def test_validate_grid_accepts_valid_data():
    """Test a well-formed grid passes"""
    validate_grid(_grid())


@pytest.mark.parametrize("field, value", [
    ('problems', []),
    ('problems', ['gen:unknown']),
    ('sigma_ratios', [1.5]),
    ('sigma_ratios', [True]),
    ('methods', ['bisection']),
    ('losses', ['cauchy']),
    ('losses', [{'name': 'student', 'nu': -1}]),
])
def test_validate_grid_rejects(field, value):
    """Test invalid grid entries"""
    grid = _grid()
    grid[field] = value
    with pytest.raises(ValueError):
        validate_grid(grid)


def test_validate_grid_missing_fields():
    """Test missing fields are reported"""
    grid = _grid()
    del grid['methods']
    with pytest.raises(ValueError, match="methods"):
        validate_grid(grid)


def test_save_and_load_grid(tmp_path):
    """Test saving a grid writes YAML that loads back"""
    folder = tmp_path / "grids"
    filename = save_grid(_grid(), str(folder))
    assert filename.endswith(".yml")
    loaded = load_grid(os.path.join(str(folder), filename))
    assert loaded['methods'] == ['illinois', 'newton']
    assert 'created_at' in loaded
    assert loaded['id'] == filename[:-4]


def test_save_grid_with_filename(tmp_path):
    """Test an explicit filename is kept"""
    assert save_grid(_grid(), str(tmp_path), filename="table.yml") == "table.yml"
    assert (tmp_path / "table.yml").exists()


def test_load_grid_rejects_non_mapping(tmp_path):
    """Test a YAML list is not a grid"""
    path = tmp_path / "grid.yml"
    path.write_text(yaml.safe_dump([1, 2]), encoding="utf-8")
    with pytest.raises(ValueError):
        load_grid(str(path))


def test_list_problem_files(tmp_path):
    """Test problem files are listed in order"""
    for name in ("b.txt", "a.dat", "notes.md"):
        (tmp_path / name).write_text("", encoding="utf-8")
    assert list_problem_files(str(tmp_path)) == [str(tmp_path / "a.dat"), str(tmp_path / "b.txt")]
