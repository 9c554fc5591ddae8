import os
import uuid
from datetime import datetime, timezone

import yaml

from sparse_levelset.problems import PRESETS

VALID_METHODS = {'rf', 'illinois', 'pegasus', 'ab', 'newton'}
VALID_LOSSES = {'ls', 'huber', 'student'}
PROBLEM_EXTENSIONS = ('.txt', '.dat', '.prob')


def validate_grid(grid_data):
    """
    Validate experiment grid data.

    Args:
        grid_data (dict): Grid data to validate

    Raises:
        ValueError: If grid data is invalid
    """
    required_fields = ['problems', 'sigma_ratios', 'methods', 'losses']
    missing = [f for f in required_fields if f not in grid_data]
    if missing:
        raise ValueError(f"Missing required fields: {', '.join(missing)}")

    for key in required_fields:
        if not isinstance(grid_data[key], list) or not grid_data[key]:
            raise ValueError(f"'{key}' must be a non-empty list")

    for problem in grid_data['problems']:
        if not isinstance(problem, str) or not problem:
            raise ValueError("Each problem must be a file path or a 'gen:' source string")
        if problem.startswith('gen:'):
            head = problem[4:].split(',')[0]
            if '=' not in head and head not in PRESETS:
                raise ValueError(f"Unknown generator preset: {head}")

    for ratio in grid_data['sigma_ratios']:
        if isinstance(ratio, bool) or not isinstance(ratio, (int, float)) or not (0 < ratio < 1):
            raise ValueError("Sigma ratios must be numbers strictly between 0 and 1")

    for method in grid_data['methods']:
        if method not in VALID_METHODS:
            raise ValueError(f"Invalid method {method!r}. Must be one of: {', '.join(sorted(VALID_METHODS))}")

    for loss in grid_data['losses']:
        # a loss is a token or a mapping {name: ..., delta: ..., nu: ...}
        name = loss.get('name') if isinstance(loss, dict) else loss
        if name not in VALID_LOSSES:
            raise ValueError(f"Invalid loss {name!r}. Must be one of: {', '.join(sorted(VALID_LOSSES))}")
        if isinstance(loss, dict):
            for param in ('delta', 'nu'):
                if param in loss and not (isinstance(loss[param], (int, float)) and loss[param] > 0):
                    raise ValueError(f"Loss parameter {param} must be positive")


def save_grid(grid_data, grids_folder, filename=None):
    """
    Save an experiment grid to a YAML file.

    Args:
        grid_data (dict): Grid data to save
        grids_folder (str): Folder to write into
        filename (str, optional): Filename to use. If not provided, a new one is generated.

    Returns:
        str: Filename of the saved grid
    """
    validate_grid(grid_data)

    if 'created_at' not in grid_data:
        grid_data['created_at'] = datetime.now(timezone.utc).isoformat()

    if not filename:
        grid_id = str(uuid.uuid4())
        grid_data['id'] = grid_id
        filename = f"{grid_id}.yml"

    os.makedirs(grids_folder, exist_ok=True)
    filepath = os.path.join(grids_folder, filename)
    with open(filepath, 'w', encoding='utf-8') as f:
        yaml.safe_dump(grid_data, f, sort_keys=False)

    return filename


def load_grid(filepath):
    """
    Load and validate an experiment grid from a YAML file.

    Args:
        filepath (str): Path to the grid file

    Returns:
        dict: Grid data
    """
    with open(filepath, 'r', encoding='utf-8') as f:
        grid_data = yaml.safe_load(f)
    if not isinstance(grid_data, dict):
        raise ValueError(f"{filepath} does not contain a grid mapping")
    validate_grid(grid_data)
    return grid_data


def list_problem_files(problems_folder):
    """
    List problem files in a folder, sorted by name.

    Args:
        problems_folder (str): Folder to scan

    Returns:
        list: Paths of problem files
    """
    return sorted(
        os.path.join(problems_folder, name)
        for name in os.listdir(problems_folder)
        if name.lower().endswith(PROBLEM_EXTENSIONS)
    )
