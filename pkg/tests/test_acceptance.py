"""Full-size runs on the gauss-en and outlier presets. Enable with --runslow."""
from dataclasses import replace

import numpy as np
import pytest

from sparse_levelset.experiments import recovery_study
from sparse_levelset.levelset import SigmaProblem, frames_tau, sample_pareto_curve, solve_with
from sparse_levelset.losses import LossModel, loss_value
from sparse_levelset.problems import PRESETS, gen_instance

pytestmark = pytest.mark.slow

LOSSES = [LossModel.least_squares(), LossModel.huber(), LossModel.student_t()]
RATIOS = [0.5, 0.05, 0.005]
RF_METHODS = ["rf", "illinois", "pegasus", "ab"]


@pytest.fixture(scope="module")
def gauss_en():
    return gen_instance(replace(PRESETS["gauss-en"], seed=0))


@pytest.fixture(scope="module")
def grid_reports(gauss_en):
    reports = {}
    for model in LOSSES:
        for ratio in RATIOS:
            prob = SigmaProblem(gauss_en.d, gauss_en.y, model, ratio * loss_value(model, gauss_en.y))
            methods = RF_METHODS + (["newton"] if model.convex else [])
            for method in methods:
                reports[model.label, ratio, method] = solve_with(prob, method)
    return reports


def test_level_set_accuracy(grid_reports):
    """Test every converged cell meets the relative misfit tolerance"""
    for (label, ratio, method), report in grid_reports.items():
        if report.converged:
            assert abs(report.rho_r - report.sigma) <= 1e-3 * report.sigma, (label, ratio, method)


def test_newton_needs_fewer_solves(grid_reports):
    """Test Newton uses no more tau-solves than each Regula Falsi variant in most convex cells"""
    wins = total = 0
    for label in ("ls", "huber"):
        for ratio in RATIOS:
            newton = grid_reports[label, ratio, "newton"].tau_solves
            for method in RF_METHODS:
                total += 1
                wins += newton <= grid_reports[label, ratio, method].tau_solves
    assert wins >= 0.8 * total


@pytest.mark.parametrize("model", LOSSES, ids=lambda m: m.label)
def test_pareto_curve_shape(gauss_en, model):
    """Test the 25-point frontier is nonincreasing and convex for convex losses"""
    prob = SigmaProblem(gauss_en.d, gauss_en.y, model, 0.0)
    taus = np.linspace(0.0, frames_tau(prob), 25)
    nu = np.array([v for _, v in sample_pareto_curve(prob, taus)])
    assert np.all(np.diff(nu) <= 1e-6)
    if model.convex:
        assert np.all(nu[1:-1] <= 0.5 * (nu[:-2] + nu[2:]) + 1e-4)


def test_robust_recovery_ordering():
    """Test Student's t beats Huber and Huber beats least squares on outlier data"""
    rows = recovery_study(range(10), losses=LOSSES, parallel=4)
    errors = {}
    for row in rows:
        errors.setdefault(row.problem, {})[row.loss] = row.rel_error
    assert len(errors) == 10
    assert sum(e["student"] < e["huber"] for e in errors.values()) >= 8
    assert sum(e["huber"] < e["ls"] for e in errors.values()) >= 8
