"""Experiment grids and the outlier recovery study."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence

from sparse_levelset.errors import DomainError
from sparse_levelset.levelset import NEWTON, SigmaConfig, SigmaProblem, solve_with
from sparse_levelset.losses import LossModel, loss_value
from sparse_levelset.problems import PRESETS, ProblemInstance, SyntheticSpec, gen_instance, load_source, \
    recovery_error
from sparse_levelset.spg import TauConfig
from utils.grid_manager import VALID_METHODS, validate_grid

logger = logging.getLogger(__name__)

DEFAULT_SIGMA_RATIOS = (0.5, 0.05, 0.005)
DEFAULT_METHODS = ("rf", "illinois", "pegasus", "ab", NEWTON)


@dataclass
class ExperimentGrid:
    problems: List[str]
    sigma_ratios: List[float]
    methods: List[str]
    losses: List[LossModel]

    def __post_init__(self):
        if not (self.problems and self.sigma_ratios and self.methods and self.losses):
            raise DomainError("Experiment grid lists must be non-empty")
        for ratio in self.sigma_ratios:
            if not 0 < ratio < 1:
                raise DomainError(f"Sigma ratios must lie in (0, 1), got {ratio}")
        for method in self.methods:
            if method not in VALID_METHODS:
                raise DomainError(f"Unknown method {method!r}")

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentGrid":
        try:
            validate_grid(data)
        except ValueError as e:
            raise DomainError(str(e))
        losses = []
        for loss in data["losses"]:
            if isinstance(loss, dict):
                losses.append(LossModel.from_token(loss["name"], **{k: loss[k] for k in ("delta", "nu") if k in loss}))
            else:
                losses.append(LossModel.from_token(loss))
        return cls(problems=list(data["problems"]), sigma_ratios=[float(r) for r in data["sigma_ratios"]],
                   methods=list(data["methods"]), losses=losses)

    def cells(self):
        """Cross product in (problem, ratio, method, loss) order."""
        for problem in self.problems:
            for ratio in self.sigma_ratios:
                for method in self.methods:
                    for loss in self.losses:
                        yield problem, ratio, method, loss


@dataclass
class CellResult:
    problem: str
    m: int
    n: int
    loss: str
    sigma_ratio: float
    sigma: float
    method: str
    rho_r: Optional[float] = None
    x_norm1: Optional[float] = None
    nnz: Optional[int] = None
    tau_solves: Optional[int] = None
    converged: Optional[bool] = None
    rel_error: Optional[float] = None

    @property
    def supported(self) -> bool:
        return self.rho_r is not None


def run_cell(instance: ProblemInstance, problem: str, ratio: float, method: str, model: LossModel,
             cfg: Optional[TauConfig] = None, options: Optional[SigmaConfig] = None,
             sigma: Optional[float] = None) -> CellResult:
    """Solve one cell. Newton on a nonconvex loss gives an all-NA result."""
    if sigma is None:
        sigma = ratio * loss_value(model, instance.y)
    row = CellResult(problem=problem, m=instance.d.rows, n=instance.d.cols, loss=model.label,
                     sigma_ratio=ratio, sigma=sigma, method=method)
    if method == NEWTON and not model.convex:
        return row
    prob = SigmaProblem(instance.d, instance.y, model, sigma)
    report = solve_with(prob, method, cfg=cfg, options=options)
    row.rho_r = report.rho_r
    row.x_norm1 = report.x_norm1
    row.nnz = report.nnz
    row.tau_solves = report.tau_solves
    row.converged = report.converged
    if instance.x_true is not None and instance.x_true.any():
        row.rel_error = recovery_error(report.x_sigma, instance.x_true)
    return row


def _map(fn: Callable, items: Sequence, parallel: int) -> List:
    if parallel and parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_grid(grid: ExperimentGrid, cfg: Optional[TauConfig] = None, options: Optional[SigmaConfig] = None,
             parallel: int = 1, loader: Callable[[str], ProblemInstance] = load_source) -> List[CellResult]:
    """Run every cell; results come back in serial order whatever ``parallel`` is."""
    instances = {problem: loader(problem) for problem in grid.problems}
    cells = list(grid.cells())
    logger.info("Running %d grid cells on %d worker(s)", len(cells), max(parallel, 1))

    def work(cell):
        problem, ratio, method, model = cell
        return run_cell(instances[problem], problem, ratio, method, model, cfg, options)

    return _map(work, cells, parallel)


def recovery_study(
    seeds: Iterable[int],
    losses: Sequence[LossModel] = (LossModel.least_squares(), LossModel.huber(), LossModel.student_t()),
    method: str = "illinois",
    base: SyntheticSpec = PRESETS["outliers"],
    cfg: Optional[TauConfig] = None,
    options: Optional[SigmaConfig] = None,
    parallel: int = 1,
) -> List[CellResult]:
    """Outlier-contaminated recovery with sigma = rho(zeta) for each loss.

    One row per (seed, loss); ``rel_error`` holds the relative recovery error.
    """
    jobs = []
    for seed in seeds:
        instance = gen_instance(replace(base, seed=seed))
        for model in losses:
            jobs.append((seed, instance, model))

    def work(job):
        seed, instance, model = job
        sigma = loss_value(model, instance.outliers)
        if sigma == 0.0:
            raise DomainError("Recovery study needs at least one outlier")
        return run_cell(instance, f"seed={seed}", 0.0, method, model, cfg, options, sigma=sigma)

    return _map(work, jobs, parallel)
