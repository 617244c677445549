import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from qubobench.analysis.metrics import MetricReport
from qubobench.benchmark import run_batch
from qubobench.config import parse_value
from qubobench.constants import GRID_MAX_POINTS, GRID_OBJECTIVES, INSTANCE_KEYS
from qubobench.errors import ConfigError, GuardError
from qubobench.harness.records import InstanceSpec
from qubobench.problem.qubo import QuboInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """
    Cartesian hyperparameter grid.

    Axes named after instance keys (`supercell_dim`, `kappa`, `lambda`, `n_vacancies`)
    rebuild the instance; every other axis is a solver hyperparameter.
    """

    axes: Dict[str, List[Any]]
    objective: str = "max_mean_ps"
    repeats_per_point: int = 1
    budget: int = GRID_MAX_POINTS

    def __post_init__(self) -> None:
        if not self.axes:
            raise GuardError("A grid needs at least one axis.")
        empty = [name for name, values in self.axes.items() if not len(values)]
        if empty:
            raise GuardError(f"Grid axes without values: {empty}.")
        if self.objective not in GRID_OBJECTIVES:
            raise ConfigError(
                f"Unknown objective '{self.objective}'. Choose one of {GRID_OBJECTIVES}."
            )
        if self.repeats_per_point < 1:
            raise GuardError(f"Repeats per point must be positive, got {self.repeats_per_point}.")
        if self.n_points > self.budget:
            raise GuardError(
                f"The grid has {self.n_points} points, over the budget of {self.budget}."
            )

    @property
    def n_points(self) -> int:
        return math.prod(len(values) for values in self.axes.values())

    def points(self) -> List[Dict[str, Any]]:
        names = list(self.axes)
        return [
            dict(zip(names, values))
            for values in itertools.product(*(self.axes[name] for name in names))
        ]


@dataclass
class GridPoint:
    params: Dict[str, Any]
    report: Optional[MetricReport]
    n_failures: int = 0

    @property
    def mean_ps(self) -> float:
        return self.report.ps if self.report is not None else 0.0

    @property
    def mean_runtime(self) -> float:
        return self.report.user_runtime_s if self.report is not None else math.inf

    def sort_key(self) -> Tuple:
        return tuple(self.params[name] for name in sorted(self.params))

    def to_row(self, names: Sequence[str]) -> List[Any]:
        report = self.report
        return [self.params[name] for name in names] + [
            self.mean_ps,
            None if report is None else report.sigma,
            None if report is None else report.ps_post,
            None if report is None else report.ar_post,
            None if report is None else report.user_runtime_s,
            None if report is None else report.tts_s,
            self.n_failures,
        ]


@dataclass
class GridResult:
    best_point: GridPoint
    all_points: List[GridPoint] = field(default_factory=list)

    def to_csv(self) -> str:
        """
        The full performance surface, one row per grid point.
        """
        names = list(self.best_point.params)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            names + ["ps", "ps_sigma", "ps_post", "ar_post", "user_runtime_s", "tts_s", "failures"]
        )
        for point in self.all_points:
            writer.writerow(["" if value is None else value for value in point.to_row(names)])
        return buffer.getvalue()


def _select_best(points: List[GridPoint], objective: str) -> GridPoint:
    if objective == "max_mean_ps":
        return min(points, key=lambda p: (-p.mean_ps, p.mean_runtime, p.sort_key()))
    solving = [point for point in points if point.mean_ps > 0.0] or points
    return min(solving, key=lambda p: (p.mean_runtime, -p.mean_ps, p.sort_key()))


def grid_search(
    method: str,
    instance: Union[InstanceSpec, QuboInstance],
    grid: GridSpec,
    base_seed: int = 0,
    base_params: Optional[Dict[str, Any]] = None,
    threads: Optional[int] = None,
    store_path: Optional[Union[str, Path]] = None,
) -> GridResult:
    """
    Evaluates every grid point with `repeats_per_point` experiments.

    All points share the base seed. The best point maximises the mean Ps (or minimises the
    mean user runtime among the points that solve the problem), ties broken by lower mean
    user runtime, then by the lexicographic order of the parameter values.

    Args:
        method (str): Method id.
        instance (Union[InstanceSpec, QuboInstance]): Instance, rebuilt per point when an
            axis names an instance key.
        grid (GridSpec): Axes and objective.
        base_seed (int, optional): Base seed of every point. Defaults to 0.
        base_params (Optional[Dict[str, Any]], optional): Fixed solver hyperparameters.
        threads (Optional[int], optional): Worker pool size.
        store_path (Optional[Union[str, Path]], optional): JSONL store for every record.

    Returns:
        GridResult: The best point and the full surface in evaluation order.

    Raises:
        ConfigError: If an instance axis is used with a prebuilt QUBO.
    """
    instance_axes = [name for name in grid.axes if name in INSTANCE_KEYS]
    if instance_axes and not isinstance(instance, InstanceSpec):
        raise ConfigError(
            f"Axes {instance_axes} rebuild the instance and need an instance descriptor."
        )
    points = []
    for params in grid.points():
        solver_params = dict(base_params or {})
        solver_params.update({k: v for k, v in params.items() if k not in INSTANCE_KEYS})
        point_instance = instance
        if instance_axes:
            point_instance = instance.with_overrides(params)
        batch = run_batch(
            method,
            point_instance,
            solver_params,
            grid.repeats_per_point,
            base_seed,
            threads=threads,
            store_path=store_path,
        )
        point = GridPoint(params=params, report=batch.report, n_failures=len(batch.failures))
        logger.info("Grid point %s: Ps=%.4f", params, point.mean_ps)
        points.append(point)
    return GridResult(best_point=_select_best(points, grid.objective), all_points=points)


def parse_axis(text: str) -> Tuple[str, List[Any]]:
    """
    Parses a `name=v1,v2,...` axis. Values are read as int, float or bool when possible.

    Raises:
        ConfigError: On a missing `=` or an empty value list.
    """
    name, separator, values = text.partition("=")
    name = name.strip().replace("-", "_")
    if not separator or not name:
        raise ConfigError(f"Axis '{text}' must look like name=v1,v2,...")
    parsed = [parse_value(value) for value in values.split(",") if value.strip()]
    if not parsed:
        raise ConfigError(f"Axis '{name}' has no values.")
    return name, parsed
