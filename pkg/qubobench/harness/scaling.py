import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from qubobench.benchmark import run_batch
from qubobench.constants import N_EXPERIMENTS
from qubobench.errors import QuboBenchError
from qubobench.harness.records import InstanceSpec

logger = logging.getLogger(__name__)

SCALING_HEADER = [
    "supercell_dim",
    "n_vars",
    "user_runtime_s",
    "user_runtime_sigma",
    "ps",
    "ps_sigma",
    "ps_zero",
    "failure",
]


@dataclass(frozen=True)
class ScalingRow:
    supercell_dim: int
    n_vars: int
    user_runtime_s: Optional[float] = None
    user_runtime_sigma: Optional[float] = None
    ps: Optional[float] = None
    ps_sigma: Optional[float] = None
    failure: Optional[str] = None

    @property
    def ps_zero(self) -> bool:
        return self.failure is None and self.ps == 0.0

    def cells(self) -> List[Any]:
        values = [
            self.supercell_dim,
            self.n_vars,
            self.user_runtime_s,
            self.user_runtime_sigma,
            self.ps,
            self.ps_sigma,
            int(self.ps_zero),
            self.failure,
        ]
        return ["" if value is None else value for value in values]


@dataclass(frozen=True)
class ScalingTable:
    rows: List[ScalingRow]
    slope: Optional[float]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SCALING_HEADER)
        for row in self.rows:
            writer.writerow(row.cells())
        return buffer.getvalue()


def loglog_slope(n_vars: Sequence[float], runtimes: Sequence[float]) -> Optional[float]:
    """
    Least squares slope of log(runtime) against log(N); None with fewer than two points.
    """
    if len(n_vars) < 2 or len(set(n_vars)) < 2:
        return None
    slope, _ = np.polyfit(np.log(n_vars), np.log(runtimes), 1)
    return float(slope)


def scaling_run(
    method: str,
    supercell_dims: Sequence[int],
    params: Optional[Dict[str, Any]] = None,
    repeats: int = N_EXPERIMENTS,
    base_seed: int = 0,
    template: Optional[InstanceSpec] = None,
    threads: Optional[int] = None,
    store_path: Optional[Union[str, Path]] = None,
) -> ScalingTable:
    """
    Runs the same method and hyperparameters over increasing supercell sizes.

    A size whose experiments all fail, or whose instance cannot be built, is flagged and
    the run continues with the next size. Rows with Ps = 0 are kept and flagged.

    Args:
        method (str): Method id.
        supercell_dims (Sequence[int]): Supercell dimensions; N = 2 n^2.
        params (Optional[Dict[str, Any]], optional): Fixed solver hyperparameters.
        repeats (int, optional): Experiments per size. Defaults to 10.
        base_seed (int, optional): Base seed. Defaults to 0.
        template (Optional[InstanceSpec], optional): kappa, lambda and vacancy count.
        threads (Optional[int], optional): Worker pool size.
        store_path (Optional[Union[str, Path]], optional): JSONL store for every record.

    Returns:
        ScalingTable: Rows ordered by N and the log-log runtime slope.
    """
    template = template or InstanceSpec()
    rows = []
    for dim in sorted(set(supercell_dims)):
        spec = template.with_overrides({"supercell_dim": dim})
        try:
            batch = run_batch(
                method,
                spec,
                params,
                repeats,
                base_seed,
                threads=threads,
                store_path=store_path,
            )
        except QuboBenchError as error:
            logger.warning("Size %d flagged: %s", spec.n_sites, error)
            rows.append(ScalingRow(dim, spec.n_sites, failure=str(error)))
            continue
        report = batch.report
        if report is None:
            failure = batch.failures[0].failure if batch.failures else "no reference energy"
            logger.warning("Size %d flagged: %s", spec.n_sites, failure)
            rows.append(ScalingRow(dim, spec.n_sites, failure=failure))
            continue
        rows.append(
            ScalingRow(
                supercell_dim=dim,
                n_vars=spec.n_sites,
                user_runtime_s=report.user_runtime_s,
                user_runtime_sigma=report.user_runtime_sigma,
                ps=report.ps,
                ps_sigma=report.sigma,
            )
        )
    fitted = [row for row in rows if row.failure is None and row.user_runtime_s]
    slope = loglog_slope([row.n_vars for row in fitted], [row.user_runtime_s for row in fitted])
    if slope is not None:
        logger.info("Log-log runtime slope of %s: %.3f", method, slope)
    return ScalingTable(rows=rows, slope=slope)
