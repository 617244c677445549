import csv
import io
import logging
from collections import defaultdict
from typing import Dict, List, NamedTuple, Sequence

import numpy as np

from qubobench.analysis.metrics import SUMMARY_HEADER, MetricReport
from qubobench.harness.records import ExperimentRecord

logger = logging.getLogger(__name__)

DISTRIBUTION_HEADER = ["method", "selection", "energy", "probability"]
CONVERGENCE_HEADER = [
    "method",
    "iteration",
    "objective_mean",
    "objective_sigma",
    "best_energy_mean",
    "best_energy_sigma",
]


class ReportData(NamedTuple):
    summary_csv: str
    distribution_data: str
    convergence_data: str


def _writer(buffer: io.StringIO):
    return csv.writer(buffer, lineterminator="\n")


def _group_by_method(records: Sequence[ExperimentRecord]) -> Dict[str, List[ExperimentRecord]]:
    groups: Dict[str, List[ExperimentRecord]] = {}
    for record in records:
        groups.setdefault(record.method, []).append(record)
    return groups


def summary_csv(records: Sequence[ExperimentRecord]) -> str:
    """
    One summary table row per method over its counted experiments.
    """
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(SUMMARY_HEADER)
    for method, group in _group_by_method(records).items():
        counted = [record for record in group if record.succeeded and record.counts is not None]
        if not counted:
            continue
        reference = counted[0].reference
        report = MetricReport.from_counts(
            [record.counts for record in counted],
            reference.get("e_min"),
            reference.get("e_max"),
        )
        writer.writerow(report.summary_row(method))
    return buffer.getvalue()


def _normalised(histograms: List[List]) -> List[List[float]]:
    totals: Dict[float, int] = defaultdict(int)
    for histogram in histograms:
        for energy, count in histogram:
            totals[float(energy)] += int(count)
    n_shots = sum(totals.values())
    if not n_shots:
        return []
    return [[energy, totals[energy] / n_shots] for energy in sorted(totals)]


def distribution_data(records: Sequence[ExperimentRecord]) -> str:
    """
    Energy distributions pooled over the experiments of each method, normalised to unit
    mass, before and after post-selection.
    """
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(DISTRIBUTION_HEADER)
    for method, group in _group_by_method(records).items():
        counted = [record for record in group if record.succeeded]
        for selection, attribute in (("pre", "histogram_pre"), ("post", "histogram_post")):
            pooled = _normalised([getattr(record, attribute) for record in counted])
            for energy, probability in pooled:
                writer.writerow([method, selection, f"{energy:.9g}", f"{probability:.12g}"])
    return buffer.getvalue()


def convergence_data(records: Sequence[ExperimentRecord]) -> str:
    """
    Per-iteration mean and standard deviation of the optimizer objective of each method,
    truncated at the smallest iteration count across its experiments.
    """
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(CONVERGENCE_HEADER)
    for method, group in _group_by_method(records).items():
        traces = [
            record.trace
            for record in group
            if record.succeeded and record.trace and record.trace.get("objective")
        ]
        if not traces:
            continue
        length = min(len(trace["objective"]) for trace in traces)
        objective = np.array([trace["objective"][:length] for trace in traces])
        best = np.array([trace["best_energy"][:length] for trace in traces])
        best = np.minimum.accumulate(best, axis=1)
        for iteration in range(length):
            writer.writerow(
                [
                    method,
                    iteration + 1,
                    f"{objective[:, iteration].mean():.9g}",
                    f"{objective[:, iteration].std():.9g}",
                    f"{best[:, iteration].mean():.9g}",
                    f"{best[:, iteration].std():.9g}",
                ]
            )
    return buffer.getvalue()


def emit_report(records: Sequence[ExperimentRecord]) -> ReportData:
    """
    Builds the summary table, the distribution data and the convergence data.

    Args:
        records (Sequence[ExperimentRecord]): Counted records, for example a loaded store.

    Returns:
        ReportData: Three CSV texts. An empty record list gives headers only.
    """
    logger.debug("Emitting report over %d records", len(records))
    return ReportData(
        summary_csv=summary_csv(records),
        distribution_data=distribution_data(records),
        convergence_data=convergence_data(records),
    )
