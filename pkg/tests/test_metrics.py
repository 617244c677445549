import math

import numpy as np
import pytest

from qubobench.analysis.metrics import (
    SUMMARY_HEADER,
    ExperimentCounts,
    MetricReport,
    approximation_ratio,
    count_samples,
    mean_energy,
    optimal_solution_probability,
    post_select,
    ratio_from_energy,
    runtime_breakdown,
    standard_error,
    std_deviation,
    time_to_epsilon,
    time_to_solution,
)
from qubobench.errors import MetricError
from qubobench.problem.sampleset import SampleSet, Timing


@pytest.fixture
def shared_energy_samples():
    # Same energy, different numbers of zero bits
    return SampleSet(
        n_vars=3,
        bitstrings=np.array([[0, 0, 1], [0, 1, 1]], dtype=np.uint8),
        energies=np.array([-1.0, -1.0]),
        counts=np.array([1, 3]),
        timing=Timing(t_encoding=0.5, t_latency=0.25, t_device=1.0, quantum_device=True),
    )


TRAJECTORY = ((0.1, -10.0), (0.2, -18.0), (0.3, -19.5), (0.4, -20.0))


def test_tts_at_the_desired_probability():
    assert time_to_solution(2.5, 0.99, 0.99) == pytest.approx(2.5)


def test_tts_reference_value():
    assert time_to_solution(0.339, 0.993) == pytest.approx(0.3146, abs=1e-4)


def test_tts_formula():
    assert time_to_solution(2.0, 0.3) == pytest.approx(2.0 * math.log(0.01) / math.log(0.7))


def test_tts_boundaries():
    assert time_to_solution(1.5, 1.0) == 1.5
    assert time_to_solution(1.5, 0.0) == math.inf
    with pytest.raises(MetricError):
        time_to_solution(1.5, 0.0, strict=True)
    with pytest.raises(MetricError):
        time_to_solution(1.5, 1.0, strict=True)
    with pytest.raises(MetricError):
        time_to_solution(1.5, 0.5, p_desired=1.0)
    with pytest.raises(MetricError):
        time_to_solution(1.5, 1.2)


def test_standard_error():
    assert standard_error(0.5, 100) == pytest.approx(0.05)
    assert standard_error(1.0, 10) == 0.0
    with pytest.raises(MetricError):
        standard_error(0.5, 0)


def test_population_standard_deviation():
    assert std_deviation([1, 2, 3, 4]) == pytest.approx(1.1180340, abs=1e-7)
    assert std_deviation([0.7]) == 0.0
    with pytest.raises(MetricError):
        std_deviation([])


def test_approximation_ratio_endpoints():
    assert ratio_from_energy(-20.0, -20.0, -18.0) == pytest.approx(1.0)
    assert ratio_from_energy(-18.0, -20.0, -18.0) == pytest.approx(0.0)
    with pytest.raises(MetricError, match="degenerate"):
        ratio_from_energy(-20.0, -20.0, -20.0)


def test_approximation_ratio_of_samples(shared_energy_samples):
    assert mean_energy(shared_energy_samples) == pytest.approx(-1.0)
    assert approximation_ratio(shared_energy_samples, -1.0, 0.0) == pytest.approx(1.0)


def test_ps_counts_only_feasible_ground_states(shared_energy_samples):
    assert optimal_solution_probability(shared_energy_samples, -1.0) == pytest.approx(1.0)
    assert optimal_solution_probability(shared_energy_samples, -1.0, 2) == pytest.approx(0.25)
    assert optimal_solution_probability(shared_energy_samples, -2.0) == 0.0


def test_ps_of_empty_samples():
    with pytest.raises(MetricError):
        optimal_solution_probability(SampleSet.empty(3), -1.0)
    with pytest.raises(MetricError):
        mean_energy(SampleSet.empty(3))


def test_post_select_keeps_timing(shared_energy_samples):
    selected = post_select(shared_energy_samples, 1)
    assert selected.n_shots_total == 3
    assert selected.timing == shared_energy_samples.timing
    assert post_select(shared_energy_samples, 0).is_empty()


def test_time_to_epsilon():
    assert time_to_epsilon(TRAJECTORY, -20.0, 0.05) == pytest.approx(0.3)
    assert time_to_epsilon(TRAJECTORY, -20.0, 0.0, relative=False) == pytest.approx(0.4)
    assert time_to_epsilon(TRAJECTORY, -20.0, 2.0, relative=False) == pytest.approx(0.2)
    assert time_to_epsilon(TRAJECTORY, -21.0, 0.0) is None
    assert time_to_epsilon((), -20.0, 0.05) is None
    with pytest.raises(MetricError):
        time_to_epsilon(TRAJECTORY, -20.0, -0.1)


def test_runtime_breakdown(shared_energy_samples):
    breakdown = runtime_breakdown(shared_energy_samples)
    assert breakdown.user_runtime_s == pytest.approx(1.75)
    assert breakdown.qpu_time_s == pytest.approx(1.0)
    classical = runtime_breakdown(Timing(t_device=0.2))
    assert classical.user_runtime_s == pytest.approx(0.2)
    assert classical.qpu_time_s is None


def test_count_samples(shared_energy_samples):
    counts, selected = count_samples(shared_energy_samples, -1.0, 2)
    assert counts.n_shots == 4
    assert counts.n_ground == 1
    assert counts.n_post == 1
    assert counts.n_ground_post == 1
    assert counts.energy_sum_post == pytest.approx(-1.0)
    assert counts.min_energy == pytest.approx(-1.0)
    assert counts.user_runtime_s == pytest.approx(1.75)
    assert counts.ps == pytest.approx(0.25)
    assert counts.ps_post == pytest.approx(1.0)
    assert selected.n_shots_total == 1


def test_count_samples_of_generic_problem(shared_energy_samples):
    counts, selected = count_samples(shared_energy_samples, -1.0, None)
    assert counts.n_ground == 4
    assert counts.n_post == 4
    assert selected is shared_energy_samples


def make_counts():
    return [
        ExperimentCounts(10, 5, 8, 5, -150.0, -20.0, 1.0),
        ExperimentCounts(10, 1, 4, 1, -70.0, -20.0, 3.0),
    ]


def test_report_aggregation():
    report = MetricReport.from_counts(make_counts(), -20.0, -18.0)
    assert report.n_experiments == 2
    assert report.n_shots_per_experiment == 10
    assert report.ps == pytest.approx(0.3)
    assert report.ps_post == pytest.approx(0.5)
    assert report.sigma == pytest.approx(0.2)
    assert report.se == pytest.approx(math.sqrt(0.3 * 0.7 / 20))
    assert report.user_runtime_s == pytest.approx(2.0)
    assert report.user_runtime_sigma == pytest.approx(1.0)
    assert report.ar_post == pytest.approx(1.0 / 6.0, abs=1e-5)
    assert report.mean_energy_post == pytest.approx(-220.0 / 12.0)
    assert report.tts_s == pytest.approx(time_to_solution(2.0, 0.3))
    assert report.qpu_time_s is None
    assert report.tt_eps_s is None


def test_report_of_one_experiment():
    report = MetricReport.from_counts(make_counts()[:1], -20.0, -18.0)
    assert report.sigma == 0.0
    assert report.user_runtime_sigma == 0.0
    assert report.ps == pytest.approx(0.5)


def test_report_without_energy_range():
    report = MetricReport.from_counts(make_counts())
    assert report.ar_post is None
    degenerate = MetricReport.from_counts(make_counts(), -20.0, -20.0)
    assert degenerate.ar_post is None


def test_report_needs_experiments():
    with pytest.raises(MetricError):
        MetricReport.from_counts([])


def test_summary_row_matches_header():
    row = MetricReport.from_counts(make_counts(), -20.0, -18.0).summary_row("sa")
    assert len(row) == len(SUMMARY_HEADER)
    assert row[0] == "sa"
    assert row[1] == "2"
    assert row[SUMMARY_HEADER.index("qpu_time_s")] == ""
    assert float(row[SUMMARY_HEADER.index("ps")]) == pytest.approx(0.3)
