import math
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from qubobench.constants import DESIRED_PROBABILITY, ENERGY_TOLERANCE
from qubobench.errors import MetricError
from qubobench.problem.sampleset import SampleSet, Timing

SUMMARY_HEADER = [
    "method",
    "n_experiments",
    "shots_per_experiment",
    "ps",
    "ps_sigma",
    "ps_se",
    "ps_post",
    "ps_post_sigma",
    "ps_post_se",
    "ar_post",
    "ar_post_sigma",
    "user_runtime_s",
    "user_runtime_sigma",
    "qpu_time_s",
    "tts_s",
    "tt_eps_s",
    "t_post_selection_s",
    "mean_energy_post",
    "min_energy",
]


def post_select(samples: SampleSet, n_vacancies: int) -> SampleSet:
    """
    Keeps the records whose number of zero bits equals `n_vacancies`. Timing is kept.
    """
    return samples.filter(samples.zero_counts() == n_vacancies)


def _ground_mask(
    samples: SampleSet, e_ground: float, n_vacancies: Optional[int] = None
) -> np.ndarray:
    mask = np.abs(samples.energies - e_ground) <= ENERGY_TOLERANCE
    if n_vacancies is not None:
        mask &= samples.zero_counts() == n_vacancies
    return mask


def optimal_solution_probability(
    samples: SampleSet, e_ground: float, n_vacancies: Optional[int] = None
) -> float:
    """
    Fraction of shots within 1e-9 of `e_ground`.

    With `n_vacancies` only shots that also satisfy the constraint count as ground state
    hits, so infeasible states that happen to share the optimum energy are not counted.

    Raises:
        MetricError: On an empty sample set.
    """
    if samples.is_empty():
        raise MetricError("Ps is undefined on an empty sample set.")
    hits = samples.counts[_ground_mask(samples, e_ground, n_vacancies)].sum()
    return float(hits) / samples.n_shots_total


def mean_energy(samples: SampleSet) -> float:
    if samples.is_empty():
        raise MetricError("Mean energy is undefined on an empty sample set.")
    return float(np.dot(samples.energies, samples.counts) / samples.n_shots_total)


def ratio_from_energy(energy: float, e_min: float, e_max: float) -> float:
    if abs(e_max - e_min) <= ENERGY_TOLERANCE:
        raise MetricError(
            f"Approximation ratio is undefined for a degenerate energy range [{e_min}, {e_max}]."
        )
    return (energy - e_max) / (e_min - e_max)


def approximation_ratio(samples: SampleSet, e_min: float, e_max: float) -> float:
    """
    AR = (E - E_max) / (E_min - E_max) with E the shot-weighted mean energy.

    Raises:
        MetricError: On an empty sample set or when e_min equals e_max.
    """
    return ratio_from_energy(mean_energy(samples), e_min, e_max)


def standard_error(ps: float, n_solutions: int) -> float:
    """
    Binomial shot noise sqrt(ps (1 - ps) / n_solutions).
    """
    if not 0.0 <= ps <= 1.0:
        raise MetricError(f"Probability {ps} outside [0, 1].")
    if n_solutions < 1:
        raise MetricError("Standard error needs at least one solution.")
    return math.sqrt(ps * (1.0 - ps) / n_solutions)


def std_deviation(values: Sequence[float]) -> float:
    """
    Population standard deviation across experiments (divisor N_experiments).
    """
    if len(values) == 0:
        raise MetricError("Standard deviation of an empty list is undefined.")
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=0))


def time_to_solution(
    user_runtime_s: float,
    ps: float,
    p_desired: float = DESIRED_PROBABILITY,
    strict: bool = False,
) -> float:
    """
    TTS = T ln(1 - p_d) / ln(1 - ps).

    The formula is undefined at the ends: ps = 1 gives T and ps = 0 gives infinity, unless
    `strict` asks for an error instead.

    Raises:
        MetricError: If `p_desired` is outside (0, 1), or on a boundary `ps` when strict.
    """
    if not 0.0 < p_desired < 1.0:
        raise MetricError(f"Desired probability must lie in (0, 1), got {p_desired}.")
    if not 0.0 <= ps <= 1.0:
        raise MetricError(f"Probability {ps} outside [0, 1].")
    if ps >= 1.0 or ps <= 0.0:
        if strict:
            raise MetricError(f"TTS is undefined at ps={ps}.")
        return user_runtime_s if ps >= 1.0 else math.inf
    if ps == p_desired:
        return user_runtime_s
    return user_runtime_s * math.log(1.0 - p_desired) / math.log(1.0 - ps)


def time_to_epsilon(
    trajectory: Sequence[Tuple[float, float]],
    e_ground: float,
    epsilon: float,
    relative: bool = True,
) -> Optional[float]:
    """
    First elapsed time at which the best energy is within epsilon of the ground energy.

    Args:
        trajectory (Sequence[Tuple[float, float]]): (elapsed_s, best_energy) pairs.
        e_ground (float): Ground state energy.
        epsilon (float): Fraction of |e_ground|, or an absolute gap when not `relative`.
        relative (bool, optional): Relative or absolute threshold. Defaults to True.

    Returns:
        Optional[float]: The time, or None when the threshold is never reached.
    """
    if epsilon < 0:
        raise MetricError(f"Epsilon must be non-negative, got {epsilon}.")
    gap = epsilon * abs(e_ground) if relative else epsilon
    threshold = e_ground + gap + ENERGY_TOLERANCE
    for elapsed, best in trajectory:
        if best <= threshold:
            return float(elapsed)
    return None


class RuntimeBreakdown(NamedTuple):
    user_runtime_s: float
    qpu_time_s: Optional[float]


def runtime_breakdown(timing: Union[Timing, SampleSet]) -> RuntimeBreakdown:
    """
    User runtime = T_encoding + T_latency + T_device. Simulator backends report their
    device time as QPU time; classical solvers have none.
    """
    if isinstance(timing, SampleSet):
        timing = timing.timing
    user = timing.t_encoding + timing.t_latency + timing.t_device
    return RuntimeBreakdown(
        user_runtime_s=user, qpu_time_s=timing.t_device if timing.quantum_device else None
    )


@dataclass(frozen=True)
class ExperimentCounts:
    """
    Sufficient statistics of one experiment, enough to rebuild every metric.
    """

    n_shots: int
    n_ground: int
    n_post: int
    n_ground_post: int
    energy_sum_post: float
    min_energy: float
    user_runtime_s: float
    qpu_time_s: Optional[float] = None
    t_post_selection_s: float = 0.0
    tt_eps_s: Optional[float] = None

    @property
    def ps(self) -> float:
        return self.n_ground / self.n_shots if self.n_shots else 0.0

    @property
    def ps_post(self) -> float:
        return self.n_ground_post / self.n_post if self.n_post else 0.0

    @property
    def mean_energy_post(self) -> Optional[float]:
        return self.energy_sum_post / self.n_post if self.n_post else None

    def to_dict(self) -> Dict:
        return asdict(self)


def count_samples(
    samples: SampleSet,
    e_ground: float,
    n_vacancies: Optional[int],
    tt_eps_s: Optional[float] = None,
) -> Tuple[ExperimentCounts, SampleSet]:
    """
    Reduces one experiment's samples to counters. Post-selection is timed separately and
    never added to the user runtime.

    Returns:
        Tuple[ExperimentCounts, SampleSet]: The counters and the post-selected samples.
    """
    start = time.perf_counter()
    selected = samples if n_vacancies is None else post_select(samples, n_vacancies)
    t_post = time.perf_counter() - start
    breakdown = runtime_breakdown(samples.timing)
    ground = _ground_mask(samples, e_ground, n_vacancies)
    ground_post = _ground_mask(selected, e_ground, n_vacancies)
    counts = ExperimentCounts(
        n_shots=samples.n_shots_total,
        n_ground=int(samples.counts[ground].sum()),
        n_post=selected.n_shots_total,
        n_ground_post=int(selected.counts[ground_post].sum()),
        energy_sum_post=float(np.dot(selected.energies, selected.counts)),
        min_energy=float(samples.energies.min()) if len(samples) else math.inf,
        user_runtime_s=breakdown.user_runtime_s,
        qpu_time_s=breakdown.qpu_time_s,
        t_post_selection_s=t_post,
        tt_eps_s=tt_eps_s,
    )
    return counts, selected


def _mean_sigma(values: List[float]) -> Tuple[Optional[float], float]:
    if not values:
        return None, 0.0
    return float(np.mean(values)), std_deviation(values)


@dataclass(frozen=True)
class MetricReport:
    """
    Aggregated metrics of a batch of experiments (one summary table row).

    Probabilities pool the shots of all experiments, `*_sigma` fields are population
    standard deviations across experiments and `*_se` fields the shot noise of the pooled
    estimate.
    """

    ps: float
    ps_post: float
    ar_post: Optional[float]
    se: float
    sigma: float
    user_runtime_s: float
    qpu_time_s: Optional[float]
    tts_s: Optional[float]
    tt_eps_s: Optional[float]
    n_experiments: int
    n_shots_per_experiment: int
    se_post: float = 0.0
    sigma_post: float = 0.0
    sigma_ar: float = 0.0
    user_runtime_sigma: float = 0.0
    t_post_selection_s: float = 0.0
    mean_energy_post: Optional[float] = None
    min_energy: Optional[float] = None

    @classmethod
    def from_counts(
        cls,
        counts: Sequence[ExperimentCounts],
        e_min: Optional[float] = None,
        e_max: Optional[float] = None,
        p_desired: float = DESIRED_PROBABILITY,
    ) -> "MetricReport":
        """
        Aggregates per-experiment counters.

        Args:
            counts (Sequence[ExperimentCounts]): One entry per successful experiment.
            e_min (Optional[float]): Constrained minimum energy, for AR.
            e_max (Optional[float]): Constrained maximum energy, for AR.
            p_desired (float): Target probability of the TTS.

        Raises:
            MetricError: If there is no experiment to aggregate.
        """
        if not counts:
            raise MetricError("No successful experiment to aggregate.")
        n_shots = sum(c.n_shots for c in counts)
        n_post = sum(c.n_post for c in counts)
        ps = sum(c.n_ground for c in counts) / n_shots if n_shots else 0.0
        ps_post = sum(c.n_ground_post for c in counts) / n_post if n_post else 0.0
        mean_post = sum(c.energy_sum_post for c in counts) / n_post if n_post else None

        ar_post, sigma_ar = None, 0.0
        if mean_post is not None and e_min is not None and e_max is not None:
            if abs(e_max - e_min) > ENERGY_TOLERANCE:
                ar_post = ratio_from_energy(mean_post, e_min, e_max)
                sigma_ar = std_deviation(
                    [
                        ratio_from_energy(c.mean_energy_post, e_min, e_max)
                        for c in counts
                        if c.mean_energy_post is not None
                    ]
                )

        runtime, runtime_sigma = _mean_sigma([c.user_runtime_s for c in counts])
        qpu_values = [c.qpu_time_s for c in counts if c.qpu_time_s is not None]
        qpu_time = float(np.mean(qpu_values)) if qpu_values else None
        eps_values = [c.tt_eps_s for c in counts if c.tt_eps_s is not None]
        tt_eps = float(np.mean(eps_values)) if eps_values else None
        tts = time_to_solution(runtime, ps, p_desired) if n_shots else None
        return cls(
            ps=ps,
            ps_post=ps_post,
            ar_post=ar_post,
            se=standard_error(ps, n_shots) if n_shots else 0.0,
            sigma=std_deviation([c.ps for c in counts]),
            user_runtime_s=runtime,
            qpu_time_s=qpu_time,
            tts_s=tts,
            tt_eps_s=tt_eps,
            n_experiments=len(counts),
            n_shots_per_experiment=int(round(n_shots / len(counts))),
            se_post=standard_error(ps_post, n_post) if n_post else 0.0,
            sigma_post=std_deviation([c.ps_post for c in counts]),
            sigma_ar=sigma_ar,
            user_runtime_sigma=runtime_sigma,
            t_post_selection_s=float(np.mean([c.t_post_selection_s for c in counts])),
            mean_energy_post=mean_post,
            min_energy=float(min(c.min_energy for c in counts)),
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    def summary_row(self, method: str) -> List[str]:
        """
        Row of the summary table, in `SUMMARY_HEADER` order.
        """
        values = [
            self.n_experiments,
            self.n_shots_per_experiment,
            self.ps,
            self.sigma,
            self.se,
            self.ps_post,
            self.sigma_post,
            self.se_post,
            self.ar_post,
            self.sigma_ar,
            self.user_runtime_s,
            self.user_runtime_sigma,
            self.qpu_time_s,
            self.tts_s,
            self.tt_eps_s,
            self.t_post_selection_s,
            self.mean_energy_post,
            self.min_energy,
        ]
        return [method] + [_format_cell(value) for value in values]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"
