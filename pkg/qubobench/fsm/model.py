import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from qubobench.analysis.metrics import MetricReport, count_samples, time_to_epsilon
from qubobench.constants import DESIRED_PROBABILITY, REFERENCE_BRUTE_MAX_VARS
from qubobench.errors import GuardError, QuboBenchError
from qubobench.harness.records import (
    ExperimentBatch,
    ExperimentRecord,
    InstanceSpec,
    ReferenceEnergies,
    describe_instance,
    utc_timestamp,
)
from qubobench.harness.store import ExperimentStore
from qubobench.problem.qubo import QuboInstance, constrained_extrema
from qubobench.problem.sampleset import iter_energy_counts
from qubobench.solvers.classical import brute_force
from qubobench.solvers.dispatch import resolve_params, run_method
from qubobench.utils import derive_seed, resolve_threads

logger = logging.getLogger(__name__)


class ExperimentModel:
    def __init__(
        self,
        method: str,
        instance: Union[InstanceSpec, QuboInstance],
        hyperparams: Optional[Dict[str, Any]] = None,
        n_experiments: int = 1,
        base_seed: int = 0,
        threads: Optional[int] = None,
        store_path: Optional[Union[str, Path]] = None,
        epsilon: Optional[float] = None,
        p_desired: float = DESIRED_PROBABILITY,
    ) -> None:
        """
        State of one batch of repeated experiments.

        Args:
            method (str): Method id.
            instance (Union[InstanceSpec, QuboInstance]): Instance descriptor or a built QUBO.
            hyperparams (Optional[Dict[str, Any]]): Solver hyperparameters over the defaults.
            n_experiments (int): Number of independent experiments.
            base_seed (int): Seed from which every experiment seed is derived.
            threads (Optional[int]): Worker pool size. Defaults to QUBOBENCH_THREADS.
            store_path (Optional[Union[str, Path]]): JSONL store to append the records to.
            epsilon (Optional[float]): Relative gap of the TT_epsilon metric; None disables it.
            p_desired (float): Target probability of the TTS metric.
        """
        self.method = method
        self.instance_source = instance
        self.__hyperparams = dict(hyperparams or {})
        self.n_experiments = n_experiments
        self.base_seed = base_seed
        self.threads = threads
        self.epsilon = epsilon
        self.p_desired = p_desired
        self.__store_path = None if store_path is None else Path(store_path)
        self.__error: Optional[Exception] = None
        self.instance: Optional[QuboInstance] = None
        self.resolved_params: Dict[str, Any] = {}
        self.reference = ReferenceEnergies()
        self.records: List[ExperimentRecord] = []
        self.batch: Optional[ExperimentBatch] = None

    def current_state(self) -> None:
        """
        Logs the current state of the model.
        """
        logger.info("Experiment state machine entered '%s' (%s)", self.state, self.method)

    # region: error_handling
    def raise_error(self) -> None:
        """
        Raises the stored error if it exists.
        Raises:
            Exception: If an error has been stored, it raises that error.
        """
        if self.__error is not None:
            logger.error("Experiment batch aborted: %s", self.__error)
            raise self.__error

    def in_error(self) -> bool:
        """
        Checks if there is an error stored in the model.
        Returns:
            bool: True if there is an error, False otherwise.
        """
        return self.__error is not None

    # endregion: error_handling

    # region: instance_setup
    def setup_instance(self) -> None:
        """
        Validates the method and its hyperparameters and builds the QUBO.
        """
        if self.n_experiments < 1:
            self.__error = GuardError(
                f"At least one experiment is required, got {self.n_experiments}."
            )
            return
        try:
            self.resolved_params = resolve_params(self.method, self.__hyperparams)
            if isinstance(self.instance_source, InstanceSpec):
                self.instance = self.instance_source.build()
            else:
                self.instance = self.instance_source
        except QuboBenchError as error:
            self.__error = error

    def compute_reference(self) -> None:
        """
        Exact constrained extrema when the vacancy count is known, brute force for small
        generic QUBOs, otherwise no reference (aggregation falls back to the best energy).
        """
        instance = self.instance
        try:
            if instance.n_vacancies is not None:
                e_min, e_max, n_ground = constrained_extrema(instance)
                self.reference = ReferenceEnergies(e_min, e_max, n_ground, exact=True)
            elif instance.n_vars <= REFERENCE_BRUTE_MAX_VARS:
                result = brute_force(instance)
                self.reference = ReferenceEnergies(e_min=result.e_opt, exact=True)
        except GuardError as error:
            logger.warning("No exact reference energies: %s", error)
            self.reference = ReferenceEnergies()

    # endregion: instance_setup

    # region: experiments
    def _run_one(self, index: int, solver_threads: Optional[int]) -> ExperimentRecord:
        seed = derive_seed(self.base_seed, index)
        record = ExperimentRecord(
            method=self.method,
            instance=describe_instance(self.instance_source),
            hyperparams=dict(self.resolved_params),
            seed=seed,
            index=index,
            started_at=utc_timestamp(),
        )
        try:
            run = run_method(
                self.method, self.instance, self.resolved_params, seed, solver_threads
            )
            record.samples = run.samples
            record.trace = run.trace
            record.chain_stats = run.chain_stats
        except Exception as error:
            logger.warning("Experiment %d of %s failed: %s", index, self.method, error)
            record.failure = f"{type(error).__name__}: {error}"
        record.finished_at = utc_timestamp()
        return record

    def run_experiments(self) -> None:
        """
        Runs every experiment in a worker pool. A failing experiment becomes a record with
        a failure marker and never aborts the batch.
        """
        workers = min(resolve_threads(self.threads), self.n_experiments)
        solver_threads = 1 if workers > 1 else self.threads
        with ThreadPoolExecutor(max_workers=workers) as pool:
            self.records = list(
                pool.map(
                    lambda index: self._run_one(index, solver_threads),
                    range(self.n_experiments),
                )
            )
        n_failed = sum(not record.succeeded for record in self.records)
        logger.info(
            "%d of %d %s experiments succeeded",
            self.n_experiments - n_failed,
            self.n_experiments,
            self.method,
        )

    # endregion: experiments

    # region: aggregation
    def _ground_energy(self, successes: List[ExperimentRecord]) -> Optional[float]:
        if self.reference.e_min is not None:
            return self.reference.e_min
        n_vacancies = self.instance.n_vacancies
        best = None
        for record in successes:
            samples = record.samples
            if n_vacancies is not None:
                samples = samples.filter(samples.zero_counts() == n_vacancies)
            if len(samples):
                low = float(samples.energies.min())
                best = low if best is None else min(best, low)
        return best

    def aggregate(self) -> None:
        """
        Reduces every successful experiment to counters and histograms and builds the
        aggregate report.
        """
        successes = [record for record in self.records if record.succeeded]
        e_ground = self._ground_energy(successes)
        reference = self.reference.to_dict()
        reference["e_ground"] = e_ground
        for record in self.records:
            record.reference = dict(reference)
        if e_ground is None:
            self.batch = ExperimentBatch(self.records, None, self.reference)
            return
        n_vacancies = self.instance.n_vacancies
        for record in successes:
            tt_eps = None
            if self.epsilon is not None and record.samples.trajectory:
                tt_eps = time_to_epsilon(record.samples.trajectory, e_ground, self.epsilon)
            counts, selected = count_samples(record.samples, e_ground, n_vacancies, tt_eps)
            record.counts = counts
            record.histogram_pre = list(iter_energy_counts(record.samples))
            record.histogram_post = list(iter_energy_counts(selected))
        report = None
        if successes:
            try:
                report = MetricReport.from_counts(
                    [record.counts for record in successes],
                    self.reference.e_min,
                    self.reference.e_max,
                    self.p_desired,
                )
            except QuboBenchError as error:
                self.__error = error
                return
        self.batch = ExperimentBatch(self.records, report, self.reference)

    # endregion: aggregation

    # region: persistence
    def persist(self) -> None:
        """
        Appends the records in index order to the JSONL store, when one is configured.
        """
        if self.__store_path is None:
            return
        try:
            ExperimentStore(self.__store_path).append_all(
                sorted(self.records, key=lambda record: record.index)
            )
        except OSError as error:
            self.__error = error

    # endregion: persistence

    def success_message(self) -> None:
        report = self.batch.report if self.batch is not None else None
        if report is None:
            logger.info("Batch of %s finished without a successful experiment", self.method)
            return
        logger.info(
            "Batch of %s finished: Ps=%.4f, Ps post=%.4f, user runtime=%.4gs",
            self.method,
            report.ps,
            report.ps_post,
            report.user_runtime_s,
        )
