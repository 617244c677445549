from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from qubobench.constants import DESIRED_PROBABILITY, N_EXPERIMENTS
from qubobench.fsm.fsm import ExperimentFSM
from qubobench.fsm.model import ExperimentModel
from qubobench.harness.records import ExperimentBatch, ExperimentRecord, InstanceSpec
from qubobench.problem.qubo import QuboInstance


class Benchmark:
    def __init__(
        self,
        method: str,
        instance: Union[InstanceSpec, QuboInstance],
        hyperparams: Optional[Dict[str, Any]] = None,
        n_experiments: int = N_EXPERIMENTS,
        base_seed: int = 0,
        threads: Optional[int] = None,
        store_path: Optional[Union[str, Path]] = None,
        epsilon: Optional[float] = None,
        p_desired: float = DESIRED_PROBABILITY,
    ) -> None:
        """
        Args:
            method (str): Method id.
            instance (Union[InstanceSpec, QuboInstance]): Instance to solve.
            hyperparams (Optional[Dict[str, Any]], optional): Solver hyperparameters.
            n_experiments (int, optional): Repeats. Defaults to 10.
            base_seed (int, optional): Base seed. Defaults to 0.
            threads (Optional[int], optional): Worker pool size.
            store_path (Optional[Union[str, Path]], optional): JSONL store for the records.
            epsilon (Optional[float], optional): Relative gap of TT_epsilon.
            p_desired (float, optional): Target probability of TTS. Defaults to 0.99.
        """
        self.model = ExperimentModel(
            method,
            instance,
            hyperparams,
            n_experiments,
            base_seed,
            threads,
            store_path,
            epsilon,
            p_desired,
        )
        self.fsm = ExperimentFSM(self.model)

    def run(self) -> ExperimentBatch:
        """
        Drives the experiment state machine until it finishes.

        Returns:
            ExperimentBatch: Records, aggregate report and reference energies.
        """
        while not (self.fsm.is_finished() or self.fsm.is_general_error()):
            self.fsm.next_state()

        return self.model.batch


def run_batch(
    method: str,
    instance: Union[InstanceSpec, QuboInstance],
    hyperparams: Optional[Dict[str, Any]] = None,
    n_experiments: int = N_EXPERIMENTS,
    base_seed: int = 0,
    **kwargs: Any,
) -> ExperimentBatch:
    return Benchmark(method, instance, hyperparams, n_experiments, base_seed, **kwargs).run()


def run_experiments(
    method: str,
    instance: Union[InstanceSpec, QuboInstance],
    hyperparams: Optional[Dict[str, Any]] = None,
    n_experiments: int = N_EXPERIMENTS,
    base_seed: int = 0,
    **kwargs: Any,
) -> List[ExperimentRecord]:
    """
    Runs `n_experiments` independent experiments with seeds derived from `base_seed` and
    the experiment index.

    Returns:
        List[ExperimentRecord]: One record per experiment, in index order.
    """
    return run_batch(method, instance, hyperparams, n_experiments, base_seed, **kwargs).records
