from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple, Union

from qubobench.analysis.metrics import ExperimentCounts, MetricReport
from qubobench.constants import (
    DEFAULT_KAPPA,
    DEFAULT_N_VACANCIES,
    DEFAULT_SUPERCELL_DIM,
    INSTANCE_KEYS,
    SA_LAMBDA,
)
from qubobench.errors import ConfigError
from qubobench.problem.lattice import build_supercell
from qubobench.problem.qubo import QuboInstance, build_qubo
from qubobench.problem.sampleset import SampleSet
from qubobench.utils import stable_hash

# Fields that depend on wall time and are masked out of the reproducibility hash
WALL_TIME_KEYS = frozenset(
    {
        "started_at",
        "finished_at",
        "user_runtime_s",
        "qpu_time_s",
        "t_post_selection_s",
        "tt_eps_s",
        "elapsed",
        "embedding_time_s",
        "reproducibility_hash",
    }
)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class InstanceSpec:
    """
    Descriptor of a graphene supercell vacancy instance.
    """

    supercell_dim: int = DEFAULT_SUPERCELL_DIM
    kappa: float = DEFAULT_KAPPA
    lambda_coeff: float = SA_LAMBDA
    n_vacancies: int = DEFAULT_N_VACANCIES

    @property
    def n_sites(self) -> int:
        return 2 * self.supercell_dim**2

    def build(self) -> QuboInstance:
        return build_qubo(
            build_supercell(self.supercell_dim), self.kappa, self.lambda_coeff, self.n_vacancies
        )

    def with_overrides(self, point: Dict[str, Any]) -> "InstanceSpec":
        """
        Returns a copy with the instance keys of a hyperparameter point applied.
        `lambda` maps onto `lambda_coeff`; other keys are ignored.
        """
        changes: Dict[str, Any] = {}
        for key, value in point.items():
            if key not in INSTANCE_KEYS:
                continue
            if key == "lambda":
                changes["lambda_coeff"] = float(value)
            elif key == "kappa":
                changes["kappa"] = float(value)
            else:
                changes[key] = int(value)
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "supercell_dim": self.supercell_dim,
            "kappa": self.kappa,
            "lambda": self.lambda_coeff,
            "n_vacancies": self.n_vacancies,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "InstanceSpec":
        try:
            return cls(
                supercell_dim=int(payload["supercell_dim"]),
                kappa=float(payload["kappa"]),
                lambda_coeff=float(payload["lambda"]),
                n_vacancies=int(payload["n_vacancies"]),
            )
        except (KeyError, TypeError, ValueError) as error:
            raise ConfigError(f"Malformed instance descriptor: {error}") from error


def describe_instance(instance: Union[InstanceSpec, QuboInstance]) -> Dict[str, Any]:
    """
    Instance descriptor stored on every record. Generic QUBOs are identified by the hash
    of their json form.
    """
    if isinstance(instance, InstanceSpec):
        descriptor = instance.to_dict()
        descriptor["n_vars"] = instance.n_sites
        return descriptor
    return {
        "supercell_dim": None,
        "kappa": instance.kappa,
        "lambda": instance.lambda_coeff,
        "n_vacancies": instance.n_vacancies,
        "n_vars": instance.n_vars,
        "qubo_hash": stable_hash(instance.to_dict()),
    }


@dataclass(frozen=True)
class ReferenceEnergies:
    """
    Energies the metrics are measured against. `exact` is False when the minimum had to
    fall back to the best energy found by the experiments themselves.
    """

    e_min: Optional[float] = None
    e_max: Optional[float] = None
    n_ground_states: Optional[int] = None
    exact: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _mask_wall_time(payload: Any) -> Any:
    if isinstance(payload, dict):
        return {
            key: _mask_wall_time(value)
            for key, value in payload.items()
            if key not in WALL_TIME_KEYS
        }
    if isinstance(payload, (list, tuple)):
        return [_mask_wall_time(value) for value in payload]
    return payload


@dataclass
class ExperimentRecord:
    """
    One experiment of one method on one instance.

    The record is self-contained: method, instance descriptor, resolved hyperparameters
    and seed are enough to rerun the solver and get the same samples back. Raw samples
    are kept in memory only (`samples`) and never serialised.
    """

    method: str
    instance: Dict[str, Any]
    hyperparams: Dict[str, Any]
    seed: int
    index: int
    counts: Optional[ExperimentCounts] = None
    reference: Dict[str, Any] = field(default_factory=dict)
    histogram_pre: List[Tuple[float, int]] = field(default_factory=list)
    histogram_post: List[Tuple[float, int]] = field(default_factory=list)
    trace: Optional[Dict[str, Any]] = None
    chain_stats: Optional[Dict[str, float]] = None
    failure: Optional[str] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    samples: Optional[SampleSet] = field(default=None, repr=False, compare=False)

    @property
    def succeeded(self) -> bool:
        return self.failure is None

    def _payload(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "index": self.index,
            "seed": self.seed,
            "instance": self.instance,
            "hyperparams": self.hyperparams,
            "reference": self.reference,
            "counts": None if self.counts is None else self.counts.to_dict(),
            "histogram_pre": [[float(e), int(c)] for e, c in self.histogram_pre],
            "histogram_post": [[float(e), int(c)] for e, c in self.histogram_post],
            "trace": self.trace,
            "chain_stats": self.chain_stats,
            "failure": self.failure,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def reproducibility_hash(self) -> str:
        return stable_hash(_mask_wall_time(self._payload()))

    def to_dict(self) -> Dict[str, Any]:
        payload = self._payload()
        payload["reproducibility_hash"] = self.reproducibility_hash()
        return payload

    def masked(self) -> Dict[str, Any]:
        """
        Serialised form without timestamps and wall-time fields.
        """
        return _mask_wall_time(self.to_dict())

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentRecord":
        """
        Raises:
            ConfigError: On missing or malformed fields.
        """
        try:
            counts = payload.get("counts")
            return cls(
                method=str(payload["method"]),
                instance=dict(payload["instance"]),
                hyperparams=dict(payload["hyperparams"]),
                seed=int(payload["seed"]),
                index=int(payload["index"]),
                counts=None if counts is None else ExperimentCounts(**counts),
                reference=dict(payload.get("reference") or {}),
                histogram_pre=[(float(e), int(c)) for e, c in payload.get("histogram_pre", [])],
                histogram_post=[
                    (float(e), int(c)) for e, c in payload.get("histogram_post", [])
                ],
                trace=payload.get("trace"),
                chain_stats=payload.get("chain_stats"),
                failure=payload.get("failure"),
                started_at=payload.get("started_at"),
                finished_at=payload.get("finished_at"),
            )
        except (KeyError, TypeError, ValueError) as error:
            raise ConfigError(f"Malformed experiment record: {error}") from error


@dataclass
class ExperimentBatch:
    """
    Outcome of one `run_experiments` call: the records in index order, the aggregate
    report over the successful experiments (None when all failed) and the reference
    energies the report was computed against.
    """

    records: List[ExperimentRecord]
    report: Optional[MetricReport]
    reference: ReferenceEnergies

    @property
    def failures(self) -> List[ExperimentRecord]:
        return [record for record in self.records if not record.succeeded]

    def pooled_samples(self) -> Optional[SampleSet]:
        """
        Shots of every successful experiment merged into one sample set, None when no
        experiment kept its samples.
        """
        sample_sets = [record.samples for record in self.records if record.samples is not None]
        if not sample_sets:
            return None
        return SampleSet.concatenate(sample_sets)
