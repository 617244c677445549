"""
Uniform entry point over every solver: method id plus a flat hyperparameter mapping in,
sample set plus solver diagnostics out.
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

from qubobench.constants import (
    ANNEAL_SHOTS,
    ANNEAL_TIME,
    CHAIN_STRENGTH,
    CHIMERA_SHORE,
    METHODS,
    MINOR_MAX_TRIES,
    RANDOM_SAMPLES,
    SA_BETA_MAX,
    SA_BETA_MIN,
    SA_READS,
    SA_SWEEPS,
    VQE_ALPHA,
    VQE_MAX_ITERS,
    VQE_REPS,
    VQE_SHOTS,
    VQE_TOL,
)
from qubobench.errors import ConfigError, EmbeddingError
from qubobench.problem.qubo import QuboInstance, to_ising
from qubobench.problem.sampleset import SampleSet, Timing
from qubobench.solvers.anneal_sim import AnnealConfig, anneal_sample
from qubobench.solvers.classical import (
    SaSchedule,
    brute_force,
    random_sampling,
    simulated_annealing,
)
from qubobench.solvers.embedding import (
    chimera_topology,
    clique_embedding,
    embed_ising,
    embedding_stats,
    logical_graph,
    minor_embedding,
    parse_topology,
    sample_embedded,
)
from qubobench.solvers.vqe import AnsatzSpec, VqeConfig, run_vqe

logger = logging.getLogger(__name__)

METHOD_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "brute": {},
    "random": {"samples": RANDOM_SAMPLES},
    "sa": {
        "reads": SA_READS,
        "sweeps": SA_SWEEPS,
        "beta_min": SA_BETA_MIN,
        "beta_max": SA_BETA_MAX,
        "random_order": False,
        # Benchmarked reads report the best state seen; simulated_annealing defaults to final
        "record_best": True,
    },
    "vqe": {
        "ansatz": "realamp",
        "reps": VQE_REPS,
        "alpha": VQE_ALPHA,
        "shots": VQE_SHOTS,
        "tol": VQE_TOL,
        "max_iters": VQE_MAX_ITERS,
        "optimizer": "cobyla",
        "analytic": False,
    },
    "anneal-sim": {"anneal_time": ANNEAL_TIME, "steps": None, "shots": ANNEAL_SHOTS},
    "embedded-sa": {
        "topo": None,
        "mode": "clique",
        "chain_strength": CHAIN_STRENGTH,
        "split_couplings": False,
        "max_tries": MINOR_MAX_TRIES,
        "reads": SA_READS,
        "sweeps": SA_SWEEPS,
        "beta_min": SA_BETA_MIN,
        "beta_max": SA_BETA_MAX,
    },
}


@dataclass
class SolverRun:
    samples: SampleSet
    trace: Optional[Dict[str, Any]] = None
    chain_stats: Optional[Dict[str, float]] = None


def resolve_params(method: str, params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Merges user hyperparameters over the method defaults. Dashes in keys become
    underscores; `None` values keep the default.

    Raises:
        ConfigError: On an unknown method or hyperparameter.
    """
    if method not in METHOD_DEFAULTS:
        raise ConfigError(f"Unknown method '{method}'. Choose one of {METHODS}.")
    resolved = dict(METHOD_DEFAULTS[method])
    for key, value in (params or {}).items():
        name = key.replace("-", "_")
        if name not in resolved:
            raise ConfigError(
                f"Method '{method}' has no hyperparameter '{key}'. "
                f"Known: {sorted(resolved) or 'none'}."
            )
        if value is not None:
            resolved[name] = value
    return resolved


def _schedule(params: Dict[str, Any]) -> SaSchedule:
    return SaSchedule.geometric(
        beta_min=float(params["beta_min"]),
        beta_max=float(params["beta_max"]),
        n_sweeps=int(params["sweeps"]),
    )


def _run_brute(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    return SolverRun(samples=brute_force(instance).to_sampleset(instance))


def _run_random(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    return SolverRun(samples=random_sampling(instance, int(params["samples"]), seed))


def _run_sa(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    samples = simulated_annealing(
        instance,
        _schedule(params),
        int(params["reads"]),
        seed,
        random_order=bool(params["random_order"]),
        record_best=bool(params["record_best"]),
        threads=threads,
    )
    return SolverRun(samples=samples)


def _run_vqe(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    ising = to_ising(instance)
    ansatz = AnsatzSpec(
        kind=str(params["ansatz"]), n_qubits=ising.n_spins, reps=int(params["reps"])
    )
    config = VqeConfig(
        shots=int(params["shots"]),
        cvar_alpha=float(params["alpha"]),
        tol=float(params["tol"]),
        max_iters=int(params["max_iters"]),
        seed=seed,
        optimizer=str(params["optimizer"]),
        analytic_objective=bool(params["analytic"]),
    )
    result = run_vqe(ising, ansatz, config)
    return SolverRun(samples=result.final_samples, trace=result.trace.to_dict())


def _run_anneal(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    steps = params["steps"]
    config = AnnealConfig(
        anneal_time=float(params["anneal_time"]),
        n_steps=None if steps is None else int(steps),
        shots=int(params["shots"]),
        seed=seed,
    )
    return SolverRun(samples=anneal_sample(to_ising(instance), config))


def _run_embedded(
    instance: QuboInstance, params: Dict, seed: int, threads: Optional[int]
) -> SolverRun:
    ising = to_ising(instance)
    start = time.perf_counter()
    if params["topo"] is None:
        topo = chimera_topology(math.ceil(ising.n_spins / CHIMERA_SHORE), CHIMERA_SHORE)
    else:
        topo = parse_topology(str(params["topo"]))
    chain_strength = float(params["chain_strength"])
    if params["mode"] == "clique":
        embedding = clique_embedding(ising.n_spins, topo, chain_strength)
    elif params["mode"] == "minor":
        embedding = minor_embedding(
            logical_graph(ising), topo, seed, int(params["max_tries"]), chain_strength
        )
        if embedding is None:
            raise EmbeddingError(f"No embedding found after {params['max_tries']} tries.")
    else:
        raise ConfigError(f"Unknown embedding mode '{params['mode']}'. Use clique or minor.")
    physical = embed_ising(ising, embedding, topo, split_couplings=bool(params["split_couplings"]))
    t_encoding = time.perf_counter() - start
    result = sample_embedded(
        physical, embedding, _schedule(params), int(params["reads"]), seed, ising, threads
    )
    timing = result.logical_samples.timing
    samples = result.logical_samples.with_timing(
        Timing(t_encoding=t_encoding, t_device=timing.t_device, quantum_device=True)
    )
    chain_stats = dict(embedding_stats(embedding))
    chain_stats["chain_break_fraction"] = result.chain_break_fraction
    chain_stats["embedding_time_s"] = t_encoding
    return SolverRun(samples=samples, chain_stats=chain_stats)


SOLVERS: Dict[str, Callable[[QuboInstance, Dict, int, Optional[int]], SolverRun]] = {
    "brute": _run_brute,
    "random": _run_random,
    "sa": _run_sa,
    "vqe": _run_vqe,
    "anneal-sim": _run_anneal,
    "embedded-sa": _run_embedded,
}


def run_method(
    method: str,
    instance: QuboInstance,
    params: Optional[Dict[str, Any]],
    seed: int,
    threads: Optional[int] = None,
) -> SolverRun:
    """
    Runs one experiment of `method` on `instance`.

    Args:
        method (str): One of the method ids.
        instance (QuboInstance): Problem instance.
        params (Optional[Dict[str, Any]]): Hyperparameters, merged over the defaults.
        seed (int): Seed of this experiment.
        threads (Optional[int], optional): Worker threads inside the solver.

    Returns:
        SolverRun: Samples and solver diagnostics.
    """
    resolved = resolve_params(method, params)
    logger.debug("Running %s with %s (seed %d)", method, resolved, seed)
    return SOLVERS[method](instance, resolved, seed, threads)
