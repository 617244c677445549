import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from qubobench.constants import (
    ANSATZ_KINDS,
    ENERGY_TOLERANCE,
    VQE_ALPHA,
    VQE_MAX_ITERS,
    VQE_OPTIMIZERS,
    VQE_REPS,
    VQE_RHOBEG,
    VQE_SHOTS,
    VQE_TOL,
)
from qubobench.errors import ConfigError, GuardError, MetricError
from qubobench.problem.qubo import IsingInstance
from qubobench.problem.sampleset import SampleSet, Timing
from qubobench.solvers.statevector import (
    apply_cx,
    apply_layer,
    check_qubits,
    expectation_value,
    probabilities,
    rx_rotation,
    ry_matrix,
    sample_bitstrings,
    uniform_state,
    zero_state,
)
from qubobench.utils import derive_seed, make_rng

logger = logging.getLogger(__name__)

__all__ = [
    "AnsatzSpec",
    "VqeConfig",
    "VqeTrace",
    "VqeResult",
    "prepare_state",
    "sample_bitstrings",
    "cvar_objective",
    "cvar_from_distribution",
    "expectation_value",
    "run_vqe",
]

# Stream keys of the VQE generators
INIT_STREAM = 0
SHOT_STREAM = 1
FINAL_STREAM = 2


@dataclass(frozen=True)
class AnsatzSpec:
    """
    Parameterised circuit family.

    `reps` is the number of entangling repetitions for "realamp" and the number of
    layers p for "qaoa".
    """

    kind: str
    n_qubits: int
    reps: int = VQE_REPS
    entanglement: str = "reverse_linear"

    def __post_init__(self) -> None:
        if self.kind not in ANSATZ_KINDS:
            raise ConfigError(f"Unknown ansatz '{self.kind}'. Choose one of {ANSATZ_KINDS}.")
        if self.entanglement != "reverse_linear":
            raise ConfigError(f"Unsupported entanglement '{self.entanglement}'.")
        if self.n_qubits < 1 or self.reps < 1:
            raise GuardError("An ansatz needs at least one qubit and one repetition.")

    @property
    def parameter_count(self) -> int:
        if self.kind == "qaoa":
            return 2 * self.reps
        return self.n_qubits * (self.reps + 1)


@dataclass(frozen=True)
class VqeConfig:
    shots: int = VQE_SHOTS
    cvar_alpha: float = VQE_ALPHA
    tol: float = VQE_TOL
    max_iters: int = VQE_MAX_ITERS
    seed: int = 0
    optimizer: str = "cobyla"
    analytic_objective: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.cvar_alpha <= 1.0:
            raise GuardError(f"CVaR alpha must lie in (0, 1], got {self.cvar_alpha}.")
        if self.shots < 1 or self.max_iters < 1:
            raise GuardError("Shots and max_iters must be positive.")
        if self.tol <= 0:
            raise GuardError(f"Tolerance must be positive, got {self.tol}.")
        if self.optimizer not in VQE_OPTIMIZERS:
            raise ConfigError(
                f"Unknown optimizer '{self.optimizer}'. Choose one of {VQE_OPTIMIZERS}."
            )


@dataclass
class VqeTrace:
    """
    Objective value, elapsed time and best sampled energy of every optimizer iteration.
    """

    objective_values: List[float] = field(default_factory=list)
    elapsed: List[float] = field(default_factory=list)
    best_energies: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def n_iterations(self) -> int:
        return len(self.objective_values)

    def record(self, value: float, elapsed: float, best_energy: float) -> None:
        self.objective_values.append(float(value))
        self.elapsed.append(float(elapsed))
        self.best_energies.append(float(best_energy))

    def trajectory(self) -> Tuple[Tuple[float, float], ...]:
        best = np.minimum.accumulate(self.best_energies) if self.best_energies else []
        return tuple(zip(self.elapsed, [float(value) for value in best]))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective_values,
            "elapsed": self.elapsed,
            "best_energy": self.best_energies,
            "converged": self.converged,
        }


class VqeResult(NamedTuple):
    final_samples: SampleSet
    trace: VqeTrace
    theta_final: np.ndarray


class _BudgetExhausted(Exception):
    pass


def prepare_state(
    ansatz: AnsatzSpec, theta: np.ndarray, ising: Optional[IsingInstance] = None
) -> np.ndarray:
    """
    Builds the ansatz statevector.

    "realamp": Ry layer on |0...0>, then per repetition the CX chain
    (n-2 -> n-1), ..., (0 -> 1) with the control on the lower index, then another Ry layer.
    "qaoa": uniform superposition, then per layer the phase exp(-i gamma_k E(x)) and the
    mixer exp(-i beta_k X) on every qubit, with theta = (beta_1..beta_p, gamma_1..gamma_p).

    Args:
        ansatz (AnsatzSpec): Circuit family.
        theta (np.ndarray): Parameters, `ansatz.parameter_count` values.
        ising (Optional[IsingInstance]): Cost Hamiltonian, required for "qaoa".

    Returns:
        np.ndarray: Normalised complex amplitudes of length 2^n.

    Raises:
        GuardError: On a parameter count mismatch or too many qubits.
    """
    n = ansatz.n_qubits
    check_qubits(n)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (ansatz.parameter_count,):
        raise GuardError(
            f"Ansatz expects {ansatz.parameter_count} parameters, got {theta.size}."
        )
    if ansatz.kind == "realamp":
        state = apply_layer(zero_state(n), [ry_matrix(angle) for angle in theta[:n]], n)
        for rep in range(ansatz.reps):
            for control in range(n - 2, -1, -1):
                state = apply_cx(state, control, control + 1, n)
            layer = theta[(rep + 1) * n : (rep + 2) * n]
            state = apply_layer(state, [ry_matrix(angle) for angle in layer], n)
        return state

    if ising is None or ising.n_spins != n:
        raise GuardError("The QAOA ansatz needs an Ising instance with matching size.")
    diagonal = ising.diagonal()
    p = ansatz.reps
    betas, gammas = theta[:p], theta[p:]
    state = uniform_state(n)
    for beta, gamma in zip(betas, gammas):
        state = state * np.exp(-1j * gamma * diagonal)
        mixer = rx_rotation(beta)
        state = apply_layer(state, [mixer] * n, n)
    return state


def _cvar_size(alpha: float, n_shots: int) -> int:
    return max(1, math.ceil(alpha * n_shots - ENERGY_TOLERANCE))


def cvar_objective(samples: SampleSet, alpha: float) -> float:
    """
    Mean of the lowest ceil(alpha * shots) shot energies.

    Raises:
        MetricError: If the sample set is empty.
    """
    if samples.is_empty():
        raise MetricError("CVaR is undefined on an empty sample set.")
    if not 0.0 < alpha <= 1.0:
        raise GuardError(f"CVaR alpha must lie in (0, 1], got {alpha}.")
    order = np.argsort(samples.energies, kind="stable")
    energies = samples.energies[order]
    counts = samples.counts[order]
    size = _cvar_size(alpha, samples.n_shots_total)
    before = np.cumsum(counts) - counts
    taken = np.clip(size - before, 0, counts)
    return float(np.dot(taken, energies) / size)


def cvar_from_distribution(diagonal: np.ndarray, probs: np.ndarray, alpha: float) -> float:
    """
    CVaR of the exact measurement distribution: the expected energy of its lowest alpha
    probability mass.
    """
    order = np.argsort(diagonal, kind="stable")
    energies = diagonal[order]
    weights = probs[order]
    before = np.cumsum(weights) - weights
    taken = np.clip(alpha - before, 0.0, weights)
    return float(np.dot(taken, energies) / alpha)


def run_vqe(ising: IsingInstance, ansatz: AnsatzSpec, config: VqeConfig) -> VqeResult:
    """
    CVaR-VQE on the statevector simulator.

    Every iteration prepares the ansatz state and estimates the CVaR objective on a fresh
    shot sample (or on the exact distribution in analytic mode). COBYLA stops when its
    trust region radius falls below `tol`; at most `max_iters` objective evaluations are
    made in any case. The final parameters are then sampled once more with `shots` shots.

    Args:
        ising (IsingInstance): Cost Hamiltonian.
        ansatz (AnsatzSpec): Circuit family.
        config (VqeConfig): Optimizer and sampling settings.

    Returns:
        VqeResult: Final samples, optimizer trace and final parameters.
    """
    if ansatz.n_qubits != ising.n_spins:
        raise GuardError(
            f"Ansatz has {ansatz.n_qubits} qubits but the instance has {ising.n_spins} spins."
        )
    check_qubits(ansatz.n_qubits)
    diagonal = ising.diagonal()
    trace = VqeTrace()
    start = time.perf_counter()
    theta0 = make_rng(config.seed, INIT_STREAM).uniform(
        -np.pi, np.pi, ansatz.parameter_count
    )
    best: dict = {"value": np.inf, "theta": theta0}

    def objective(theta: np.ndarray) -> float:
        if trace.n_iterations >= config.max_iters:
            raise _BudgetExhausted
        state = prepare_state(ansatz, theta, ising)
        if config.analytic_objective:
            probs = probabilities(state)
            value = cvar_from_distribution(diagonal, probs, config.cvar_alpha)
            best_energy = float(diagonal[probs > ENERGY_TOLERANCE].min())
        else:
            seed = derive_seed(config.seed, SHOT_STREAM, trace.n_iterations)
            samples = sample_bitstrings(state, config.shots, seed, ising)
            value = cvar_objective(samples, config.cvar_alpha)
            best_energy = float(samples.energies.min())
        trace.record(value, time.perf_counter() - start, best_energy)
        if value < best["value"]:
            best.update(value=value, theta=np.array(theta, dtype=np.float64))
        return value

    exhausted = False
    result = None
    try:
        if config.optimizer == "cobyla":
            result = minimize(
                objective,
                theta0,
                method="COBYLA",
                tol=config.tol,
                options={"maxiter": config.max_iters, "rhobeg": max(VQE_RHOBEG, config.tol)},
            )
        else:
            result = minimize(
                objective,
                theta0,
                method="Nelder-Mead",
                options={"maxfev": config.max_iters, "xatol": config.tol, "fatol": config.tol},
            )
    except _BudgetExhausted:
        exhausted = True

    if exhausted or result is None:
        theta_final = best["theta"]
    else:
        theta_final = np.asarray(result.x, dtype=np.float64)
    trace.converged = bool(
        not exhausted
        and result is not None
        and result.success
        and trace.n_iterations < config.max_iters
    )

    state = prepare_state(ansatz, theta_final, ising)
    final = sample_bitstrings(
        state, config.shots, derive_seed(config.seed, FINAL_STREAM), ising
    )
    elapsed = time.perf_counter() - start
    logger.debug(
        "VQE (%s, %d parameters): %d iterations, converged=%s, %.3fs",
        ansatz.kind,
        ansatz.parameter_count,
        trace.n_iterations,
        trace.converged,
        elapsed,
    )
    timing = Timing(t_encoding=0.0, t_device=elapsed, quantum_device=True)
    final = SampleSet(
        n_vars=final.n_vars,
        bitstrings=final.bitstrings,
        energies=final.energies,
        counts=final.counts,
        timing=timing,
        trajectory=trace.trajectory(),
    )
    return VqeResult(final_samples=final, trace=trace, theta_final=theta_final)
