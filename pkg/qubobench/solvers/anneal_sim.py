import logging
import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from qubobench.constants import (
    ANNEAL_MAX_SPINS,
    ANNEAL_DEFAULT_STEPS_PER_TIME_UNIT,
    ANNEAL_MAX_STEPS,
    ANNEAL_MIN_DEFAULT_STEPS,
    ANNEAL_SHOTS,
    ANNEAL_STEPS_PER_TIME_UNIT,
    ANNEAL_TARGET_PS,
    ANNEAL_TIME,
    ENERGY_TOLERANCE,
    NORM_TOLERANCE,
)
from qubobench.errors import GuardError
from qubobench.problem.qubo import IsingInstance
from qubobench.problem.sampleset import SampleSet, Timing
from qubobench.solvers.statevector import (
    apply_layer,
    check_qubits,
    probabilities,
    rx_rotation,
    sample_bitstrings,
    uniform_state,
)

logger = logging.getLogger(__name__)


def min_steps(anneal_time: float) -> int:
    return max(1, math.ceil(ANNEAL_STEPS_PER_TIME_UNIT * anneal_time - ENERGY_TOLERANCE))


def default_steps(anneal_time: float) -> int:
    """
    Step count used when none is given: max(64, ceil(16 T)).
    """
    scaled = math.ceil(ANNEAL_DEFAULT_STEPS_PER_TIME_UNIT * anneal_time - ENERGY_TOLERANCE)
    return max(ANNEAL_MIN_DEFAULT_STEPS, scaled, min_steps(anneal_time))


@dataclass(frozen=True)
class AnnealConfig:
    """
    Closed-system anneal in dimensionless time units.

    Any `n_steps` >= 10 * anneal_time is accepted; without one the finer `default_steps`
    resolution is used.
    """

    anneal_time: float = ANNEAL_TIME
    n_steps: Optional[int] = None
    shots: int = ANNEAL_SHOTS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.anneal_time <= 0:
            raise GuardError(f"Anneal time must be positive, got {self.anneal_time}.")
        if self.n_steps is None:
            object.__setattr__(self, "n_steps", default_steps(self.anneal_time))
        if self.n_steps < min_steps(self.anneal_time):
            raise GuardError(
                f"{self.n_steps} steps violate the step size rule for anneal time "
                f"{self.anneal_time}: at least {min_steps(self.anneal_time)} are required."
            )
        if self.shots < 1:
            raise GuardError(f"At least one shot is required, got {self.shots}.")


def anneal_evolve(ising: IsingInstance, config: AnnealConfig) -> np.ndarray:
    """
    Evolves the mixer ground state under H(s) = -(1 - s) sum_i X_i + s H_P, s = t / T.

    Each step of length dt = T / n_steps uses the midpoint s and the symmetric split
    exp(-i dt/2 s H_P) exp(-i dt (1 - s) H_M) exp(-i dt/2 s H_P).

    Args:
        ising (IsingInstance): Problem Hamiltonian H_P.
        config (AnnealConfig): Anneal time and step count.

    Returns:
        np.ndarray: Final statevector.

    Raises:
        GuardError: If the instance exceeds the spin guard.
        RuntimeError: If the norm drifts beyond tolerance.
    """
    n = ising.n_spins
    check_qubits(n, ANNEAL_MAX_SPINS)
    diagonal = ising.diagonal()
    dt = config.anneal_time / config.n_steps
    state = uniform_state(n)
    for step in range(config.n_steps):
        s = (step + 0.5) / config.n_steps
        half_phase = np.exp(-0.5j * dt * s * diagonal)
        state = state * half_phase
        # exp(+i tau X) since H_M = -sum X
        mixer = rx_rotation(-dt * (1.0 - s))
        state = apply_layer(state, [mixer] * n, n)
        state = state * half_phase
    norm = float(np.linalg.norm(state))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise RuntimeError(f"Statevector norm drifted to {norm:.12f} during the anneal.")
    return state


def anneal_sample(ising: IsingInstance, config: AnnealConfig) -> SampleSet:
    """
    Runs one anneal and measures the final state `shots` times.

    The device time covers the evolution and the sampling.
    """
    start = time.perf_counter()
    state = anneal_evolve(ising, config)
    samples = sample_bitstrings(state, config.shots, config.seed, ising)
    elapsed = time.perf_counter() - start
    logger.debug(
        "Anneal over %d spins: T=%g with %d steps, %d shots in %.3fs",
        ising.n_spins,
        config.anneal_time,
        config.n_steps,
        config.shots,
        elapsed,
    )
    return samples.with_timing(Timing(t_device=elapsed, quantum_device=True))


def ground_state_probability(state: np.ndarray, diagonal: np.ndarray, e_ground: float) -> float:
    mask = np.abs(diagonal - e_ground) <= ENERGY_TOLERANCE
    return float(probabilities(state)[mask].sum())


class AdiabaticTime(NamedTuple):
    anneal_time: float
    n_steps: int
    ps: float


def adiabatic_time_search(
    ising: IsingInstance,
    e_ground: float,
    target_ps: float = ANNEAL_TARGET_PS,
    max_steps: int = ANNEAL_MAX_STEPS,
    initial_time: float = 1.0,
) -> Optional[AdiabaticTime]:
    """
    Doubles the anneal time until the exact ground state probability reaches `target_ps`.

    Returns:
        Optional[AdiabaticTime]: The first passing anneal time, or None when the step
        budget runs out first.
    """
    diagonal = ising.diagonal()
    anneal_time = initial_time
    while default_steps(anneal_time) <= max_steps:
        config = AnnealConfig(anneal_time=anneal_time)
        ps = ground_state_probability(anneal_evolve(ising, config), diagonal, e_ground)
        logger.debug("Adiabatic search: T=%g gives Ps=%.4f", anneal_time, ps)
        if ps >= target_ps:
            return AdiabaticTime(anneal_time=anneal_time, n_steps=config.n_steps, ps=ps)
        anneal_time *= 2.0
    return None
