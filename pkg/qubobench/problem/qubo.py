import itertools
import json
import logging
from dataclasses import dataclass
from math import comb
from typing import Dict, Optional, Tuple, Union

import numpy as np

from qubobench.constants import (
    CONSTRAINED_MAX_COMBINATIONS,
    ENERGY_TOLERANCE,
    ENUMERATION_CHUNK,
)
from qubobench.errors import ConfigError, GuardError
from qubobench.problem.lattice import LatticeGraph

logger = logging.getLogger(__name__)


def _as_bit_matrix(x: np.ndarray, n_vars: int) -> np.ndarray:
    bits = np.asarray(x)
    if bits.ndim == 1:
        bits = bits[None, :]
    if bits.ndim != 2 or bits.shape[1] != n_vars:
        raise ValueError(
            f"Bitstring length {bits.shape[-1]} does not match the {n_vars} variables."
        )
    return bits.astype(np.float64, copy=False)


@dataclass(frozen=True, eq=False)
class QuboInstance:
    """
    Upper-triangular QUBO matrix Q with the constant dropped by the expansion of the
    squared constraint restored in `constant_offset`.

    `kappa`, `lambda_coeff` and `n_carbon` are `None` for generic QUBOs that do not come
    from a penalty-encoded vacancy problem.
    """

    n_vars: int
    q_upper: np.ndarray
    constant_offset: float = 0.0
    kappa: Optional[float] = None
    lambda_coeff: Optional[float] = None
    n_carbon: Optional[int] = None

    def __post_init__(self) -> None:
        q_upper = np.array(self.q_upper, dtype=np.float64)
        if q_upper.shape != (self.n_vars, self.n_vars):
            raise ValueError(
                f"Q has shape {q_upper.shape}, expected ({self.n_vars}, {self.n_vars})."
            )
        if np.any(np.tril(q_upper, k=-1) != 0.0):
            raise ValueError("Q must be upper triangular (q_upper[i][j] = 0 for j < i).")
        q_upper.setflags(write=False)
        object.__setattr__(self, "q_upper", q_upper)

    @property
    def n_vacancies(self) -> Optional[int]:
        if self.n_carbon is None:
            return None
        return self.n_vars - self.n_carbon

    def require_vacancies(self) -> int:
        n_vacancies = self.n_vacancies
        if n_vacancies is None:
            raise ConfigError(
                "The instance carries no vacancy count. Build it with build_qubo."
            )
        return n_vacancies

    def energies(self, x: np.ndarray) -> np.ndarray:
        """
        Evaluates x^T Q x + constant_offset for a batch of bitstrings.

        Args:
            x (np.ndarray): Shape `(n_vars,)` or `(batch, n_vars)` 0/1 array.

        Returns:
            np.ndarray: One energy per bitstring.
        """
        bits = _as_bit_matrix(x, self.n_vars)
        return np.einsum("bi,bi->b", bits @ self.q_upper, bits) + self.constant_offset

    def to_dict(self) -> Dict:
        rows, cols = np.nonzero(self.q_upper)
        return {
            "n_vars": self.n_vars,
            "kappa": self.kappa,
            "lambda": self.lambda_coeff,
            "n_carbon": self.n_carbon,
            "constant_offset": self.constant_offset,
            "entries": [
                [int(i), int(j), float(self.q_upper[i, j])] for i, j in zip(rows, cols)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "QuboInstance":
        """
        Parses the QUBO json format.

        Raises:
            ConfigError: On missing fields or entries outside the upper triangle.
        """
        try:
            payload = json.loads(text)
            n_vars = int(payload["n_vars"])
            q_upper = np.zeros((n_vars, n_vars))
            for i, j, value in payload["entries"]:
                i, j = int(i), int(j)
                if j < i:
                    i, j = j, i
                q_upper[i, j] += float(value)
            n_carbon = payload.get("n_carbon")
            return cls(
                n_vars=n_vars,
                q_upper=q_upper,
                constant_offset=float(payload.get("constant_offset", 0.0)),
                kappa=payload.get("kappa"),
                lambda_coeff=payload.get("lambda"),
                n_carbon=None if n_carbon is None else int(n_carbon),
            )
        except (KeyError, TypeError, ValueError, IndexError) as error:
            raise ConfigError(f"Malformed QUBO json: {error}") from error


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """
    Ising model E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + energy_offset.

    Spins relate to bits through s_i = 1 - 2 x_i.
    """

    n_spins: int
    h: np.ndarray
    J: np.ndarray
    energy_offset: float = 0.0

    def __post_init__(self) -> None:
        h = np.array(self.h, dtype=np.float64)
        J = np.triu(np.array(self.J, dtype=np.float64), k=1)
        if h.shape != (self.n_spins,) or J.shape != (self.n_spins, self.n_spins):
            raise ValueError(f"Ising fields do not match {self.n_spins} spins.")
        h.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)

    @property
    def n_vars(self) -> int:
        return self.n_spins

    def spin_energies(self, s: np.ndarray) -> np.ndarray:
        spins = _as_bit_matrix(s, self.n_spins)
        return spins @ self.h + np.einsum("bi,bi->b", spins @ self.J, spins) + self.energy_offset

    def energies(self, x: np.ndarray) -> np.ndarray:
        """
        Energies of bitstrings, mapped to spins with s = 1 - 2x.
        """
        bits = _as_bit_matrix(x, self.n_spins)
        return self.spin_energies(1.0 - 2.0 * bits)

    def diagonal(self) -> np.ndarray:
        """
        Energies of all 2^n computational basis states, qubit 0 as the most significant bit.

        Returns:
            np.ndarray: Vector of length 2^n.
        """
        n = self.n_spins
        indices = np.arange(1 << n, dtype=np.int64)
        spins = [(1 - 2 * ((indices >> (n - 1 - i)) & 1)).astype(np.int8) for i in range(n)]
        diagonal = np.full(1 << n, self.energy_offset, dtype=np.float64)
        for i in range(n):
            if self.h[i] != 0.0:
                diagonal += self.h[i] * spins[i]
        for i, j in zip(*np.nonzero(self.J)):
            diagonal += self.J[i, j] * spins[i] * spins[j]
        return diagonal

    def to_qubo(self) -> QuboInstance:
        """
        Maps the Ising model back onto an equivalent generic QUBO.
        """
        symmetric = self.J + self.J.T
        linear = -2.0 * self.h - 2.0 * symmetric.sum(axis=1)
        q_upper = 4.0 * self.J + np.diag(linear)
        constant = self.energy_offset + self.h.sum() + self.J.sum()
        return QuboInstance(n_vars=self.n_spins, q_upper=q_upper, constant_offset=constant)


EnergyModel = Union[QuboInstance, IsingInstance]


def as_qubo(model: EnergyModel) -> QuboInstance:
    """
    Returns the QUBO form of either instance type, energies unchanged.
    """
    if isinstance(model, IsingInstance):
        return model.to_qubo()
    return model


def build_qubo(
    graph: LatticeGraph, kappa: float, lambda_coeff: float, n_vacancies: int
) -> QuboInstance:
    """
    Builds the penalty-encoded QUBO of the fixed-vacancy problem.

    The cost is -kappa * (number of surviving bonds) + lambda * (sum(x) - N_C)^2, with
    Q_ii = lambda (1 - 2 N_C), Q_ij = 2 lambda - kappa A_ij and constant lambda N_C^2.

    Args:
        graph (LatticeGraph): Lattice with adjacency A.
        kappa (float): Bond energy, positive.
        lambda_coeff (float): Penalty coefficient, non-negative.
        n_vacancies (int): Number of atoms to remove.

    Returns:
        QuboInstance: The instance.

    Raises:
        GuardError: If a precondition is violated.
    """
    n_vars = graph.n_sites
    if not 0 <= n_vacancies <= n_vars:
        raise GuardError(f"Vacancy count {n_vacancies} must lie in [0, {n_vars}].")
    if kappa <= 0:
        raise GuardError(f"Bond energy kappa must be positive, got {kappa}.")
    if lambda_coeff < 0:
        raise GuardError(f"Penalty coefficient must be non-negative, got {lambda_coeff}.")
    n_carbon = n_vars - n_vacancies
    q_upper = np.triu(
        np.full((n_vars, n_vars), 2.0 * lambda_coeff) - kappa * graph.adjacency(), k=1
    )
    np.fill_diagonal(q_upper, lambda_coeff * (1 - 2 * n_carbon))
    return QuboInstance(
        n_vars=n_vars,
        q_upper=q_upper,
        constant_offset=float(lambda_coeff * n_carbon**2),
        kappa=float(kappa),
        lambda_coeff=float(lambda_coeff),
        n_carbon=n_carbon,
    )


def evaluate_energy(instance: EnergyModel, x: np.ndarray) -> float:
    """
    Energy of a single bitstring, constant included.

    Raises:
        ValueError: On a length mismatch.
    """
    bits = np.asarray(x)
    if bits.ndim != 1:
        raise ValueError("evaluate_energy expects a single bitstring.")
    return float(instance.energies(bits)[0])


def to_ising(instance: QuboInstance) -> IsingInstance:
    """
    Converts a QUBO to Ising form under x_i = (1 - s_i) / 2.

    Args:
        instance (QuboInstance): The QUBO.

    Returns:
        IsingInstance: Model whose energy equals the QUBO energy for every bitstring.
    """
    diagonal = np.diag(instance.q_upper).copy()
    off_diagonal = np.triu(instance.q_upper, k=1)
    symmetric = off_diagonal + off_diagonal.T
    h = -diagonal / 2.0 - symmetric.sum(axis=1) / 4.0
    J = off_diagonal / 4.0
    offset = diagonal.sum() / 2.0 + off_diagonal.sum() / 4.0 + instance.constant_offset
    return IsingInstance(n_spins=instance.n_vars, h=h, J=J, energy_offset=float(offset))


def _combination_chunks(n: int, k: int, chunk: int):
    iterator = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(iterator, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64).reshape(len(block), k)


def constrained_extrema(instance: QuboInstance) -> Tuple[float, float, int]:
    """
    Exact minimum and maximum energy over the bitstrings with the required vacancy count.

    The smaller side of the partition is enumerated. With R the removed set,
    E(1 - z_R) = E(1) - sum_{i in R} r_i + sum_{i<j in R} Q_ij where r_i is Q_ii plus the
    off-diagonal row sum of the symmetric matrix, and E(x_P) = offset + sum_{i in P} Q_ii
    + sum_{i<j in P} Q_ij for the kept set P.

    Args:
        instance (QuboInstance): Instance built with a vacancy count.

    Returns:
        Tuple[float, float, int]: (e_min, e_max, number of feasible bitstrings at e_min).

    Raises:
        GuardError: If C(N, n_vacancies) exceeds the tractability guard.
    """
    n_vacancies = instance.require_vacancies()
    n = instance.n_vars
    n_combinations = comb(n, n_vacancies)
    if n_combinations > CONSTRAINED_MAX_COMBINATIONS:
        raise GuardError(
            f"C({n}, {n_vacancies}) = {n_combinations} feasible configurations exceed the "
            f"tractability guard of {CONSTRAINED_MAX_COMBINATIONS}."
        )
    q_upper = instance.q_upper
    diagonal = np.diag(q_upper)
    off_diagonal = np.triu(q_upper, k=1)
    symmetric = off_diagonal + off_diagonal.T
    enumerate_removed = n_vacancies <= n - n_vacancies
    k = n_vacancies if enumerate_removed else n - n_vacancies
    if enumerate_removed:
        base = float(instance.energies(np.ones(n))[0])
        linear = -(diagonal + symmetric.sum(axis=1))
    else:
        base = instance.constant_offset
        linear = diagonal

    e_min, e_max, n_ground = np.inf, -np.inf, 0
    pairs = list(itertools.combinations(range(k), 2))
    for block in _combination_chunks(n, k, ENUMERATION_CHUNK):
        energies = np.full(block.shape[0], base)
        if k:
            energies += linear[block].sum(axis=1)
        for a, b in pairs:
            energies += off_diagonal[block[:, a], block[:, b]]
        block_min = energies.min()
        block_max = energies.max()
        if block_min < e_min - ENERGY_TOLERANCE:
            e_min = block_min
            n_ground = 0
        if abs(block_min - e_min) <= ENERGY_TOLERANCE:
            n_ground += int(np.count_nonzero(np.abs(energies - e_min) <= ENERGY_TOLERANCE))
        e_max = max(e_max, block_max)
    logger.debug(
        "Constrained oracle: %d configurations, e_min=%g, e_max=%g, degeneracy=%d",
        n_combinations,
        e_min,
        e_max,
        n_ground,
    )
    return float(e_min), float(e_max), n_ground
