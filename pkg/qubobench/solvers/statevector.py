"""
Dense statevector helpers shared by the gate-based and annealing simulators.

Amplitudes are stored as a flat complex vector whose index reads qubit 0 as the most
significant bit, the same ordering `IsingInstance.diagonal()` uses. Gates act on the
`[2] * n` tensor view where axis `q` is qubit `q`.
"""
import numpy as np

from qubobench.constants import STATEVECTOR_MAX_QUBITS
from qubobench.errors import GuardError
from qubobench.problem.qubo import EnergyModel
from qubobench.problem.sampleset import SampleSet, Timing, unpack_bits
from qubobench.utils import make_rng


def check_qubits(n_qubits: int, limit: int = STATEVECTOR_MAX_QUBITS) -> None:
    if n_qubits > limit:
        raise GuardError(
            f"{n_qubits} qubits exceed the statevector memory guard of {limit}."
        )


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(1 << n_qubits, dtype=np.complex128)
    state[0] = 1.0
    return state


def uniform_state(n_qubits: int) -> np.ndarray:
    return np.full(1 << n_qubits, (1 << n_qubits) ** -0.5, dtype=np.complex128)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rx_rotation(angle: float) -> np.ndarray:
    """
    exp(-i angle X).
    """
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def apply_single_qubit(
    state: np.ndarray, matrix: np.ndarray, qubit: int, n_qubits: int
) -> np.ndarray:
    tensor = state.reshape([2] * n_qubits)
    tensor = np.tensordot(matrix, tensor, axes=([1], [qubit]))
    return np.moveaxis(tensor, 0, qubit).reshape(-1)


def apply_layer(state: np.ndarray, matrices, n_qubits: int) -> np.ndarray:
    for qubit, matrix in enumerate(matrices):
        state = apply_single_qubit(state, matrix, qubit, n_qubits)
    return state


def apply_cx(state: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    tensor = state.reshape([2] * n_qubits).copy()
    index = [slice(None)] * n_qubits
    index[control] = 1
    block = tensor[tuple(index)]
    # The control axis is gone from `block`
    axis = target - 1 if target > control else target
    tensor[tuple(index)] = np.flip(block, axis=axis)
    return tensor.reshape(-1)


def probabilities(state: np.ndarray) -> np.ndarray:
    weights = np.abs(state) ** 2
    return weights / weights.sum()


def expectation_value(state: np.ndarray, diagonal: np.ndarray) -> float:
    """
    Exact energy expectation of a diagonal Hamiltonian.
    """
    return float(np.dot(np.abs(state) ** 2, diagonal))


def sample_bitstrings(
    state: np.ndarray,
    shots: int,
    seed: int,
    model: EnergyModel,
    timing: Timing = Timing(),
) -> SampleSet:
    """
    Draws `shots` multinomial measurement outcomes from |amplitude|^2.

    Args:
        state (np.ndarray): Statevector of length 2^n.
        shots (int): Number of shots.
        seed (int): Seed of the measurement generator.
        model (EnergyModel): Instance used to fill the energies.
        timing (Timing, optional): Timing attached to the sample set.

    Returns:
        SampleSet: The measured bitstrings with multiplicities.
    """
    if shots < 1:
        raise GuardError(f"At least one shot is required, got {shots}.")
    n_qubits = state.size.bit_length() - 1
    counts = make_rng(seed).multinomial(shots, probabilities(state))
    indices = np.flatnonzero(counts)
    bitstrings = unpack_bits(indices, n_qubits)
    return SampleSet(
        n_vars=n_qubits,
        bitstrings=bitstrings,
        energies=np.asarray(model.energies(bitstrings), dtype=np.float64),
        counts=counts[indices].astype(np.int64),
        timing=timing,
    )
