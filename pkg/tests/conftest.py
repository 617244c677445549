import numpy as np
import pytest

from qubobench.harness.records import InstanceSpec
from qubobench.problem.lattice import build_supercell
from qubobench.problem.qubo import QuboInstance, build_qubo, to_ising
from qubobench.problem.sampleset import unpack_bits


@pytest.fixture(scope="session")
def supercell_2():
    return build_supercell(2)


@pytest.fixture(scope="session")
def supercell_3():
    return build_supercell(3)


@pytest.fixture(scope="session")
def instance_18(supercell_3):
    """Three vacancies on the 3 x 3 supercell, penalty 3."""
    return build_qubo(supercell_3, 1.0, 3.0, 3)


@pytest.fixture(scope="session")
def instance_8(supercell_2):
    """Three vacancies on the 2 x 2 supercell, penalty 3."""
    return build_qubo(supercell_2, 1.0, 3.0, 3)


@pytest.fixture(scope="session")
def ising_8_anneal(supercell_2):
    """The 2 x 2 supercell at the annealing penalty of 1."""
    return to_ising(build_qubo(supercell_2, 1.0, 1.0, 3))


@pytest.fixture(scope="session")
def small_spec():
    return InstanceSpec(supercell_dim=2, kappa=1.0, lambda_coeff=5.0, n_vacancies=3)


@pytest.fixture
def random_qubo():
    def factory(n_vars: int, seed: int = 0) -> QuboInstance:
        rng = np.random.default_rng(seed)
        return QuboInstance(
            n_vars=n_vars,
            q_upper=np.triu(rng.normal(size=(n_vars, n_vars))),
            constant_offset=float(rng.normal()),
        )

    return factory


@pytest.fixture
def all_bitstrings():
    def factory(n_vars: int) -> np.ndarray:
        return unpack_bits(np.arange(1 << n_vars, dtype=np.int64), n_vars)

    return factory
