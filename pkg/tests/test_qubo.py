import numpy as np
import pytest

from qubobench.errors import ConfigError, GuardError
from qubobench.problem.lattice import build_supercell
from qubobench.problem.qubo import (
    IsingInstance,
    QuboInstance,
    as_qubo,
    build_qubo,
    constrained_extrema,
    evaluate_energy,
    to_ising,
)


def test_matrix_entries(instance_18, supercell_3):
    q = instance_18.q_upper
    assert np.all(np.diag(q) == -87.0)
    assert q[0, 1] == 5.0  # A and B of cell (0, 0) are bonded
    assert q[0, 2] == 6.0  # two A sites never bond
    assert np.all(np.tril(q, k=-1) == 0.0)
    assert instance_18.constant_offset == 675.0
    assert instance_18.n_carbon == 15
    assert instance_18.n_vacancies == 3
    bonded = np.triu(supercell_3.adjacency(), k=1) == 1
    assert np.all(q[bonded] == 5.0)


def test_penalty_five_entries(supercell_3):
    q = build_qubo(supercell_3, 1.0, 5.0, 3).q_upper
    assert np.all(np.diag(q) == -145.0)
    assert q[0, 1] == 9.0
    assert q[0, 2] == 10.0


def test_zero_penalty_is_minus_adjacency(supercell_2):
    instance = build_qubo(supercell_2, 1.0, 0.0, 2)
    np.testing.assert_array_equal(instance.q_upper, -np.triu(supercell_2.adjacency(), k=1))
    assert instance.constant_offset == 0.0


@pytest.mark.parametrize(
    "kappa, lambda_coeff, n_vacancies",
    [(0.0, 3.0, 3), (-1.0, 3.0, 3), (1.0, -0.5, 3), (1.0, 3.0, 19), (1.0, 3.0, -1)],
)
def test_build_qubo_guards(supercell_3, kappa, lambda_coeff, n_vacancies):
    with pytest.raises(GuardError):
        build_qubo(supercell_3, kappa, lambda_coeff, n_vacancies)


def test_reference_energies(instance_18):
    assert evaluate_energy(instance_18, np.ones(18)) == pytest.approx(0.0)
    assert evaluate_energy(instance_18, np.zeros(18)) == pytest.approx(675.0)
    # Three A sites removed: nine bonds broken, constraint satisfied
    x = np.ones(18)
    x[[0, 2, 4]] = 0
    assert evaluate_energy(instance_18, x) == pytest.approx(-18.0)


def test_energy_is_bond_count_plus_penalty(instance_18, supercell_3):
    rng = np.random.default_rng(3)
    edges = np.array(supercell_3.sorted_edges())
    for x in rng.integers(0, 2, size=(200, 18)):
        bonds = int(np.sum(x[edges[:, 0]] * x[edges[:, 1]]))
        expected = -bonds + 3.0 * (x.sum() - 15) ** 2
        assert evaluate_energy(instance_18, x) == pytest.approx(expected, abs=1e-9)


def test_energy_invariant_under_translation(instance_18):
    dim = 3
    rng = np.random.default_rng(5)
    # Shift every unit cell by one column
    permutation = np.array(
        [
            2 * (row * dim + (col + 1) % dim) + sub
            for row in range(dim)
            for col in range(dim)
            for sub in range(2)
        ]
    )
    for x in rng.integers(0, 2, size=(50, 18)):
        shifted = np.empty_like(x)
        shifted[permutation] = x
        assert evaluate_energy(instance_18, shifted) == pytest.approx(
            evaluate_energy(instance_18, x)
        )


def test_evaluate_energy_rejects_wrong_length(instance_8):
    with pytest.raises(ValueError):
        evaluate_energy(instance_8, np.ones(7))


def test_upper_triangle_enforced():
    with pytest.raises(ValueError, match="upper triangular"):
        QuboInstance(n_vars=2, q_upper=np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_known_constrained_extrema(instance_18):
    e_min, e_max, n_ground = constrained_extrema(instance_18)
    assert e_min == pytest.approx(-20.0)
    assert e_max == pytest.approx(-18.0)
    assert n_ground == 54


def test_constrained_extrema_without_vacancies(supercell_3):
    assert constrained_extrema(build_qubo(supercell_3, 1.0, 3.0, 0)) == (-27.0, -27.0, 1)


@pytest.mark.parametrize("n_vacancies", [1, 2, 3, 4, 5, 6, 8])
def test_constrained_extrema_match_enumeration(supercell_2, all_bitstrings, n_vacancies):
    instance = build_qubo(supercell_2, 1.0, 2.0, n_vacancies)
    bits = all_bitstrings(8)
    feasible = bits[(8 - bits.sum(axis=1)) == n_vacancies]
    energies = instance.energies(feasible)
    e_min, e_max, n_ground = constrained_extrema(instance)
    assert e_min == pytest.approx(energies.min())
    assert e_max == pytest.approx(energies.max())
    assert n_ground == int(np.sum(np.abs(energies - energies.min()) <= 1e-9))


def test_feasible_energy_ignores_penalty(supercell_2, all_bitstrings):
    bits = all_bitstrings(8)
    feasible = bits[bits.sum(axis=1) == 5]
    low = build_qubo(supercell_2, 1.0, 1.0, 3).energies(feasible)
    high = build_qubo(supercell_2, 1.0, 7.0, 3).energies(feasible)
    np.testing.assert_allclose(low, high)


def test_constrained_extrema_guard():
    instance = build_qubo(build_supercell(10), 1.0, 3.0, 5)
    with pytest.raises(GuardError, match="tractability guard"):
        constrained_extrema(instance)


def test_generic_qubo_has_no_vacancy_count(random_qubo):
    with pytest.raises(ConfigError):
        constrained_extrema(random_qubo(4))


def test_single_variable_ising():
    ising = to_ising(QuboInstance(n_vars=1, q_upper=np.array([[-1.0]])))
    np.testing.assert_allclose(ising.h, [0.5])
    assert ising.energy_offset == pytest.approx(-0.5)
    np.testing.assert_allclose(ising.energies(np.array([[0], [1]])), [0.0, -1.0])


def test_two_variable_ising():
    ising = to_ising(QuboInstance(n_vars=2, q_upper=np.array([[0.0, 1.0], [0.0, 0.0]])))
    assert ising.J[0, 1] == pytest.approx(0.25)
    np.testing.assert_allclose(ising.h, [-0.25, -0.25])
    assert ising.energy_offset == pytest.approx(0.25)
    np.testing.assert_allclose(
        ising.energies(np.array([[0, 0], [0, 1], [1, 0], [1, 1]])), [0.0, 0.0, 0.0, 1.0]
    )


def test_ising_equivalence_exhaustive(random_qubo, all_bitstrings):
    instance = random_qubo(12, seed=11)
    bits = all_bitstrings(12)
    ising_energies = to_ising(instance).energies(bits)
    np.testing.assert_allclose(ising_energies, instance.energies(bits), atol=1e-9)


def test_ising_equivalence_on_the_three_vacancy_instance(instance_18):
    bits = np.random.default_rng(2).integers(0, 2, size=(10_000, 18))
    np.testing.assert_allclose(
        to_ising(instance_18).energies(bits), instance_18.energies(bits), atol=1e-9
    )


def test_diagonal_lists_basis_energies(instance_8, all_bitstrings):
    ising = to_ising(instance_8)
    np.testing.assert_allclose(ising.diagonal(), instance_8.energies(all_bitstrings(8)), atol=1e-9)


def test_ising_maps_back_to_qubo(all_bitstrings):
    rng = np.random.default_rng(4)
    ising = IsingInstance(
        n_spins=5, h=rng.normal(size=5), J=np.triu(rng.normal(size=(5, 5)), k=1), energy_offset=0.7
    )
    qubo = ising.to_qubo()
    assert as_qubo(ising).n_vars == 5
    bits = all_bitstrings(5)
    np.testing.assert_allclose(qubo.energies(bits), ising.energies(bits), atol=1e-9)
    assert qubo.n_vacancies is None


def test_json_keeps_energies_and_metadata(instance_8, all_bitstrings):
    loaded = QuboInstance.from_json(instance_8.to_json())
    bits = all_bitstrings(8)
    np.testing.assert_allclose(loaded.energies(bits), instance_8.energies(bits))
    assert loaded.n_vacancies == 3
    assert loaded.lambda_coeff == 3.0


def test_json_folds_lower_entries():
    loaded = QuboInstance.from_json('{"n_vars": 2, "entries": [[1, 0, 2.0], [0, 0, -1.0]]}')
    assert loaded.q_upper[0, 1] == 2.0
    assert loaded.n_vacancies is None


@pytest.mark.parametrize(
    "text",
    ['{"n_vars": 2}', '{"n_vars": 2, "entries": [[0, 5, 1.0]]}', "not json", '{"entries": []}'],
)
def test_malformed_json(text):
    with pytest.raises(ConfigError, match="Malformed QUBO json"):
        QuboInstance.from_json(text)
