import numpy as np
import pytest

from qubobench.benchmark import run_batch
from qubobench.errors import ConfigError, GuardError, MetricError
from qubobench.harness.records import InstanceSpec
from qubobench.problem.qubo import IsingInstance, to_ising
from qubobench.problem.sampleset import SampleSet, unpack_bits
from qubobench.solvers.statevector import expectation_value, probabilities, sample_bitstrings
from qubobench.solvers.vqe import (
    AnsatzSpec,
    VqeConfig,
    cvar_from_distribution,
    cvar_objective,
    prepare_state,
    run_vqe,
)


def sample_set(energies, counts=None) -> SampleSet:
    energies = np.asarray(energies, dtype=np.float64)
    counts = np.ones(len(energies), dtype=np.int64) if counts is None else np.asarray(counts)
    return SampleSet(
        n_vars=4,
        bitstrings=unpack_bits(np.arange(len(energies)), 4),
        energies=energies,
        counts=counts,
    )


@pytest.fixture
def three_spin_ising():
    return IsingInstance(
        n_spins=3,
        h=np.array([0.5, -0.3, 0.2]),
        J=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -0.7], [0.0, 0.0, 0.0]]),
    )


def test_parameter_counts():
    assert AnsatzSpec("realamp", 5, reps=1).parameter_count == 10
    assert AnsatzSpec("realamp", 5, reps=3).parameter_count == 20
    assert AnsatzSpec("qaoa", 5, reps=2).parameter_count == 4


def test_ansatz_validation():
    with pytest.raises(ConfigError):
        AnsatzSpec("hardware_efficient", 3)
    with pytest.raises(GuardError):
        AnsatzSpec("realamp", 0)
    with pytest.raises(GuardError):
        prepare_state(AnsatzSpec("realamp", 2), np.zeros(3))
    with pytest.raises(GuardError):
        prepare_state(AnsatzSpec("realamp", 23), np.zeros(46))


def test_realamp_basis_states():
    ansatz = AnsatzSpec("realamp", 2, reps=1)
    # Ry(pi) on qubit 1 only gives x = (0, 1)
    probs = probabilities(prepare_state(ansatz, np.array([0.0, np.pi, 0.0, 0.0])))
    assert probs[1] == pytest.approx(1.0)
    # Ry(pi) on the control flips the target through the reverse-linear CX (0 -> 1), so
    # theta = (pi, 0, 0, 0) gives |11>, not |10>
    probs = probabilities(prepare_state(ansatz, np.array([np.pi, 0.0, 0.0, 0.0])))
    assert probs[3] == pytest.approx(1.0)


def test_states_are_normalised(three_spin_ising):
    rng = np.random.default_rng(0)
    for kind, reps in (("realamp", 2), ("qaoa", 3)):
        ansatz = AnsatzSpec(kind, 3, reps=reps)
        theta = rng.uniform(-np.pi, np.pi, ansatz.parameter_count)
        state = prepare_state(ansatz, theta, three_spin_ising)
        assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)


def test_qaoa_matches_the_closed_form():
    coupling, beta, gamma = 0.7, 0.3, 0.9
    ising = IsingInstance(n_spins=2, h=np.zeros(2), J=np.array([[0.0, coupling], [0.0, 0.0]]))
    state = prepare_state(AnsatzSpec("qaoa", 2, reps=1), np.array([beta, gamma]), ising)
    expected = coupling * np.sin(4 * beta) * np.sin(2 * gamma * coupling)
    assert expectation_value(state, ising.diagonal()) == pytest.approx(expected, abs=1e-8)


def test_qaoa_needs_the_cost_hamiltonian():
    with pytest.raises(GuardError):
        prepare_state(AnsatzSpec("qaoa", 2), np.zeros(2))


def test_cvar_values():
    samples = sample_set([1.0, 2.0, 3.0, 4.0])
    assert cvar_objective(samples, 1.0) == pytest.approx(2.5)
    assert cvar_objective(samples, 0.5) == pytest.approx(1.5)
    assert cvar_objective(samples, 0.25) == pytest.approx(1.0)


def test_cvar_weights_multiplicities():
    samples = sample_set([1.0, 3.0], counts=[1, 3])
    assert cvar_objective(samples, 0.5) == pytest.approx(2.0)


def test_cvar_is_monotone_in_alpha():
    rng = np.random.default_rng(1)
    alphas = np.linspace(0.05, 1.0, 20)
    for _ in range(1000):
        size = int(rng.integers(1, 17))
        samples = sample_set(rng.normal(size=size), counts=rng.integers(1, 20, size=size))
        values = [cvar_objective(samples, alpha) for alpha in alphas]
        assert np.all(np.diff(values) >= -1e-9)


def test_cvar_rejects_empty_and_bad_alpha():
    with pytest.raises(MetricError):
        cvar_objective(SampleSet.empty(4), 0.5)
    with pytest.raises(GuardError):
        cvar_objective(sample_set([1.0]), 0.0)


def test_cvar_from_distribution():
    diagonal = np.array([4.0, 1.0, 3.0, 2.0])
    probs = np.full(4, 0.25)
    assert cvar_from_distribution(diagonal, probs, 0.5) == pytest.approx(1.5)
    assert cvar_from_distribution(diagonal, probs, 1.0) == pytest.approx(2.5)


def test_sampling_is_seeded(three_spin_ising):
    state = prepare_state(AnsatzSpec("realamp", 3), np.linspace(0.1, 1.2, 6))
    first = sample_bitstrings(state, 500, 3, three_spin_ising)
    second = sample_bitstrings(state, 500, 3, three_spin_ising)
    assert first.records == second.records
    assert first.n_shots_total == 500
    assert first.verify_energies(three_spin_ising)


@pytest.mark.parametrize("seed", range(10))
def test_shot_mean_agrees_with_the_exact_expectation(three_spin_ising, seed):
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, 6)
    state = prepare_state(AnsatzSpec("realamp", 3), theta)
    diagonal = three_spin_ising.diagonal()
    exact = expectation_value(state, diagonal)
    spread = np.sqrt(max(probabilities(state) @ diagonal**2 - exact**2, 0.0))
    shots = 4000
    samples = sample_bitstrings(state, shots, seed, three_spin_ising)
    assert abs(samples.shot_energies().mean() - exact) <= 4 * spread / np.sqrt(shots) + 1e-12


def test_config_validation():
    with pytest.raises(GuardError):
        VqeConfig(cvar_alpha=0.0)
    with pytest.raises(GuardError):
        VqeConfig(shots=0)
    with pytest.raises(ConfigError):
        VqeConfig(optimizer="adam")


def test_iteration_budget(three_spin_ising):
    config = VqeConfig(shots=200, tol=1e-6, max_iters=15, seed=2)
    result = run_vqe(three_spin_ising, AnsatzSpec("realamp", 3), config)
    assert 1 <= result.trace.n_iterations <= 15
    assert result.final_samples.n_shots_total == 200
    assert result.final_samples.timing.quantum_device
    assert len(result.final_samples.trajectory) == result.trace.n_iterations
    assert set(result.trace.to_dict()) == {"objective", "elapsed", "best_energy", "converged"}


def test_runs_are_reproducible(three_spin_ising):
    config = VqeConfig(shots=100, max_iters=20, seed=5)
    first = run_vqe(three_spin_ising, AnsatzSpec("realamp", 3), config)
    second = run_vqe(three_spin_ising, AnsatzSpec("realamp", 3), config)
    np.testing.assert_array_equal(first.theta_final, second.theta_final)
    assert first.final_samples.records == second.final_samples.records
    assert first.trace.objective_values == second.trace.objective_values


def test_final_parameters_are_the_best_seen(three_spin_ising):
    diagonal = three_spin_ising.diagonal()
    config = VqeConfig(
        shots=1000,
        cvar_alpha=0.2,
        tol=1e-4,
        max_iters=400,
        optimizer="nelder-mead",
        analytic_objective=True,
        seed=0,
    )
    ansatz = AnsatzSpec("realamp", 3, reps=2)
    result = run_vqe(three_spin_ising, ansatz, config)
    probs = probabilities(prepare_state(ansatz, result.theta_final))
    assert cvar_from_distribution(diagonal, probs, 0.2) == pytest.approx(
        min(result.trace.objective_values)
    )
    assert min(result.trace.best_energies) == pytest.approx(diagonal.min())


def test_qubit_mismatch(three_spin_ising):
    with pytest.raises(GuardError):
        run_vqe(three_spin_ising, AnsatzSpec("realamp", 4), VqeConfig(max_iters=2))


@pytest.mark.slow
def test_vqe_improves_on_the_eight_variable_instance(instance_8):
    ising = to_ising(instance_8)
    config = VqeConfig(shots=2000, max_iters=100, seed=0)
    result = run_vqe(ising, AnsatzSpec("realamp", 8), config)
    objective = result.trace.objective_values
    assert len(objective) <= 100
    assert min(objective) < objective[0]


@pytest.mark.slow
def test_vqe_post_selected_success_on_the_eighteen_variable_instance():
    # realamp, one repetition, alpha 0.4, tol 1, 250 iterations and 10^4 shots
    batch = run_batch("vqe", InstanceSpec(3, 1.0, 3.0, 3), n_experiments=10)
    assert batch.report.n_experiments == 10
    assert 0.3 <= batch.report.ps_post <= 1.0
