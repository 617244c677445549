import networkx as nx
import numpy as np
import pytest

from qubobench.benchmark import run_batch
from qubobench.errors import ConfigError, EmbeddingError
from qubobench.harness.records import InstanceSpec
from qubobench.problem.qubo import to_ising
from qubobench.solvers.classical import SaSchedule
from qubobench.solvers.embedding import (
    Embedding,
    chimera_topology,
    clique_embedding,
    decode_chains,
    embed_ising,
    embedding_stats,
    load_topology,
    logical_edges,
    logical_graph,
    minor_embedding,
    parse_topology,
    sample_embedded,
    validate_embedding,
)


def complete_edges(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def test_chimera_counts():
    topo = chimera_topology(5, 4)
    assert topo.n_physical == 200
    assert topo.n_couplers == 25 * 16 + 2 * 4 * 4 * 5
    assert topo.degrees().max() == 6
    assert nx.is_connected(topo.to_networkx())


def test_chimera_single_cell_is_bipartite_clique():
    topo = chimera_topology(1, 4)
    for a in range(4):
        for b in range(4, 8):
            assert topo.has_coupler(a, b)
    assert not topo.has_coupler(0, 1)


def test_clique_embedding_of_eighteen_variables():
    topo = chimera_topology(5, 4)
    embedding = clique_embedding(18, topo)
    assert validate_embedding(embedding, complete_edges(18), topo, range(18)) == []
    assert set(embedding.chain_lengths().values()) == {6}
    stats = embedding_stats(embedding)
    assert stats["n_qubits"] == 108
    assert stats["mean_chain_length"] == pytest.approx(6.0)


@pytest.mark.parametrize("m, n_logical", [(1, 4), (2, 8), (3, 10), (4, 16)])
def test_clique_embeddings_are_valid(m, n_logical):
    topo = chimera_topology(m, 4)
    embedding = clique_embedding(n_logical, topo)
    assert validate_embedding(embedding, complete_edges(n_logical), topo, range(n_logical)) == []
    assert set(embedding.chain_lengths().values()) == {m + 1}


def test_clique_capacity():
    with pytest.raises(EmbeddingError, match="capacity"):
        clique_embedding(21, chimera_topology(5, 4))


def test_custom_topology_clique():
    complete = load_topology("PHYS 4\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n")
    embedding = clique_embedding(4, complete)
    assert embedding.chain_lengths() == {0: 1, 1: 1, 2: 1, 3: 1}
    ring = load_topology("PHYS 4\n0 1\n1 2\n2 3\n0 3\n")
    with pytest.raises(EmbeddingError):
        clique_embedding(4, ring)


def test_parse_topology(tmp_path):
    assert parse_topology("chimera:2,4").n_physical == 32
    path = tmp_path / "ring.txt"
    path.write_text("PHYS 3\n0 1\n1 2\n0 2\n", encoding="utf-8")
    assert parse_topology(str(path)).n_couplers == 3
    with pytest.raises(ConfigError):
        parse_topology("chimera:two")
    with pytest.raises(ConfigError):
        parse_topology(str(tmp_path / "missing.txt"))
    with pytest.raises(ConfigError):
        load_topology("N 3\n0 1\n")


def test_embedding_json_and_chain_strength():
    embedding = Embedding(chains={1: (5, 4), 0: (2,)}, chain_strength=2.5)
    loaded = Embedding.from_json(embedding.to_json())
    assert loaded == embedding
    assert loaded.chains[1] == (4, 5)
    with pytest.raises(ConfigError):
        Embedding(chains={0: (1,)}, chain_strength=0.0)
    with pytest.raises(ConfigError):
        Embedding.from_json('{"chains": {}}')


def test_validation_reports_each_violation():
    topo = chimera_topology(1, 4)
    disconnected = Embedding(chains={0: (0, 1), 1: (4,)})
    assert any("not connected" in v for v in validate_embedding(disconnected, [(0, 1)], topo))
    shared = Embedding(chains={0: (0, 4), 1: (4,)})
    assert any("shared" in v for v in validate_embedding(shared, [(0, 1)], topo))
    uncoupled = Embedding(chains={0: (0,), 1: (1,)})
    assert any("no physical coupler" in v for v in validate_embedding(uncoupled, [(0, 1)], topo))
    missing = Embedding(chains={0: (0,)})
    assert any("has no chain" in v for v in validate_embedding(missing, [], topo, [0, 1]))
    outside = Embedding(chains={0: (99,)})
    assert any("outside" in v for v in validate_embedding(outside, [], topo))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_minor_embedding_of_random_graphs(seed):
    source = nx.gnp_random_graph(10, 0.3, seed=seed)
    topo = chimera_topology(4, 4)
    embedding = minor_embedding(source, topo, seed=seed)
    assert embedding is not None
    edges = [(min(a, b), max(a, b)) for a, b in source.edges]
    assert validate_embedding(embedding, edges, topo, source.nodes) == []


def test_minor_embedding_of_the_small_lattice(ising_8_anneal):
    topo = chimera_topology(3, 4)
    embedding = minor_embedding(logical_graph(ising_8_anneal), topo, seed=0)
    assert embedding is not None
    assert validate_embedding(embedding, logical_edges(ising_8_anneal), topo, range(8)) == []


def test_minor_embedding_gives_up():
    path = load_topology("PHYS 4\n0 1\n1 2\n2 3\n")
    assert minor_embedding(nx.complete_graph(5), path, seed=0) is None
    ring = load_topology("PHYS 4\n0 1\n1 2\n2 3\n0 3\n")
    assert minor_embedding(nx.complete_graph(4), ring, seed=0, max_tries=2) is None


@pytest.mark.parametrize("split", [False, True])
def test_unbroken_chains_keep_the_logical_energy(ising_8_anneal, split):
    topo = chimera_topology(2, 4)
    embedding = clique_embedding(8, topo)
    physical = embed_ising(ising_8_anneal, embedding, topo, split_couplings=split)
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 2, size=(50, 8)):
        bits = np.zeros(topo.n_physical, dtype=np.uint8)
        for var, chain in embedding.chains.items():
            bits[list(chain)] = x[var]
        assert physical.energies(bits)[0] == pytest.approx(ising_8_anneal.energies(x)[0])


def test_embed_rejects_invalid_embeddings(ising_8_anneal):
    topo = chimera_topology(2, 4)
    with pytest.raises(EmbeddingError):
        embed_ising(ising_8_anneal, Embedding(chains={0: (0,)}), topo)


def test_majority_vote_decoding():
    embedding = Embedding(chains={0: (0, 1, 2), 1: (3, 4)})
    physical = np.array([[1, 1, 0, 1, 0], [0, 0, 0, 1, 1]], dtype=np.uint8)
    logical, broken = decode_chains(physical, embedding, 2, np.random.default_rng(0))
    assert logical[0, 0] == 1
    assert logical[0, 1] in (0, 1)
    assert logical[1].tolist() == [0, 1]
    assert broken.tolist() == [[True, True], [False, False]]


def test_sample_embedded(instance_8):
    ising = to_ising(instance_8)
    topo = chimera_topology(2, 4)
    embedding = clique_embedding(8, topo)
    physical = embed_ising(ising, embedding, topo)
    result = sample_embedded(
        physical, embedding, SaSchedule.geometric(n_sweeps=100), 50, seed=0, logical=ising
    )
    assert result.logical_samples.n_shots_total == 50
    assert result.logical_samples.verify_energies(ising)
    assert 0.0 <= result.chain_break_fraction <= 1.0
    assert result.logical_samples.timing.quantum_device


def test_energy_consistency_on_a_single_cell(all_bitstrings, random_qubo):
    ising = to_ising(random_qubo(4, seed=3))
    topo = chimera_topology(1, 4)
    embedding = clique_embedding(4, topo, chain_strength=1.5)
    physical = embed_ising(ising, embedding, topo)
    assert physical.n_spins == 8
    for x in all_bitstrings(4):
        bits = np.zeros(8, dtype=np.uint8)
        for var, chain in embedding.chains.items():
            bits[list(chain)] = x[var]
        assert physical.energies(bits)[0] == pytest.approx(ising.energies(x)[0], abs=1e-9)


@pytest.mark.slow
def test_minor_embeddings_are_always_valid():
    topo = chimera_topology(4, 4)
    rng = np.random.default_rng(0)
    n_found = 0
    for trial in range(1000):
        n_nodes = int(rng.integers(2, 13))
        source = nx.gnp_random_graph(n_nodes, float(rng.uniform(0.1, 0.6)), seed=trial)
        embedding = minor_embedding(source, topo, seed=trial, max_tries=5)
        if embedding is None:
            continue
        n_found += 1
        edges = [(min(a, b), max(a, b)) for a, b in source.edges]
        assert validate_embedding(embedding, edges, topo, source.nodes) == []
    assert n_found > 500


@pytest.mark.slow
def test_chain_breaks_fall_with_chain_strength(instance_18):
    ising = to_ising(instance_18)
    topo = chimera_topology(5, 4)
    base = clique_embedding(18, topo)
    schedule = SaSchedule.geometric(n_sweeps=200)
    means, sigmas = [], []
    for strength in (0.5, 1.0, 2.0, 3.0, 5.0, 10.0):
        embedding = base.with_chain_strength(strength)
        physical = embed_ising(ising, embedding, topo)
        fractions = [
            sample_embedded(physical, embedding, schedule, 20, seed, ising).chain_break_fraction
            for seed in range(10)
        ]
        means.append(np.mean(fractions))
        sigmas.append(np.std(fractions))
    for i in range(len(means) - 1):
        assert means[i + 1] <= means[i] + sigmas[i] + sigmas[i + 1]
    assert means[-1] <= means[0]

    strong = base.with_chain_strength(1e3 * np.abs(ising.J).max())
    physical = embed_ising(ising, strong, topo)
    assert sample_embedded(physical, strong, schedule, 20, 0, ising).chain_break_fraction == 0.0


@pytest.mark.slow
def test_moderate_chain_strength_keeps_breaks_rare():
    params = {"chain_strength": 3.0}
    batch = run_batch("embedded-sa", InstanceSpec(3, 1.0, 1.0, 3), params, n_experiments=10)
    fractions = [record.chain_stats["chain_break_fraction"] for record in batch.records]
    assert np.mean(fractions) < 0.15
    assert batch.report.ps_post > 0
