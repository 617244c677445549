import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple

import networkx as nx
import numpy as np

from qubobench.constants import CHAIN_STRENGTH, MINOR_MAX_ROUNDS, MINOR_MAX_TRIES
from qubobench.errors import ConfigError, EmbeddingError
from qubobench.problem.lattice import Edge, load_graph
from qubobench.problem.qubo import IsingInstance
from qubobench.problem.sampleset import SampleSet, Timing
from qubobench.solvers.classical import SaSchedule, simulated_annealing
from qubobench.utils import make_rng

logger = logging.getLogger(__name__)

TOPOLOGY_KINDS = ["chimera", "custom"]
# Stream key of the chain decoding coin flips
DECODE_STREAM = 7


@dataclass(frozen=True)
class TargetTopology:
    """
    Hardware graph. Chimera grids carry their `m` x `m` cell count and shore size `t`.
    """

    n_physical: int
    couplers: FrozenSet[Edge]
    kind: str = "custom"
    m: Optional[int] = None
    t: Optional[int] = None
    _adjacency: Dict[int, Set[int]] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in TOPOLOGY_KINDS:
            raise ConfigError(f"Unknown topology '{self.kind}'. Choose one of {TOPOLOGY_KINDS}.")
        adjacency: Dict[int, Set[int]] = {qubit: set() for qubit in range(self.n_physical)}
        for a, b in self.couplers:
            if a == b:
                raise ConfigError(f"Self-coupler on qubit {a}.")
            adjacency[a].add(b)
            adjacency[b].add(a)
        self._adjacency.update(adjacency)

    @property
    def n_couplers(self) -> int:
        return len(self.couplers)

    def neighbors(self, qubit: int) -> Set[int]:
        return self._adjacency[qubit]

    def has_coupler(self, a: int, b: int) -> bool:
        return b in self._adjacency.get(a, ())

    def degrees(self) -> np.ndarray:
        return np.array([len(self._adjacency[q]) for q in range(self.n_physical)])

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_physical))
        graph.add_edges_from(sorted(self.couplers))
        return graph

    def to_text(self) -> str:
        lines = [f"PHYS {self.n_physical}"]
        lines.extend(f"{a} {b}" for a, b in sorted(self.couplers))
        return "\n".join(lines) + "\n"


def chimera_index(row: int, col: int, side: int, k: int, m: int, t: int) -> int:
    return ((row * m + col) * 2 + side) * t + k


def chimera_topology(m: int, t: int) -> TargetTopology:
    """
    Chimera graph C(m, m, t): an m x m grid of K_{t,t} cells.

    Side 0 qubits couple to the same qubit of the cells above and below, side 1 qubits
    to the same qubit of the cells left and right.

    Args:
        m (int): Cells per row and column.
        t (int): Shore size of each cell.

    Returns:
        TargetTopology: 2 t m^2 qubits indexed by (row, col, side, k) row-major.
    """
    if m < 1 or t < 1:
        raise ConfigError(f"Chimera needs m >= 1 and t >= 1, got m={m}, t={t}.")
    couplers = set()
    for row in range(m):
        for col in range(m):
            for k0 in range(t):
                q0 = chimera_index(row, col, 0, k0, m, t)
                for k1 in range(t):
                    couplers.add((q0, chimera_index(row, col, 1, k1, m, t)))
                if row + 1 < m:
                    couplers.add((q0, chimera_index(row + 1, col, 0, k0, m, t)))
                if col + 1 < m:
                    q1 = chimera_index(row, col, 1, k0, m, t)
                    couplers.add((q1, chimera_index(row, col + 1, 1, k0, m, t)))
    return TargetTopology(
        n_physical=2 * t * m * m, couplers=frozenset(couplers), kind="chimera", m=m, t=t
    )


def load_topology(text: str) -> TargetTopology:
    """
    Parses a custom topology from the edge-list format with a `PHYS <count>` header.
    """
    graph = load_graph(text, header="PHYS")
    return TargetTopology(n_physical=graph.n_sites, couplers=graph.edges, kind="custom")


def parse_topology(value: str) -> TargetTopology:
    """
    Resolves `chimera:m,t` or a path to a topology file.
    """
    if value.startswith("chimera:"):
        try:
            m, t = (int(part) for part in value.split(":", 1)[1].split(","))
        except ValueError as error:
            raise ConfigError(f"Expected 'chimera:m,t', got '{value}'.") from error
        return chimera_topology(m, t)
    try:
        with open(value, encoding="utf-8") as handle:
            return load_topology(handle.read())
    except OSError as error:
        raise ConfigError(f"Cannot read topology file '{value}': {error}") from error


@dataclass(frozen=True)
class Embedding:
    chains: Dict[int, Tuple[int, ...]]
    chain_strength: float = CHAIN_STRENGTH

    def __post_init__(self) -> None:
        if self.chain_strength <= 0:
            raise ConfigError(f"Chain strength must be positive, got {self.chain_strength}.")
        object.__setattr__(
            self,
            "chains",
            {int(var): tuple(sorted(int(q) for q in chain)) for var, chain in self.chains.items()},
        )

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    def chain_lengths(self) -> Dict[int, int]:
        return {var: len(chain) for var, chain in sorted(self.chains.items())}

    def physical_qubits(self) -> List[int]:
        return sorted(q for chain in self.chains.values() for q in chain)

    def with_chain_strength(self, chain_strength: float) -> "Embedding":
        return Embedding(chains=self.chains, chain_strength=chain_strength)

    def to_json(self) -> str:
        return json.dumps(
            {
                "chains": {str(var): list(chain) for var, chain in sorted(self.chains.items())},
                "chain_strength": self.chain_strength,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Embedding":
        try:
            payload = json.loads(text)
            chains = {int(var): tuple(qubits) for var, qubits in payload["chains"].items()}
            return cls(chains=chains, chain_strength=float(payload["chain_strength"]))
        except (KeyError, TypeError, ValueError) as error:
            raise ConfigError(f"Malformed embedding json: {error}") from error


def embedding_stats(embedding: Embedding) -> Dict[str, float]:
    lengths = list(embedding.chain_lengths().values())
    if not lengths:
        return {"n_chains": 0, "mean_chain_length": 0.0, "max_chain_length": 0, "n_qubits": 0}
    return {
        "n_chains": len(lengths),
        "mean_chain_length": float(np.mean(lengths)),
        "max_chain_length": int(max(lengths)),
        "n_qubits": int(sum(lengths)),
    }


def logical_edges(ising: IsingInstance) -> List[Edge]:
    rows, cols = np.nonzero(ising.J)
    return sorted((int(i), int(j)) for i, j in zip(rows, cols))


def logical_graph(ising: IsingInstance) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(ising.n_spins))
    graph.add_edges_from(logical_edges(ising))
    return graph


def _chains_connected(chain_a: Iterable[int], chain_b: Set[int], topo: TargetTopology) -> bool:
    return any(topo.neighbors(q) & chain_b for q in chain_a)


def validate_embedding(
    embedding: Embedding,
    edges: Iterable[Edge],
    topo: TargetTopology,
    variables: Optional[Iterable[int]] = None,
) -> List[str]:
    """
    Lists every violated embedding invariant; an empty list means the embedding is valid.

    Args:
        embedding (Embedding): Candidate embedding.
        edges (Iterable[Edge]): Logical edges that need a physical coupler.
        topo (TargetTopology): Hardware graph.
        variables (Optional[Iterable[int]]): Logical variables that need a chain.

    Returns:
        List[str]: Human readable violations.
    """
    violations: List[str] = []
    owner: Dict[int, int] = {}
    graph = topo.to_networkx()
    for var, chain in sorted(embedding.chains.items()):
        if not chain:
            violations.append(f"chain of {var} is empty")
            continue
        outside = [q for q in chain if not 0 <= q < topo.n_physical]
        if outside:
            violations.append(f"chain of {var} uses qubits {outside} outside the topology")
            continue
        for qubit in chain:
            if qubit in owner:
                violations.append(f"qubit {qubit} shared by chains {owner[qubit]} and {var}")
            owner[qubit] = var
        if len(chain) > 1 and not nx.is_connected(graph.subgraph(chain)):
            violations.append(f"chain of {var} is not connected")
    for var in variables or ():
        if var not in embedding.chains:
            violations.append(f"variable {var} has no chain")
    for i, j in edges:
        if i not in embedding.chains or j not in embedding.chains:
            violations.append(f"edge ({i}, {j}) has an unembedded endpoint")
            continue
        if not _chains_connected(embedding.chains[i], set(embedding.chains[j]), topo):
            violations.append(f"edge ({i}, {j}) has no physical coupler")
    return violations


def clique_embedding(
    n_logical: int, topo: TargetTopology, chain_strength: float = CHAIN_STRENGTH
) -> Embedding:
    """
    Deterministic clique embedding with uniform chains.

    On C(m, m, t) variable v = t a + k gets the side 0 qubits k of column a in rows
    0..a plus the side 1 qubits k of row a in columns a..m-1, so every chain has length
    m + 1 and chains a < b meet in cell (a, b). A custom topology is accepted only when it
    contains the complete graph on its first `n_logical` qubits, giving singleton chains.

    Raises:
        EmbeddingError: If the topology cannot host K_n this way.
    """
    if n_logical < 1:
        raise EmbeddingError("Nothing to embed.")
    if topo.kind == "custom":
        complete = n_logical <= topo.n_physical and all(
            topo.has_coupler(i, j) for i in range(n_logical) for j in range(i + 1, n_logical)
        )
        if not complete:
            raise EmbeddingError(
                f"Custom topology does not contain K_{n_logical} on its first qubits."
            )
        return Embedding(
            chains={v: (v,) for v in range(n_logical)}, chain_strength=chain_strength
        )
    m, t = topo.m, topo.t
    if t * m < n_logical:
        raise EmbeddingError(
            f"Clique capacity of C({m},{m},{t}) is {t * m} < {n_logical}; "
            f"m = {math.ceil(n_logical / t)} is required."
        )
    chains = {}
    for v in range(n_logical):
        a, k = divmod(v, t)
        vertical = [chimera_index(row, a, 0, k, m, t) for row in range(a + 1)]
        horizontal = [chimera_index(a, col, 1, k, m, t) for col in range(a, m)]
        chains[v] = tuple(vertical + horizontal)
    return Embedding(chains=chains, chain_strength=chain_strength)


class _ChainRouter:
    """
    Overlap-penalised chain placement: each chain is rooted at the qubit minimising the
    summed node-weighted path costs to its placed neighbour chains and grows along those
    paths. Qubit weights grow exponentially with the number of chains using them.
    """

    def __init__(self, source: nx.Graph, topo: TargetTopology, rng: np.random.Generator):
        self.source = source
        self.topo = topo
        self.target = topo.to_networkx()
        self.rng = rng
        self.usage = np.zeros(topo.n_physical, dtype=np.int64)
        self.chains: Dict[int, Set[int]] = {}
        self.base = 2.0

    def weight(self, qubit: int) -> float:
        return self.base ** float(self.usage[qubit])

    def remove(self, var: int) -> None:
        for qubit in self.chains.pop(var, ()):
            self.usage[qubit] -= 1

    def place(self, var: int) -> None:
        ties = self.rng.random(self.topo.n_physical)
        placed = [u for u in self.source[var] if u in self.chains]
        if not placed:
            root = min(range(self.topo.n_physical), key=lambda q: (self.weight(q), ties[q]))
            chain = {root}
        else:
            routes = []
            for u in placed:
                distances, paths = nx.multi_source_dijkstra(
                    self.target,
                    set(self.chains[u]),
                    weight=lambda a, b, data: self.weight(b),
                )
                routes.append((u, distances, paths))
            best_cost, root = math.inf, None
            for qubit in range(self.topo.n_physical):
                cost = self.weight(qubit)
                for u, distances, _ in routes:
                    if qubit not in distances:
                        cost = math.inf
                        break
                    if distances[qubit] > 0:
                        cost += distances[qubit] - self.weight(qubit)
                if cost < best_cost or (
                    cost == best_cost and root is not None and ties[qubit] < ties[root]
                ):
                    best_cost, root = cost, qubit
            if root is None:
                raise EmbeddingError("Target graph is disconnected from the placed chains.")
            chain = {root}
            for _, _, paths in routes:
                chain.update(paths[root][1:])
        self.chains[var] = chain
        for qubit in chain:
            self.usage[qubit] += 1

    def overlapping(self) -> bool:
        return bool(np.any(self.usage > 1))

    def prune(self) -> None:
        """
        Drops leaf qubits that no inter-chain coupler depends on.
        """
        for var in sorted(self.chains):
            chain = self.chains[var]
            changed = True
            while changed and len(chain) > 1:
                changed = False
                for qubit in sorted(chain):
                    inside = self.topo.neighbors(qubit) & chain
                    if len(inside) > 1:
                        continue
                    rest = chain - {qubit}
                    if all(
                        _chains_connected(rest, self.chains[u], self.topo)
                        for u in self.source[var]
                        if u in self.chains
                    ):
                        chain.discard(qubit)
                        self.usage[qubit] -= 1
                        changed = True
                        break


def minor_embedding(
    source: nx.Graph,
    topo: TargetTopology,
    seed: int,
    max_tries: int = MINOR_MAX_TRIES,
    chain_strength: float = CHAIN_STRENGTH,
) -> Optional[Embedding]:
    """
    Randomised heuristic minor embedding.

    Each try places the variables in a random order, then repeatedly rips up and
    re-routes every chain with rising overlap penalties until no qubit is shared,
    prunes redundant leaf qubits and validates the result.

    Args:
        source (nx.Graph): Logical graph.
        topo (TargetTopology): Hardware graph.
        seed (int): Base seed; try `r` uses its own generator.
        max_tries (int, optional): Number of restarts.
        chain_strength (float, optional): Chain strength of the returned embedding.

    Returns:
        Optional[Embedding]: The first valid embedding, or None if no try succeeds.
    """
    variables = sorted(source.nodes)
    edges = [(min(a, b), max(a, b)) for a, b in source.edges]
    if len(variables) > topo.n_physical:
        logger.debug(
            "No embedding: %d variables on %d qubits", len(variables), topo.n_physical
        )
        return None
    for attempt in range(max_tries):
        rng = make_rng(seed, attempt)
        router = _ChainRouter(source, topo, rng)
        order = [variables[i] for i in rng.permutation(len(variables))]
        try:
            for var in order:
                router.place(var)
            for round_index in range(MINOR_MAX_ROUNDS):
                if not router.overlapping():
                    break
                router.base = 2.0 ** (round_index + 2)
                for var in order:
                    router.remove(var)
                    router.place(var)
        except EmbeddingError:
            continue
        if router.overlapping():
            logger.debug("Minor embedding try %d left overlapping chains", attempt)
            continue
        router.prune()
        embedding = Embedding(
            chains={var: tuple(chain) for var, chain in router.chains.items()},
            chain_strength=chain_strength,
        )
        if not validate_embedding(embedding, edges, topo, variables):
            logger.debug("Minor embedding found on try %d", attempt)
            return embedding
    return None


def embed_ising(
    ising: IsingInstance,
    embedding: Embedding,
    topo: TargetTopology,
    split_couplings: bool = False,
) -> IsingInstance:
    """
    Builds the physical Ising problem of an embedded logical problem.

    Fields are split equally across the chain, each logical coupling goes to the lowest
    index coupler between the two chains (or is shared by all of them with
    `split_couplings`), and every intra-chain coupler gets -chain_strength. The offset
    absorbs chain_strength per intra-chain coupler, so a state with no broken chain has
    exactly the logical energy of its decoded state.

    Raises:
        EmbeddingError: If the embedding is invalid for the instance.
    """
    edges = logical_edges(ising)
    violations = validate_embedding(embedding, edges, topo, range(ising.n_spins))
    if violations:
        raise EmbeddingError("Invalid embedding: " + "; ".join(violations))
    n = topo.n_physical
    h = np.zeros(n)
    J = np.zeros((n, n))
    for var, chain in embedding.chains.items():
        if var < ising.n_spins:
            h[list(chain)] += ising.h[var] / len(chain)
    for i, j in edges:
        chain_j = set(embedding.chains[j])
        couplers = sorted(
            (min(a, b), max(a, b))
            for a in embedding.chains[i]
            for b in topo.neighbors(a) & chain_j
        )
        if split_couplings:
            for a, b in couplers:
                J[a, b] += ising.J[i, j] / len(couplers)
        else:
            a, b = couplers[0]
            J[a, b] += ising.J[i, j]
    n_intra = 0
    for chain in embedding.chains.values():
        members = set(chain)
        for a in chain:
            for b in topo.neighbors(a) & members:
                if a < b:
                    J[a, b] -= embedding.chain_strength
                    n_intra += 1
    return IsingInstance(
        n_spins=n,
        h=h,
        J=J,
        energy_offset=ising.energy_offset + embedding.chain_strength * n_intra,
    )


class EmbeddedSamples(NamedTuple):
    logical_samples: SampleSet
    chain_break_fraction: float


def decode_chains(
    physical_bits: np.ndarray, embedding: Embedding, n_logical: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Majority vote per chain; ties are settled by a coin flip from `rng`.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Logical bits `(shots, n_logical)` and the broken
        chain mask of the same shape.
    """
    shots = physical_bits.shape[0]
    logical = np.zeros((shots, n_logical), dtype=np.uint8)
    broken = np.zeros((shots, n_logical), dtype=bool)
    coins = rng.integers(0, 2, size=(shots, n_logical), dtype=np.uint8)
    for var in range(n_logical):
        chain = list(embedding.chains[var])
        ones = physical_bits[:, chain].sum(axis=1, dtype=np.int64)
        length = len(chain)
        logical[:, var] = np.where(2 * ones == length, coins[:, var], 2 * ones > length)
        broken[:, var] = (ones > 0) & (ones < length)
    return logical, broken


def sample_embedded(
    physical: IsingInstance,
    embedding: Embedding,
    schedule: SaSchedule,
    n_reads: int,
    seed: int,
    logical: IsingInstance,
    threads: Optional[int] = None,
) -> EmbeddedSamples:
    """
    Samples the physical problem with simulated annealing and decodes every read.

    Args:
        physical (IsingInstance): Output of `embed_ising`.
        embedding (Embedding): Chains used to build `physical`.
        schedule (SaSchedule): Annealing schedule of the sampler.
        n_reads (int): Number of reads.
        seed (int): Base seed of the sampler and the decoding coin flips.
        logical (IsingInstance): Logical instance used to recompute energies.
        threads (Optional[int], optional): Sampler worker threads.

    Returns:
        EmbeddedSamples: Logical samples and the fraction of broken chains.
    """
    start = time.perf_counter()
    physical_samples = simulated_annealing(physical, schedule, n_reads, seed, threads=threads)
    bits = physical_samples.shot_bitstrings()
    decoded, broken = decode_chains(
        bits, embedding, logical.n_spins, make_rng(seed, DECODE_STREAM)
    )
    chain_break_fraction = float(broken.sum()) / float(broken.size) if broken.size else 0.0
    timing = Timing(t_device=time.perf_counter() - start, quantum_device=True)
    logger.debug(
        "Embedded sampling: %d reads, chain break fraction %.4f", n_reads, chain_break_fraction
    )
    return EmbeddedSamples(
        logical_samples=SampleSet.from_samples(logical, decoded, timing=timing),
        chain_break_fraction=chain_break_fraction,
    )
