from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import networkx as nx
import numpy as np

from qubobench.errors import ConfigError, GuardError

Edge = Tuple[int, int]


@dataclass(frozen=True)
class LatticeGraph:
    """
    Undirected simple graph over `n_sites` vertices.

    Generated supercells carry `supercell_dim`; graphs loaded from text carry `None`.
    """

    n_sites: int
    edges: FrozenSet[Edge]
    supercell_dim: Optional[int] = None
    _neighbors: Dict[int, Tuple[int, ...]] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        neighbors: Dict[int, List[int]] = {site: [] for site in range(self.n_sites)}
        for i, j in self.edges:
            neighbors[i].append(j)
            neighbors[j].append(i)
        self._neighbors.update(
            {site: tuple(sorted(adjacent)) for site, adjacent in neighbors.items()}
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def neighbors(self, site: int) -> Tuple[int, ...]:
        return self._neighbors[site]

    def degrees(self) -> np.ndarray:
        return np.array(
            [len(self._neighbors[site]) for site in range(self.n_sites)], dtype=np.int64
        )

    def adjacency(self) -> np.ndarray:
        """
        Dense symmetric 0/1 adjacency matrix A.

        Returns:
            np.ndarray: An `(N, N)` integer matrix.
        """
        matrix = np.zeros((self.n_sites, self.n_sites), dtype=np.int64)
        for i, j in self.edges:
            matrix[i, j] = 1
            matrix[j, i] = 1
        return matrix

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_sites))
        graph.add_edges_from(self.sorted_edges())
        return graph

    def is_connected(self) -> bool:
        return self.n_sites > 0 and nx.is_connected(self.to_networkx())

    def is_bipartite(self) -> bool:
        return nx.is_bipartite(self.to_networkx())

    def sublattices(self) -> Tuple[List[int], List[int]]:
        """
        Splits the sites of a generated supercell into its two sublattices.

        Returns:
            Tuple[List[int], List[int]]: Sites with sublattice index 0 and 1.
        """
        if self.supercell_dim is None:
            left, right = nx.bipartite.sets(self.to_networkx())
            return sorted(left), sorted(right)
        return list(range(0, self.n_sites, 2)), list(range(1, self.n_sites, 2))

    def to_edge_list_text(self, header: str = "N") -> str:
        lines = [f"{header} {self.n_sites}"]
        lines.extend(f"{i} {j}" for i, j in self.sorted_edges())
        return "\n".join(lines) + "\n"


def site_index(row: int, col: int, sublattice: int, supercell_dim: int) -> int:
    """
    Row-major index over unit cells, sublattice-minor.
    """
    return 2 * (row * supercell_dim + col) + sublattice


def build_supercell(supercell_dim: int) -> LatticeGraph:
    """
    Builds the periodic n x n graphene supercell as a 3-regular bipartite graph.

    Every unit cell holds sites A (0) and B (1). Site A of cell (r, c) bonds to B of the
    same cell, B of cell (r, c - 1) and B of cell (r - 1, c), with coordinates taken
    modulo the supercell dimension.

    Args:
        supercell_dim (int): Number of unit cells along each lattice vector.

    Returns:
        LatticeGraph: Graph with N = 2 * supercell_dim ** 2 sites.

    Raises:
        GuardError: If `supercell_dim` is smaller than 2 (degenerate periodic wrap).
    """
    if supercell_dim < 2:
        raise GuardError(
            f"Supercell dimension {supercell_dim} gives a degenerate periodic wrap. "
            "Use a dimension of at least 2."
        )
    dim = supercell_dim
    edges = set()
    for row in range(dim):
        for col in range(dim):
            site_a = site_index(row, col, 0, dim)
            for b_row, b_col in ((row, col), (row, (col - 1) % dim), ((row - 1) % dim, col)):
                site_b = site_index(b_row, b_col, 1, dim)
                edges.add((min(site_a, site_b), max(site_a, site_b)))
    return LatticeGraph(n_sites=2 * dim * dim, edges=frozenset(edges), supercell_dim=dim)


def load_graph(edge_list_text: str, header: str = "N") -> LatticeGraph:
    """
    Parses the edge-list text format: a `N <count>` header then one `i j` pair per line.

    Blank lines and `#` comments are ignored. Degrees are not checked.

    Args:
        edge_list_text (str): The text to parse.
        header (str, optional): Expected header keyword. Defaults to "N".

    Returns:
        LatticeGraph: Graph with exactly the listed edges.

    Raises:
        ConfigError: On a malformed line, out of range index, self-loop or duplicate pair.
    """
    n_sites: Optional[int] = None
    edges = set()
    for line_number, raw_line in enumerate(edge_list_text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if n_sites is None:
            if len(tokens) != 2 or tokens[0] != header or not tokens[1].isdigit():
                raise ConfigError(
                    f"Line {line_number}: expected header '{header} <count>', got '{line}'."
                )
            n_sites = int(tokens[1])
            if n_sites < 1:
                raise ConfigError(f"Line {line_number}: vertex count must be positive.")
            continue
        if len(tokens) != 2:
            raise ConfigError(f"Line {line_number}: expected 'i j', got '{line}'.")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ConfigError(f"Line {line_number}: indices must be integers, got '{line}'.")
        if i < 0 or j < 0 or i >= n_sites or j >= n_sites:
            raise ConfigError(
                f"Line {line_number}: index out of range for {n_sites} vertices in '{line}'."
            )
        if i == j:
            raise ConfigError(f"Line {line_number}: self-loop on vertex {i}.")
        edge = (min(i, j), max(i, j))
        if edge in edges:
            raise ConfigError(f"Line {line_number}: duplicate edge {edge}.")
        edges.add(edge)
    if n_sites is None:
        raise ConfigError(f"Missing '{header} <count>' header.")
    return LatticeGraph(n_sites=n_sites, edges=frozenset(edges))
