import logging
from typing import Callable, List, NamedTuple

import numpy as np

from qubobench.constants import ENERGY_TOLERANCE
from qubobench.problem.lattice import build_supercell
from qubobench.problem.qubo import QuboInstance, build_qubo, constrained_extrema, to_ising
from qubobench.problem.sampleset import unpack_bits
from qubobench.solvers.classical import brute_force
from qubobench.solvers.embedding import (
    chimera_topology,
    clique_embedding,
    validate_embedding,
)
from qubobench.utils import make_rng

logger = logging.getLogger(__name__)

# Known answers of the three vacancy instance on the 3 x 3 supercell
GROUND_ENERGY_18 = -20.0
DEGENERACY_18 = 54


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_ground_energy() -> CheckResult:
    instance = build_qubo(build_supercell(3), 1.0, 3.0, 3)
    e_min, _, _ = constrained_extrema(instance)
    passed = abs(e_min - GROUND_ENERGY_18) <= ENERGY_TOLERANCE
    return CheckResult("ground energy (18 sites)", passed, f"e_min = {e_min:g}, expected -20")


def check_degeneracy() -> CheckResult:
    instance = build_qubo(build_supercell(3), 1.0, 3.0, 3)
    _, _, n_ground = constrained_extrema(instance)
    passed = n_ground == DEGENERACY_18
    return CheckResult("ground degeneracy (18 sites)", passed, f"{n_ground} states, expected 54")


def check_ising_equivalence(n_vars: int = 12, seed: int = 0) -> CheckResult:
    rng = make_rng(seed)
    q_upper = np.triu(rng.normal(size=(n_vars, n_vars)))
    instance = QuboInstance(n_vars=n_vars, q_upper=q_upper, constant_offset=float(rng.normal()))
    bits = unpack_bits(np.arange(1 << n_vars, dtype=np.int64), n_vars)
    delta = np.abs(instance.energies(bits) - to_ising(instance).energies(bits)).max()
    passed = delta < ENERGY_TOLERANCE
    return CheckResult("QUBO / Ising equivalence", passed, f"max |dE| = {delta:.3g}")


def check_brute_force_oracle() -> CheckResult:
    # A penalty above the maximum degree makes the global minimum feasible
    instance = build_qubo(build_supercell(2), 1.0, 5.0, 3)
    e_min, _, _ = constrained_extrema(instance)
    result = brute_force(instance)
    passed = abs(result.e_opt - e_min) <= ENERGY_TOLERANCE
    return CheckResult(
        "brute force vs constrained oracle",
        passed,
        f"brute {result.e_opt:g}, oracle {e_min:g}",
    )


def check_clique_embedding() -> CheckResult:
    n_vars = 18
    topo = chimera_topology(5, 4)
    embedding = clique_embedding(n_vars, topo)
    edges = [(i, j) for i in range(n_vars) for j in range(i + 1, n_vars)]
    violations = validate_embedding(embedding, edges, topo)
    lengths = set(embedding.chain_lengths().values())
    passed = not violations and lengths == {6}
    detail = "; ".join(violations) if violations else f"chain lengths {sorted(lengths)}"
    return CheckResult("clique embedding of K18 on C(5,5,4)", passed, detail)


ORACLE_CHECKS: List[Callable[[], CheckResult]] = [
    check_ground_energy,
    check_degeneracy,
    check_ising_equivalence,
    check_brute_force_oracle,
    check_clique_embedding,
]


def run_oracle_checks() -> List[CheckResult]:
    results = [check() for check in ORACLE_CHECKS]
    for result in results:
        logger.info("%s: %s (%s)", result.name, "ok" if result.passed else "FAILED", result.detail)
    return results
