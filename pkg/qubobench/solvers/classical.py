import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse

from qubobench.constants import (
    BRUTE_FORCE_BLOCK_BITS,
    BRUTE_FORCE_MAX_VARS,
    DRIFT_AUDIT_FLIPS,
    DRIFT_TOLERANCE,
    ENERGY_TOLERANCE,
    SA_BETA_MAX,
    SA_BETA_MIN,
    SA_RANDOM_BUFFER,
    SA_SWEEPS,
)
from qubobench.errors import ConfigError, GuardError
from qubobench.problem.qubo import EnergyModel, QuboInstance, as_qubo
from qubobench.problem.sampleset import SampleSet, Timing, unpack_bits
from qubobench.utils import make_rng, resolve_threads

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ["geometric"]
# Stream keys of the per-read and sweep order generators
READ_STREAM = 0
ORDER_STREAM = 1


@dataclass(frozen=True)
class SaSchedule:
    """
    Inverse temperature schedule of simulated annealing, one beta per sweep.
    """

    beta_min: float = SA_BETA_MIN
    beta_max: float = SA_BETA_MAX
    n_sweeps: int = SA_SWEEPS
    schedule_kind: str = "geometric"

    def __post_init__(self) -> None:
        if self.beta_min <= 0 or self.beta_max <= 0:
            raise GuardError("Inverse temperatures must be positive.")
        if self.beta_min > self.beta_max:
            raise GuardError(
                f"beta_min={self.beta_min} must not exceed beta_max={self.beta_max}."
            )
        if self.n_sweeps < 1:
            raise GuardError(f"At least one sweep is required, got {self.n_sweeps}.")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ConfigError(
                f"Unknown schedule '{self.schedule_kind}'. Choose one of {SCHEDULE_KINDS}."
            )

    @classmethod
    def geometric(
        cls,
        beta_min: float = SA_BETA_MIN,
        beta_max: float = SA_BETA_MAX,
        n_sweeps: int = SA_SWEEPS,
    ) -> "SaSchedule":
        return cls(beta_min=beta_min, beta_max=beta_max, n_sweeps=n_sweeps)

    def betas(self) -> np.ndarray:
        """
        beta_t = beta_min * (beta_max / beta_min) ** (t / (n_sweeps - 1)).

        Equal bounds give a constant temperature and a single sweep uses beta_min.
        """
        return np.geomspace(self.beta_min, self.beta_max, self.n_sweeps)


class BruteForceResult(NamedTuple):
    x_opt: np.ndarray
    e_opt: float
    elapsed: float

    def to_sampleset(self, model: EnergyModel) -> SampleSet:
        return SampleSet.from_samples(
            model,
            self.x_opt[None, :],
            timing=Timing(t_device=self.elapsed),
            trajectory=((self.elapsed, self.e_opt),),
        )


def brute_force(instance: EnergyModel) -> BruteForceResult:
    """
    Exhaustive search over all 2^N bitstrings.

    Variables are split into a high block enumerated one assignment at a time and a low
    block of up to 2^16 bitstrings evaluated at once. Blocks are visited in increasing
    order and only a strictly lower energy replaces the incumbent, so ties resolve to the
    lexicographically smallest bitstring.

    Args:
        instance (EnergyModel): QUBO or Ising instance.

    Returns:
        BruteForceResult: Optimal bitstring, its energy and the search time.

    Raises:
        GuardError: If N exceeds the brute force guard.
    """
    n = instance.n_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise GuardError(
            f"Brute force over {n} variables exceeds the guard of {BRUTE_FORCE_MAX_VARS}."
        )
    start = time.perf_counter()
    qubo = as_qubo(instance)
    q_upper = qubo.q_upper
    n_low = min(n, BRUTE_FORCE_BLOCK_BITS)
    n_high = n - n_low

    low_bits = unpack_bits(np.arange(1 << n_low), n_low).astype(np.float64)
    q_low = q_upper[n_high:, n_high:]
    low_energies = np.einsum("bi,bi->b", low_bits @ q_low, low_bits)
    q_cross = q_upper[:n_high, n_high:]
    q_high = q_upper[:n_high, :n_high]

    best_energy, best_code = np.inf, 0
    for high_code in range(1 << n_high):
        if n_high:
            high = unpack_bits(np.array([high_code]), n_high)[0].astype(np.float64)
            energies = low_energies + low_bits @ (high @ q_cross) + high @ q_high @ high
        else:
            energies = low_energies
        index = int(np.argmin(energies))
        if energies[index] < best_energy - ENERGY_TOLERANCE:
            best_energy = float(energies[index])
            best_code = (high_code << n_low) | index

    x_opt = unpack_bits(np.array([best_code]), n)[0]
    elapsed = time.perf_counter() - start
    e_opt = best_energy + qubo.constant_offset
    logger.debug("Brute force over %d variables: e_opt=%g in %.3fs", n, e_opt, elapsed)
    return BruteForceResult(x_opt=x_opt, e_opt=float(e_opt), elapsed=elapsed)


def random_sampling(instance: EnergyModel, n_samples: int, seed: int) -> SampleSet:
    """
    Draws `n_samples` iid uniform bitstrings from a single seeded generator.

    Samples are generated in chunks that bound the memory footprint. The trajectory
    stores the best energy seen after each chunk.
    """
    if n_samples < 1:
        raise GuardError(f"At least one sample is required, got {n_samples}.")
    n = instance.n_vars
    rng = make_rng(seed)
    chunk = max(1, SA_RANDOM_BUFFER // max(n, 1))
    start = time.perf_counter()
    parts: List[SampleSet] = []
    trajectory: List[Tuple[float, float]] = []
    best = np.inf
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        bits = rng.integers(0, 2, size=(size, n), dtype=np.uint8)
        part = SampleSet.from_samples(instance, bits)
        parts.append(part)
        best = min(best, float(part.energies.min()))
        trajectory.append((time.perf_counter() - start, best))
        remaining -= size
    merged = SampleSet.concatenate(parts)
    elapsed = time.perf_counter() - start
    logger.debug("Random sampling: %d samples in %.3fs", n_samples, elapsed)
    return SampleSet(
        n_vars=n,
        bitstrings=merged.bitstrings,
        energies=merged.energies,
        counts=merged.counts,
        timing=Timing(t_device=elapsed),
        trajectory=tuple(trajectory),
    )


class _BatchResult(NamedTuple):
    samples: np.ndarray
    sweep_elapsed: np.ndarray
    sweep_best: np.ndarray


@dataclass(frozen=True, eq=False)
class _MetropolisKernel:
    """
    Single-flip Metropolis dynamics on a QUBO, vectorised over reads.

    The symmetric off-diagonal couplings are split into a uniform all-to-all value `c`
    plus a sparse residual R. For variable i the flip cost is
    (1 - 2 x_i) (Q_ii + c (sum(x) - x_i) + (x R)_i), and only the columns of R's row i
    change after a flip.
    """

    qubo: QuboInstance
    diagonal: np.ndarray
    uniform: float
    residual: sparse.csr_matrix
    rows: Tuple[Tuple[np.ndarray, np.ndarray], ...]

    @classmethod
    def from_qubo(cls, qubo: QuboInstance) -> "_MetropolisKernel":
        n = qubo.n_vars
        off_diagonal = np.triu(qubo.q_upper, k=1)
        uniform = 0.0
        if n > 1:
            values, counts = np.unique(off_diagonal[np.triu_indices(n, k=1)], return_counts=True)
            uniform = float(values[np.argmax(counts)])
        symmetric = off_diagonal + off_diagonal.T
        residual_dense = symmetric - uniform * (np.ones((n, n)) - np.eye(n))
        residual = sparse.csr_matrix(residual_dense)
        rows = tuple(
            (
                residual.indices[residual.indptr[i] : residual.indptr[i + 1]].copy(),
                residual.data[residual.indptr[i] : residual.indptr[i + 1]].copy(),
            )
            for i in range(n)
        )
        return cls(
            qubo=qubo,
            diagonal=np.diag(qubo.q_upper).copy(),
            uniform=uniform,
            residual=residual,
            rows=rows,
        )

    def _fields(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.residual @ states.T).T, states.sum(axis=1)

    def run(
        self,
        read_indices: range,
        schedule: SaSchedule,
        seed: int,
        random_order: bool,
        record_best: bool,
        start: float,
    ) -> _BatchResult:
        n = self.qubo.n_vars
        n_reads = len(read_indices)
        rngs = [make_rng(seed, READ_STREAM, read) for read in read_indices]
        order_rng = make_rng(seed, ORDER_STREAM) if random_order else None

        states = np.stack(
            [rng.integers(0, 2, size=n, dtype=np.int8) for rng in rngs]
        ).astype(np.float64).reshape(n_reads, n)
        fields, totals = self._fields(states)
        energies = self.qubo.energies(states)
        best_energies = energies.copy()
        best_states = states.copy()

        betas = schedule.betas()
        chunk = max(1, SA_RANDOM_BUFFER // max(n_reads * n, 1))
        sweep_elapsed = np.zeros(schedule.n_sweeps)
        sweep_best = np.zeros(schedule.n_sweeps)
        flips_since_audit = 0
        order = np.arange(n)
        uniforms = np.zeros((0, n_reads, n))

        for sweep, beta in enumerate(betas):
            offset = sweep % chunk
            if offset == 0:
                size = min(chunk, schedule.n_sweeps - sweep)
                uniforms = np.stack([rng.random((size, n)) for rng in rngs], axis=1)
            if order_rng is not None:
                order = order_rng.permutation(n)
            draws = uniforms[offset]
            for position, i in enumerate(order):
                column = states[:, i]
                local = self.diagonal[i] + self.uniform * (totals - column) + fields[:, i]
                delta = (1.0 - 2.0 * column) * local
                accept = draws[:, position] < np.exp(-beta * np.maximum(delta, 0.0))
                if not accept.any():
                    continue
                step = accept * (1.0 - 2.0 * column)
                states[:, i] += step
                totals += step
                energies += accept * delta
                columns, values = self.rows[i]
                if columns.size:
                    fields[:, columns] += step[:, None] * values
                flips_since_audit += int(accept.sum())
            if record_best:
                improved = energies < best_energies
                best_energies[improved] = energies[improved]
                best_states[improved] = states[improved]
            else:
                np.minimum(best_energies, energies, out=best_energies)
            sweep_best[sweep] = best_energies.min()
            sweep_elapsed[sweep] = time.perf_counter() - start
            if flips_since_audit >= DRIFT_AUDIT_FLIPS:
                fields, totals, energies = self._audit(states, fields, totals, energies)
                flips_since_audit = 0

        samples = best_states if record_best else states
        return _BatchResult(samples.astype(np.uint8), sweep_elapsed, sweep_best)

    def _audit(
        self,
        states: np.ndarray,
        fields: np.ndarray,
        totals: np.ndarray,
        energies: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        exact_fields, exact_totals = self._fields(states)
        exact_energies = self.qubo.energies(states)
        drift = max(
            float(np.max(np.abs(exact_fields - fields), initial=0.0)),
            float(np.max(np.abs(exact_totals - totals), initial=0.0)),
            float(np.max(np.abs(exact_energies - energies), initial=0.0)),
        )
        if drift > DRIFT_TOLERANCE:
            raise RuntimeError(
                f"Incremental energy bookkeeping drifted by {drift:.3g} "
                f"(tolerance {DRIFT_TOLERANCE})."
            )
        return exact_fields, exact_totals, exact_energies


def simulated_annealing(
    instance: EnergyModel,
    schedule: SaSchedule,
    n_reads: int,
    seed: int,
    random_order: bool = False,
    record_best: bool = False,
    threads: Optional[int] = None,
) -> SampleSet:
    """
    Metropolis simulated annealing with a geometric inverse temperature schedule.

    Every read starts from its own uniform random bitstring and performs `n_sweeps`
    sweeps; within a sweep each variable is visited once in ascending index order (or a
    per-sweep permutation shared by all reads with `random_order`). Reads draw all their
    randomness from a generator seeded by (seed, read index), so the result does not
    depend on how reads are split over worker threads.

    Args:
        instance (EnergyModel): QUBO or Ising instance.
        schedule (SaSchedule): Inverse temperature schedule.
        n_reads (int): Number of independent reads.
        seed (int): Base seed.
        random_order (bool, optional): Random sweep order. Defaults to False.
        record_best (bool, optional): Record the best state seen per read instead of the
            final one. Defaults to False.
        threads (Optional[int], optional): Worker threads over read batches.

    Returns:
        SampleSet: One shot per read, with a per-sweep best energy trajectory.
    """
    if n_reads < 1:
        raise GuardError(f"At least one read is required, got {n_reads}.")
    start = time.perf_counter()
    kernel = _MetropolisKernel.from_qubo(as_qubo(instance))
    n_threads = min(resolve_threads(threads), n_reads)
    bounds = np.linspace(0, n_reads, n_threads + 1).astype(int)
    batches = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=len(batches)) as executor:
        futures = [
            executor.submit(
                kernel.run, batch, schedule, seed, random_order, record_best, start
            )
            for batch in batches
        ]
        results = [future.result() for future in futures]
    samples = np.concatenate([result.samples for result in results])
    sweep_elapsed = np.max([result.sweep_elapsed for result in results], axis=0)
    sweep_best = np.minimum.accumulate(
        np.min([result.sweep_best for result in results], axis=0)
    )
    elapsed = time.perf_counter() - start
    logger.debug(
        "Simulated annealing: %d reads x %d sweeps over %d variables in %.3fs",
        n_reads,
        schedule.n_sweeps,
        instance.n_vars,
        elapsed,
    )
    return SampleSet.from_samples(
        instance,
        samples,
        timing=Timing(t_device=elapsed),
        trajectory=tuple(zip(sweep_elapsed.tolist(), sweep_best.tolist())),
    )
