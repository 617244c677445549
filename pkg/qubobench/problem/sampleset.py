import json
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qubobench.errors import ConfigError
from qubobench.problem.qubo import EnergyModel

Trajectory = Tuple[Tuple[float, float], ...]
MAX_PACKED_BITS = 62


@dataclass(frozen=True)
class Timing:
    """
    Runtime breakdown of one solver call, in seconds.

    `quantum_device` marks simulator backends whose device time is reported as QPU time.
    """

    t_encoding: float = 0.0
    t_latency: float = 0.0
    t_device: float = 0.0
    quantum_device: bool = False

    def __post_init__(self) -> None:
        if min(self.t_encoding, self.t_latency, self.t_device) < 0:
            raise ValueError("Timing components must be non-negative.")

    def __add__(self, other: "Timing") -> "Timing":
        return Timing(
            t_encoding=self.t_encoding + other.t_encoding,
            t_latency=self.t_latency + other.t_latency,
            t_device=self.t_device + other.t_device,
            quantum_device=self.quantum_device or other.quantum_device,
        )


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """
    Packs rows of bits into integers with bit 0 as the most significant one, so that
    integer order equals lexicographic bitstring order.
    """
    n = bits.shape[1]
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def unpack_bits(codes: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(codes, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def _unique_rows(bits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if bits.shape[0] == 0:
        return bits.reshape(0, bits.shape[1]).astype(np.uint8), np.zeros(0, dtype=np.int64)
    if 0 < bits.shape[1] <= MAX_PACKED_BITS:
        codes, counts = np.unique(pack_bits(bits), return_counts=True)
        return unpack_bits(codes, bits.shape[1]), counts.astype(np.int64)
    rows, counts = np.unique(bits.astype(np.uint8), axis=0, return_counts=True)
    return rows, counts.astype(np.int64)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Multiset of sampled bitstrings with their energies and multiplicities.

    Distinct bitstrings are stored once, in lexicographic order.
    """

    n_vars: int
    bitstrings: np.ndarray
    energies: np.ndarray
    counts: np.ndarray
    timing: Timing = field(default_factory=Timing)
    trajectory: Trajectory = ()

    def __post_init__(self) -> None:
        if len(self.bitstrings) != len(self.energies) or len(self.energies) != len(self.counts):
            raise ValueError("Bitstrings, energies and counts must have equal length.")
        if np.any(np.asarray(self.counts) <= 0):
            raise ValueError("Multiplicities must be positive.")

    @classmethod
    def from_samples(
        cls,
        model: EnergyModel,
        samples: np.ndarray,
        timing: Optional[Timing] = None,
        trajectory: Trajectory = (),
    ) -> "SampleSet":
        """
        Aggregates raw per-shot bitstrings into a canonical sample set.

        Args:
            model (EnergyModel): Instance used to compute the energies.
            samples (np.ndarray): `(shots, n_vars)` 0/1 array.
            timing (Optional[Timing]): Runtime breakdown. Defaults to zeros.
            trajectory (Trajectory): Optional best-energy trajectory.

        Returns:
            SampleSet: The aggregated sample set.
        """
        samples = np.asarray(samples)
        n_vars = model.n_vars
        samples = samples.reshape(-1, n_vars)
        rows, counts = _unique_rows(samples)
        energies = model.energies(rows) if len(rows) else np.zeros(0)
        return cls(
            n_vars=n_vars,
            bitstrings=rows,
            energies=np.asarray(energies, dtype=np.float64),
            counts=counts,
            timing=timing or Timing(),
            trajectory=tuple(trajectory),
        )

    @classmethod
    def empty(cls, n_vars: int, timing: Optional[Timing] = None) -> "SampleSet":
        return cls(
            n_vars=n_vars,
            bitstrings=np.zeros((0, n_vars), dtype=np.uint8),
            energies=np.zeros(0),
            counts=np.zeros(0, dtype=np.int64),
            timing=timing or Timing(),
        )

    @property
    def n_shots_total(self) -> int:
        return int(np.sum(self.counts))

    @property
    def records(self) -> List[Tuple[Tuple[int, ...], float, int]]:
        return [
            (tuple(int(bit) for bit in bits), float(energy), int(count))
            for bits, energy, count in zip(self.bitstrings, self.energies, self.counts)
        ]

    def __len__(self) -> int:
        return len(self.counts)

    def is_empty(self) -> bool:
        return self.n_shots_total == 0

    def shot_energies(self) -> np.ndarray:
        """
        Energies expanded by multiplicity.
        """
        return np.repeat(self.energies, self.counts)

    def shot_bitstrings(self) -> np.ndarray:
        return np.repeat(self.bitstrings, self.counts, axis=0)

    def zero_counts(self) -> np.ndarray:
        return self.n_vars - self.bitstrings.sum(axis=1, dtype=np.int64)

    def lowest(self) -> Tuple[np.ndarray, float]:
        index = int(np.argmin(self.energies))
        return self.bitstrings[index], float(self.energies[index])

    def filter(self, mask: np.ndarray) -> "SampleSet":
        mask = np.asarray(mask, dtype=bool)
        return replace(
            self,
            bitstrings=self.bitstrings[mask],
            energies=self.energies[mask],
            counts=self.counts[mask],
        )

    def with_timing(self, timing: Timing) -> "SampleSet":
        return replace(self, timing=timing)

    def verify_energies(self, model: EnergyModel, tolerance: float = 1e-9) -> bool:
        if not len(self):
            return True
        return bool(np.allclose(model.energies(self.bitstrings), self.energies, atol=tolerance))

    @classmethod
    def concatenate(cls, sample_sets: Sequence["SampleSet"]) -> "SampleSet":
        """
        Pools shots of several sample sets; timings are summed.

        Raises:
            ValueError: On an empty sequence or mismatching variable counts.
        """
        if not sample_sets:
            raise ValueError("Nothing to concatenate.")
        n_vars = sample_sets[0].n_vars
        if any(sample_set.n_vars != n_vars for sample_set in sample_sets):
            raise ValueError("Sample sets disagree on the number of variables.")
        bitstrings = np.concatenate([s.bitstrings for s in sample_sets]).astype(np.uint8)
        energies = np.concatenate([s.energies for s in sample_sets])
        counts = np.concatenate([s.counts for s in sample_sets])
        timing = Timing()
        for sample_set in sample_sets:
            timing = timing + sample_set.timing
        if len(bitstrings) == 0:
            return cls.empty(n_vars, timing)
        if n_vars <= MAX_PACKED_BITS:
            codes = pack_bits(bitstrings)
            unique_codes, first, inverse = np.unique(
                codes, return_index=True, return_inverse=True
            )
            rows = bitstrings[first]
        else:
            rows, first, inverse = np.unique(
                bitstrings, axis=0, return_index=True, return_inverse=True
            )
        merged = np.zeros(len(rows), dtype=np.int64)
        np.add.at(merged, np.ravel(inverse), counts)
        return cls(
            n_vars=n_vars,
            bitstrings=rows,
            energies=energies[first],
            counts=merged,
            timing=timing,
        )

    def to_jsonl(self) -> str:
        """
        One json object per distinct bitstring.
        """
        lines = [
            json.dumps(
                {
                    "bitstring": "".join(str(int(bit)) for bit in bits),
                    "energy": float(energy),
                    "count": int(count),
                }
            )
            for bits, energy, count in zip(self.bitstrings, self.energies, self.counts)
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(
        cls, text: str, n_vars: int, timing: Optional[Timing] = None
    ) -> "SampleSet":
        rows: List[List[int]] = []
        energies: List[float] = []
        counts: List[int] = []
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                bitstring = str(record["bitstring"])
                if set(bitstring) - {"0", "1"}:
                    raise ValueError(f"bitstring '{bitstring}' is not made of 0 and 1")
                if len(bitstring) != n_vars:
                    raise ValueError(f"bitstring has {len(bitstring)} bits, expected {n_vars}")
                count = int(record["count"])
                if count < 1:
                    raise ValueError(f"count {count} is not positive")
                rows.append([int(char) for char in bitstring])
                energies.append(float(record["energy"]))
                counts.append(count)
            except (KeyError, ValueError, TypeError) as error:
                raise ConfigError(f"Line {line_number}: malformed sample record ({error}).")
        if not rows:
            return cls.empty(n_vars, timing)
        return cls(
            n_vars=n_vars,
            bitstrings=np.array(rows, dtype=np.uint8),
            energies=np.array(energies),
            counts=np.array(counts, dtype=np.int64),
            timing=timing or Timing(),
        )


def iter_energy_counts(sample_set: SampleSet) -> Iterable[Tuple[float, int]]:
    """
    Yields (energy, shots) pairs grouped by energy value, lowest first.
    """
    if not len(sample_set):
        return
    rounded = np.round(sample_set.energies, 9)
    values, inverse = np.unique(rounded, return_inverse=True)
    totals = np.zeros(len(values), dtype=np.int64)
    np.add.at(totals, np.ravel(inverse), sample_set.counts)
    for value, total in zip(values, totals):
        yield float(value), int(total)
