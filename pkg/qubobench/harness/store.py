import json
import logging
from pathlib import Path
from typing import Iterable, List, Union

from qubobench.errors import ConfigError
from qubobench.harness.records import ExperimentRecord
from qubobench.utils import canonical_json

logger = logging.getLogger(__name__)


class ExperimentStore:
    """
    Append-only JSONL store, one experiment record per line.

    A store has a single writer: the harness hands it completed records in index order.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)

    def append(self, record: ExperimentRecord) -> None:
        self.append_all([record])

    def append_all(self, records: Iterable[ExperimentRecord]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        written = 0
        with open(self.path, "a", encoding="utf-8") as file:
            for record in records:
                file.write(canonical_json(record.to_dict()) + "\n")
                file.flush()
                written += 1
        logger.debug("Appended %d records to %s", written, self.path)

    def load(self) -> List[ExperimentRecord]:
        """
        Reads every record of the store. A missing file is an empty store.

        Raises:
            ConfigError: On a line that is not a valid record, naming the line number.
        """
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as file:
            for line_number, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                try:
                    payload = json.loads(line)
                except json.JSONDecodeError as error:
                    raise ConfigError(
                        f"{self.path}:{line_number}: invalid json ({error.msg})."
                    ) from error
                try:
                    records.append(ExperimentRecord.from_dict(payload))
                except ConfigError as error:
                    raise ConfigError(f"{self.path}:{line_number}: {error}") from error
        return records

    def __len__(self) -> int:
        """Number of non-blank lines, without parsing them."""
        if not self.path.exists():
            return 0
        with open(self.path, encoding="utf-8") as file:
            return sum(1 for line in file if line.strip())
