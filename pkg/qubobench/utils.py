import hashlib
import json
import logging
import os
import shutil
from pathlib import Path
from typing import Any, Optional

import numpy as np
from rich.logging import RichHandler

from qubobench.constants import MAX_THREADS

LOGGER_NAME = "qubobench"


def configure_logging(level: int = logging.INFO) -> logging.Logger:
    """
    Installs a single rich handler on the package logger.

    Args:
        level (int): Logging level for the package logger.

    Returns:
        logging.Logger: The configured package logger.
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)
    if not any(isinstance(handler, RichHandler) for handler in logger.handlers):
        logger.addHandler(RichHandler(show_path=False, markup=False))
    logger.propagate = False
    return logger


def prepare_output_dir(path_dir: Path, replace: bool = False) -> Path:
    """
    Creates an output directory. With `replace` an existing directory is removed first.

    Args:
        path_dir (Path): The directory path to be created or replaced.
        replace (bool, optional): Whether to wipe an existing directory. Defaults to False.

    Returns:
        Path: The directory path.
    """
    if replace and path_dir.exists():
        shutil.rmtree(path_dir)
    path_dir.mkdir(parents=True, exist_ok=True)
    return path_dir


def derive_seed(base_seed: int, *keys: int) -> int:
    """
    Derives an independent 63-bit seed from a base seed and integer keys.

    The derivation is a pure function of its inputs, so a record index or read
    index always maps to the same stream regardless of execution order.

    Args:
        base_seed (int): The user facing seed.
        *keys (int): Stream identifiers (experiment index, read index, ...).

    Returns:
        int: The derived seed.
    """
    entropy = [int(base_seed) % (1 << 63), *[int(key) % (1 << 63) for key in keys]]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def make_rng(base_seed: int, *keys: int) -> np.random.Generator:
    """
    Builds a numpy generator for the stream identified by `keys`.
    """
    return np.random.default_rng(derive_seed(base_seed, *keys))


def resolve_threads(threads: Optional[int] = None) -> int:
    """
    Resolves the worker pool size. Explicit values win over QUBOBENCH_THREADS.

    Args:
        threads (Optional[int]): Requested number of threads.

    Returns:
        int: A positive number of worker threads.
    """
    if threads is None:
        env_value = os.environ.get("QUBOBENCH_THREADS")
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                threads = None
    if threads is None:
        threads = min(MAX_THREADS, os.cpu_count() or 1)
    return max(1, int(threads))


def canonical_json(payload: Any) -> str:
    """
    Serializes a payload with sorted keys and no whitespace so equal payloads give equal text.
    """
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_to_builtin)


def stable_hash(payload: Any) -> str:
    """
    Returns the sha256 hex digest of the canonical json form of `payload`.
    """
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable.")
