from qubobench.constants import EXIT_CONFIG, EXIT_GUARD, EXIT_NO_EMBEDDING


class QuboBenchError(Exception):
    """Base class of every error raised on purpose by qubobench."""

    exit_code = 1


class GuardError(QuboBenchError, ValueError):
    """A tractability, memory or precondition guard was violated."""

    exit_code = EXIT_GUARD


class EmbeddingError(QuboBenchError):
    """An embedding is invalid or cannot be constructed on the topology."""

    exit_code = EXIT_NO_EMBEDDING


class ConfigError(QuboBenchError, ValueError):
    """Malformed input: config files, instance files or unknown options."""

    exit_code = EXIT_CONFIG


class MetricError(QuboBenchError, ValueError):
    """A metric is undefined for the given samples."""
