"""Exception taxonomy shared across the package.

The CLI maps these onto its exit-code contract: usage-shaped errors exit 2,
verification failures exit 1, anything else exits 3.
"""


class HeroSignError(Exception):
    """Base class for all package errors."""


class UsageError(HeroSignError):
    """Caller violated an argument or value contract."""


class ConfigError(UsageError):
    """Invalid parameter set, layout, or tuning configuration."""


class FormatError(UsageError):
    """Serialized keys, signatures, or config files have the wrong shape."""


class TuningError(HeroSignError):
    """The tuning search could not produce a feasible candidate."""


class GraphExecutionError(HeroSignError):
    """One or more task-graph nodes failed during batch execution."""

    def __init__(self, failures):
        # failures: list of (graph_id, message_index, exception)
        self.failures = failures
        detail = ", ".join(
            f"graph {g} message {m}: {e!r}" for g, m, e in failures
        )
        super().__init__(f"aborted graphs: {detail}")
