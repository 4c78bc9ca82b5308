"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """A caller broke a documented precondition."""


class DegenerateTrack(ValueError):
    """A track collapsed below two distinct positions."""

    def __init__(self, traj_id, message=None):
        self.traj_id = traj_id
        super().__init__(message or f"track {traj_id!r} has fewer than 2 distinct positions")


class DataError(Exception):
    """Input data is unusable (empty file, duplicate timestamps, ...)."""


class ParseError(DataError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(Exception):
    """Pipeline configuration failed validation."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; indicates a bug."""


class UndefinedMetric(ValueError):
    """Metric is not defined for the given labelling (e.g. fewer than 2 clusters)."""


class NoOutliers(LookupError):
    """A cluster had no outliers assigned, so mu_min does not exist."""
