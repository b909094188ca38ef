"""Shared exception types. The CLI maps ConfigError to exit code 2 and the
runtime faults to exit code 3."""


class ConfigError(ValueError):
    """Invalid configuration value, unknown key, or cross-field violation."""


class DomainError(ValueError):
    """Query outside the simulated domain."""


class DegenerateGeometryError(ValueError):
    """Geometry with no information content (e.g. coincident vehicles)."""


class SimulationFault(RuntimeError):
    """Numerical blow-up or NaN detected while stepping a simulation."""


class TrainingFault(RuntimeError):
    """Non-finite loss or gradient during a learner update."""


class CheckpointError(RuntimeError):
    """Unreadable, truncated, or incompatible checkpoint file."""
