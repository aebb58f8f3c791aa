"""Exception types shared across the package."""


class DfsimError(Exception):
    """Base class for dfsim errors."""


class ConfigError(DfsimError):
    """An experiment configuration is invalid. Message names the offending field."""


class NumericalContractError(DfsimError):
    """A numerical invariant (completeness, unitarity, positivity) was violated
    beyond its documented tolerance."""
