"""Exception hierarchy shared across the package."""


class NotekgError(Exception):
    """Base class for package errors."""


class ConfigError(NotekgError):
    """Bad or missing configuration (rules, templates, keyword sets, conditions)."""


class DataError(NotekgError):
    """Malformed input data (questions, checkpoints, graph files, inventories)."""


class SchemaError(DataError):
    """A persisted document violates the expected schema; message names the field path."""
