"""Error taxonomy mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid configuration (exit code 2)."""


class DataError(Exception):
    """Invalid or corrupt data file (exit code 3)."""


class FitFailureError(Exception):
    """Too many per-pixel fit failures (exit code 4)."""
