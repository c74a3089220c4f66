"""File formats and configuration."""
from .config import RunConfig
from .cube import read_cube, write_cube
from .errors import ConfigError, DataError, FitFailureError
from .heatmap import read_heatmap, write_heatmap
from .mapfile import read_map, write_map
from .report import read_table, write_table

__all__ = [
    "RunConfig", "read_cube", "write_cube", "ConfigError", "DataError",
    "FitFailureError", "read_heatmap", "write_heatmap", "read_map",
    "write_map", "read_table", "write_table",
]
