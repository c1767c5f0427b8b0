"""Architecture search for spatio-temporal graph convolutional networks."""

from .errors import (
    ArgumentError,
    ConfigError,
    DataError,
    GcnnasError,
    NumericalError,
    ParseError,
    StructuralError,
)
from .modules import ModuleKind
from .supernet import Network, SupernetConfig, desk_config, finalize_network, full_config
from .tensor import Parameter, Tensor

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DataError",
    "GcnnasError",
    "ModuleKind",
    "Network",
    "NumericalError",
    "Parameter",
    "ParseError",
    "StructuralError",
    "SupernetConfig",
    "Tensor",
    "desk_config",
    "finalize_network",
    "full_config",
    "__version__",
]
