"""Temporal correlation functions of a dichotomic observable: measurement
protocols, decoherent-histories structure and Leggett-Garg tests against
classical macrorealist baselines."""

from .errors import ConfigError, InvalidInputError, NotDecoherentError, UndefinedMappingError
from .qcore import Operator, QuantumState, SpinModel, heisenberg, projector, unitary

__all__ = [
    "ConfigError",
    "InvalidInputError",
    "NotDecoherentError",
    "UndefinedMappingError",
    "Operator",
    "QuantumState",
    "SpinModel",
    "heisenberg",
    "projector",
    "unitary",
]
__version__ = "0.1.0"
