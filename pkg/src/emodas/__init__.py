"""emodas: estimate depression, anxiety and stress levels from emotional
word sequences, using distances over a free-association semantic network.

The package builds the network from cue/response counts, turns 10-word
emotional recalls into distance-based feature vectors, trains a small
feed-forward regressor per construct, and applies the result to raw text
through a negation-aware semantic parser.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    EmodasError,
    InputDataError,
    TokenLookupError,
    UndefinedValueError,
)

__all__ = [
    "__version__",
    "EmodasError",
    "InputDataError",
    "TokenLookupError",
    "UndefinedValueError",
    "ConfigurationError",
    "DimensionError",
    "DivergenceError",
]
