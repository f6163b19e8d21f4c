"""Exception types shared across the package."""


class EmodasError(Exception):
    """Base class for all errors raised by this package."""


class InputDataError(EmodasError):
    """Malformed input data (bad triple, bad CSV row, empty dataset)."""


class TokenLookupError(EmodasError):
    """A requested token is not present in the structure being queried."""

    def __init__(self, token: str, where: str = "network"):
        self.token = token
        super().__init__(f"token {token!r} not found in {where}")


class UndefinedValueError(EmodasError):
    """The requested quantity is mathematically undefined for this input."""


class ConfigurationError(EmodasError):
    """Invalid or incomplete configuration."""


class DimensionError(EmodasError):
    """Array/vector shape does not match what the model expects."""


class DivergenceError(EmodasError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, learning_rate: float):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning_rate={learning_rate}); "
            "reduce the learning rate"
        )
