class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class BudgetError(RuntimeError):
    """A requested run would exceed a configured memory or sample budget."""
