"""Exception hierarchy shared across the package."""


class AaseError(Exception):
    """Base class for every error raised by this package."""


class ModelValidationError(AaseError):
    def __init__(self, report, source=None):
        self.report = report
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}invalid model:\n{report}")


class SchemaError(AaseError):
    """A document does not match its schema; ``path`` locates the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnknownAgentError(AaseError, KeyError):
    def __init__(self, agent_id):
        self.agent_id = agent_id
        super().__init__(f"unknown agent id {agent_id}")

    __str__ = Exception.__str__


class TraceMismatchError(AaseError):
    def __init__(self, channel: str, message: str):
        self.channel = channel
        super().__init__(f"trace channel {channel}: {message}")


class ZeroSupportError(AaseError):
    """Evidence has zero probability under the model."""

    def __init__(self, step: int, variable: str):
        self.step = step
        self.variable = variable
        super().__init__(f"evidence has zero probability: support vanished at step {step} ({variable})")


class EnumerationCapError(AaseError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} joint assignments exceed the enumeration cap of {cap}")


class ConfigError(AaseError, ValueError):
    """A configuration value is out of range or unknown."""
