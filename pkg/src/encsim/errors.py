"""Exception types raised by encsim.

Everything derives from :class:`EncsimError`, which is a ``ValueError`` so
callers that only care about "bad input" can catch the builtin.
"""


class EncsimError(ValueError):
    """Base class for all validation-style failures."""


class MalformedRow(EncsimError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InvalidInterval(EncsimError):
    pass


class SelfEncounter(EncsimError):
    pass


class UnknownNode(EncsimError):
    pass


class SeriesTooShort(EncsimError):
    pass


class InvalidComponent(EncsimError):
    pass


class UnknownPeer(EncsimError):
    pass


class SpeedLimit(EncsimError):
    pass


class EmptyProfile(EncsimError):
    pass


class NoOverlap(EncsimError):
    pass


class ConfigError(EncsimError):
    """Raised by config validation; ``problems`` holds ``(field, message)`` pairs."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("", problems)]
        self.problems = list(problems)
        lines = [f"{field}: {msg}" if field else msg for field, msg in self.problems]
        super().__init__("; ".join(lines))
