"""Exception hierarchy. Every protocol error derives from CoherenceError."""


class CoherenceError(Exception):
    pass


class IllegalTransition(CoherenceError):
    def __init__(self, state, event, is_self):
        self.state = state
        self.event = event
        self.is_self = is_self
        who = "self" if is_self else "peer"
        super().__init__(f"{event.value} ({who}) is not legal in state {state.value}")


class MismatchedAgentSets(CoherenceError):
    pass


class UnknownArtifact(CoherenceError):
    pass


class WriterHoldsModified(CoherenceError):
    """Raised only when the authority is configured to refuse reads during a write."""


class NotShared(CoherenceError):
    pass


class UpgradeDenied(CoherenceError):
    pass


class NotOwner(CoherenceError):
    pass


class LeaseExpired(CoherenceError):
    pass


class StalenessViolation(CoherenceError):
    pass


class MalformedMessage(CoherenceError):
    pass


class InvalidConfig(CoherenceError):
    pass


class ParseError(CoherenceError):
    """Scenario file problem. The message starts with path:line when known."""

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = ":".join(str(x) for x in (path, line) if x is not None)
        prefix = f"{where}: " if where else ""
        tag = f"field {field!r}: " if field else ""
        super().__init__(f"{prefix}{tag}{message}")


class BoundsTooLarge(CoherenceError):
    pass


class InvariantViolation(CoherenceError):
    """A directory invariant (single writer, monotone version) was broken."""
