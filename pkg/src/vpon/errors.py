"""Exception hierarchy shared by the codec, schedulers and simulator."""


class VponError(Exception):
    pass


class WireError(VponError):
    """Base class for frame encoding/decoding failures."""


class InvariantViolation(WireError):
    pass


class TruncatedFrame(WireError):
    pass


class BadEthertype(WireError):
    pass


class WrongKind(WireError):
    pass


class MalformedBwmap(WireError):
    pass


class IoFailure(VponError, OSError):
    pass


class UnknownAllocId(VponError):
    pass


class WrongClass(VponError):
    pass


class MalformedInput(VponError):
    pass


class InvalidSample(VponError):
    pass


class ConfigError(VponError):
    """Scenario or config file rejected. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
