"""Named failures raised across the lab.

Data and input problems are ValueErrors; search failures are RuntimeErrors.
Recoverable anomalies are warnings that callers log and continue past.
"""


class OutOfBounds(ValueError):
    """A position lies outside the codec's configured room extents."""


class MalformedPacket(ValueError):
    """A datagram is truncated, has a bad magic/version, or an unknown field."""


class UnmappableCharacter(ValueError):
    """A prompt character has no key on the keyboard layout."""


class AmbiguousField(ValueError):
    """More than one packet field tracks a swept input dimension."""


class NoCandidate(ValueError):
    """No packet field tracks a swept input dimension."""


class DegeneratePoses(ValueError):
    """Keyboard measurements do not span enough distinct player poses."""


class EmptyTrace(ValueError):
    """A trace holds no records."""


class MissingUserId(ValueError):
    """A packet lacks the user identifier field."""


class NoKeyboardPose(ValueError):
    """None of a user's clicks has a keyboard-open event before it."""


class LengthMismatch(ValueError):
    """Predictions and ground-truth labels cannot be aligned."""


class ConfigError(ValueError):
    """A config file failed validation; carries one diagnostic per bad key."""

    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


class NoConvergence(RuntimeError):
    """A spatial search exhausted its iteration budget or lost its bracket."""


class UnknownCustomType(UserWarning):
    """A custom object's type code is not in the registry; it stays opaque."""


class EmptyClass(UserWarning):
    """A label has no samples in the training split."""
