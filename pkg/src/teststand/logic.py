"""Binary logic levels and edges."""

import enum


class LogicLevel(enum.IntEnum):
    LOW = 0
    HIGH = 1

    @classmethod
    def from_literal(cls, text):
        """Map the language literals ``OK``/``NOK`` (any case) to a level."""
        t = text.upper()
        if t == "OK":
            return cls.HIGH
        if t == "NOK":
            return cls.LOW
        raise ValueError(f"not a level literal: {text!r}")

    @property
    def literal(self):
        return "OK" if self is LogicLevel.HIGH else "NOK"

    def __invert__(self):
        return LogicLevel(1 - self.value)


class Edge(enum.Enum):
    RISING = "rising"
    FALLING = "falling"

    @property
    def short(self):
        return "rise" if self is Edge.RISING else "fall"

    @property
    def vhdl(self):
        return f"{self.value}_edge"

    def __invert__(self):
        return Edge.FALLING if self is Edge.RISING else Edge.RISING

    def matches(self, before, after):
        if self is Edge.RISING:
            return before == 0 and after == 1
        return before == 1 and after == 0


def edge_between(before, after):
    """Edge produced by a transition, or None if the level did not change."""
    if before == after:
        return None
    return Edge.RISING if after else Edge.FALLING
