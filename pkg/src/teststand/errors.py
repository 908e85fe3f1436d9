"""Exception hierarchy shared by every stage of the test stand."""


class TestStandError(Exception):
    """Base class for all errors raised by the package."""

    __test__ = False  # keep pytest from collecting this as a test class


class ConfigError(TestStandError):
    """Invalid signal map or DUT model.

    ``line``/``column`` are set when the document itself is malformed.
    """

    def __init__(self, message, line=None, column=None, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self._format())

    def _format(self):
        where = ""
        if self.source:
            where = f"{self.source}:"
        if self.line is not None:
            where += f"{self.line}:{self.column or 0}:"
        return f"{where} {self.message}".strip() if where else self.message


class ParseError(TestStandError):
    """Lexical or syntactic error in a test description, with its location."""

    def __init__(self, message, line=0, column=0, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source or '<input>'}:{line}:{column}: {message}")


class ExpandError(TestStandError):
    """Include, macro or loop expansion failed."""

    def __init__(self, message, source=None, line=None, column=None):
        self.message = message
        self.source = source
        self.line = line
        self.column = column
        if source is not None and line is not None:
            text = f"{source}:{line}:{column or 0}: {message}"
        elif source is not None:
            text = f"{source}: {message}"
        else:
            text = message
        super().__init__(text)


class EngineError(TestStandError):
    """A test instance cannot be run against the given signal map / DUT."""


class MutationError(TestStandError):
    """A mutation locator does not resolve to a suitable statement."""


class ValidationError(TestStandError):
    """Validation cannot proceed, e.g. because a baseline test fails."""
