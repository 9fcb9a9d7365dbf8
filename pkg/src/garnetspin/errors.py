"""Exception types shared across the package."""


class InputError(ValueError):
    """A function argument violates its documented precondition."""


class ConfigError(ValueError):
    """A configuration file or sequence definition is invalid.

    ``lineno`` is set when the problem can be traced to a line of a
    configuration source.
    """

    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        if lineno is not None:
            where = f"{source}:" if source else "line "
            message = f"{where}{lineno}: {message}"
        super().__init__(message)
