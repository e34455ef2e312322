"""Exception types shared across the package."""


class FairIMError(Exception):
    """Base class for all package errors."""


class ParameterError(FairIMError, ValueError):
    """An argument lies outside its admissible range."""


class ParseError(FairIMError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ModelError(FairIMError, ValueError):
    """The graph weights are incompatible with the diffusion model."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class SizeError(FairIMError, ValueError):
    """Instance too large for a brute-force routine."""


class ConfigError(FairIMError, ValueError):
    """Invalid experiment configuration."""
