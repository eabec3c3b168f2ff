"""Exception hierarchy shared by all modules."""


class MdpsimError(Exception):
    """Base class for every error raised by the package."""


class InvalidGenerator(MdpsimError, ValueError):
    pass


class NotErgodic(MdpsimError, ValueError):
    pass


class InvalidEnvironment(MdpsimError, ValueError):
    pass


class SolveFailed(MdpsimError, ArithmeticError):
    pass


class InvalidWeightRequest(MdpsimError, ValueError):
    pass


class InvalidQuery(MdpsimError, ValueError):
    pass


class InvalidPath(MdpsimError, ValueError):
    pass


class ConfigError(MdpsimError, ValueError):
    """Malformed or inconsistent experiment configuration."""
