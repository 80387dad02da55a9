"""Exception hierarchy shared by the library and the command-line front end."""


class SuperradianceError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when it escapes."""

    exit_code = 1


class ValidationError(SuperradianceError, ValueError):
    exit_code = 1


class NumericalFailure(SuperradianceError, RuntimeError):
    exit_code = 2


class CheckpointError(SuperradianceError, OSError):
    exit_code = 3
